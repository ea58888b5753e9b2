// Acceptance checks: one PASS/FAIL line per criterion with the measured
// value, the threshold and the elapsed time. Exit status is the number of
// failed criteria.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <unistd.h>

#include "actpath/pipeline.hpp"
#include "oracles.hpp"

using namespace actpath;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string measured;
    std::string threshold;
};

int failures = 0;

void criterion(const std::string& name, const std::function<Outcome()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = fn();
    } catch (const std::exception& e) {
        o = {false, std::string("error: ") + e.what(), o.threshold};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failures;
    std::printf("%s %s | measured: %s | threshold: %s | elapsed: %.1fs\n", o.pass ? "PASS" : "FAIL", name.c_str(),
                o.measured.c_str(), o.threshold.c_str(), secs);
    std::fflush(stdout);
}

std::string fmt(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
    return buf;
}

const fs::path source_dir = ACTPATH_SOURCE_DIR;
const fs::path scratch = fs::temp_directory_path() / ("actpath-acceptance-" + std::to_string(::getpid()));

RunConfig shipped_config(const std::string& name, const fs::path& out) {
    Json j = read_json_file(source_dir / "configs" / (name + ".json"));
    j["output_dir"] = out.string();
    return parse_run_config(j, source_dir / "configs");
}

struct SyntheticRun {
    RunConfig cfg;
    FitSummary fit;
    PlanBatch plan;
};

SyntheticRun run_synthetic(const fs::path& out) {
    SyntheticRun r{shipped_config("synthetic", out), {}, {}};
    r.fit = cmd_fit(r.cfg);
    r.plan = cmd_plan(r.cfg);
    cmd_report(r.cfg);
    return r;
}

const SyntheticRun& synthetic_run() {
    static const SyntheticRun r = run_synthetic(scratch / "synthetic-a");
    return r;
}

std::map<std::string, std::string> tree_contents(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file() && e.path().filename() != "ledger.json")
            out[fs::relative(e.path(), root).string()] = read_text_file(e.path());
    return out;
}

Outcome oracle_equivalence() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(20240101);
    std::uniform_int_distribution<std::size_t> rank(1, 4), iters(1, 3000);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        auto t = testing_support::random_table_grid(rng, rank(rng), 8);
        if (trial % 2) t.grid.direction = Direction::maximize;
        const std::size_t L = trial % 4 == 0 ? 1000000 : iters(rng);
        PlanOptions opt;
        opt.iterations = L;
        const PlanResult r = path_search(t.grid, t, {}, opt, static_cast<std::uint64_t>(trial));
        const auto a = testing_support::oracle_search(t, L);
        worst = std::max(worst, testing_support::oracle_discrepancy(t, r, a));
        if (r.settled != a.settled.size()) worst = kInf;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {worst <= 1e-9 && secs < 60.0, "max |search - oracle| = " + fmt(worst) + " over 100 grids in " + fmt(secs, 3) + "s",
            "<= 1e-9, < 60s"};
}

Outcome synthetic_scores() {
    const auto& r = synthetic_run();
    const double mn = r.plan.summary.min, med = r.plan.summary.median;
    return {mn >= -1e-9 && med > 0.0,
            "n=" + std::to_string(r.plan.scores.size()) + " min=" + fmt(mn) + " median=" + fmt(med) +
                " (cell_sigma=" + fmt(r.cfg.planning.cell_sigma) + ", L=" + std::to_string(r.cfg.planning.iterations) + ")",
            "min >= -1e-9, median > 0"};
}

Outcome wbic_selects_two() {
    int hits = 0;
    std::string chosen;
    for (std::uint64_t s = 0; s < 5; ++s) {
        Json j = read_json_file(source_dir / "configs/synthetic.json");
        j["output_dir"] = (scratch / ("wbic-" + std::to_string(s))).string();
        j["seed"] = 1000 + s;
        j["surrogate"]["k_range"] = {1, 2, 3, 4};
        const FitSummary f = cmd_fit(parse_run_config(j, source_dir / "configs"));
        hits += f.chosen_k == 2;
        chosen += (chosen.empty() ? "" : ",") + std::to_string(f.chosen_k);
        std::string table;
        for (const auto& e : f.wbic) table += " K" + std::to_string(e.k) + "=" + fmt(e.wbic, 6);
        std::printf("  seed %llu:%s\n", static_cast<unsigned long long>(1000 + s), table.c_str());
    }
    return {hits >= 3, "argmin K per seed = [" + chosen + "], K=2 in " + std::to_string(hits) + "/5", ">= 3/5 seeds choose K=2"};
}

Outcome synthetic_r2() {
    const auto& m = synthetic_run().fit.metrics;
    return {m.r2_defined && m.r2 >= 0.85, "R2=" + fmt(m.r2) + " RMSE=" + fmt(m.rmse), ">= 0.85"};
}

Outcome diabetes() {
    const auto t0 = std::chrono::steady_clock::now();
    const RunConfig cfg = shipped_config("diabetes", scratch / "diabetes");
    const FitSummary f = cmd_fit(cfg);
    const PlanBatch p = cmd_plan(cfg);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool r2_ok = f.metrics.r2 >= 0.10 && f.metrics.r2 <= 0.45;
    const bool k_ok = f.chosen_k == 2;
    const bool med_ok = p.summary.median > 0.0;
    const bool pos_ok = p.summary.positive_fraction > 0.8;
    const bool time_ok = secs < 3600.0;
    auto mark = [](bool ok) { return ok ? "ok" : "MISS"; };
    return {r2_ok && k_ok && med_ok && pos_ok && time_ok,
            std::string("R2=") + fmt(f.metrics.r2) + " [" + mark(r2_ok) + "], K=" + std::to_string(f.chosen_k) + " [" + mark(k_ok) +
                "], median=" + fmt(p.summary.median) + " [" + mark(med_ok) + "], positive=" + fmt(p.summary.positive_fraction) + " of " +
                std::to_string(p.scores.size()) + " [" + mark(pos_ok) + "], wall=" + fmt(secs, 3) + "s [" + mark(time_ok) + "]",
            "R2 in [0.10, 0.45], K=2, median > 0, positive > 0.8, < 3600s"};
}

Outcome surrogate_suite() {
    std::string measured;
    bool ok = true;
    std::mt19937_64 rng(31);
    std::normal_distribution<double> z(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.5, 2.0);

    // Normalization: importance sampling over (x1, x2, y) from a broad Gaussian.
    SurrogateSpec spec;
    spec.k = 2;
    spec.d_cont = 2;
    spec.sigma = 0.8;
    ParamSet p;
    p.pi = {0.35, 0.65};
    for (int k = 0; k < 2; ++k) p.comps.push_back({{2.0 * z(rng), 2.0 * z(rng)}, {u(rng), u(rng)}, {}, z(rng), {0.5 * z(rng), 0.5 * z(rng)}, {}});
    const double qs = 6.0;
    std::normal_distribution<double> q(0.0, qs);
    double mass = 0.0;
    const int n = 1000000;
    for (int i = 0; i < n; ++i) {
        const std::vector<double> x{q(rng), q(rng)};
        const double y = q(rng);
        const double logq = -1.5 * std::log(2.0 * std::numbers::pi * qs * qs) - 0.5 * (x[0] * x[0] + x[1] * x[1] + y * y) / (qs * qs);
        mass += std::exp(log_joint_density(p, spec.sigma, x, {}, y) - logq) / n;
    }
    const bool norm_ok = std::abs(mass - 1.0) <= 0.05;
    ok &= norm_ok;
    measured += "mass=" + fmt(mass) + (norm_ok ? "" : " [MISS]");

    // Label permutation.
    const ParamSet swapped = p.permuted(std::vector<std::size_t>{1, 0});
    double perm = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const std::vector<double> x{2.0 * z(rng), 2.0 * z(rng)};
        const double y = 2.0 * z(rng);
        perm = std::max(perm, std::abs(log_joint_density(p, spec.sigma, x, {}, y) - log_joint_density(swapped, spec.sigma, x, {}, y)));
    }
    const bool perm_ok = perm <= 1e-12;
    ok &= perm_ok;
    measured += ", perm=" + fmt(perm) + (perm_ok ? "" : " [MISS]");

    // Prior only: likelihood tempered to ~0, K=3, E[pi_k] = 1/3.
    SurrogateData flat;
    for (int i = 0; i < 60; ++i) {
        const std::vector<double> x{z(rng)};
        flat.push(x, std::span<const int>{}, z(rng));
    }
    SurrogateSpec ps;
    ps.k = 3;
    ps.d_cont = 1;
    const auto prior = fit_mcmc(flat, ps, 1e-9, McmcConfig{6000, 1000, 17, 0.3});
    double worst_z = 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
        std::vector<double> chain;
        for (const auto& d : prior.draws) chain.push_back(d.pi[k]);
        const double m = mean_of(chain);
        double v = 0.0;
        for (double c : chain) v += (c - m) * (c - m) / static_cast<double>(chain.size());
        worst_z = std::max(worst_z, std::abs(m - 1.0 / 3.0) / std::sqrt(v / effective_sample_size(chain)));
    }
    const bool prior_ok = worst_z <= 3.0;
    ok &= prior_ok;
    measured += ", prior |z|max=" + fmt(worst_z) + (prior_ok ? "" : " [MISS]");

    // K=1 on 500 standard-normal points.
    SurrogateData data;
    double xbar = 0.0;
    for (int i = 0; i < 500; ++i) {
        const std::vector<double> x{z(rng)};
        xbar += x[0] / 500.0;
        data.push(x, std::span<const int>{}, x[0] + 0.5 * z(rng));
    }
    SurrogateSpec one;
    one.k = 1;
    one.d_cont = 1;
    one.sigma = 0.5;
    const auto post = fit_mcmc(data, one, 1.0, McmcConfig{});
    double mbar = 0.0;
    for (const auto& d : post.draws) mbar += d.comps[0].m[0] / static_cast<double>(post.draws.size());
    const bool mean_ok = std::abs(mbar - xbar) <= 0.134;
    ok &= mean_ok;
    measured += ", |E[m]-xbar|=" + fmt(std::abs(mbar - xbar)) + (mean_ok ? "" : " [MISS]");
    return {ok, measured, "mass 1+-0.05 (1e6 draws), perm <= 1e-12, prior within 3 MC SE, |E[m]-xbar| <= 0.134"};
}

Outcome reproducible() {
    const auto& a = synthetic_run();
    const SyntheticRun b = run_synthetic(scratch / "synthetic-b");
    const auto ta = tree_contents(a.cfg.out()), tb = tree_contents(b.cfg.out());
    std::size_t differing = 0;
    for (const auto& [k, v] : ta) {
        auto it = tb.find(k);
        if (it == tb.end() || it->second != v) ++differing;
    }
    differing += tb.size() > ta.size() ? tb.size() - ta.size() : 0;
    return {differing == 0 && !ta.empty(), std::to_string(ta.size()) + " files compared, " + std::to_string(differing) + " differ",
            "0 differing files (ledger.json excluded)"};
}

}  // namespace

int main() {
    fs::remove_all(scratch);
    fs::create_directories(scratch);
    criterion("[1] search equals exhaustive oracle", oracle_equivalence);
    criterion("[2] synthetic scores nonnegative, median positive", synthetic_scores);
    criterion("[3] WBIC selects K=2 on synthetic data", wbic_selects_two);
    criterion("[4] synthetic regressor R2", synthetic_r2);
    criterion("[5] diabetes end to end", diabetes);
    criterion("[6] surrogate density and sampler checks", surrogate_suite);
    criterion("[7] artifacts byte-identical across runs", reproducible);
    std::printf("%d of 7 criteria failed\n", failures);
    fs::remove_all(scratch);
    return failures;
}
