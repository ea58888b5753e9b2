#pragma once

// Run configuration, artifact persistence and the synth / fit / plan / report
// stages. The CLI and the HTTP service both go through plan_instance() so a
// given (bundle, request, seed) yields the same payload from either.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "actpath/common.hpp"
#include "actpath/data.hpp"
#include "actpath/planner.hpp"
#include "actpath/regressor.hpp"
#include "actpath/surrogate.hpp"

namespace actpath {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// file helpers

inline std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline Json read_json_file(const fs::path& path) {
    const std::string text = read_text_file(path);
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ValidationError("'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

inline void write_text_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw RuntimeFailure("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw RuntimeFailure("write failed for '" + path.string() + "'");
}

inline void write_json_file(const fs::path& path, const Json& j) { write_text_file(path, j.dump(2) + "\n"); }

inline void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw ValidationError(where + ": expected a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || it.key() == a;
        if (!ok) throw ValidationError(where + ": unknown key '" + it.key() + "'");
    }
}

template <class T>
T json_get(const Json& j, const char* key, T fallback, const std::string& where) {
    if (!j.contains(key) || j[key].is_null()) return fallback;
    try {
        return j[key].get<T>();
    } catch (const Json::exception&) {
        throw ValidationError(where + "." + key + ": wrong type");
    }
}

inline std::optional<double> json_opt_double(const Json& j, const char* key, const std::string& where) {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    if (!j[key].is_number()) throw ValidationError(where + "." + key + ": expected a number");
    const double v = j[key].get<double>();
    if (!std::isfinite(v)) throw ValidationError(where + "." + key + ": must be finite");
    return v;
}

// ---------------------------------------------------------------------------
// response filter: "response>=150", "response<80", ...

struct ResponseFilter {
    std::string op;
    double value = 0.0;

    bool accepts(double y) const {
        if (op == ">=") return y >= value;
        if (op == ">") return y > value;
        if (op == "<=") return y <= value;
        return y < value;
    }
    std::string text() const { return "response" + op + format_double(value); }
};

inline ResponseFilter parse_response_filter(std::string_view text) {
    const std::string_view head = "response";
    auto fail = [&] {
        return ValidationError("filter '" + std::string(text) + "' must look like response>=V, response>V, response<=V or response<V");
    };
    if (text.substr(0, head.size()) != head) throw fail();
    text.remove_prefix(head.size());
    ResponseFilter f;
    for (const char* op : {">=", "<=", ">", "<"}) {
        const std::string_view o(op);
        if (text.substr(0, o.size()) == o) {
            f.op = std::string(o);
            text.remove_prefix(o.size());
            break;
        }
    }
    if (f.op.empty() || !parse_double(text, f.value) || !std::isfinite(f.value)) throw fail();
    return f;
}

// ---------------------------------------------------------------------------
// planning settings (shared by config files and /v1/plan bodies)

struct FeatureConstraint {
    std::optional<double> lower;  // real units
    std::optional<double> upper;
    Moves moves = Moves::both;
};

struct PlanSettings {
    std::vector<std::string> intervention;  // explicit list; empty -> top_n by importance
    std::size_t top_n = 5;
    std::vector<std::string> exclude;
    double cell_sigma = 0.2;
    std::size_t iterations = 20000;
    Direction direction = Direction::minimize;
    std::map<std::string, FeatureConstraint> feature_constraints;
    std::optional<double> prediction_ceiling, prediction_floor, target;
    std::size_t baseline_count = 10;
    bool weight_floor = false;

    void validate() const {
        if (!(cell_sigma > 0.0) || !std::isfinite(cell_sigma)) throw ValidationError("planning.cell_sigma must be > 0");
        if (intervention.empty() && top_n == 0) throw ValidationError("planning: top_n must be >= 1");
        if (baseline_count == 0) throw ValidationError("planning.baseline_count must be >= 1");
        if (prediction_ceiling && prediction_floor && *prediction_ceiling < *prediction_floor)
            throw ValidationError("planning: prediction_ceiling below prediction_floor");
        for (const auto& [name, c] : feature_constraints)
            if (c.lower && c.upper && *c.upper < *c.lower)
                throw ValidationError("planning.constraints." + name + ": upper below lower");
    }

    Json constraints_json() const {
        Json feats = Json::object();
        for (const auto& [name, c] : feature_constraints) {
            Json fc = {{"moves", to_string(c.moves)}};
            fc["lower"] = c.lower ? Json(*c.lower) : Json(nullptr);
            fc["upper"] = c.upper ? Json(*c.upper) : Json(nullptr);
            feats[name] = fc;
        }
        Json j = {{"features", feats}};
        j["prediction_ceiling"] = prediction_ceiling ? Json(*prediction_ceiling) : Json(nullptr);
        j["prediction_floor"] = prediction_floor ? Json(*prediction_floor) : Json(nullptr);
        j["target"] = target ? Json(*target) : Json(nullptr);
        return j;
    }

    Json to_json() const {
        Json iv = {{"features", intervention}, {"top_n", top_n}, {"exclude", exclude}};
        return {{"intervention", iv},          {"cell_sigma", cell_sigma},           {"L", iterations},
                {"direction", to_string(direction)}, {"constraints", constraints_json()}, {"baseline_count", baseline_count},
                {"weight_floor", weight_floor}};
    }
};

inline void apply_constraints_json(PlanSettings& s, const Json& j, const std::string& where) {
    check_keys(j, {"features", "prediction_ceiling", "prediction_floor", "target"}, where);
    if (j.contains("features")) {
        const Json& f = j["features"];
        if (!f.is_object()) throw ValidationError(where + ".features: expected an object keyed by feature name");
        s.feature_constraints.clear();
        for (auto it = f.begin(); it != f.end(); ++it) {
            const std::string w = where + ".features." + it.key();
            check_keys(it.value(), {"lower", "upper", "moves"}, w);
            FeatureConstraint c;
            c.lower = json_opt_double(it.value(), "lower", w);
            c.upper = json_opt_double(it.value(), "upper", w);
            c.moves = moves_from_string(json_get<std::string>(it.value(), "moves", "both", w));
            s.feature_constraints[it.key()] = c;
        }
    }
    if (j.contains("prediction_ceiling")) s.prediction_ceiling = json_opt_double(j, "prediction_ceiling", where);
    if (j.contains("prediction_floor")) s.prediction_floor = json_opt_double(j, "prediction_floor", where);
    if (j.contains("target")) s.target = json_opt_double(j, "target", where);
}

inline void apply_intervention_json(PlanSettings& s, const Json& j, const std::string& where) {
    if (j.is_array()) {
        s.intervention = j.get<std::vector<std::string>>();
        if (s.intervention.empty()) throw ValidationError(where + ": empty intervention list");
        return;
    }
    check_keys(j, {"features", "top_n", "exclude"}, where);
    s.intervention = json_get<std::vector<std::string>>(j, "features", {}, where);
    s.top_n = json_get<std::size_t>(j, "top_n", s.top_n, where);
    s.exclude = json_get<std::vector<std::string>>(j, "exclude", s.exclude, where);
}

// ---------------------------------------------------------------------------
// run configuration

struct ServiceSettings {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::size_t l_ceiling = 50000;
    std::string cors_origin = "*";
};

struct RunConfig {
    fs::path base_dir;  // relative paths resolve against this
    std::uint64_t seed = 1;
    fs::path output_dir = "run";

    // dataset
    std::string source = "synthetic";  // synthetic | csv
    SyntheticSpec synthetic;
    std::string dataset_path;  // as written in the config
    std::string schema_path;
    Json schema_inline;
    std::string missing_sentinel = "NA";

    double train_fraction = 0.8;

    std::vector<GbtHyperParams> grid = default_gbt_grid();
    int folds = 5;
    std::size_t rfe_keep = 0;  // 0 = no RFE

    std::vector<int> k_range{1, 2, 3, 4, 5, 6, 7, 8};
    McmcConfig mcmc;
    DensityMode density_mode = DensityMode::sample_average;
    std::size_t density_draws = 64;

    PlanSettings planning;
    std::optional<ResponseFilter> instance_filter;
    std::vector<std::string> instance_ids;
    std::size_t histogram_bins = 20;

    ServiceSettings service;

    fs::path resolve(const fs::path& p) const { return p.is_absolute() ? p : base_dir / p; }
    fs::path out() const { return resolve(output_dir); }

    void validate() const {
        if (source != "synthetic" && source != "csv") throw ValidationError("dataset.source must be 'synthetic' or 'csv'");
        if (source == "csv") {
            if (dataset_path.empty()) throw ValidationError("dataset.path is required for csv sources");
            if (schema_path.empty() && schema_inline.is_null())
                throw ValidationError("dataset: provide 'schema' or 'schema_path' for csv sources");
        }
        if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ValidationError("split.train_fraction must lie in (0, 1)");
        if (grid.empty()) throw ValidationError("regressor.grid must not be empty");
        for (const auto& hp : grid) hp.validate();
        if (folds < 2) throw ValidationError("regressor.folds must be >= 2");
        if (k_range.empty()) throw ValidationError("surrogate: empty K range");
        for (int k : k_range)
            if (k < 1) throw ValidationError("surrogate: K values must be >= 1");
        mcmc.validate();
        if (density_draws == 0) throw ValidationError("surrogate.density_draws must be >= 1");
        planning.validate();
        if (histogram_bins == 0) throw ValidationError("planning.histogram_bins must be >= 1");
        if (service.port < 0 || service.port > 65535) throw ValidationError("service.port out of range");
        if (service.l_ceiling == 0) throw ValidationError("service.l_ceiling must be >= 1");
        if (planning.iterations > service.l_ceiling)
            throw ValidationError("planning.L exceeds service.l_ceiling (" + std::to_string(service.l_ceiling) + ")");
    }

    Schema load_schema() const {
        if (source == "synthetic") return synthetic_schema();
        return schema_from_json(schema_inline.is_null() ? read_json_file(resolve(schema_path)) : schema_inline);
    }

    // Echo stored inside artifacts. Excludes output_dir so runs written to
    // different directories stay byte-comparable.
    Json echo() const {
        Json ds = {{"source", source}};
        if (source == "synthetic") {
            ds["synthetic"] = synthetic.to_json();
        } else {
            ds["path"] = dataset_path;
            ds["missing_sentinel"] = missing_sentinel;
        }
        Json g = Json::array();
        for (const auto& hp : grid) g.push_back(hp.to_json());
        Json inst = Json::object();
        inst["filter"] = instance_filter ? Json(instance_filter->text()) : Json(nullptr);
        inst["ids"] = instance_ids;
        return {{"seed", seed},
                {"dataset", ds},
                {"split", {{"train_fraction", train_fraction}}},
                {"regressor", {{"grid", g}, {"folds", folds}, {"rfe_keep", rfe_keep}}},
                {"surrogate",
                 {{"k_range", k_range},
                  {"iterations", mcmc.iterations},
                  {"warmup", mcmc.warmup},
                  {"target_accept", mcmc.target_accept},
                  {"density_mode", to_string(density_mode)},
                  {"density_draws", density_draws}}},
                {"planning", planning.to_json()},
                {"instances", inst}};
    }
};

inline RunConfig parse_run_config(const Json& j, const fs::path& base_dir) {
    check_keys(j, {"seed", "output_dir", "dataset", "split", "regressor", "surrogate", "planning", "instances", "service"}, "config");
    RunConfig c;
    c.base_dir = base_dir;
    c.seed = json_get<std::uint64_t>(j, "seed", c.seed, "config");
    c.output_dir = json_get<std::string>(j, "output_dir", c.output_dir.string(), "config");

    if (j.contains("dataset")) {
        const Json& d = j["dataset"];
        check_keys(d, {"source", "synthetic", "path", "schema", "schema_path", "missing_sentinel"}, "dataset");
        c.source = json_get<std::string>(d, "source", c.source, "dataset");
        if (d.contains("synthetic")) c.synthetic = SyntheticSpec::from_json(d["synthetic"]);
        c.dataset_path = json_get<std::string>(d, "path", "", "dataset");
        c.schema_path = json_get<std::string>(d, "schema_path", "", "dataset");
        if (d.contains("schema")) c.schema_inline = d["schema"];
        c.missing_sentinel = json_get<std::string>(d, "missing_sentinel", c.missing_sentinel, "dataset");
    }
    if (j.contains("split")) {
        check_keys(j["split"], {"train_fraction"}, "split");
        c.train_fraction = json_get<double>(j["split"], "train_fraction", c.train_fraction, "split");
    }
    if (j.contains("regressor")) {
        const Json& r = j["regressor"];
        check_keys(r, {"grid", "folds", "rfe_keep"}, "regressor");
        if (r.contains("grid")) {
            if (!r["grid"].is_array()) throw ValidationError("regressor.grid: expected an array");
            c.grid.clear();
            for (const auto& hp : r["grid"]) c.grid.push_back(GbtHyperParams::from_json(hp));
        }
        c.folds = json_get<int>(r, "folds", c.folds, "regressor");
        c.rfe_keep = json_get<std::size_t>(r, "rfe_keep", c.rfe_keep, "regressor");
    }
    if (j.contains("surrogate")) {
        const Json& s = j["surrogate"];
        check_keys(s, {"k_range", "k_min", "k_max", "iterations", "warmup", "target_accept", "density_mode", "density_draws"},
                   "surrogate");
        if (s.contains("k_range")) {
            c.k_range = json_get<std::vector<int>>(s, "k_range", {}, "surrogate");
        } else if (s.contains("k_min") || s.contains("k_max")) {
            const int lo = json_get<int>(s, "k_min", 1, "surrogate");
            const int hi = json_get<int>(s, "k_max", 8, "surrogate");
            if (lo < 1 || hi < lo) throw ValidationError("surrogate: need 1 <= k_min <= k_max");
            c.k_range.clear();
            for (int k = lo; k <= hi; ++k) c.k_range.push_back(k);
        }
        c.mcmc.iterations = json_get<int>(s, "iterations", c.mcmc.iterations, "surrogate");
        c.mcmc.warmup = json_get<int>(s, "warmup", c.mcmc.warmup, "surrogate");
        c.mcmc.target_accept = json_get<double>(s, "target_accept", c.mcmc.target_accept, "surrogate");
        c.density_mode = density_mode_from_string(json_get<std::string>(s, "density_mode", to_string(c.density_mode), "surrogate"));
        c.density_draws = json_get<std::size_t>(s, "density_draws", c.density_draws, "surrogate");
    }
    if (j.contains("planning")) {
        const Json& p = j["planning"];
        check_keys(p, {"intervention", "cell_sigma", "L", "direction", "constraints", "baseline_count", "weight_floor", "histogram_bins"},
                   "planning");
        if (p.contains("intervention")) apply_intervention_json(c.planning, p["intervention"], "planning.intervention");
        c.planning.cell_sigma = json_get<double>(p, "cell_sigma", c.planning.cell_sigma, "planning");
        c.planning.iterations = json_get<std::size_t>(p, "L", c.planning.iterations, "planning");
        c.planning.direction = direction_from_string(json_get<std::string>(p, "direction", to_string(c.planning.direction), "planning"));
        if (p.contains("constraints")) apply_constraints_json(c.planning, p["constraints"], "planning.constraints");
        c.planning.baseline_count = json_get<std::size_t>(p, "baseline_count", c.planning.baseline_count, "planning");
        c.planning.weight_floor = json_get<bool>(p, "weight_floor", c.planning.weight_floor, "planning");
        c.histogram_bins = json_get<std::size_t>(p, "histogram_bins", c.histogram_bins, "planning");
    }
    if (j.contains("instances")) {
        const Json& i = j["instances"];
        check_keys(i, {"filter", "ids"}, "instances");
        if (i.contains("filter") && !i["filter"].is_null())
            c.instance_filter = parse_response_filter(json_get<std::string>(i, "filter", "", "instances"));
        c.instance_ids = json_get<std::vector<std::string>>(i, "ids", {}, "instances");
    }
    if (j.contains("service")) {
        const Json& s = j["service"];
        check_keys(s, {"host", "port", "l_ceiling", "cors_origin"}, "service");
        c.service.host = json_get<std::string>(s, "host", c.service.host, "service");
        c.service.port = json_get<int>(s, "port", c.service.port, "service");
        c.service.l_ceiling = json_get<std::size_t>(s, "l_ceiling", c.service.l_ceiling, "service");
        c.service.cors_origin = json_get<std::string>(s, "cors_origin", c.service.cors_origin, "service");
    }
    c.validate();
    return c;
}

inline RunConfig load_run_config(const fs::path& path) {
    return parse_run_config(read_json_file(path), fs::absolute(path).parent_path());
}

// ---------------------------------------------------------------------------
// ledger: append-only record of stage runs; the only place with timestamps

inline std::string utc_timestamp() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream ss;
    ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return ss.str();
}

inline void append_ledger(const fs::path& out_dir, Json entry) {
    const fs::path path = out_dir / "ledger.json";
    Json ledger = {{"format", "actpath.ledger/1"}, {"entries", Json::array()}};
    if (fs::exists(path)) ledger = read_json_file(path);
    if (!ledger.contains("entries") || !ledger["entries"].is_array()) throw ValidationError("ledger.json: malformed");
    for (const auto& a : entry.value("artifacts", Json::array()))
        if (!fs::exists(out_dir / a.get<std::string>()))
            throw RuntimeFailure("ledger: artifact '" + a.get<std::string>() + "' does not exist");
    ledger["entries"].push_back(std::move(entry));
    write_json_file(path, ledger);
}

class StageTimer {
public:
    StageTimer() : start_(std::chrono::steady_clock::now()), started_at_(utc_timestamp()) {}
    double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }
    const std::string& started_at() const { return started_at_; }

private:
    std::chrono::steady_clock::time_point start_;
    std::string started_at_;
};

// Runs one stage; failures are rethrown with the stage name prefixed.
template <class Fn>
auto run_stage(const std::string& name, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const ValidationError& e) {
        throw ValidationError(name + ": " + e.what());
    } catch (const SearchCancelled&) {
        throw;
    } catch (const std::exception& e) {
        throw RuntimeFailure(name + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// synth

inline Dataset load_source_dataset(const RunConfig& cfg) {
    if (cfg.source == "synthetic") return gen_synthetic(cfg.synthetic, derive_seed(cfg.seed, "synthetic"));
    CsvOptions opt;
    opt.missing_sentinel = cfg.missing_sentinel;
    Dataset ds = load_csv(cfg.resolve(cfg.dataset_path), cfg.load_schema(), opt);
    ds.provenance = cfg.dataset_path;
    return ds;
}

inline Json cmd_synth(const RunConfig& cfg) {
    StageTimer timer;
    if (cfg.source != "synthetic") throw ValidationError("synth: dataset.source must be 'synthetic'");
    const Dataset ds = run_stage("synth", [&] { return load_source_dataset(cfg); });
    const fs::path out = cfg.out();
    fs::create_directories(out);
    write_csv(out / "dataset.csv", ds);
    write_json_file(out / "dataset.schema.json", schema_to_json(ds.schema));
    Json summary = {{"rows", ds.rows()}, {"path", "dataset.csv"}};
    append_ledger(out, {{"stage", "synth"},
                        {"started_at", timer.started_at()},
                        {"wall_seconds", timer.seconds()},
                        {"seeds", {{"master", cfg.seed}, {"synthetic", derive_seed(cfg.seed, "synthetic")}}},
                        {"artifacts", {"dataset.csv", "dataset.schema.json"}},
                        {"metrics", summary}});
    return summary;
}

// ---------------------------------------------------------------------------
// model bundle

struct FeatureStats {
    double min = 0.0, max = 0.0, mean = 0.0, std = 1.0;  // real units, imputed training split
};

struct ModelBundle {
    RunConfig config;
    Schema schema;                      // dataset schema (train/test CSVs add an identifier column)
    std::vector<std::string> features;  // model feature order
    std::vector<bool> continuous;       // per model feature
    Standardizer standardizer;
    Imputer imputer;
    GbtRegressor regressor;
    ImportanceReport importance;
    std::map<std::string, FeatureStats> stats;
    Metrics test_metrics;
    SurrogateModel surrogate;
    std::vector<std::size_t> cont_pos, disc_pos;
    Dataset train, test;  // real units, not imputed

    std::size_t position(const std::string& name) const {
        for (std::size_t i = 0; i < features.size(); ++i)
            if (features[i] == name) return i;
        throw ValidationError("unknown feature '" + name + "'");
    }

    // Real-space feature row (NaN allowed) -> imputed model-space row.
    std::vector<double> to_model(std::span<const double> real) const {
        if (real.size() != features.size())
            throw ValidationError("expected " + std::to_string(features.size()) + " features, got " + std::to_string(real.size()));
        std::vector<double> x(real.begin(), real.end());
        for (std::size_t i = 0; i < features.size(); ++i) {
            if (is_missing(x[i])) {
                for (std::size_t p = 0; p < imputer.names.size(); ++p)
                    if (imputer.names[p] == features[i]) x[i] = imputer.fill[p];
            }
            if (continuous[i])
                if (auto p = standardizer.position(features[i])) x[i] = standardizer.apply_value(*p, x[i]);
        }
        return x;
    }

    double to_real(const std::string& name, double z) const {
        auto p = standardizer.position(name);
        return p ? standardizer.invert_value(*p, z) : z;
    }
    double to_model_value(const std::string& name, double v) const {
        auto p = standardizer.position(name);
        return p ? standardizer.apply_value(*p, v) : v;
    }

    double predict_real(std::span<const double> real) const { return regressor.predict(to_model(real)); }

    double log_density_real(std::span<const double> real, std::optional<double> y) const {
        const auto x = to_model(real);
        const double yy = y ? *y : regressor.predict(x);
        std::vector<double> xc;
        std::vector<int> xd;
        for (auto p : cont_pos) xc.push_back(x[p]);
        for (auto p : disc_pos) xd.push_back(static_cast<int>(x[p]));
        return surrogate.node_log_density(xc, xd, yy);
    }
};

inline void finish_bundle(ModelBundle& b) {
    b.continuous.clear();
    b.cont_pos.clear();
    b.disc_pos.clear();
    for (std::size_t i = 0; i < b.features.size(); ++i) {
        const bool cont = b.schema[b.schema.index_of(b.features[i])].kind == ColumnKind::continuous;
        b.continuous.push_back(cont);
        (cont ? b.cont_pos : b.disc_pos).push_back(i);
    }
}

inline Json model_artifact(const ModelBundle& b, const CvResult& cv, const std::optional<RfeResult>& rfe_res) {
    Json stats = Json::object();
    for (const auto& [name, s] : b.stats) stats[name] = {{"min", s.min}, {"max", s.max}, {"mean", s.mean}, {"std", s.std}};
    Json cv_table = Json::array();
    for (std::size_t g = 0; g < b.config.grid.size(); ++g)
        cv_table.push_back({{"hyperparams", b.config.grid[g].to_json()}, {"mean_rmse", cv.mean_rmse[g]}});
    Json rfe_json = nullptr;
    if (rfe_res) {
        rfe_json = {{"kept", rfe_res->kept}, {"steps", Json::array()}};
        for (const auto& s : rfe_res->steps)
            rfe_json["steps"].push_back({{"features", s.features}, {"mean_importance", s.mean_importance}, {"dropped", s.dropped}});
    }
    return {{"format", "actpath.model/1"},
            {"config", b.config.echo()},
            {"schema", schema_to_json(b.schema)},
            {"features", b.features},
            {"standardizer", b.standardizer.to_json()},
            {"imputer", b.imputer.to_json()},
            {"train_stats", stats},
            {"gbt", b.regressor.model().to_json()},
            {"importance", importance_to_json(b.importance)},
            {"metrics", b.test_metrics.to_json()},
            {"cv", {{"folds", b.config.folds}, {"table", cv_table}, {"best", cv.best.to_json()}}},
            {"rfe", rfe_json}};
}

inline Dataset load_split_csv(const fs::path& path, const Schema& schema, const RunConfig& cfg) {
    CsvOptions opt;
    opt.missing_sentinel = cfg.missing_sentinel;
    std::vector<ColumnSpec> cols{{"row_id", ColumnKind::continuous, ColumnRole::identifier, {}}};
    if (schema.identifier_index()) cols.clear();
    cols.insert(cols.end(), schema.columns().begin(), schema.columns().end());
    return load_csv(path, Schema(std::move(cols)), opt);
}

inline ModelBundle load_bundle(const RunConfig& cfg) {
    const fs::path out = cfg.out();
    for (const char* f : {"model.json", "surrogate.json", "train.csv", "test.csv"})
        if (!fs::exists(out / f)) throw ValidationError("missing artifact '" + (out / f).string() + "' (run 'fit' first)");
    ModelBundle b;
    b.config = cfg;
    const Json m = read_json_file(out / "model.json");
    if (m.value("format", std::string{}) != "actpath.model/1") throw ValidationError("model.json: unknown format");
    b.schema = schema_from_json(m.at("schema"));
    b.features = m.at("features").get<std::vector<std::string>>();
    b.standardizer = Standardizer::from_json(m.at("standardizer"));
    b.imputer = Imputer::from_json(m.at("imputer"));
    for (auto it = m.at("train_stats").begin(); it != m.at("train_stats").end(); ++it)
        b.stats[it.key()] = {it.value().at("min").get<double>(), it.value().at("max").get<double>(),
                             it.value().at("mean").get<double>(), it.value().at("std").get<double>()};
    b.regressor = GbtRegressor(FeatureEncoder(b.schema, b.features), GbtModel::from_json(m.at("gbt")));
    for (const auto& e : m.at("importance")) b.importance.push_back({e.at("feature").get<std::string>(), e.at("gain").get<double>()});
    b.test_metrics.rmse = m.at("metrics").at("rmse").get<double>();
    if (m.at("metrics").at("r2").is_null()) {
        b.test_metrics.r2_defined = false;
        b.test_metrics.r2 = std::numeric_limits<double>::quiet_NaN();
    } else {
        b.test_metrics.r2 = m.at("metrics").at("r2").get<double>();
    }
    b.surrogate = SurrogateModel::from_json(read_json_file(out / "surrogate.json"));
    finish_bundle(b);

    std::vector<std::string> cont_names, disc_names;
    for (auto p : b.cont_pos) cont_names.push_back(b.features[p]);
    for (auto p : b.disc_pos) disc_names.push_back(b.features[p]);
    if (b.surrogate.spec().cont_names != cont_names || b.surrogate.spec().disc_names != disc_names)
        throw ValidationError("surrogate.json does not match the model's feature list");
    for (const auto& n : cont_names)
        if (!b.standardizer.position(n) || !b.stats.count(n)) throw ValidationError("model.json: no standardization for '" + n + "'");

    b.train = load_split_csv(out / "train.csv", b.schema, cfg);
    b.test = load_split_csv(out / "test.csv", b.schema, cfg);
    return b;
}

// ---------------------------------------------------------------------------
// fit

struct FitSummary {
    Metrics metrics;
    int chosen_k = 0;
    std::vector<WbicEntry> wbic;
    std::size_t train_rows = 0, test_rows = 0, surrogate_rows = 0;
};

inline FitSummary cmd_fit(const RunConfig& cfg) {
    StageTimer timer;
    const fs::path out = cfg.out();
    fs::create_directories(out);
    ModelBundle b;
    b.config = cfg;

    const Dataset raw = run_stage("load", [&] { return load_source_dataset(cfg); });
    b.schema = raw.schema;
    const std::uint64_t split_seed = derive_seed(cfg.seed, "split");
    auto parts = run_stage("split", [&] { return split(raw, cfg.train_fraction, split_seed); });
    b.train = parts.train;
    b.test = parts.test;

    b.imputer = run_stage("impute", [&] { return fit_imputer(b.train); });
    const Dataset train_imp = b.imputer.apply(b.train);
    const Dataset test_imp = b.imputer.apply(b.test);
    b.standardizer = run_stage("standardize", [&] { return fit_standardizer(train_imp); });
    const Dataset train_z = b.standardizer.apply(train_imp);
    const Dataset test_z = b.standardizer.apply(test_imp);
    for (std::size_t p = 0; p < b.standardizer.names.size(); ++p) {
        const auto col = train_imp.column(train_imp.schema.index_of(b.standardizer.names[p]));
        b.stats[b.standardizer.names[p]] = {*std::min_element(col.begin(), col.end()), *std::max_element(col.begin(), col.end()),
                                            b.standardizer.mean[p], b.standardizer.std[p]};
    }

    b.features = raw.schema.feature_names();
    std::optional<RfeResult> rfe_res;
    const std::uint64_t rfe_seed = derive_seed(cfg.seed, "rfe");
    if (cfg.rfe_keep > 0) {
        rfe_res = run_stage("rfe", [&] { return rfe(train_z, b.features, cfg.rfe_keep, cfg.folds, rfe_seed, cfg.grid.front()); });
        b.features = rfe_res->kept;
    }
    finish_bundle(b);

    const FeatureEncoder enc(raw.schema, b.features);
    const DesignMatrix dtrain = build_design(train_z, enc);
    const DesignMatrix dtest = build_design(test_z, enc);
    const std::uint64_t cv_seed = derive_seed(cfg.seed, "cv");
    const CvResult cv = run_stage("cv", [&] { return cross_validate(dtrain, cfg.grid, cfg.folds, cv_seed); });
    GbtModel gbt = run_stage("fit_gbt", [&] { return fit_gbt(dtrain, cv.best); });
    b.test_metrics = run_stage("evaluate", [&] { return evaluate(gbt, dtest); });
    b.importance = importance(gbt, enc);
    b.regressor = GbtRegressor(enc, std::move(gbt));

    // Surrogate training data: outlier-filtered training rows paired with
    // the regressor's predictions.
    const Dataset clean = drop_outliers_3sigma(train_z);
    SurrogateData sdata;
    std::vector<double> preds;
    for (std::size_t r = 0; r < clean.rows(); ++r) {
        const auto x = features_by_name(clean, r, b.features);
        const double y = b.regressor.predict(x);
        std::vector<double> xc;
        std::vector<int> xd;
        for (auto p : b.cont_pos) xc.push_back(x[p]);
        for (auto p : b.disc_pos) xd.push_back(static_cast<int>(x[p]));
        sdata.push(xc, xd, y);
        preds.push_back(y);
    }
    if (sdata.n == 0) throw RuntimeFailure("surrogate: no training rows left after outlier filtering");
    SurrogateSpec spec;
    spec.d_cont = b.cont_pos.size();
    for (auto p : b.disc_pos) {
        spec.disc_levels.push_back(raw.schema[raw.schema.index_of(b.features[p])].levels.size());
        spec.disc_names.push_back(b.features[p]);
    }
    for (auto p : b.cont_pos) spec.cont_names.push_back(b.features[p]);
    spec.sigma = b.test_metrics.rmse / 2.0;
    if (!(spec.sigma > 0.0)) throw RuntimeFailure("surrogate: test RMSE is zero, sigma undefined");
    spec.y_mean = mean_of(preds);
    double ss = 0.0;
    for (double p : preds) ss += (p - spec.y_mean) * (p - spec.y_mean);
    spec.y_std = std::sqrt(ss / static_cast<double>(preds.size()));
    if (!(spec.y_std > 0.0)) spec.y_std = 1.0;

    SelectionConfig sel;
    sel.k_range = cfg.k_range;
    sel.mcmc = cfg.mcmc;
    sel.mcmc.seed = derive_seed(cfg.seed, "surrogate");
    sel.density_mode = cfg.density_mode;
    sel.density_draws = cfg.density_draws;
    b.surrogate = run_stage("select_k", [&] { return select_k(sdata, spec, sel); });

    write_csv(out / "train.csv", with_identifier(b.train));
    write_csv(out / "test.csv", with_identifier(b.test));
    write_json_file(out / "model.json", model_artifact(b, cv, rfe_res));
    write_json_file(out / "surrogate.json", b.surrogate.to_json());

    FitSummary s{b.test_metrics, b.surrogate.spec().k, b.surrogate.wbic_table, b.train.rows(), b.test.rows(), sdata.n};
    Json wt = Json::array();
    for (const auto& e : s.wbic) wt.push_back({{"k", e.k}, {"wbic", e.wbic}});
    append_ledger(out, {{"stage", "fit"},
                        {"started_at", timer.started_at()},
                        {"wall_seconds", timer.seconds()},
                        {"seeds",
                         {{"master", cfg.seed},
                          {"split", split_seed},
                          {"cv", cv_seed},
                          {"rfe", rfe_seed},
                          {"surrogate", sel.mcmc.seed}}},
                        {"artifacts", {"train.csv", "test.csv", "model.json", "surrogate.json"}},
                        {"metrics",
                         {{"rmse", s.metrics.rmse},
                          {"r2", s.metrics.to_json()["r2"]},
                          {"wbic", wt},
                          {"chosen_k", s.chosen_k},
                          {"train_rows", s.train_rows},
                          {"test_rows", s.test_rows},
                          {"surrogate_rows", s.surrogate_rows}}}});
    return s;
}

// ---------------------------------------------------------------------------
// planning one instance

// Intervention values missing on the instance (HTTP 422, skipped in batches).
class MissingInterventionValue : public ValidationError {
public:
    using ValidationError::ValidationError;
};

struct PlanRequest {
    std::string instance_id;
    std::vector<double> features;  // real units, model feature order, NaN = missing
    PlanSettings settings;
    std::uint64_t seed = 1;  // master seed; the search seed is derived per instance
};

inline std::uint64_t instance_seed(std::uint64_t master, const std::string& instance_id) {
    return derive_seed(master, "plan", hash_text(instance_id));
}

inline std::vector<std::string> resolve_intervention(const ModelBundle& b, const PlanSettings& s) {
    std::vector<std::string> out;
    if (!s.intervention.empty()) {
        for (const auto& name : s.intervention) {
            const std::size_t p = b.position(name);
            if (!b.continuous[p]) throw ValidationError("discrete feature '" + name + "' cannot be an intervention variable");
            if (std::find(out.begin(), out.end(), name) != out.end()) throw ValidationError("duplicate intervention '" + name + "'");
            out.push_back(name);
        }
        return out;
    }
    for (const auto& name : s.exclude) (void)b.position(name);
    for (const auto& e : b.importance) {
        if (out.size() == s.top_n) break;
        if (std::find(s.exclude.begin(), s.exclude.end(), e.feature) != s.exclude.end()) continue;
        if (!b.continuous[b.position(e.feature)]) continue;
        out.push_back(e.feature);
    }
    if (out.size() < s.top_n)
        throw ValidationError("top_n=" + std::to_string(s.top_n) + " exceeds the " + std::to_string(out.size()) +
                              " eligible continuous features");
    return out;
}

inline Json path_moves_json(const Path& p, const std::vector<std::string>& names) {
    Json moves = Json::array();
    for (std::size_t i = 1; i < p.steps.size(); ++i)
        moves.push_back(names[static_cast<std::size_t>(p.steps[i].changed_dim)] + (p.steps[i].step > 0 ? "+" : "-"));
    return moves;
}

// Everything a search needs; building it performs all request validation.
struct PreparedPlan {
    PlanRequest request;
    std::vector<std::string> names;
    GridSpec grid;
    Constraints constraints;
};

inline PreparedPlan prepare_plan(const ModelBundle& b, const PlanRequest& req) {
    const PlanSettings& s = req.settings;
    s.validate();
    const auto names = resolve_intervention(b, s);
    for (const auto& [name, c] : s.feature_constraints) {
        (void)c;
        if (std::find(names.begin(), names.end(), name) == names.end())
            throw ValidationError("constraint on '" + name + "', which is not an intervention variable");
    }
    std::vector<std::size_t> dims;
    std::vector<std::string> missing;
    for (const auto& n : names) {
        dims.push_back(b.position(n));
        if (is_missing(req.features.at(dims.back()))) missing.push_back(n);
    }
    if (!missing.empty()) {
        std::string list;
        for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
        throw MissingInterventionValue("instance '" + req.instance_id + "' is missing intervention values: " + list);
    }
    if (req.features.size() != b.features.size())
        throw ValidationError("expected " + std::to_string(b.features.size()) + " feature values, got " + std::to_string(req.features.size()));
    const auto x = b.to_model(req.features);

    std::vector<TrainingRange> ranges;
    for (const auto& n : names) {
        const auto& st = b.stats.at(n);
        ranges.push_back({(st.min - st.mean) / st.std, (st.max - st.mean) / st.std, 1.0});
    }
    const GridSpec grid = build_grid(x, dims, names, b.continuous, ranges, s.cell_sigma, s.direction);

    Constraints con;
    con.prediction_ceiling = s.prediction_ceiling;
    con.prediction_floor = s.prediction_floor;
    con.target = s.target;
    if (!s.feature_constraints.empty()) {
        con.lower.resize(names.size());
        con.upper.resize(names.size());
        con.moves.assign(names.size(), Moves::both);
        for (std::size_t j = 0; j < names.size(); ++j) {
            auto it = s.feature_constraints.find(names[j]);
            if (it == s.feature_constraints.end()) continue;
            if (it->second.lower) con.lower[j] = b.to_model_value(names[j], *it->second.lower);
            if (it->second.upper) con.upper[j] = b.to_model_value(names[j], *it->second.upper);
            con.moves[j] = it->second.moves;
        }
    }

    return {req, names, grid, con};
}

inline Json run_plan(const ModelBundle& b, const PreparedPlan& prep, std::function<bool()> cancelled = {}) {
    const PlanRequest& req = prep.request;
    const PlanSettings& s = req.settings;
    const auto& names = prep.names;
    const auto& grid = prep.grid;
    PlanOptions opt;
    opt.iterations = s.iterations;
    opt.baseline_count = s.baseline_count;
    opt.weight_floor = s.weight_floor;
    opt.cancelled = std::move(cancelled);
    ModelScorer scorer(b.regressor, b.surrogate, b.cont_pos, b.disc_pos);
    const std::uint64_t seed = instance_seed(req.seed, req.instance_id);
    const PlanResult r = path_search(grid, scorer, prep.constraints, opt, seed);

    Json steps = Json::array();
    for (std::size_t i = 0; i < r.optimal.steps.size(); ++i) {
        const auto& st = r.optimal.steps[i];
        Json values = Json::object();
        for (std::size_t j = 0; j < names.size(); ++j) values[names[j]] = b.to_real(names[j], coordinate(grid, st.node, j));
        Json step = {{"index", i}};
        step["feature"] = st.changed_dim < 0 ? Json(nullptr) : Json(names[static_cast<std::size_t>(st.changed_dim)]);
        step["direction"] = st.changed_dim < 0 ? Json(nullptr) : Json(st.step > 0 ? "+" : "-");
        step["offsets"] = st.node.offsets;
        step["values"] = values;
        step["prediction"] = st.prediction;
        step["log_density"] = -st.neg_log_density;
        steps.push_back(step);
    }
    Json baselines = Json::array();
    for (const auto& p : r.baselines)
        baselines.push_back({{"log_actionability", p.log_actionability()}, {"moves", path_moves_json(p, names)}});
    Json grid_json = Json::array();
    for (std::size_t j = 0; j < names.size(); ++j)
        grid_json.push_back({{"feature", names[j]},
                             {"cell", grid.cell[j] * b.stats.at(names[j]).std},
                             {"lo", grid.lo[j]},
                             {"hi", grid.hi[j]}});
    Json origin = Json::object();
    for (std::size_t i = 0; i < b.features.size(); ++i) {
        const double v = req.features[i];
        origin[b.features[i]] = is_missing(v) ? Json(nullptr) : Json(v);
    }
    Json settings = s.to_json();
    settings["intervention"] = {{"features", names}, {"top_n", s.top_n}, {"exclude", s.exclude}};
    settings["seed"] = req.seed;
    settings["density_mode"] = to_string(b.surrogate.density_mode());

    double baseline_mean = 0.0;
    for (double v : r.baseline_log_actionability) baseline_mean += v / static_cast<double>(r.baseline_log_actionability.size());
    return {{"format", "actpath.plan/1"},
            {"instance_id", req.instance_id},
            {"seed", seed},
            {"config", settings},
            {"grid", grid_json},
            {"instance", origin},
            {"steps", steps},
            {"log_actionability", r.log_actionability},
            {"baselines", baselines},
            {"baseline_mean_log_actionability", baseline_mean},
            {"score", r.score},
            {"destination", {{"prediction", r.optimal.steps.back().prediction}, {"cost", r.cost}, {"moves", r.optimal.moves()}}},
            {"diagnostics",
             {{"settled", r.settled},
              {"evaluated", r.evaluated},
              {"negative_weights", r.negative_weights},
              {"exhausted", r.exhausted},
              {"target_reached", r.target_reached}}}};
}

inline Json plan_instance(const ModelBundle& b, const PlanRequest& req, std::function<bool()> cancelled = {}) {
    return run_plan(b, prepare_plan(b, req), std::move(cancelled));
}

inline PlanRequest request_for_row(const ModelBundle& b, const Dataset& ds, std::size_t row, const PlanSettings& s,
                                   std::uint64_t seed) {
    return {ds.ids[row], features_by_name(ds, row, b.features), s, seed};
}

// ---------------------------------------------------------------------------
// batch planning

struct ScoreSummary {
    std::vector<double> edges;
    std::vector<std::size_t> counts;
    double median = 0.0;
    double positive_fraction = 0.0;
    double nonnegative_fraction = 0.0;
    double min = 0.0, max = 0.0;

    Json to_json() const {
        return {{"histogram", {{"edges", edges}, {"counts", counts}}},
                {"median", median},
                {"positive_fraction", positive_fraction},
                {"nonnegative_fraction", nonnegative_fraction},
                {"min", min},
                {"max", max}};
    }
};

inline ScoreSummary summarize_scores(const std::vector<double>& scores, std::size_t bins) {
    if (scores.empty()) throw ValidationError("summary: no scores");
    ScoreSummary s;
    s.min = *std::min_element(scores.begin(), scores.end());
    s.max = *std::max_element(scores.begin(), scores.end());
    double lo = s.min, hi = s.max;
    if (!(hi > lo)) {
        lo -= 0.5;
        hi += 0.5;
    }
    for (std::size_t i = 0; i <= bins; ++i) s.edges.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins));
    s.counts.assign(bins, 0);
    for (double v : scores) {
        auto i = static_cast<std::size_t>((v - lo) / (hi - lo) * static_cast<double>(bins));
        ++s.counts[std::min(i, bins - 1)];
    }
    s.median = median_of(scores);
    std::size_t pos = 0, nonneg = 0;
    for (double v : scores) {
        pos += v > 0.0;
        nonneg += v >= -1e-9;
    }
    s.positive_fraction = static_cast<double>(pos) / static_cast<double>(scores.size());
    s.nonnegative_fraction = static_cast<double>(nonneg) / static_cast<double>(scores.size());
    return s;
}

inline std::string artifact_name(const std::string& id) {
    std::string out;
    for (char c : id) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.') ? c : '_';
    if (out.empty() || out == "." || out == "..") out = "_" + out;
    return out;
}

inline std::vector<std::size_t> select_instances(const ModelBundle& b, const RunConfig& cfg) {
    std::vector<std::size_t> rows;
    if (!cfg.instance_ids.empty()) {
        for (const auto& id : cfg.instance_ids) {
            auto r = b.test.find_id(id);
            if (!r) throw ValidationError("instances.ids: unknown test instance '" + id + "'");
            rows.push_back(*r);
        }
    } else {
        for (std::size_t r = 0; r < b.test.rows(); ++r)
            if (!cfg.instance_filter || cfg.instance_filter->accepts(b.test.response(r))) rows.push_back(r);
    }
    if (rows.empty()) throw ValidationError("instance filter selects no test instances");
    return rows;
}

struct PlanBatch {
    std::vector<std::string> ids;
    std::vector<double> scores;
    std::vector<std::pair<std::string, std::string>> skipped;
    ScoreSummary summary;
};

inline PlanBatch cmd_plan(const RunConfig& cfg) {
    StageTimer timer;
    const ModelBundle b = run_stage("load", [&] { return load_bundle(cfg); });
    const auto rows = select_instances(b, cfg);
    (void)resolve_intervention(b, cfg.planning);

    std::vector<Json> payloads(rows.size());
    std::vector<std::string> skip_reason(rows.size());
    run_stage("plan", [&] {
        parallel_for(rows.size(), [&](std::size_t i) {
            try {
                payloads[i] = plan_instance(b, request_for_row(b, b.test, rows[i], cfg.planning, cfg.seed));
            } catch (const MissingInterventionValue& e) {
                skip_reason[i] = e.what();
            }
        });
        return 0;
    });

    const fs::path out = cfg.out();
    fs::remove_all(out / "plans");
    PlanBatch batch;
    Json instances = Json::array();
    Json artifacts = Json::array();
    std::set<std::string> used;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const std::string& id = b.test.ids[rows[i]];
        if (!skip_reason[i].empty()) {
            batch.skipped.emplace_back(id, skip_reason[i]);
            continue;
        }
        std::string name = artifact_name(id);
        for (int n = 2; used.count(name); ++n) name = artifact_name(id) + "-" + std::to_string(n);
        used.insert(name);
        const std::string rel = "plans/" + name + ".json";
        write_json_file(out / rel, payloads[i]);
        artifacts.push_back(rel);
        const double score = payloads[i]["score"].get<double>();
        batch.ids.push_back(id);
        batch.scores.push_back(score);
        instances.push_back({{"id", id},
                             {"file", rel},
                             {"response", b.test.response(rows[i])},
                             {"initial_prediction", payloads[i]["steps"][0]["prediction"]},
                             {"final_prediction", payloads[i]["destination"]["prediction"]},
                             {"moves", payloads[i]["destination"]["moves"]},
                             {"score", score}});
    }
    if (batch.scores.empty()) throw ValidationError("plan: every selected instance was skipped");
    batch.summary = summarize_scores(batch.scores, cfg.histogram_bins);
    Json skipped = Json::array();
    for (const auto& [id, why] : batch.skipped) skipped.push_back({{"id", id}, {"reason", why}});
    Json summary = {{"format", "actpath.plan-summary/1"},
                    {"config", cfg.echo()},
                    {"intervention", resolve_intervention(b, cfg.planning)},
                    {"planned", batch.scores.size()},
                    {"skipped", skipped},
                    {"scores", batch.summary.to_json()},
                    {"instances", instances}};
    write_json_file(out / "plan_summary.json", summary);
    artifacts.push_back("plan_summary.json");
    append_ledger(out, {{"stage", "plan"},
                        {"started_at", timer.started_at()},
                        {"wall_seconds", timer.seconds()},
                        {"seeds", {{"master", cfg.seed}}},
                        {"artifacts", artifacts},
                        {"metrics",
                         {{"planned", batch.scores.size()},
                          {"skipped", batch.skipped.size()},
                          {"median_score", batch.summary.median},
                          {"positive_fraction", batch.summary.positive_fraction},
                          {"scores", batch.scores}}}});
    return batch;
}

// ---------------------------------------------------------------------------
// report

namespace detail {

inline std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

class Svg {
public:
    Svg(double w, double h) : w_(w), h_(h) {}
    void line(double x1, double y1, double x2, double y2, const std::string& stroke, double width = 1.0) {
        body_ << "<line x1=\"" << f(x1) << "\" y1=\"" << f(y1) << "\" x2=\"" << f(x2) << "\" y2=\"" << f(y2) << "\" stroke=\""
              << stroke << "\" stroke-width=\"" << f(width) << "\"/>\n";
    }
    void rect(double x, double y, double w, double h, const std::string& fill) {
        body_ << "<rect x=\"" << f(x) << "\" y=\"" << f(y) << "\" width=\"" << f(w) << "\" height=\"" << f(h) << "\" fill=\"" << fill
              << "\"/>\n";
    }
    void circle(double x, double y, double r, const std::string& fill) {
        body_ << "<circle cx=\"" << f(x) << "\" cy=\"" << f(y) << "\" r=\"" << f(r) << "\" fill=\"" << fill << "\"/>\n";
    }
    void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& stroke) {
        body_ << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < pts.size(); ++i) body_ << (i ? " " : "") << f(pts[i].first) << "," << f(pts[i].second);
        body_ << "\"/>\n";
    }
    void text(double x, double y, const std::string& s, const std::string& anchor = "start") {
        body_ << "<text x=\"" << f(x) << "\" y=\"" << f(y) << "\" font-size=\"12\" font-family=\"sans-serif\" text-anchor=\"" << anchor
              << "\">" << xml_escape(s) << "</text>\n";
    }
    std::string str() const {
        std::ostringstream o;
        o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f(w_)
          << "\" height=\"" << f(h_) << "\" viewBox=\"0 0 " << f(w_) << " " << f(h_) << "\">\n"
          << body_.str() << "</svg>\n";
        return o.str();
    }

private:
    static std::string f(double v) {
        std::ostringstream o;
        o << std::fixed << std::setprecision(2) << v;
        return o.str();
    }
    double w_, h_;
    std::ostringstream body_;
};

struct Axis {
    double lo = 0.0, hi = 1.0, px0 = 0.0, px1 = 1.0;
    double map(double v) const { return px0 + (v - lo) / (hi - lo) * (px1 - px0); }
    static Axis fit(const std::vector<double>& v, double px0, double px1) {
        double lo = *std::min_element(v.begin(), v.end()), hi = *std::max_element(v.begin(), v.end());
        if (!(hi > lo)) {
            lo -= 0.5;
            hi += 0.5;
        }
        const double pad = 0.05 * (hi - lo);
        return {lo - pad, hi + pad, px0, px1};
    }
};

inline std::string histogram_svg(const ScoreSummary& s) {
    Svg svg(480, 300);
    const double x0 = 50, x1 = 460, y0 = 260, y1 = 20;
    const std::size_t peak = std::max<std::size_t>(1, *std::max_element(s.counts.begin(), s.counts.end()));
    const double bw = (x1 - x0) / static_cast<double>(s.counts.size());
    for (std::size_t i = 0; i < s.counts.size(); ++i) {
        const double h = (y0 - y1) * static_cast<double>(s.counts[i]) / static_cast<double>(peak);
        svg.rect(x0 + bw * static_cast<double>(i) + 1, y0 - h, bw - 2, h, "#4c72b0");
    }
    svg.line(x0, y0, x1, y0, "#000");
    svg.line(x0, y0, x0, y1, "#000");
    svg.text(x0, 280, format_double(s.edges.front()));
    svg.text(x1, 280, format_double(s.edges.back()), "end");
    svg.text((x0 + x1) / 2, 295, "actionability score", "middle");
    svg.text(x0 - 5, y1 + 10, std::to_string(peak), "end");
    return svg.str();
}

inline std::string projection_svg(const std::string& xname, const std::string& yname, const std::vector<double>& tx,
                                  const std::vector<double>& ty, const std::vector<std::pair<double, double>>& path) {
    Svg svg(420, 420);
    std::vector<double> ax = tx, ay = ty;
    for (const auto& [x, y] : path) {
        ax.push_back(x);
        ay.push_back(y);
    }
    const Axis X = Axis::fit(ax, 50, 400), Y = Axis::fit(ay, 370, 20);
    for (std::size_t i = 0; i < tx.size(); ++i) svg.circle(X.map(tx[i]), Y.map(ty[i]), 2, "#bbbbbb");
    std::vector<std::pair<double, double>> px;
    for (const auto& [x, y] : path) px.emplace_back(X.map(x), Y.map(y));
    svg.polyline(px, "#c44e52");
    if (!px.empty()) {
        svg.circle(px.front().first, px.front().second, 4, "#55a868");
        svg.circle(px.back().first, px.back().second, 4, "#c44e52");
    }
    svg.line(50, 370, 400, 370, "#000");
    svg.line(50, 370, 50, 20, "#000");
    svg.text(225, 400, xname, "middle");
    svg.text(10, 15, yname);
    return svg.str();
}

}  // namespace detail

inline Json cmd_report(const RunConfig& cfg) {
    StageTimer timer;
    const fs::path out = cfg.out();
    if (!fs::exists(out / "plan_summary.json")) throw ValidationError("missing artifact 'plan_summary.json' (run 'plan' first)");
    const ModelBundle b = run_stage("load", [&] { return load_bundle(cfg); });
    const Json summary = read_json_file(out / "plan_summary.json");
    const fs::path rep = out / "report";
    fs::remove_all(rep);

    Json artifacts = Json::array();
    std::ostringstream md;
    md << "# Planning report\n\n";
    md << "Test RMSE " << format_double(b.test_metrics.rmse) << ", R2 "
       << (b.test_metrics.r2_defined ? format_double(b.test_metrics.r2) : std::string("undefined")) << ", surrogate K "
       << b.surrogate.spec().k << ".\n\n";
    md << "| K | WBIC |\n|---|---|\n";
    for (const auto& e : b.surrogate.wbic_table) md << "| " << e.k << " | " << format_double(e.wbic) << " |\n";
    const Json& sc = summary.at("scores");
    md << "\nPlanned " << summary.at("planned").get<std::size_t>() << " instances, skipped " << summary.at("skipped").size()
       << ". Median score " << format_double(sc.at("median").get<double>()) << ", positive fraction "
       << format_double(sc.at("positive_fraction").get<double>()) << ".\n\n![scores](histogram.svg)\n\n";

    ScoreSummary hist;
    hist.edges = sc.at("histogram").at("edges").get<std::vector<double>>();
    hist.counts = sc.at("histogram").at("counts").get<std::vector<std::size_t>>();
    write_text_file(rep / "histogram.svg", detail::histogram_svg(hist));
    artifacts.push_back("report/histogram.svg");

    std::ostringstream all;
    all << "instance,step,feature,direction,value,prediction,log_density\n";
    md << "| instance | moves | prediction | score | ladder |\n|---|---|---|---|---|\n";
    for (const auto& inst : summary.at("instances")) {
        const Json plan = read_json_file(out / inst.at("file").get<std::string>());
        const std::string id = inst.at("id").get<std::string>();
        const std::string name = fs::path(inst.at("file").get<std::string>()).stem().string();
        std::vector<std::string> names;
        for (const auto& g : plan.at("grid")) names.push_back(g.at("feature").get<std::string>());

        std::ostringstream ladder;
        ladder << "step,feature,direction,value,prediction,log_density\n";
        std::vector<std::string> trace;
        for (const auto& st : plan.at("steps")) {
            if (st.at("feature").is_null()) continue;
            const std::string f = st.at("feature").get<std::string>();
            const std::string row = std::to_string(st.at("index").get<std::size_t>()) + "," + detail::quote_csv(f) + "," +
                                    st.at("direction").get<std::string>() + "," +
                                    format_double(st.at("values").at(f).get<double>()) + "," +
                                    format_double(st.at("prediction").get<double>()) + "," +
                                    format_double(st.at("log_density").get<double>());
            ladder << row << "\n";
            all << detail::quote_csv(id) << "," << row << "\n";
            trace.push_back(f + st.at("direction").get<std::string>());
        }
        const std::string ladder_rel = "report/" + name + "/ladder.csv";
        write_text_file(out / ladder_rel, ladder.str());
        artifacts.push_back(ladder_rel);

        // Projection onto the first two intervention variables, or the single
        // variable against the response.
        const std::string xn = names.at(0);
        const std::string yn = names.size() > 1 ? names[1] : b.schema[b.schema.response_index()].name;
        std::vector<double> tx, ty;
        for (std::size_t r = 0; r < b.train.rows(); ++r) {
            const double xv = b.train.at(r, b.train.schema.index_of(xn));
            const double yv = b.train.at(r, b.train.schema.index_of(yn));
            if (is_missing(xv) || is_missing(yv)) continue;
            tx.push_back(xv);
            ty.push_back(yv);
        }
        std::vector<std::pair<double, double>> path;
        for (const auto& st : plan.at("steps"))
            path.emplace_back(st.at("values").at(xn).get<double>(),
                              names.size() > 1 ? st.at("values").at(yn).get<double>() : st.at("prediction").get<double>());
        Json proj = {{"x", xn}, {"y", yn}, {"training", {{"x", tx}, {"y", ty}}}, {"path", Json::array()}};
        for (const auto& [x, y] : path) proj["path"].push_back({x, y});
        write_json_file(out / ("report/" + name + "/projection.json"), proj);
        write_text_file(out / ("report/" + name + "/projection.svg"), detail::projection_svg(xn, yn, tx, ty, path));
        artifacts.push_back("report/" + name + "/projection.json");
        artifacts.push_back("report/" + name + "/projection.svg");

        std::string moves;
        for (const auto& t : trace) moves += (moves.empty() ? "" : " ") + t;
        md << "| " << id << " | " << (moves.empty() ? "(none)" : moves) << " | "
           << format_double(inst.at("initial_prediction").get<double>()) << " -> "
           << format_double(inst.at("final_prediction").get<double>()) << " | " << format_double(inst.at("score").get<double>())
           << " | [csv](" << name << "/ladder.csv) |\n";
    }
    write_text_file(rep / "ladders.csv", all.str());
    write_text_file(rep / "summary.md", md.str());
    artifacts.push_back("report/ladders.csv");
    artifacts.push_back("report/summary.md");
    Json result = {{"instances", summary.at("instances").size()}, {"path", "report/summary.md"}};
    append_ledger(out, {{"stage", "report"},
                        {"started_at", timer.started_at()},
                        {"wall_seconds", timer.seconds()},
                        {"seeds", {{"master", cfg.seed}}},
                        {"artifacts", artifacts},
                        {"metrics", result}});
    return result;
}

}  // namespace actpath
