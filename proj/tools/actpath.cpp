// actpath command line: synth | fit | plan | report | serve.

#include <csignal>
#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "actpath/pipeline.hpp"
#include "actpath/service.hpp"

namespace {

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> iterations;
    std::optional<double> cell_sigma;
    std::optional<std::string> direction;
    std::optional<std::string> out;
};

actpath::RunConfig load_config(const std::string& path, const Overrides& o) {
    actpath::RunConfig cfg = actpath::load_run_config(path);
    if (o.seed) cfg.seed = *o.seed;
    if (o.iterations) cfg.planning.iterations = *o.iterations;
    if (o.cell_sigma) cfg.planning.cell_sigma = *o.cell_sigma;
    if (o.direction) cfg.planning.direction = actpath::direction_from_string(*o.direction);
    if (o.out) cfg.output_dir = std::filesystem::absolute(*o.out);
    cfg.validate();
    return cfg;
}

httplib::Server* g_server = nullptr;

void on_signal(int) {
    if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Actionable path planning over a regression model and a mixture surrogate"};
    app.require_subcommand(1);

    std::string config_path;
    Overrides o;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "Run configuration JSON")->required()->envname("ACTPATH_CONFIG");
        sub->add_option("--seed", o.seed, "Master seed override");
        sub->add_option("--L", o.iterations, "Search iteration count override");
        sub->add_option("--cell-sigma", o.cell_sigma, "Grid cell size in training standard deviations");
        sub->add_option("--direction", o.direction, "minimize | maximize");
        sub->add_option("--out", o.out, "Output (run) directory override");
    };
    auto* synth = app.add_subcommand("synth", "Write the synthetic dataset");
    auto* fit = app.add_subcommand("fit", "Fit the regressor and surrogate");
    auto* plan = app.add_subcommand("plan", "Plan paths for the selected test instances");
    auto* report = app.add_subcommand("report", "Render ladders, projections and the score histogram");
    auto* serve = app.add_subcommand("serve", "Serve the /v1 HTTP API over a fitted run directory");
    for (auto* s : {synth, fit, plan, report, serve}) add_common(s);
    std::string host;
    int port = -1;
    std::string bundle_dir;
    serve->add_option("--host", host, "Bind address")->envname("ACTPATH_HOST");
    serve->add_option("--port", port, "Port")->envname("ACTPATH_PORT");
    serve->add_option("--bundle", bundle_dir, "Run directory holding model artifacts")->envname("ACTPATH_BUNDLE");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (!bundle_dir.empty()) o.out = bundle_dir;
        const actpath::RunConfig cfg = load_config(config_path, o);
        if (*synth) {
            std::cout << actpath::cmd_synth(cfg).dump(2) << "\n";
        } else if (*fit) {
            const auto s = actpath::cmd_fit(cfg);
            actpath::Json wt = actpath::Json::array();
            for (const auto& e : s.wbic) wt.push_back({{"k", e.k}, {"wbic", e.wbic}});
            std::cout << actpath::Json{{"rmse", s.metrics.rmse},
                                       {"r2", s.metrics.to_json()["r2"]},
                                       {"chosen_k", s.chosen_k},
                                       {"wbic", wt}}
                             .dump(2)
                      << "\n";
        } else if (*plan) {
            const auto b = actpath::cmd_plan(cfg);
            std::cout << actpath::Json{{"planned", b.scores.size()}, {"skipped", b.skipped.size()}, {"scores", b.summary.to_json()}}
                             .dump(2)
                      << "\n";
        } else if (*report) {
            std::cout << actpath::cmd_report(cfg).dump(2) << "\n";
        } else if (*serve) {
            auto bundle = std::make_shared<const actpath::ModelBundle>(actpath::load_bundle(cfg));
            actpath::Service svc(bundle);
            httplib::Server server;
            const unsigned workers = std::max(2u, std::thread::hardware_concurrency());
            server.new_task_queue = [workers] { return new httplib::ThreadPool(workers); };
            actpath::mount(server, svc, cfg.service.cors_origin);
            const std::string h = host.empty() ? cfg.service.host : host;
            const int p = port >= 0 ? port : cfg.service.port;
            g_server = &server;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::cerr << "actpath " << actpath::kVersion << " serving " << cfg.out().string() << " on " << h << ":" << p << "\n";
            if (!server.listen(h, p)) throw actpath::RuntimeFailure("cannot bind " + h + ":" + std::to_string(p));
        }
        return 0;
    } catch (const actpath::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
