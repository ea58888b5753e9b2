#pragma once

// Shared helpers: scratch directories and a small fitted synthetic run that
// several suites plan against.

#include <filesystem>
#include <mutex>
#include <string>
#include <unistd.h>

#include "actpath/pipeline.hpp"

namespace testing_support {

namespace fs = std::filesystem;

inline fs::path scratch_dir(const std::string& tag) {
    const fs::path p = fs::temp_directory_path() / ("actpath-" + tag + "-" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// Cheap settings: short chains, K in {1, 2}, one hyperparameter setting.
inline actpath::Json small_config_json() {
    return actpath::Json::parse(R"({
      "seed": 7,
      "dataset": {"source": "synthetic"},
      "regressor": {"grid": [{"tree_count": 100, "max_depth": 3, "learning_rate": 0.1}], "folds": 3},
      "surrogate": {"k_range": [1, 2], "iterations": 300, "warmup": 100, "density_draws": 16},
      "planning": {"intervention": {"features": ["X1", "X2", "X3"]}, "cell_sigma": 0.5, "L": 2000}
    })");
}

inline actpath::RunConfig small_config(const fs::path& out) {
    actpath::Json j = small_config_json();
    j["output_dir"] = out.string();
    return actpath::parse_run_config(j, out.parent_path());
}

// Fitted (not planned) run shared across a test binary.
inline const actpath::RunConfig& fitted_small_run() {
    static std::once_flag once;
    static actpath::RunConfig cfg;
    std::call_once(once, [] {
        cfg = small_config(scratch_dir("fitted") / "run");
        actpath::cmd_fit(cfg);
    });
    return cfg;
}

}  // namespace testing_support
