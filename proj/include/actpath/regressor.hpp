#pragma once

// Squared-loss gradient-boosted regression trees with exact greedy splits,
// gain importance, k-fold cross-validation and recursive feature elimination.

#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "actpath/common.hpp"
#include "actpath/data.hpp"

namespace actpath {

// ---------------------------------------------------------------------------
// feature encoding: discrete features become one-hot slots

class FeatureEncoder {
public:
    FeatureEncoder() = default;
    FeatureEncoder(const Schema& schema, std::vector<std::string> feature_names) : names_(std::move(feature_names)) {
        for (std::size_t f = 0; f < names_.size(); ++f) {
            const auto& spec = schema[schema.index_of(names_[f])];
            if (!spec.is_feature()) throw ValidationError("encoder: column '" + names_[f] + "' is not a feature");
            offsets_.push_back(slot_owner_.size());
            const std::size_t width = spec.kind == ColumnKind::continuous ? 1 : spec.levels.size();
            widths_.push_back(width);
            discrete_.push_back(spec.kind == ColumnKind::discrete);
            for (std::size_t s = 0; s < width; ++s) slot_owner_.push_back(f);
        }
    }

    const std::vector<std::string>& names() const { return names_; }
    std::size_t feature_count() const { return names_.size(); }
    std::size_t slot_count() const { return slot_owner_.size(); }
    std::size_t slot_owner(std::size_t slot) const { return slot_owner_[slot]; }
    bool is_discrete(std::size_t f) const { return discrete_[f]; }

    // features: one value per feature (category index for discrete).
    void encode(std::span<const double> features, std::span<double> slots) const {
        if (features.size() != names_.size())
            throw ValidationError("encoder: expected " + std::to_string(names_.size()) + " features, got " +
                                  std::to_string(features.size()));
        for (std::size_t f = 0; f < names_.size(); ++f) {
            if (!discrete_[f]) {
                slots[offsets_[f]] = features[f];
                continue;
            }
            for (std::size_t s = 0; s < widths_[f]; ++s) slots[offsets_[f] + s] = 0.0;
            const double v = features[f];
            if (!is_missing(v)) slots[offsets_[f] + static_cast<std::size_t>(v)] = 1.0;
        }
    }
    std::vector<double> encode(std::span<const double> features) const {
        std::vector<double> out(slot_count());
        encode(features, out);
        return out;
    }

private:
    std::vector<std::string> names_;
    std::vector<std::size_t> offsets_, widths_, slot_owner_;
    std::vector<bool> discrete_;
};

// Dense design matrix over encoded slots.
struct DesignMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> x;  // row-major
    std::vector<double> y;

    double at(std::size_t r, std::size_t c) const { return x[r * cols + c]; }
    std::span<const double> row(std::size_t r) const { return {x.data() + r * cols, cols}; }

    DesignMatrix subset(std::span<const std::size_t> idx) const {
        DesignMatrix out{idx.size(), cols, {}, {}};
        out.x.reserve(idx.size() * cols);
        for (auto r : idx) {
            auto src = row(r);
            out.x.insert(out.x.end(), src.begin(), src.end());
            out.y.push_back(y[r]);
        }
        return out;
    }
};

inline std::vector<double> features_by_name(const Dataset& ds, std::size_t r, std::span<const std::string> names) {
    std::vector<double> out;
    out.reserve(names.size());
    for (const auto& n : names) out.push_back(ds.at(r, ds.schema.index_of(n)));
    return out;
}

inline DesignMatrix build_design(const Dataset& ds, const FeatureEncoder& enc) {
    DesignMatrix m{ds.rows(), enc.slot_count(), std::vector<double>(ds.rows() * enc.slot_count()), {}};
    std::vector<std::size_t> cols;
    for (const auto& n : enc.names()) cols.push_back(ds.schema.index_of(n));
    std::vector<double> feats(cols.size());
    for (std::size_t r = 0; r < ds.rows(); ++r) {
        for (std::size_t f = 0; f < cols.size(); ++f) {
            feats[f] = ds.at(r, cols[f]);
            if (is_missing(feats[f]))
                throw ValidationError("design: missing value in row '" + ds.ids[r] + "', feature '" + enc.names()[f] +
                                      "' (impute first)");
        }
        enc.encode(feats, {m.x.data() + r * m.cols, m.cols});
        m.y.push_back(ds.response(r));
    }
    return m;
}

// ---------------------------------------------------------------------------
// model types

struct GbtHyperParams {
    int tree_count = 100;
    int max_depth = 3;
    double learning_rate = 0.1;
    int min_samples_leaf = 1;
    double subsample_fraction = 1.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (tree_count < 0) throw ValidationError("gbt: tree_count must be >= 0");
        if (max_depth < 1) throw ValidationError("gbt: max_depth must be >= 1");
        if (!(learning_rate > 0.0 && learning_rate <= 1.0)) throw ValidationError("gbt: learning_rate must lie in (0, 1]");
        if (min_samples_leaf < 1) throw ValidationError("gbt: min_samples_leaf must be >= 1");
        if (!(subsample_fraction > 0.0 && subsample_fraction <= 1.0))
            throw ValidationError("gbt: subsample_fraction must lie in (0, 1]");
    }

    bool operator==(const GbtHyperParams&) const = default;

    Json to_json() const {
        return {{"tree_count", tree_count},         {"max_depth", max_depth},
                {"learning_rate", learning_rate},   {"min_samples_leaf", min_samples_leaf},
                {"subsample_fraction", subsample_fraction}, {"seed", seed}};
    }
    static GbtHyperParams from_json(const Json& j) {
        GbtHyperParams h;
        h.tree_count = j.value("tree_count", h.tree_count);
        h.max_depth = j.value("max_depth", h.max_depth);
        h.learning_rate = j.value("learning_rate", h.learning_rate);
        h.min_samples_leaf = j.value("min_samples_leaf", h.min_samples_leaf);
        h.subsample_fraction = j.value("subsample_fraction", h.subsample_fraction);
        h.seed = j.value("seed", h.seed);
        h.validate();
        return h;
    }
};

// depth {2,3,4} x trees {100,300} x rate {0.05,0.1}
inline std::vector<GbtHyperParams> default_gbt_grid(std::uint64_t seed = 0) {
    std::vector<GbtHyperParams> grid;
    for (int depth : {2, 3, 4})
        for (int trees : {100, 300})
            for (double rate : {0.05, 0.1}) grid.push_back({trees, depth, rate, 1, 1.0, seed});
    return grid;
}

// Flattened binary tree. feature < 0 marks a leaf; x[feature] <= threshold
// goes left.
struct Tree {
    std::vector<int> feature;
    std::vector<double> threshold;
    std::vector<int> left;
    std::vector<int> right;
    std::vector<double> value;
    std::vector<double> gain;  // squared-error reduction at internal nodes, 0 at leaves

    std::size_t size() const { return feature.size(); }

    int add_leaf(double v) {
        feature.push_back(-1);
        threshold.push_back(0.0);
        left.push_back(-1);
        right.push_back(-1);
        value.push_back(v);
        gain.push_back(0.0);
        return static_cast<int>(feature.size() - 1);
    }

    double leaf_value(std::span<const double> x) const {
        int n = 0;
        while (feature[n] >= 0) n = x[feature[n]] <= threshold[n] ? left[n] : right[n];
        return value[n];
    }

    bool operator==(const Tree&) const = default;
};

struct GbtModel {
    double base_score = 0.0;
    GbtHyperParams hyperparams;
    std::size_t arity = 0;  // encoded slot count
    std::vector<Tree> trees;
    std::vector<double> train_rmse;  // after each round; not serialized

    double predict(std::span<const double> x) const {
        if (x.size() != arity)
            throw ValidationError("predict: expected " + std::to_string(arity) + " inputs, got " + std::to_string(x.size()));
        double s = 0.0;
        for (const auto& t : trees) s += t.leaf_value(x);
        return base_score + hyperparams.learning_rate * s;
    }

    bool same_structure(const GbtModel& o) const {
        return base_score == o.base_score && hyperparams == o.hyperparams && arity == o.arity && trees == o.trees;
    }

    Json to_json() const {
        Json jt = Json::array();
        for (const auto& t : trees)
            jt.push_back({{"feature", t.feature}, {"threshold", t.threshold}, {"left", t.left},
                          {"right", t.right}, {"value", t.value}, {"gain", t.gain}});
        return {{"base_score", base_score}, {"arity", arity}, {"hyperparams", hyperparams.to_json()}, {"trees", jt}};
    }
    static GbtModel from_json(const Json& j) {
        GbtModel m;
        m.base_score = j.at("base_score").get<double>();
        m.arity = j.at("arity").get<std::size_t>();
        m.hyperparams = GbtHyperParams::from_json(j.at("hyperparams"));
        for (const auto& jt : j.at("trees")) {
            Tree t{jt.at("feature").get<std::vector<int>>(), jt.at("threshold").get<std::vector<double>>(),
                   jt.at("left").get<std::vector<int>>(),    jt.at("right").get<std::vector<int>>(),
                   jt.at("value").get<std::vector<double>>(), jt.at("gain").get<std::vector<double>>()};
            const auto n = static_cast<int>(t.size());
            if (t.threshold.size() != t.size() || t.left.size() != t.size() || t.right.size() != t.size() ||
                t.value.size() != t.size() || t.gain.size() != t.size() || n == 0)
                throw ValidationError("gbt: malformed tree arrays");
            for (int i = 0; i < n; ++i) {
                if (t.feature[i] >= static_cast<int>(m.arity)) throw ValidationError("gbt: split feature out of range");
                if (t.feature[i] >= 0 && (t.left[i] <= i || t.left[i] >= n || t.right[i] <= i || t.right[i] >= n))
                    throw ValidationError("gbt: malformed child index");
            }
            m.trees.push_back(std::move(t));
        }
        return m;
    }
};

// ---------------------------------------------------------------------------
// fitting

namespace detail {

struct SplitChoice {
    double gain = 0.0;
    int feature = -1;
    double threshold = 0.0;
};

class TreeGrower {
public:
    TreeGrower(const DesignMatrix& m, const std::vector<std::vector<std::size_t>>& sorted, const GbtHyperParams& hp)
        : m_(m), sorted_(sorted), hp_(hp), node_of_(m.rows, -1) {}

    Tree grow(std::span<const double> residual, std::span<const std::size_t> sample) {
        Tree tree;
        residual_ = residual;
        std::fill(node_of_.begin(), node_of_.end(), -1);
        double sum = 0.0, sq = 0.0;
        for (auto i : sample) {
            node_of_[i] = 0;
            sum += residual[i];
            sq += residual[i] * residual[i];
        }
        tree.add_leaf(0.0);
        expand(tree, 0, 1, sample.size(), sum, sq);
        return tree;
    }

private:
    SplitChoice best_split(int node, std::size_t count, double sum, double sq) const {
        SplitChoice best;
        const double parent = sum * sum / static_cast<double>(count);
        const double sse = sq - parent;
        const auto min_leaf = static_cast<std::size_t>(hp_.min_samples_leaf);
        for (std::size_t j = 0; j < m_.cols; ++j) {
            std::size_t left_n = 0;
            double left_sum = 0.0;
            double prev_value = 0.0;
            bool have_prev = false;
            for (auto i : sorted_[j]) {
                if (node_of_[i] != node) continue;
                const double v = m_.at(i, j);
                if (have_prev && v > prev_value && left_n >= min_leaf && count - left_n >= min_leaf) {
                    const double right_sum = sum - left_sum;
                    const double g = left_sum * left_sum / static_cast<double>(left_n) +
                                     right_sum * right_sum / static_cast<double>(count - left_n) - parent;
                    if (g > best.gain) {
                        double thr = 0.5 * (prev_value + v);
                        if (!(thr < v)) thr = prev_value;
                        best = {g, static_cast<int>(j), thr};
                    }
                }
                left_sum += residual_[i];
                ++left_n;
                prev_value = v;
                have_prev = true;
            }
        }
        if (best.feature >= 0 && !(best.gain > 1e-12 * std::max(sse, 0.0))) best.feature = -1;
        return best;
    }

    void expand(Tree& tree, int node, int depth, std::size_t count, double sum, double sq) {
        tree.value[node] = count ? sum / static_cast<double>(count) : 0.0;
        if (depth > hp_.max_depth || count < 2 * static_cast<std::size_t>(hp_.min_samples_leaf)) return;
        const SplitChoice split = best_split(node, count, sum, sq);
        if (split.feature < 0) return;
        const int l = tree.add_leaf(0.0);
        const int r = tree.add_leaf(0.0);
        tree.feature[node] = split.feature;
        tree.threshold[node] = split.threshold;
        tree.left[node] = l;
        tree.right[node] = r;
        tree.gain[node] = split.gain;
        std::size_t ln = 0, rn = 0;
        double ls = 0.0, lq = 0.0, rs = 0.0, rq = 0.0;
        for (std::size_t i = 0; i < m_.rows; ++i) {
            if (node_of_[i] != node) continue;
            const double r_i = residual_[i];
            if (m_.at(i, static_cast<std::size_t>(split.feature)) <= split.threshold) {
                node_of_[i] = l;
                ++ln, ls += r_i, lq += r_i * r_i;
            } else {
                node_of_[i] = r;
                ++rn, rs += r_i, rq += r_i * r_i;
            }
        }
        expand(tree, l, depth + 1, ln, ls, lq);
        expand(tree, r, depth + 1, rn, rs, rq);
    }

    const DesignMatrix& m_;
    const std::vector<std::vector<std::size_t>>& sorted_;
    const GbtHyperParams& hp_;
    std::vector<int> node_of_;
    std::span<const double> residual_;
};

inline double rmse_of(std::span<const double> y, std::span<const double> pred) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - pred[i]) * (y[i] - pred[i]);
    return std::sqrt(s / static_cast<double>(y.size()));
}

}  // namespace detail

// Rows are first put into a canonical (lexicographic) order so that, with
// subsample_fraction = 1, the fitted model does not depend on input row order.
inline GbtModel fit_gbt(const DesignMatrix& input, const GbtHyperParams& hp) {
    hp.validate();
    if (input.rows == 0) throw ValidationError("fit_gbt: empty training set");
    if (input.y.size() != input.rows) throw ValidationError("fit_gbt: response length mismatch");

    std::vector<std::size_t> canon(input.rows);
    std::iota(canon.begin(), canon.end(), std::size_t{0});
    std::stable_sort(canon.begin(), canon.end(), [&](std::size_t a, std::size_t b) {
        auto ra = input.row(a), rb = input.row(b);
        for (std::size_t c = 0; c < input.cols; ++c)
            if (ra[c] != rb[c]) return ra[c] < rb[c];
        return input.y[a] < input.y[b];
    });
    const DesignMatrix m = input.subset(canon);

    GbtModel model;
    model.hyperparams = hp;
    model.arity = m.cols;
    model.base_score = mean_of(m.y);

    std::vector<std::vector<std::size_t>> sorted(m.cols);
    for (std::size_t j = 0; j < m.cols; ++j) {
        sorted[j].resize(m.rows);
        std::iota(sorted[j].begin(), sorted[j].end(), std::size_t{0});
        std::stable_sort(sorted[j].begin(), sorted[j].end(), [&](std::size_t a, std::size_t b) { return m.at(a, j) < m.at(b, j); });
    }

    std::vector<double> pred(m.rows, model.base_score), residual(m.rows);
    std::vector<std::size_t> all(m.rows), sample;
    std::iota(all.begin(), all.end(), std::size_t{0});
    const auto sample_size = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(hp.subsample_fraction * static_cast<double>(m.rows))));
    std::mt19937_64 rng(derive_seed(hp.seed, "gbt-subsample"));
    detail::TreeGrower grower(m, sorted, hp);

    for (int t = 0; t < hp.tree_count; ++t) {
        for (std::size_t i = 0; i < m.rows; ++i) residual[i] = m.y[i] - pred[i];
        if (sample_size < m.rows) {
            sample = all;
            std::shuffle(sample.begin(), sample.end(), rng);
            sample.resize(sample_size);
            std::sort(sample.begin(), sample.end());
        } else {
            sample = all;
        }
        Tree tree = grower.grow(residual, sample);
        for (std::size_t i = 0; i < m.rows; ++i) pred[i] += hp.learning_rate * tree.leaf_value(m.row(i));
        model.trees.push_back(std::move(tree));
        model.train_rmse.push_back(detail::rmse_of(m.y, pred));
    }
    return model;
}

// ---------------------------------------------------------------------------
// metrics and importance

struct Metrics {
    double rmse = 0.0;
    double r2 = 0.0;
    bool r2_defined = true;  // false when the test response has zero variance

    Json to_json() const {
        Json j = {{"rmse", rmse}};
        j["r2"] = r2_defined ? Json(r2) : Json(nullptr);
        return j;
    }
};

inline Metrics metrics_of(std::span<const double> y, std::span<const double> pred) {
    if (y.empty()) throw ValidationError("evaluate: empty test set");
    Metrics out;
    out.rmse = detail::rmse_of(y, pred);
    const double mu = mean_of(y);
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        ss_res += (y[i] - pred[i]) * (y[i] - pred[i]);
        ss_tot += (y[i] - mu) * (y[i] - mu);
    }
    if (ss_tot > 0.0) {
        out.r2 = 1.0 - ss_res / ss_tot;
    } else {
        out.r2_defined = false;
        out.r2 = std::numeric_limits<double>::quiet_NaN();
    }
    return out;
}

inline Metrics evaluate(const GbtModel& model, const DesignMatrix& test) {
    std::vector<double> pred(test.rows);
    for (std::size_t r = 0; r < test.rows; ++r) pred[r] = model.predict(test.row(r));
    return metrics_of(test.y, pred);
}

// Total split gain per encoded slot.
inline std::vector<double> slot_importance(const GbtModel& model) {
    std::vector<double> gain(model.arity, 0.0);
    for (const auto& t : model.trees)
        for (std::size_t n = 0; n < t.size(); ++n)
            if (t.feature[n] >= 0) gain[static_cast<std::size_t>(t.feature[n])] += t.gain[n];
    return gain;
}

struct ImportanceEntry {
    std::string feature;
    double gain = 0.0;
};

// Per-feature gain (one-hot slots summed back into their feature), sorted
// descending; ties keep feature order.
using ImportanceReport = std::vector<ImportanceEntry>;

inline std::vector<double> feature_importance(const GbtModel& model, const FeatureEncoder& enc) {
    std::vector<double> out(enc.feature_count(), 0.0);
    const auto slots = slot_importance(model);
    for (std::size_t s = 0; s < slots.size(); ++s) out[enc.slot_owner(s)] += slots[s];
    return out;
}

inline ImportanceReport importance(const GbtModel& model, const FeatureEncoder& enc) {
    const auto gains = feature_importance(model, enc);
    ImportanceReport rep;
    for (std::size_t f = 0; f < gains.size(); ++f) rep.push_back({enc.names()[f], gains[f]});
    std::stable_sort(rep.begin(), rep.end(), [](const auto& a, const auto& b) { return a.gain > b.gain; });
    return rep;
}

inline Json importance_to_json(const ImportanceReport& rep) {
    Json j = Json::array();
    for (const auto& e : rep) j.push_back({{"feature", e.feature}, {"gain", e.gain}});
    return j;
}

// ---------------------------------------------------------------------------
// cross-validation and RFE

inline std::vector<std::vector<std::size_t>> kfold_indices(std::size_t n, int folds, std::uint64_t seed) {
    if (folds < 2) throw ValidationError("cv: folds must be >= 2");
    if (n < static_cast<std::size_t>(folds))
        throw ValidationError("cv: " + std::to_string(n) + " rows cannot fill " + std::to_string(folds) + " folds");
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(folds));
    for (std::size_t i = 0; i < n; ++i) out[i % out.size()].push_back(perm[i]);
    for (auto& f : out) std::sort(f.begin(), f.end());
    return out;
}

inline std::pair<DesignMatrix, DesignMatrix> fold_split(const DesignMatrix& m, const std::vector<std::size_t>& held_out) {
    std::vector<bool> out_mask(m.rows, false);
    for (auto i : held_out) out_mask[i] = true;
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < m.rows; ++i)
        if (!out_mask[i]) keep.push_back(i);
    return {m.subset(keep), m.subset(held_out)};
}

struct CvResult {
    GbtHyperParams best;
    std::vector<double> mean_rmse;  // per grid entry
};

inline CvResult cross_validate(const DesignMatrix& train, const std::vector<GbtHyperParams>& grid, int folds, std::uint64_t seed) {
    if (grid.empty()) throw ValidationError("cv: empty hyperparameter grid");
    for (const auto& hp : grid) hp.validate();
    const auto fold_rows = kfold_indices(train.rows, folds, seed);
    const std::size_t nf = fold_rows.size();
    std::vector<double> fold_rmse(grid.size() * nf);
    parallel_for(grid.size() * nf, [&](std::size_t task) {
        const std::size_t g = task / nf, f = task % nf;
        auto [fit_part, held] = fold_split(train, fold_rows[f]);
        fold_rmse[task] = evaluate(fit_gbt(fit_part, grid[g]), held).rmse;
    });
    CvResult res;
    res.mean_rmse.resize(grid.size());
    std::size_t best = 0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        res.mean_rmse[g] = mean_of(std::span<const double>(fold_rmse).subspan(g * nf, nf));
        if (res.mean_rmse[g] < res.mean_rmse[best]) best = g;
    }
    res.best = grid[best];
    return res;
}

struct RfeStep {
    std::vector<std::string> features;
    std::vector<double> mean_importance;
    std::string dropped;
};

struct RfeResult {
    std::vector<std::string> kept;
    std::vector<RfeStep> steps;
};

// Drops the feature with the lowest fold-averaged importance until `keep`
// remain. Ties drop the later feature.
inline RfeResult rfe(const Dataset& train, std::vector<std::string> features, std::size_t keep, int folds,
                     std::uint64_t seed, const GbtHyperParams& hp) {
    if (keep < 1 || keep > features.size())
        throw ValidationError("rfe: keep must lie in [1, " + std::to_string(features.size()) + "], got " + std::to_string(keep));
    RfeResult res;
    const auto fold_rows = kfold_indices(train.rows(), folds, seed);
    while (features.size() > keep) {
        const FeatureEncoder enc(train.schema, features);
        const DesignMatrix m = build_design(train, enc);
        std::vector<std::vector<double>> per_fold(fold_rows.size());
        parallel_for(fold_rows.size(), [&](std::size_t f) {
            auto fit_part = fold_split(m, fold_rows[f]).first;
            per_fold[f] = feature_importance(fit_gbt(fit_part, hp), enc);
        });
        RfeStep step{features, std::vector<double>(features.size(), 0.0), {}};
        for (const auto& imp : per_fold)
            for (std::size_t i = 0; i < imp.size(); ++i) step.mean_importance[i] += imp[i] / static_cast<double>(per_fold.size());
        std::size_t worst = 0;
        for (std::size_t i = 1; i < features.size(); ++i)
            if (step.mean_importance[i] <= step.mean_importance[worst]) worst = i;
        step.dropped = features[worst];
        features.erase(features.begin() + static_cast<std::ptrdiff_t>(worst));
        res.steps.push_back(std::move(step));
    }
    res.kept = std::move(features);
    return res;
}

// ---------------------------------------------------------------------------
// model-agnostic regressor interface

class Regressor {
public:
    virtual ~Regressor() = default;
    // features: one value per model feature, standardized continuous values
    // and category indices for discrete features.
    virtual double predict(std::span<const double> features) const = 0;
    virtual const std::vector<std::string>& feature_names() const = 0;
};

class GbtRegressor final : public Regressor {
public:
    GbtRegressor() = default;
    GbtRegressor(FeatureEncoder enc, GbtModel model) : enc_(std::move(enc)), model_(std::move(model)) {
        if (enc_.slot_count() != model_.arity) throw ValidationError("regressor: encoder/model arity mismatch");
    }

    double predict(std::span<const double> features) const override {
        thread_local std::vector<double> slots;
        slots.resize(enc_.slot_count());
        enc_.encode(features, slots);
        return model_.predict(slots);
    }
    const std::vector<std::string>& feature_names() const override { return enc_.names(); }
    const FeatureEncoder& encoder() const { return enc_; }
    const GbtModel& model() const { return model_; }

private:
    FeatureEncoder enc_;
    GbtModel model_;
};

}  // namespace actpath
