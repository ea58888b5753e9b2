#pragma once

// Grid-graph path planning over intervention variables. Node weight is the
// node's own negative surrogate log-density; the search settles nodes in
// least-cost order for L iterations, then returns the settled node with the
// best prediction. Paths are scored against random monotone shortest paths.

#include <cstdint>
#include <functional>
#include <optional>
#include <queue>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "actpath/common.hpp"
#include "actpath/regressor.hpp"
#include "actpath/surrogate.hpp"

namespace actpath {

enum class Direction { minimize, maximize };

inline std::string to_string(Direction d) { return d == Direction::minimize ? "minimize" : "maximize"; }
inline Direction direction_from_string(const std::string& s) {
    if (s == "minimize") return Direction::minimize;
    if (s == "maximize") return Direction::maximize;
    throw ValidationError("direction must be 'minimize' or 'maximize', got '" + s + "'");
}

// True when a is a strictly better prediction than b.
inline bool better(Direction d, double a, double b) { return d == Direction::minimize ? a < b : a > b; }

struct GridSpec {
    std::vector<std::size_t> dims;  // positions in the model feature vector
    std::vector<std::string> names;
    std::vector<double> cell;
    std::vector<int> lo, hi;
    std::vector<double> origin;  // full feature vector in model coordinates
    Direction direction = Direction::minimize;

    std::size_t rank() const { return dims.size(); }

    void validate() const {
        const std::size_t r = dims.size();
        if (cell.size() != r || lo.size() != r || hi.size() != r || (!names.empty() && names.size() != r))
            throw ValidationError("grid: inconsistent dimension arrays");
        for (std::size_t j = 0; j < r; ++j) {
            if (!(cell[j] > 0.0)) throw ValidationError("grid: cell sizes must be > 0");
            if (lo[j] > 0 || hi[j] < 0) throw ValidationError("grid: origin must lie inside the bounds");
            if (dims[j] >= origin.size()) throw ValidationError("grid: dimension index out of range");
        }
    }

    std::uint64_t node_count() const {
        std::uint64_t n = 1;
        for (std::size_t j = 0; j < rank(); ++j) {
            const auto side = static_cast<std::uint64_t>(hi[j] - lo[j] + 1);
            if (n > (std::uint64_t{1} << 62) / side) throw ValidationError("grid: too many nodes to index");
            n *= side;
        }
        return n;
    }
};

struct Node {
    std::vector<int> offsets;
    bool operator==(const Node&) const = default;
};

struct TrainingRange {
    double min = 0.0;
    double max = 0.0;
    double std = 1.0;
};

// Cell size = cell_sigma * training std; bounds = training range expanded by
// `expand_cells` cells, as integer offsets around the instance.
inline GridSpec build_grid(std::span<const double> instance, std::span<const std::size_t> dims, std::span<const std::string> names,
                           const std::vector<bool>& continuous, std::span<const TrainingRange> ranges, double cell_sigma,
                           Direction direction, int expand_cells = 1) {
    if (!(cell_sigma > 0.0)) throw ValidationError("grid: cell_sigma must be > 0");
    if (dims.size() != ranges.size()) throw ValidationError("grid: one training range per intervention feature required");
    GridSpec g;
    g.origin.assign(instance.begin(), instance.end());
    g.direction = direction;
    for (std::size_t j = 0; j < dims.size(); ++j) {
        const std::size_t f = dims[j];
        const std::string name = j < names.size() ? names[j] : std::to_string(f);
        if (f >= instance.size() || f >= continuous.size()) throw ValidationError("grid: intervention index out of range");
        if (!continuous[f]) throw ValidationError("grid: discrete feature '" + name + "' cannot be an intervention variable");
        const double x = instance[f];
        if (is_missing(x)) throw ValidationError("grid: instance is missing intervention variable '" + name + "'");
        const auto& r = ranges[j];
        if (!(r.std > 0.0)) throw ValidationError("grid: zero training spread for '" + name + "'");
        const double c = cell_sigma * r.std;
        int hi = static_cast<int>(std::floor((r.max + expand_cells * c - x) / c + 1e-9));
        int lo = -static_cast<int>(std::floor((x - (r.min - expand_cells * c)) / c + 1e-9));
        g.dims.push_back(f);
        g.names.push_back(name);
        g.cell.push_back(c);
        g.lo.push_back(std::min(lo, 0));
        g.hi.push_back(std::max(hi, 0));
    }
    g.validate();
    return g;
}

enum class Moves { both, increase_only, decrease_only, frozen };

inline std::string to_string(Moves m) {
    switch (m) {
        case Moves::both: return "both";
        case Moves::increase_only: return "increase";
        case Moves::decrease_only: return "decrease";
        case Moves::frozen: return "frozen";
    }
    return "both";
}
inline Moves moves_from_string(const std::string& s) {
    if (s == "both") return Moves::both;
    if (s == "increase") return Moves::increase_only;
    if (s == "decrease") return Moves::decrease_only;
    if (s == "frozen") return Moves::frozen;
    throw ValidationError("moves must be one of both|increase|decrease|frozen, got '" + s + "'");
}

// Coordinates here are in the same space as GridSpec::origin.
struct Constraints {
    std::vector<std::optional<double>> lower;  // per grid dimension
    std::vector<std::optional<double>> upper;
    std::vector<Moves> moves;
    std::optional<double> prediction_ceiling;
    std::optional<double> prediction_floor;
    std::optional<double> target;  // stop once a settled node reaches it

    void validate(std::size_t rank) const {
        if ((!lower.empty() && lower.size() != rank) || (!upper.empty() && upper.size() != rank) ||
            (!moves.empty() && moves.size() != rank))
            throw ValidationError("constraints: per-feature arrays must match the intervention count");
        if (prediction_ceiling && prediction_floor && *prediction_ceiling < *prediction_floor)
            throw ValidationError("constraints: prediction ceiling below floor");
        for (std::size_t j = 0; j < lower.size() && j < upper.size(); ++j)
            if (lower[j] && upper[j] && *upper[j] < *lower[j]) throw ValidationError("constraints: upper bound below lower bound");
    }

    bool prediction_ok(double p) const {
        if (prediction_ceiling && p > *prediction_ceiling) return false;
        if (prediction_floor && p < *prediction_floor) return false;
        return true;
    }
};

inline double coordinate(const GridSpec& g, const Node& n, std::size_t j) {
    return g.origin[g.dims[j]] + n.offsets[j] * g.cell[j];
}

inline std::vector<double> node_features(const GridSpec& g, const Node& n) {
    std::vector<double> x = g.origin;
    for (std::size_t j = 0; j < g.rank(); ++j) x[g.dims[j]] = coordinate(g, n, j);
    return x;
}

// All in-bounds, constraint-respecting +/-1 single-feature moves, ordered by
// feature index then - before +.
inline std::vector<Node> neighbors(const GridSpec& g, const Node& n, const Constraints& c = {}) {
    std::vector<Node> out;
    for (std::size_t j = 0; j < g.rank(); ++j) {
        const Moves mv = c.moves.empty() ? Moves::both : c.moves[j];
        for (int step : {-1, +1}) {
            if (mv == Moves::frozen || (mv == Moves::increase_only && step < 0) || (mv == Moves::decrease_only && step > 0))
                continue;
            const int o = n.offsets[j] + step;
            if (o < g.lo[j] || o > g.hi[j]) continue;
            Node nb = n;
            nb.offsets[j] = o;
            const double x = coordinate(g, nb, j);
            if (!c.lower.empty() && c.lower[j] && x < *c.lower[j]) continue;
            if (!c.upper.empty() && c.upper[j] && x > *c.upper[j]) continue;
            out.push_back(std::move(nb));
        }
    }
    return out;
}

struct NodeEval {
    double prediction = 0.0;
    double log_density = 0.0;
};

struct PathStep {
    Node node;
    int changed_dim = -1;  // -1 for the initial node
    int step = 0;          // +1 / -1
    double prediction = 0.0;
    double neg_log_density = 0.0;
};

struct Path {
    std::vector<PathStep> steps;

    // Sum of node log-densities over non-initial nodes.
    double log_actionability() const {
        double s = 0.0;
        for (std::size_t i = 1; i < steps.size(); ++i) s -= steps[i].neg_log_density;
        return s;
    }
    std::size_t moves() const { return steps.empty() ? 0 : steps.size() - 1; }
};

struct PlanOptions {
    std::size_t iterations = 20000;  // L
    std::size_t baseline_count = 10;
    bool weight_floor = false;  // clamp node weights at 0
    std::function<bool()> cancelled;
};

struct PlanResult {
    Path optimal;
    std::vector<Path> baselines;
    std::vector<double> baseline_log_actionability;
    double log_actionability = 0.0;
    double score = 0.0;
    double cost = 0.0;  // search cost of the destination label
    std::size_t settled = 0;
    std::size_t evaluated = 0;
    std::size_t negative_weights = 0;
    bool exhausted = false;
    bool target_reached = false;
    std::uint64_t seed = 0;
};

class SearchCancelled : public std::runtime_error {
public:
    SearchCancelled() : std::runtime_error("search cancelled") {}
};

// log-actionability(optimal) - mean log-actionability(baselines).
inline double actionability_score(const Path& optimal, std::span<const Path> baselines) {
    if (baselines.empty()) throw ValidationError("score: no baseline paths");
    auto check = [](const Path& p) {
        for (const auto& s : p.steps)
            if (!std::isfinite(s.neg_log_density)) throw ValidationError("score: non-finite node weight");
    };
    check(optimal);
    double mean = 0.0;
    for (const auto& b : baselines) {
        check(b);
        mean += b.log_actionability();
    }
    return optimal.log_actionability() - mean / static_cast<double>(baselines.size());
}

namespace detail {

class NodeIndexer {
public:
    explicit NodeIndexer(const GridSpec& g) : g_(g) {
        (void)g.node_count();
        stride_.resize(g.rank());
        std::uint64_t s = 1;
        for (std::size_t j = 0; j < g.rank(); ++j) {
            stride_[j] = s;
            s *= static_cast<std::uint64_t>(g.hi[j] - g.lo[j] + 1);
        }
    }
    std::uint64_t index(const Node& n) const {
        std::uint64_t i = 0;
        for (std::size_t j = 0; j < stride_.size(); ++j) i += static_cast<std::uint64_t>(n.offsets[j] - g_.lo[j]) * stride_[j];
        return i;
    }
    Node node(std::uint64_t i) const {
        Node n{std::vector<int>(stride_.size())};
        for (std::size_t j = stride_.size(); j-- > 0;) {
            n.offsets[j] = static_cast<int>(i / stride_[j]) + g_.lo[j];
            i %= stride_[j];
        }
        return n;
    }

private:
    const GridSpec& g_;
    std::vector<std::uint64_t> stride_;
};

// Memoized evaluator private to one search.
template <class Eval>
class NodeCache {
public:
    NodeCache(const GridSpec& g, Eval& eval) : g_(g), eval_(eval), idx_(g) {}

    const NodeEval& get(const Node& n) { return get(idx_.index(n), n); }
    const NodeEval& get(std::uint64_t key, const Node& n) {
        auto it = memo_.find(key);
        if (it != memo_.end()) return it->second;
        const auto x = node_features(g_, n);
        NodeEval e = eval_(std::span<const double>(x));
        if (-e.log_density < 0.0) ++negative_;
        return memo_.emplace(key, e).first->second;
    }
    const NodeIndexer& indexer() const { return idx_; }
    std::size_t size() const { return memo_.size(); }
    std::size_t negative() const { return negative_; }

private:
    const GridSpec& g_;
    Eval& eval_;
    NodeIndexer idx_;
    std::unordered_map<std::uint64_t, NodeEval> memo_;
    std::size_t negative_ = 0;
};

template <class Cache>
Path make_path(const GridSpec& g, Cache& cache, std::span<const Node> nodes) {
    Path p;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const NodeEval& e = cache.get(nodes[i]);
        PathStep s{nodes[i], -1, 0, e.prediction, -e.log_density};
        if (i > 0) {
            for (std::size_t j = 0; j < g.rank(); ++j)
                if (nodes[i].offsets[j] != nodes[i - 1].offsets[j]) {
                    s.changed_dim = static_cast<int>(j);
                    s.step = nodes[i].offsets[j] - nodes[i - 1].offsets[j];
                }
        }
        p.steps.push_back(std::move(s));
    }
    return p;
}

template <class Cache>
std::vector<Path> sample_baselines(const GridSpec& g, Cache& cache, const Node& start, const Node& end, std::size_t count,
                                   std::mt19937_64& rng) {
    std::vector<std::pair<std::size_t, int>> moves;
    for (std::size_t j = 0; j < g.rank(); ++j) {
        const int delta = end.offsets[j] - start.offsets[j];
        for (int t = 0; t < std::abs(delta); ++t) moves.emplace_back(j, delta > 0 ? 1 : -1);
    }
    std::vector<Path> out;
    for (std::size_t b = 0; b < count; ++b) {
        std::shuffle(moves.begin(), moves.end(), rng);
        std::vector<Node> nodes{start};
        for (const auto& [j, step] : moves) {
            Node n = nodes.back();
            n.offsets[j] += step;
            nodes.push_back(std::move(n));
        }
        out.push_back(make_path(g, cache, nodes));
    }
    return out;
}

}  // namespace detail

// Uniformly random monotone shortest lattice paths from start to end, with
// node weights from `eval`.
template <class Eval>
std::vector<Path> baseline_paths(const GridSpec& g, Eval& eval, const Node& start, const Node& end, std::size_t count,
                                 std::uint64_t seed) {
    g.validate();
    detail::NodeCache<Eval> cache(g, eval);
    std::mt19937_64 rng(derive_seed(seed, "baselines"));
    return detail::sample_baselines(g, cache, start, end, count, rng);
}

// Label-setting search: L times relax the current node's neighbors, mark it
// visited, move to the cheapest unvisited labeled node. The destination is
// the settled node with the best prediction (ties: lowest cost).
template <class Eval>
PlanResult path_search(const GridSpec& g, Eval& eval, const Constraints& constraints, const PlanOptions& opt, std::uint64_t seed) {
    g.validate();
    constraints.validate(g.rank());
    detail::NodeCache<Eval> cache(g, eval);
    const auto& idx = cache.indexer();

    struct Label {
        double cost = kInf;
        std::uint64_t pred = 0;
        std::uint64_t seq = 0;
        bool visited = false;
    };
    struct Entry {
        double cost;
        std::uint64_t seq;
        std::uint64_t key;
        bool operator>(const Entry& o) const { return cost != o.cost ? cost > o.cost : seq > o.seq; }
    };
    std::unordered_map<std::uint64_t, Label> labels;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> frontier;
    std::uint64_t seq = 0;

    PlanResult res;
    res.seed = seed;
    const Node origin{std::vector<int>(g.rank(), 0)};
    const std::uint64_t origin_key = idx.index(origin);
    labels[origin_key] = {0.0, origin_key, seq++, false};
    std::vector<std::uint64_t> settled{origin_key};

    auto meets_target = [&](double p) {
        return constraints.target && !better(g.direction, *constraints.target, p);
    };

    std::uint64_t current = origin_key;
    Node current_node = origin;
    if (meets_target(cache.get(origin_key, origin).prediction)) res.target_reached = true;

    for (std::size_t it = 0; it < opt.iterations && !res.target_reached; ++it) {
        if (opt.cancelled && (it & 63) == 0 && opt.cancelled()) throw SearchCancelled();
        const double base_cost = labels[current].cost;
        for (const Node& nb : neighbors(g, current_node, constraints)) {
            const std::uint64_t key = idx.index(nb);
            const NodeEval& e = cache.get(key, nb);
            if (!constraints.prediction_ok(e.prediction)) continue;
            Label& lab = labels[key];
            if (lab.visited) continue;
            double w = -e.log_density;
            if (opt.weight_floor) w = std::max(w, 0.0);
            const double cost = base_cost + w;
            if (lab.cost > cost) {
                lab.cost = cost;
                lab.pred = current;
                lab.seq = seq++;
                frontier.push({cost, lab.seq, key});
            }
        }
        labels[current].visited = true;

        bool found = false;
        while (!frontier.empty()) {
            const Entry top = frontier.top();
            frontier.pop();
            const Label& lab = labels[top.key];
            if (lab.visited || lab.seq != top.seq) continue;
            current = top.key;
            found = true;
            break;
        }
        if (!found) {
            res.exhausted = true;
            break;
        }
        current_node = idx.node(current);
        settled.push_back(current);
        if (meets_target(cache.get(current, current_node).prediction)) res.target_reached = true;
    }

    std::uint64_t dest = current;
    if (!res.target_reached) {
        dest = settled.front();
        for (std::uint64_t key : settled) {
            const double p = cache.get(key, idx.node(key)).prediction;
            const double best = cache.get(dest, idx.node(dest)).prediction;
            if (better(g.direction, p, best) || (p == best && labels[key].cost < labels[dest].cost)) dest = key;
        }
    }

    std::vector<Node> nodes;
    for (std::uint64_t k = dest;; k = labels[k].pred) {
        nodes.push_back(idx.node(k));
        if (k == origin_key) break;
    }
    std::reverse(nodes.begin(), nodes.end());

    res.cost = labels[dest].cost;
    res.optimal = detail::make_path(g, cache, nodes);
    std::mt19937_64 rng(derive_seed(seed, "baselines"));
    res.baselines = detail::sample_baselines(g, cache, origin, nodes.back(), opt.baseline_count, rng);
    for (const auto& b : res.baselines) res.baseline_log_actionability.push_back(b.log_actionability());
    res.log_actionability = res.optimal.log_actionability();
    res.score = res.baselines.empty() ? 0.0 : actionability_score(res.optimal, res.baselines);
    res.settled = settled.size();
    res.evaluated = cache.size();
    res.negative_weights = cache.negative();
    return res;
}

// Node evaluator backed by a regressor and a fitted surrogate. Features are
// in model coordinates (standardized continuous values, category indices).
class ModelScorer {
public:
    ModelScorer(const Regressor& regressor, const SurrogateModel& surrogate, std::vector<std::size_t> cont_positions,
                std::vector<std::size_t> disc_positions)
        : reg_(regressor), sur_(surrogate), cont_(std::move(cont_positions)), disc_(std::move(disc_positions)),
          xc_(cont_.size()), xd_(disc_.size()) {}

    NodeEval operator()(std::span<const double> features) {
        NodeEval e;
        e.prediction = reg_.predict(features);
        for (std::size_t j = 0; j < cont_.size(); ++j) xc_[j] = features[cont_[j]];
        for (std::size_t j = 0; j < disc_.size(); ++j) xd_[j] = static_cast<int>(features[disc_[j]]);
        e.log_density = sur_.node_log_density(xc_, xd_, e.prediction);
        return e;
    }

private:
    const Regressor& reg_;
    const SurrogateModel& sur_;
    std::vector<std::size_t> cont_, disc_;
    std::vector<double> xc_;
    std::vector<int> xd_;
};

}  // namespace actpath
