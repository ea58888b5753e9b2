#pragma once

// Mixture-of-experts surrogate: x_cont ~ N(m_k, diag var_k), each discrete
// feature ~ Categorical(phi_k), y ~ N(beta1_k + beta2_k.x_cont +
// beta3_k.onehot(x_disc), sigma^2), k ~ Categorical(pi). The component label
// is summed out analytically. Fitted by adaptive random-walk
// Metropolis-within-Gibbs; WBIC from a chain tempered at 1/log(n).

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "actpath/common.hpp"
#include "actpath/data.hpp"

namespace actpath {

struct SurrogateSpec {
    int k = 1;
    std::size_t d_cont = 0;
    std::vector<std::size_t> disc_levels;  // cardinality per discrete feature
    double sigma = 1.0;                     // fixed response noise std (RMSE_test / 2)
    double y_mean = 0.0;
    double y_std = 1.0;
    std::vector<std::string> cont_names;
    std::vector<std::string> disc_names;

    std::size_t onehot_width() const {
        std::size_t w = 0;
        for (auto l : disc_levels) w += l;
        return w;
    }

    void validate() const {
        if (k < 1) throw ValidationError("surrogate: K must be >= 1");
        if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ValidationError("surrogate: sigma must be > 0");
        if (!(y_std > 0.0) || !std::isfinite(y_std)) throw ValidationError("surrogate: y_std must be > 0");
        for (auto l : disc_levels)
            if (l == 0) throw ValidationError("surrogate: discrete feature with zero levels");
        if (!cont_names.empty() && cont_names.size() != d_cont) throw ValidationError("surrogate: cont_names length");
        if (!disc_names.empty() && disc_names.size() != disc_levels.size()) throw ValidationError("surrogate: disc_names length");
    }

    Json to_json() const {
        return {{"k", k},         {"d_cont", d_cont},   {"disc_levels", disc_levels}, {"sigma", sigma},
                {"y_mean", y_mean}, {"y_std", y_std}, {"cont_names", cont_names}, {"disc_names", disc_names}};
    }
    static SurrogateSpec from_json(const Json& j) {
        SurrogateSpec s;
        s.k = j.at("k").get<int>();
        s.d_cont = j.at("d_cont").get<std::size_t>();
        s.disc_levels = j.at("disc_levels").get<std::vector<std::size_t>>();
        s.sigma = j.at("sigma").get<double>();
        s.y_mean = j.at("y_mean").get<double>();
        s.y_std = j.at("y_std").get<double>();
        s.cont_names = j.value("cont_names", std::vector<std::string>{});
        s.disc_names = j.value("disc_names", std::vector<std::string>{});
        s.validate();
        return s;
    }
};

struct Component {
    std::vector<double> m;                 // d_cont
    std::vector<double> var;               // d_cont, diagonal of Sigma_k
    std::vector<std::vector<double>> phi;  // per discrete feature, simplex
    double beta1 = 0.0;
    std::vector<double> beta2;  // d_cont
    std::vector<double> beta3;  // one-hot width

    bool operator==(const Component&) const = default;
};

// One posterior draw.
struct ParamSet {
    std::vector<double> pi;
    std::vector<Component> comps;

    int k() const { return static_cast<int>(comps.size()); }
    bool operator==(const ParamSet&) const = default;

    ParamSet permuted(std::span<const std::size_t> order) const {
        ParamSet out;
        for (auto i : order) {
            out.pi.push_back(pi.at(i));
            out.comps.push_back(comps.at(i));
        }
        return out;
    }

    Json to_json() const {
        Json jc = Json::array();
        for (const auto& c : comps)
            jc.push_back({{"m", c.m}, {"var", c.var}, {"phi", c.phi}, {"beta1", c.beta1}, {"beta2", c.beta2}, {"beta3", c.beta3}});
        return {{"pi", pi}, {"components", jc}};
    }
    static ParamSet from_json(const Json& j) {
        ParamSet p;
        p.pi = j.at("pi").get<std::vector<double>>();
        for (const auto& jc : j.at("components"))
            p.comps.push_back({jc.at("m").get<std::vector<double>>(), jc.at("var").get<std::vector<double>>(),
                               jc.at("phi").get<std::vector<std::vector<double>>>(), jc.at("beta1").get<double>(),
                               jc.at("beta2").get<std::vector<double>>(), jc.at("beta3").get<std::vector<double>>()});
        return p;
    }
};

// Checks shapes and support; throws ValidationError.
inline void check_param_set(const ParamSet& p, const SurrogateSpec& spec) {
    if (p.k() != spec.k || p.pi.size() != static_cast<std::size_t>(spec.k))
        throw ValidationError("param set: expected K=" + std::to_string(spec.k));
    double s = 0.0;
    for (double w : p.pi) {
        if (!(w >= 0.0)) throw ValidationError("param set: negative mixture weight");
        s += w;
    }
    if (std::abs(s - 1.0) > 1e-9) throw ValidationError("param set: mixture weights do not sum to 1");
    for (const auto& c : p.comps) {
        if (c.m.size() != spec.d_cont || c.var.size() != spec.d_cont || c.beta2.size() != spec.d_cont)
            throw ValidationError("param set: continuous dimension mismatch");
        if (c.beta3.size() != spec.onehot_width()) throw ValidationError("param set: one-hot width mismatch");
        if (c.phi.size() != spec.disc_levels.size()) throw ValidationError("param set: discrete feature count mismatch");
        for (std::size_t f = 0; f < c.phi.size(); ++f) {
            if (c.phi[f].size() != spec.disc_levels[f]) throw ValidationError("param set: discrete level count mismatch");
            double t = 0.0;
            for (double w : c.phi[f]) t += w;
            if (std::abs(t - 1.0) > 1e-9) throw ValidationError("param set: category simplex does not sum to 1");
        }
    }
}

// ---------------------------------------------------------------------------
// densities

namespace detail {

inline void check_point(const ParamSet& p, std::span<const double> x_cont, std::span<const int> x_disc, double y) {
    if (p.comps.empty()) throw ValidationError("density: empty parameter set");
    const auto& c0 = p.comps.front();
    if (x_cont.size() != c0.m.size())
        throw ValidationError("density: expected " + std::to_string(c0.m.size()) + " continuous values, got " +
                              std::to_string(x_cont.size()));
    if (x_disc.size() != c0.phi.size())
        throw ValidationError("density: expected " + std::to_string(c0.phi.size()) + " discrete values, got " +
                              std::to_string(x_disc.size()));
    for (double v : x_cont)
        if (!std::isfinite(v)) throw ValidationError("density: non-finite continuous input");
    if (!std::isfinite(y)) throw ValidationError("density: non-finite response");
    for (std::size_t f = 0; f < x_disc.size(); ++f)
        if (x_disc[f] < 0 || static_cast<std::size_t>(x_disc[f]) >= c0.phi[f].size())
            throw ValidationError("density: category index out of range");
}

// log of component k's joint term, excluding log pi_k.
inline double component_log_term(const Component& c, double sigma, std::span<const double> x_cont, std::span<const int> x_disc,
                                  double y) {
    double t = 0.0;
    double mu = c.beta1;
    for (std::size_t j = 0; j < x_cont.size(); ++j) {
        t += log_normal_pdf(x_cont[j], c.m[j], c.var[j]);
        mu += c.beta2[j] * x_cont[j];
    }
    std::size_t offset = 0;
    for (std::size_t f = 0; f < x_disc.size(); ++f) {
        const auto level = static_cast<std::size_t>(x_disc[f]);
        t += std::log(c.phi[f][level]);
        mu += c.beta3[offset + level];
        offset += c.phi[f].size();
    }
    return t + log_normal_pdf(y, mu, sigma * sigma);
}

}  // namespace detail

// log sum_k pi_k N(x_cont | m_k, var_k) prod_f phi_kf[x_disc_f] N(y | mu_k, sigma^2)
inline double log_joint_density(const ParamSet& p, double sigma, std::span<const double> x_cont, std::span<const int> x_disc,
                                double y) {
    detail::check_point(p, x_cont, x_disc, y);
    if (!(sigma > 0.0)) throw ValidationError("density: sigma must be > 0");
    thread_local std::vector<double> terms;
    terms.resize(p.comps.size());
    for (std::size_t k = 0; k < p.comps.size(); ++k)
        terms[k] = std::log(p.pi[k]) + detail::component_log_term(p.comps[k], sigma, x_cont, x_disc, y);
    return log_sum_exp(terms);
}

inline double log_half_cauchy(double s, double scale) {
    if (!(s > 0.0)) return -kInf;
    const double r = s / scale;
    return std::log(2.0 / (std::numbers::pi * scale * (1.0 + r * r)));
}

inline double log_laplace(double b, double scale = 1.0) { return -std::log(2.0 * scale) - std::abs(b) / scale; }

// Dirichlet(1) density on a K-simplex is Gamma(K), constant on the interior.
inline double log_dirichlet_ones(std::span<const double> w) {
    for (double x : w)
        if (!(x > 0.0)) return -kInf;
    return std::lgamma(static_cast<double>(w.size()));
}

inline double log_prior_component(const Component& c, const SurrogateSpec& spec) {
    double lp = log_normal_pdf(c.beta1, spec.y_mean, 25.0 * spec.y_std * spec.y_std);
    for (double b : c.beta2) lp += log_laplace(b);
    for (double b : c.beta3) lp += log_laplace(b);
    for (double m : c.m) lp += log_normal_pdf(m, 0.0, 5.0);
    for (double v : c.var) {
        lp += log_half_cauchy(v, 2.5);
        if (lp == -kInf) return -kInf;
    }
    for (const auto& ph : c.phi) lp += log_dirichlet_ones(ph);
    return lp;
}

// beta1 ~ N(y_mean, (5 y_std)^2); beta2, beta3 ~ Laplace(0, 1); pi, phi ~
// Dirichlet(1); m ~ N(0, 5 I); var entries ~ half-Cauchy(0, 2.5).
inline double log_prior(const ParamSet& p, const SurrogateSpec& spec) {
    double lp = log_dirichlet_ones(p.pi);
    if (lp == -kInf) return -kInf;
    for (const auto& c : p.comps) {
        const double t = log_prior_component(c, spec);
        if (t == -kInf) return -kInf;
        lp += t;
    }
    return lp;
}

// ---------------------------------------------------------------------------
// training data

struct SurrogateData {
    std::size_t n = 0;
    std::size_t d = 0;
    std::size_t f = 0;
    std::vector<double> x;  // n x d
    std::vector<int> disc;  // n x f
    std::vector<double> y;

    std::span<const double> x_row(std::size_t i) const { return {x.data() + i * d, d}; }
    std::span<const int> disc_row(std::size_t i) const { return {disc.data() + i * f, f}; }

    void push(std::span<const double> xc, std::span<const int> xd, double yv) {
        if (n == 0 && x.empty()) {
            d = xc.size();
            f = xd.size();
        }
        if (xc.size() != d || xd.size() != f) throw ValidationError("surrogate data: row arity mismatch");
        x.insert(x.end(), xc.begin(), xc.end());
        disc.insert(disc.end(), xd.begin(), xd.end());
        y.push_back(yv);
        ++n;
    }
};

inline double total_log_likelihood(const ParamSet& p, double sigma, const SurrogateData& data) {
    double s = 0.0;
    for (std::size_t i = 0; i < data.n; ++i) s += log_joint_density(p, sigma, data.x_row(i), data.disc_row(i), data.y[i]);
    return s;
}

// ---------------------------------------------------------------------------
// sampler

struct McmcConfig {
    int iterations = 1500;  // including warmup
    int warmup = 500;
    std::uint64_t seed = 0;
    double target_accept = 0.3;

    void validate() const {
        if (warmup < 0 || iterations <= warmup) throw ValidationError("mcmc: need iterations > warmup >= 0");
    }
};

struct BlockStats {
    std::size_t proposed = 0;
    std::size_t accepted = 0;
    double rate() const { return proposed ? static_cast<double>(accepted) / static_cast<double>(proposed) : 0.0; }
};

struct PosteriorSamples {
    SurrogateSpec spec;
    std::vector<ParamSet> draws;      // post-warmup only
    std::vector<double> log_lik;      // untempered total log-likelihood per draw
    std::vector<double> log_post;     // log prior + log-likelihood per draw
    double temper_beta = 1.0;
    McmcConfig config;
    std::map<std::string, BlockStats> acceptance;  // post-warmup, per block type
    double split_half_z = 0.0;                     // first-vs-second-half mean log-likelihood

    Json diagnostics_json() const {
        Json acc = Json::object();
        for (const auto& [name, st] : acceptance) acc[name] = st.rate();
        return {{"temper_beta", temper_beta}, {"iterations", config.iterations}, {"warmup", config.warmup},
                {"seed", config.seed},        {"acceptance", acc},             {"split_half_z", split_half_z}};
    }
};

namespace detail {

// Additive log-ratio coordinates of a simplex (last entry is the reference).
inline std::vector<double> simplex_to_alr(std::span<const double> w) {
    std::vector<double> z(w.size() - 1);
    for (std::size_t i = 0; i + 1 < w.size(); ++i) z[i] = std::log(w[i]) - std::log(w.back());
    return z;
}

inline std::vector<double> alr_to_simplex(std::span<const double> z) {
    double mx = 0.0;
    for (double v : z) mx = std::max(mx, v);
    std::vector<double> w(z.size() + 1);
    double s = std::exp(-mx);
    for (std::size_t i = 0; i < z.size(); ++i) s += (w[i] = std::exp(z[i] - mx));
    w.back() = std::exp(-mx);
    for (double& v : w) v /= s;
    return w;
}

// log |d simplex / d alr| = sum log w.
inline double alr_log_jacobian(std::span<const double> w) {
    double s = 0.0;
    for (double v : w) s += std::log(v);
    return s;
}

struct AdaptiveScale {
    double log_scale = std::log(0.1);
    std::size_t proposed = 0;
    std::size_t accepted = 0;

    double scale() const { return std::exp(log_scale); }
    void adapt(bool accepted_now, double target, std::size_t iteration) {
        const double gamma = std::min(0.5, 3.0 / std::pow(static_cast<double>(iteration + 1), 0.6));
        log_scale += gamma * ((accepted_now ? 1.0 : 0.0) - target);
        log_scale = std::clamp(log_scale, -20.0, 5.0);
    }
};

class Sampler {
public:
    Sampler(const SurrogateData& data, SurrogateSpec spec, double temper_beta, McmcConfig cfg)
        : data_(data), spec_(std::move(spec)), beta_(temper_beta), cfg_(cfg), rng_(cfg.seed),
          n_(data.n), k_(static_cast<std::size_t>(spec_.k)) {
        onehot_offsets_.resize(spec_.disc_levels.size());
        std::size_t off = 0;
        for (std::size_t f = 0; f < spec_.disc_levels.size(); ++f) {
            onehot_offsets_[f] = off;
            off += spec_.disc_levels[f];
        }
    }

    PosteriorSamples run() {
        initialize();
        PosteriorSamples out;
        out.spec = spec_;
        out.temper_beta = beta_;
        out.config = cfg_;
        const auto draws = static_cast<std::size_t>(cfg_.iterations - cfg_.warmup);
        out.draws.reserve(draws);
        for (int it = 0; it < cfg_.iterations; ++it) {
            const bool warm = it < cfg_.warmup;
            sweep(static_cast<std::size_t>(it), warm);
            if (!warm) {
                out.draws.push_back(p_);
                out.log_lik.push_back(loglik_);
                out.log_post.push_back(log_prior(p_, spec_) + loglik_);
            }
        }
        for (const auto& [name, st] : post_stats_) out.acceptance[name] = st;
        const std::size_t h = out.log_lik.size() / 2;
        if (h >= 2) {
            auto moments = [](std::span<const double> v) {
                const double m = mean_of(v);
                double s = 0.0;
                for (double x : v) s += (x - m) * (x - m);
                return std::pair{m, s / static_cast<double>(v.size() - 1)};
            };
            auto [m1, v1] = moments(std::span<const double>(out.log_lik).first(h));
            auto [m2, v2] = moments(std::span<const double>(out.log_lik).subspan(h));
            const double se = std::sqrt(v1 / static_cast<double>(h) + v2 / static_cast<double>(out.log_lik.size() - h));
            out.split_half_z = se > 0.0 ? (m1 - m2) / se : 0.0;
        }
        return out;
    }

private:
    // ---- likelihood caches -------------------------------------------------

    // x-part (continuous + discrete) of component k for row i.
    double x_term(const Component& c, std::size_t i) const {
        double t = 0.0;
        auto xr = data_.x_row(i);
        for (std::size_t j = 0; j < xr.size(); ++j) t += log_normal_pdf(xr[j], c.m[j], c.var[j]);
        auto dr = data_.disc_row(i);
        for (std::size_t f = 0; f < dr.size(); ++f) t += std::log(c.phi[f][static_cast<std::size_t>(dr[f])]);
        return t;
    }

    double mu_of(const Component& c, std::size_t i) const {
        double mu = c.beta1;
        auto xr = data_.x_row(i);
        for (std::size_t j = 0; j < xr.size(); ++j) mu += c.beta2[j] * xr[j];
        auto dr = data_.disc_row(i);
        for (std::size_t f = 0; f < dr.size(); ++f) mu += c.beta3[onehot_offsets_[f] + static_cast<std::size_t>(dr[f])];
        return mu;
    }

    double y_term(double mu, std::size_t i) const { return log_normal_pdf(data_.y[i], mu, spec_.sigma * spec_.sigma); }

    void rebuild_caches() {
        xpart_.assign(n_ * k_, 0.0);
        mu_.assign(n_ * k_, 0.0);
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t k = 0; k < k_; ++k) {
                xpart_[i * k_ + k] = x_term(p_.comps[k], i);
                mu_[i * k_ + k] = mu_of(p_.comps[k], i);
            }
        logpi_.resize(k_);
        for (std::size_t k = 0; k < k_; ++k) logpi_[k] = std::log(p_.pi[k]);
        loglik_ = loglik_with(logpi_, k_, {}, {});
    }

    // Total log-likelihood, optionally overriding component `kk`'s x-part and
    // mean with the given columns.
    double loglik_with(std::span<const double> logpi, std::size_t kk, std::span<const double> xcol,
                       std::span<const double> mucol) const {
        double total = 0.0;
        const double s2 = spec_.sigma * spec_.sigma;
        double terms[64];
        std::vector<double> heap;
        double* t = terms;
        if (k_ > 64) {
            heap.resize(k_);
            t = heap.data();
        }
        for (std::size_t i = 0; i < n_; ++i) {
            double mx = -kInf;
            for (std::size_t k = 0; k < k_; ++k) {
                const bool over = k == kk;
                const double xp = over && !xcol.empty() ? xcol[i] : xpart_[i * k_ + k];
                const double mu = over && !mucol.empty() ? mucol[i] : mu_[i * k_ + k];
                t[k] = logpi[k] + xp + log_normal_pdf(data_.y[i], mu, s2);
                mx = std::max(mx, t[k]);
            }
            if (!std::isfinite(mx)) return -kInf;
            double s = 0.0;
            for (std::size_t k = 0; k < k_; ++k) s += std::exp(t[k] - mx);
            total += mx + std::log(s);
        }
        return total;
    }

    // ---- initialization -----------------------------------------------------

    void initialize() {
        if (!(beta_ > 0.0 && beta_ <= 1.0)) throw ValidationError("mcmc: temper_beta must lie in (0, 1]");
        if (n_ < 10 * k_)
            throw ValidationError("mcmc: need at least " + std::to_string(10 * k_) + " training rows for K=" +
                                  std::to_string(k_) + ", got " + std::to_string(n_));
        if (data_.d != spec_.d_cont || data_.f != spec_.disc_levels.size())
            throw ValidationError("mcmc: training data shape does not match the surrogate spec");
        const std::size_t d = spec_.d_cont;
        std::vector<double> mean(d, 0.0), var(d, 0.0);
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = 0; j < d; ++j) mean[j] += data_.x[i * d + j] / static_cast<double>(n_);
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = 0; j < d; ++j) var[j] += std::pow(data_.x[i * d + j] - mean[j], 2) / static_cast<double>(n_);
        for (double& v : var) v = std::max(v, 1e-6);

        std::uniform_real_distribution<double> unif(0.0, 1.0);
        for (int attempt = 0; attempt < 100; ++attempt) {
            const auto [means, assign] = seeded_means(unif);
            p_ = ParamSet{};
            for (std::size_t k = 0; k < k_; ++k) p_.comps.push_back(init_component(k, means, assign, var));
            std::vector<double> cnt(k_, 1.0);
            for (auto a : assign) cnt[a] += 1.0;
            for (double c : cnt) p_.pi.push_back(c / static_cast<double>(n_ + k_));
            rebuild_caches();
            logprior_ = log_prior(p_, spec_);
            if (std::isfinite(loglik_) && std::isfinite(logprior_)) {
                init_scales();
                return;
            }
        }
        throw RuntimeFailure("mcmc: non-finite posterior at initialization after 100 attempts (K=" + std::to_string(k_) + ")");
    }

    // Component start from its k-means cluster: within-cluster variance,
    // smoothed level frequencies and a ridge least-squares fit of the response.
    Component init_component(std::size_t k, const std::vector<double>& means, const std::vector<std::size_t>& assign,
                             const std::vector<double>& pooled_var) const {
        const std::size_t d = spec_.d_cont;
        const std::size_t w = spec_.onehot_width();
        Component c;
        c.m.assign(means.begin() + static_cast<std::ptrdiff_t>(k * d), means.begin() + static_cast<std::ptrdiff_t>(k * d + d));
        c.var.assign(d, 0.0);
        for (auto l : spec_.disc_levels) c.phi.emplace_back(l, 1.0);
        const std::size_t p = 1 + d + w;
        Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
        Eigen::VectorXd xty = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
        Eigen::VectorXd row(static_cast<Eigen::Index>(p));
        std::size_t members = 0;
        for (std::size_t i = 0; i < n_; ++i) {
            if (assign[i] != k) continue;
            ++members;
            row.setZero();
            row[0] = 1.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double v = data_.x[i * d + j];
                c.var[j] += (v - c.m[j]) * (v - c.m[j]);
                row[static_cast<Eigen::Index>(1 + j)] = v;
            }
            std::size_t offset = 0;
            for (std::size_t f = 0; f < data_.f; ++f) {
                const auto level = static_cast<std::size_t>(data_.disc[i * data_.f + f]);
                c.phi[f][level] += 1.0;
                row[static_cast<Eigen::Index>(1 + d + offset + level)] = 1.0;
                offset += spec_.disc_levels[f];
            }
            xtx.noalias() += row * row.transpose();
            xty += row * (data_.y[i] - spec_.y_mean);
        }
        for (std::size_t j = 0; j < d; ++j)
            c.var[j] = members > 1 ? std::max(c.var[j] / static_cast<double>(members), 1e-3 * pooled_var[j]) : pooled_var[j];
        for (auto& ph : c.phi) {
            double t = 0.0;
            for (double v : ph) t += v;
            for (double& v : ph) v /= t;
        }
        xtx += Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
        const Eigen::VectorXd b = xtx.ldlt().solve(xty);
        c.beta1 = spec_.y_mean + b[0];
        c.beta2.resize(d);
        for (std::size_t j = 0; j < d; ++j) c.beta2[j] = b[static_cast<Eigen::Index>(1 + j)];
        c.beta3.resize(w);
        for (std::size_t j = 0; j < w; ++j) c.beta3[j] = b[static_cast<Eigen::Index>(1 + d + j)];
        return c;
    }

    // k-means++ seeding refined by Lloyd iterations; best of several restarts
    // by within-cluster sum of squares.
    std::pair<std::vector<double>, std::vector<std::size_t>> seeded_means(std::uniform_real_distribution<double>& unif) {
        const std::size_t d = spec_.d_cont;
        auto sq = [&](std::size_t i, const double* c) {
            double s = 0.0;
            for (std::size_t j = 0; j < d; ++j) s += (data_.x[i * d + j] - c[j]) * (data_.x[i * d + j] - c[j]);
            return s;
        };
        std::vector<double> best_means;
        std::vector<std::size_t> best_assign;
        double best_inertia = kInf;
        for (int restart = 0; restart < 10; ++restart) {
            std::vector<double> means;
            auto first = static_cast<std::size_t>(unif(rng_) * static_cast<double>(n_)) % n_;
            means.insert(means.end(), data_.x.begin() + static_cast<std::ptrdiff_t>(first * d),
                         data_.x.begin() + static_cast<std::ptrdiff_t>(first * d + d));
            std::vector<double> dist(n_, kInf);
            while (means.size() < k_ * d) {
                double total = 0.0;
                for (std::size_t i = 0; i < n_; ++i) {
                    dist[i] = std::min(dist[i], sq(i, &means[means.size() - d]));
                    total += dist[i];
                }
                std::size_t pick = 0;
                if (total > 0.0) {
                    double u = unif(rng_) * total;
                    for (pick = 0; pick + 1 < n_; ++pick) {
                        u -= dist[pick];
                        if (u <= 0.0) break;
                    }
                } else {
                    pick = static_cast<std::size_t>(unif(rng_) * static_cast<double>(n_)) % n_;
                }
                means.insert(means.end(), data_.x.begin() + static_cast<std::ptrdiff_t>(pick * d),
                             data_.x.begin() + static_cast<std::ptrdiff_t>(pick * d + d));
            }
            std::vector<std::size_t> assign(n_, 0);
            double inertia = kInf;
            for (int lloyd = 0; lloyd < 20; ++lloyd) {
                inertia = 0.0;
                for (std::size_t i = 0; i < n_; ++i) {
                    double best = kInf;
                    for (std::size_t k = 0; k < k_; ++k)
                        if (const double s = sq(i, &means[k * d]); s < best) best = s, assign[i] = k;
                    inertia += best;
                }
                std::vector<double> sum(k_ * d, 0.0);
                std::vector<std::size_t> cnt(k_, 0);
                for (std::size_t i = 0; i < n_; ++i) {
                    ++cnt[assign[i]];
                    for (std::size_t j = 0; j < d; ++j) sum[assign[i] * d + j] += data_.x[i * d + j];
                }
                for (std::size_t k = 0; k < k_; ++k)
                    if (cnt[k] > 0)
                        for (std::size_t j = 0; j < d; ++j) means[k * d + j] = sum[k * d + j] / static_cast<double>(cnt[k]);
            }
            if (inertia < best_inertia) {
                best_inertia = inertia;
                best_means = std::move(means);
                best_assign = assign;
            }
        }
        return {best_means, best_assign};
    }

    void init_scales() {
        scales_.clear();
        const double beta_scale = 0.05 * spec_.sigma;
        scale("pi").log_scale = std::log(0.1);
        for (std::size_t k = 0; k < k_; ++k) {
            scale(key("m", k)).log_scale = std::log(0.05);
            scale(key("log_var", k)).log_scale = std::log(0.05);
            for (std::size_t f = 0; f < spec_.disc_levels.size(); ++f) scale(key("phi", k, f)).log_scale = std::log(0.1);
            scale(key("beta1", k)).log_scale = std::log(beta_scale);
            for (std::size_t j = 0; j < spec_.d_cont; ++j) scale(key("beta2", k, j)).log_scale = std::log(beta_scale);
            for (std::size_t s = 0; s < spec_.onehot_width(); ++s) scale(key("beta3", k, s)).log_scale = std::log(beta_scale);
        }
    }

    static std::string key(const char* name, std::size_t k, std::size_t j = SIZE_MAX) {
        std::string s = std::string(name) + "/" + std::to_string(k);
        if (j != SIZE_MAX) s += "/" + std::to_string(j);
        return s;
    }
    AdaptiveScale& scale(const std::string& k) { return scales_[k]; }

    // ---- one Metropolis decision -------------------------------------------

    bool decide(double log_ratio) {
        if (std::isnan(log_ratio)) return false;
        if (log_ratio >= 0.0) return true;
        return std::log(unif_(rng_)) < log_ratio;
    }

    void record(const std::string& skey, const char* type, bool acc, bool warm, std::size_t it) {
        auto& sc = scales_[skey];
        if (warm) sc.adapt(acc, cfg_.target_accept, it);
        else {
            auto& st = post_stats_[type];
            ++st.proposed;
            st.accepted += acc ? 1 : 0;
        }
    }

    double gauss() { return normal_(rng_); }

    // ---- blocks -------------------------------------------------------------

    void update_pi(std::size_t it, bool warm) {
        if (k_ < 2) return;
        const std::string sk = "pi";
        auto z = simplex_to_alr(p_.pi);
        const double s = scales_[sk].scale();
        for (double& v : z) v += s * gauss();
        auto w = alr_to_simplex(z);
        for (double v : w)
            if (!(v > 0.0)) {
                record(sk, "pi", false, warm, it);
                return;
            }
        std::vector<double> lpi(k_);
        for (std::size_t k = 0; k < k_; ++k) lpi[k] = std::log(w[k]);
        const double ll = loglik_with(lpi, k_, {}, {});
        const double lp_new = log_dirichlet_ones(w), lp_old = log_dirichlet_ones(p_.pi);
        const double ratio = (lp_new + alr_log_jacobian(w) + beta_ * ll) - (lp_old + alr_log_jacobian(p_.pi) + beta_ * loglik_);
        const bool acc = decide(ratio);
        if (acc) {
            p_.pi = std::move(w);
            logpi_ = std::move(lpi);
            loglik_ = ll;
        }
        record(sk, "pi", acc, warm, it);
    }

    // Proposes a change to component k that alters its x-part.
    template <class Mutate>
    void update_x_block(std::size_t k, const std::string& sk, const char* type, Mutate mutate, std::size_t it, bool warm) {
        Component prop = p_.comps[k];
        const double log_jac_old = mutate(prop, scales_[sk].scale());
        if (log_jac_old == -kInf) {
            record(sk, type, false, warm, it);
            return;
        }
        const double prior_new = log_prior_component(prop, spec_);
        if (prior_new == -kInf) {
            record(sk, type, false, warm, it);
            return;
        }
        std::vector<double>& col = scratch_;
        col.resize(n_);
        for (std::size_t i = 0; i < n_; ++i) col[i] = x_term(prop, i);
        const double ll = loglik_with(logpi_, k, col, {});
        const double prior_old = log_prior_component(p_.comps[k], spec_);
        // mutate() returns log J(new) - log J(old) for transformed blocks.
        const double ratio = prior_new - prior_old + log_jac_old + beta_ * (ll - loglik_);
        const bool acc = decide(ratio);
        if (acc) {
            p_.comps[k] = std::move(prop);
            for (std::size_t i = 0; i < n_; ++i) xpart_[i * k_ + k] = col[i];
            loglik_ = ll;
        }
        record(sk, type, acc, warm, it);
    }

    // Single coordinate of (beta1, beta2, beta3) for component k. `coef`
    // selects the coordinate; design(i) is its regressor value in row i.
    template <class Design>
    void update_beta(std::size_t k, double& coef, const std::string& sk, Design design, std::size_t it, bool warm) {
        const double old = coef;
        const double delta = scales_[sk].scale() * gauss();
        const double prior_old = log_prior_component(p_.comps[k], spec_);
        coef = old + delta;
        const double prior_new = log_prior_component(p_.comps[k], spec_);
        std::vector<double>& col = scratch_;
        col.resize(n_);
        for (std::size_t i = 0; i < n_; ++i) col[i] = mu_[i * k_ + k] + delta * design(i);
        const double ll = loglik_with(logpi_, k, {}, col);
        const bool acc = decide(prior_new - prior_old + beta_ * (ll - loglik_));
        if (acc) {
            for (std::size_t i = 0; i < n_; ++i) mu_[i * k_ + k] = col[i];
            loglik_ = ll;
        } else {
            coef = old;
        }
        record(sk, "beta", acc, warm, it);
    }

    void sweep(std::size_t it, bool warm) {
        const std::size_t d = spec_.d_cont;
        // Refresh mean caches from scratch each sweep to avoid drift from the
        // incremental beta updates.
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t k = 0; k < k_; ++k) mu_[i * k_ + k] = mu_of(p_.comps[k], i);
        loglik_ = loglik_with(logpi_, k_, {}, {});

        update_pi(it, warm);
        for (std::size_t k = 0; k < k_; ++k) {
            update_x_block(
                k, key("m", k), "m",
                [&](Component& c, double s) {
                    for (double& v : c.m) v += s * gauss();
                    return 0.0;
                },
                it, warm);
            update_x_block(
                k, key("log_var", k), "log_var",
                [&](Component& c, double s) {
                    double jac = 0.0;
                    for (double& v : c.var) {
                        const double nv = v * std::exp(s * gauss());
                        jac += std::log(nv) - std::log(v);
                        v = nv;
                    }
                    for (double v : c.var)
                        if (!(v > 0.0) || !std::isfinite(v)) return -kInf;
                    return jac;
                },
                it, warm);
            for (std::size_t f = 0; f < spec_.disc_levels.size(); ++f) {
                if (spec_.disc_levels[f] < 2) continue;
                update_x_block(
                    k, key("phi", k, f), "phi",
                    [&, f](Component& c, double s) {
                        const double jac_old = alr_log_jacobian(c.phi[f]);
                        auto z = simplex_to_alr(c.phi[f]);
                        for (double& v : z) v += s * gauss();
                        c.phi[f] = alr_to_simplex(z);
                        for (double v : c.phi[f])
                            if (!(v > 0.0)) return -kInf;
                        return alr_log_jacobian(c.phi[f]) - jac_old;
                    },
                    it, warm);
            }
            Component& c = p_.comps[k];
            update_beta(k, c.beta1, key("beta1", k), [](std::size_t) { return 1.0; }, it, warm);
            for (std::size_t j = 0; j < d; ++j)
                update_beta(k, c.beta2[j], key("beta2", k, j), [&, j](std::size_t i) { return data_.x[i * d + j]; }, it, warm);
            for (std::size_t f = 0; f < spec_.disc_levels.size(); ++f)
                for (std::size_t l = 0; l < spec_.disc_levels[f]; ++l) {
                    const std::size_t slot = onehot_offsets_[f] + l;
                    update_beta(k, c.beta3[slot], key("beta3", k, slot),
                                [&, f, l](std::size_t i) { return data_.disc[i * data_.f + f] == static_cast<int>(l) ? 1.0 : 0.0; },
                                it, warm);
                }
        }
    }

    const SurrogateData& data_;
    SurrogateSpec spec_;
    double beta_;
    McmcConfig cfg_;
    std::mt19937_64 rng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> unif_{0.0, 1.0};
    std::size_t n_, k_;
    std::vector<std::size_t> onehot_offsets_;

    ParamSet p_;
    std::vector<double> xpart_, mu_, logpi_, scratch_;
    double loglik_ = 0.0;
    double logprior_ = 0.0;
    std::map<std::string, AdaptiveScale> scales_;
    std::map<std::string, BlockStats> post_stats_;
};

}  // namespace detail

inline PosteriorSamples fit_mcmc(const SurrogateData& data, const SurrogateSpec& spec, double temper_beta, const McmcConfig& cfg) {
    spec.validate();
    cfg.validate();
    return detail::Sampler(data, spec, temper_beta, cfg).run();
}

inline double wbic_temperature(std::size_t n) {
    if (n < 3) throw ValidationError("wbic: need at least 3 training rows");
    return 1.0 / std::log(static_cast<double>(n));
}

// Mean over draws of the total negative log-likelihood. The draws must come
// from a chain tempered at exactly 1/log(n).
inline double wbic(const PosteriorSamples& samples, const SurrogateData& data) {
    const double want = wbic_temperature(data.n);
    if (std::abs(samples.temper_beta - want) > 1e-12 * want)
        throw ValidationError("wbic: samples tempered at " + format_double(samples.temper_beta) + ", expected 1/log(" +
                              std::to_string(data.n) + ") = " + format_double(want));
    if (samples.draws.empty()) throw ValidationError("wbic: no draws");
    double s = 0.0;
    for (const auto& p : samples.draws) s += -total_log_likelihood(p, samples.spec.sigma, data);
    const double w = s / static_cast<double>(samples.draws.size());
    if (!std::isfinite(w)) throw RuntimeFailure("wbic: non-finite value");
    return w;
}

// ---------------------------------------------------------------------------
// fitted surrogate

enum class DensityMode { sample_average, map_sample };

inline std::string to_string(DensityMode m) { return m == DensityMode::sample_average ? "sample-average" : "map-sample"; }
inline DensityMode density_mode_from_string(const std::string& s) {
    if (s == "sample-average") return DensityMode::sample_average;
    if (s == "map-sample") return DensityMode::map_sample;
    throw ValidationError("unknown density_mode '" + s + "' (expected sample-average or map-sample)");
}

struct WbicEntry {
    int k = 0;
    double wbic = 0.0;
    Json diagnostics;
};

// Precomputed per-draw constants for fast density evaluation.
class CompiledDensity {
public:
    CompiledDensity() = default;
    CompiledDensity(const std::vector<ParamSet>& draws, double sigma) {
        if (draws.empty()) return;
        k_ = draws.front().comps.size();
        d_ = draws.front().comps.front().m.size();
        for (const auto& ph : draws.front().comps.front().phi) {
            level_offsets_.push_back(onehot_);
            onehot_ += ph.size();
        }
        y_const_ = -0.5 * (kLog2Pi + std::log(sigma * sigma));
        y_inv_ = 1.0 / (sigma * sigma);
        for (const auto& p : draws)
            for (std::size_t k = 0; k < k_; ++k) {
                const auto& c = p.comps[k];
                double cst = std::log(p.pi[k]);
                for (double v : c.var) cst += -0.5 * (kLog2Pi + std::log(v));
                constant_.push_back(cst);
                beta1_.push_back(c.beta1);
                for (std::size_t j = 0; j < d_; ++j) {
                    m_.push_back(c.m[j]);
                    inv_var_.push_back(1.0 / c.var[j]);
                    beta2_.push_back(c.beta2[j]);
                }
                for (const auto& ph : c.phi)
                    for (double w : ph) log_phi_.push_back(std::log(w));
                beta3_.insert(beta3_.end(), c.beta3.begin(), c.beta3.end());
            }
        draws_ = draws.size();
    }

    std::size_t draw_count() const { return draws_; }

    // log mean_s exp(log_joint_density(draw_s, ...)).
    double log_mean_density(std::span<const double> x, std::span<const int> disc, double y) const {
        thread_local std::vector<double> terms;
        terms.resize(draws_ * k_);
        for (std::size_t s = 0; s < draws_; ++s) {
            for (std::size_t k = 0; k < k_; ++k) {
                const std::size_t c = s * k_ + k;
                double t = constant_[c];
                double mu = beta1_[c];
                const double* m = &m_[c * d_];
                const double* iv = &inv_var_[c * d_];
                const double* b2 = &beta2_[c * d_];
                double q = 0.0;
                for (std::size_t j = 0; j < d_; ++j) {
                    const double dx = x[j] - m[j];
                    q += dx * dx * iv[j];
                    mu += b2[j] * x[j];
                }
                t -= 0.5 * q;
                for (std::size_t f = 0; f < disc.size(); ++f) {
                    const std::size_t slot = level_offsets_[f] + static_cast<std::size_t>(disc[f]);
                    t += log_phi_[c * onehot_ + slot];
                    mu += beta3_[c * onehot_ + slot];
                }
                const double dy = y - mu;
                t += y_const_ - 0.5 * dy * dy * y_inv_;
                terms[c] = t;
            }
        }
        return log_sum_exp(terms) - std::log(static_cast<double>(draws_));
    }

private:
    std::size_t draws_ = 0, k_ = 0, d_ = 0, onehot_ = 0;
    std::vector<std::size_t> level_offsets_;
    double y_const_ = 0.0, y_inv_ = 1.0;
    std::vector<double> constant_, beta1_, m_, inv_var_, beta2_, log_phi_, beta3_;
};

class SurrogateModel {
public:
    SurrogateModel() = default;
    SurrogateModel(SurrogateSpec spec, std::vector<ParamSet> draws, ParamSet map_draw, DensityMode mode)
        : spec_(std::move(spec)), draws_(std::move(draws)), map_draw_(std::move(map_draw)), mode_(mode) {
        spec_.validate();
        if (draws_.empty()) throw ValidationError("surrogate: no planning draws");
        for (const auto& p : draws_) check_param_set(p, spec_);
        check_param_set(map_draw_, spec_);
        compile();
    }

    bool fitted() const { return !draws_.empty(); }
    const SurrogateSpec& spec() const { return spec_; }
    const std::vector<ParamSet>& draws() const { return draws_; }
    const ParamSet& map_draw() const { return map_draw_; }
    DensityMode density_mode() const { return mode_; }
    void set_density_mode(DensityMode m) { mode_ = m; }

    std::vector<WbicEntry> wbic_table;
    int chosen_k_wbic = 0;
    std::uint64_t seed = 0;
    McmcConfig mcmc;
    Json diagnostics = Json::object();

    double chosen_wbic() const {
        for (const auto& e : wbic_table)
            if (e.k == spec_.k) return e.wbic;
        return std::numeric_limits<double>::quiet_NaN();
    }

    double node_log_density(std::span<const double> x_cont, std::span<const int> x_disc, double y) const {
        if (!fitted()) throw RuntimeFailure("surrogate: model not fitted");
        detail::check_point(map_draw_, x_cont, x_disc, y);
        return mode_ == DensityMode::sample_average ? avg_.log_mean_density(x_cont, x_disc, y)
                                                    : map_.log_mean_density(x_cont, x_disc, y);
    }

    Json to_json() const {
        Json table = Json::array();
        for (const auto& e : wbic_table) table.push_back({{"k", e.k}, {"wbic", e.wbic}, {"diagnostics", e.diagnostics}});
        Json draws = Json::array();
        for (const auto& p : draws_) draws.push_back(p.to_json());
        return {{"format", "actpath.surrogate/1"},
                {"spec", spec_.to_json()},
                {"sigma", spec_.sigma},
                {"density_mode", to_string(mode_)},
                {"seed", seed},
                {"mcmc", {{"iterations", mcmc.iterations}, {"warmup", mcmc.warmup}, {"target_accept", mcmc.target_accept}}},
                {"wbic", {{"chosen_k", spec_.k}, {"table", table}}},
                {"diagnostics", diagnostics},
                {"map_draw", map_draw_.to_json()},
                {"draws", draws}};
    }

    static SurrogateModel from_json(const Json& j) {
        if (j.value("format", std::string{}) != "actpath.surrogate/1") throw ValidationError("surrogate artifact: unknown format");
        std::vector<ParamSet> draws;
        for (const auto& d : j.at("draws")) draws.push_back(ParamSet::from_json(d));
        SurrogateModel m(SurrogateSpec::from_json(j.at("spec")), std::move(draws), ParamSet::from_json(j.at("map_draw")),
                         density_mode_from_string(j.at("density_mode").get<std::string>()));
        m.seed = j.value("seed", std::uint64_t{0});
        if (j.contains("mcmc")) {
            m.mcmc.iterations = j["mcmc"].value("iterations", m.mcmc.iterations);
            m.mcmc.warmup = j["mcmc"].value("warmup", m.mcmc.warmup);
            m.mcmc.target_accept = j["mcmc"].value("target_accept", m.mcmc.target_accept);
        }
        for (const auto& e : j.at("wbic").at("table"))
            m.wbic_table.push_back({e.at("k").get<int>(), e.at("wbic").get<double>(), e.value("diagnostics", Json::object())});
        m.diagnostics = j.value("diagnostics", Json::object());
        return m;
    }

private:
    void compile() {
        avg_ = CompiledDensity(draws_, spec_.sigma);
        map_ = CompiledDensity({map_draw_}, spec_.sigma);
    }

    SurrogateSpec spec_;
    std::vector<ParamSet> draws_;
    ParamSet map_draw_;
    DensityMode mode_ = DensityMode::sample_average;
    CompiledDensity avg_, map_;
};

// Evenly spaced subset of at most `count` draws.
inline std::vector<ParamSet> thin_draws(const std::vector<ParamSet>& draws, std::size_t count) {
    if (count == 0 || draws.size() <= count) return draws;
    std::vector<ParamSet> out;
    for (std::size_t s = 0; s < count; ++s) out.push_back(draws[s * draws.size() / count]);
    return out;
}

inline SurrogateModel make_surrogate_model(const PosteriorSamples& samples, DensityMode mode, std::size_t density_draws) {
    if (samples.draws.empty()) throw RuntimeFailure("surrogate: chain produced no draws");
    const auto best = static_cast<std::size_t>(std::max_element(samples.log_post.begin(), samples.log_post.end()) - samples.log_post.begin());
    SurrogateModel m(samples.spec, thin_draws(samples.draws, density_draws), samples.draws[best], mode);
    m.seed = samples.config.seed;
    m.mcmc = samples.config;
    return m;
}

struct SelectionConfig {
    std::vector<int> k_range{1, 2, 3, 4, 5, 6, 7, 8};
    McmcConfig mcmc;
    DensityMode density_mode = DensityMode::sample_average;
    std::size_t density_draws = 64;
};

// For each K: tempered chain + WBIC. Picks argmin (ties -> smaller K) and
// fits an untempered chain at that K for planning.
inline SurrogateModel select_k(const SurrogateData& data, SurrogateSpec base, const SelectionConfig& cfg) {
    if (cfg.k_range.empty()) throw ValidationError("select_k: empty K range");
    std::vector<int> ks = cfg.k_range;
    std::sort(ks.begin(), ks.end());
    ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
    const double beta = wbic_temperature(data.n);

    std::vector<WbicEntry> table(ks.size());
    std::vector<std::string> failures(ks.size());
    parallel_for(ks.size(), [&](std::size_t i) {
        SurrogateSpec spec = base;
        spec.k = ks[i];
        McmcConfig mc = cfg.mcmc;
        mc.seed = derive_seed(cfg.mcmc.seed, "wbic-chain", static_cast<std::uint64_t>(ks[i]));
        try {
            auto samples = fit_mcmc(data, spec, beta, mc);
            table[i] = {ks[i], wbic(samples, data), samples.diagnostics_json()};
        } catch (const std::exception& e) {
            failures[i] = e.what();
        }
    });
    for (std::size_t i = 0; i < ks.size(); ++i)
        if (!failures[i].empty()) throw RuntimeFailure("select_k: chain for K=" + std::to_string(ks[i]) + " failed: " + failures[i]);

    std::size_t best = 0;
    for (std::size_t i = 1; i < table.size(); ++i)
        if (table[i].wbic < table[best].wbic) best = i;

    SurrogateSpec spec = base;
    spec.k = ks[best];
    McmcConfig mc = cfg.mcmc;
    mc.seed = derive_seed(cfg.mcmc.seed, "planning-chain", static_cast<std::uint64_t>(spec.k));
    const auto samples = fit_mcmc(data, spec, 1.0, mc);
    SurrogateModel model = make_surrogate_model(samples, cfg.density_mode, cfg.density_draws);
    model.wbic_table = std::move(table);
    model.chosen_k_wbic = spec.k;
    model.seed = cfg.mcmc.seed;
    model.diagnostics = samples.diagnostics_json();
    return model;
}

// ---------------------------------------------------------------------------
// MCMC diagnostics

// Effective sample size via Geyer's initial positive sequence.
inline double effective_sample_size(std::span<const double> chain) {
    const std::size_t n = chain.size();
    if (n < 4) return static_cast<double>(n);
    const double m = mean_of(chain);
    double c0 = 0.0;
    for (double x : chain) c0 += (x - m) * (x - m);
    c0 /= static_cast<double>(n);
    if (!(c0 > 0.0)) return static_cast<double>(n);
    auto acf = [&](std::size_t lag) {
        double s = 0.0;
        for (std::size_t i = 0; i + lag < n; ++i) s += (chain[i] - m) * (chain[i + lag] - m);
        return s / static_cast<double>(n) / c0;
    };
    double tau = -1.0;
    for (std::size_t lag = 0; lag + 1 < n; lag += 2) {
        const double pair = acf(lag) + acf(lag + 1);
        if (pair <= 0.0) break;
        tau += 2.0 * pair;
    }
    tau = std::max(tau, 1.0 / static_cast<double>(n));
    return static_cast<double>(n) / tau;
}

}  // namespace actpath
