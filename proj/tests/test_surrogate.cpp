#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "actpath/surrogate.hpp"

using namespace actpath;

namespace {

constexpr double kPi = std::numbers::pi;

SurrogateSpec spec_for(int k, std::size_t d, std::vector<std::size_t> levels = {}, double sigma = 1.0) {
    SurrogateSpec s;
    s.k = k;
    s.d_cont = d;
    s.disc_levels = std::move(levels);
    s.sigma = sigma;
    return s;
}

std::vector<double> random_simplex(std::size_t n, std::mt19937_64& rng) {
    std::gamma_distribution<double> g(2.0, 1.0);
    std::vector<double> w(n);
    double t = 0.0;
    for (double& v : w) t += (v = g(rng));
    for (double& v : w) v /= t;
    return w;
}

ParamSet random_params(const SurrogateSpec& spec, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.5, 2.0);
    ParamSet p;
    p.pi = random_simplex(static_cast<std::size_t>(spec.k), rng);
    for (int k = 0; k < spec.k; ++k) {
        Component c;
        for (std::size_t j = 0; j < spec.d_cont; ++j) {
            c.m.push_back(2.0 * z(rng));
            c.var.push_back(u(rng));
            c.beta2.push_back(0.5 * z(rng));
        }
        for (auto l : spec.disc_levels) c.phi.push_back(random_simplex(l, rng));
        c.beta1 = z(rng);
        for (std::size_t j = 0; j < spec.onehot_width(); ++j) c.beta3.push_back(0.5 * z(rng));
        p.comps.push_back(c);
    }
    return p;
}

// Direct product of densities summed over components, no log-space tricks.
double naive_density(const ParamSet& p, double sigma, const std::vector<double>& x, const std::vector<int>& d, double y) {
    double total = 0.0;
    for (std::size_t k = 0; k < p.comps.size(); ++k) {
        const auto& c = p.comps[k];
        double dens = p.pi[k];
        double mu = c.beta1;
        for (std::size_t j = 0; j < x.size(); ++j) {
            dens *= std::exp(-0.5 * (x[j] - c.m[j]) * (x[j] - c.m[j]) / c.var[j]) / std::sqrt(2.0 * kPi * c.var[j]);
            mu += c.beta2[j] * x[j];
        }
        std::size_t off = 0;
        for (std::size_t f = 0; f < d.size(); ++f) {
            dens *= c.phi[f][static_cast<std::size_t>(d[f])];
            mu += c.beta3[off + static_cast<std::size_t>(d[f])];
            off += c.phi[f].size();
        }
        dens *= std::exp(-0.5 * (y - mu) * (y - mu) / (sigma * sigma)) / std::sqrt(2.0 * kPi * sigma * sigma);
        total += dens;
    }
    return std::log(total);
}

SurrogateData normal_data(std::size_t n, std::size_t d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    SurrogateData data;
    std::vector<double> x(d);
    for (std::size_t i = 0; i < n; ++i) {
        double y = 0.0;
        for (double& v : x) y += (v = z(rng));
        data.push(x, std::span<const int>{}, y + 0.3 * z(rng));
    }
    return data;
}

}  // namespace

TEST(Density, StandardNormalPair) {
    SurrogateSpec s = spec_for(1, 1);
    ParamSet p;
    p.pi = {1.0};
    p.comps.push_back({{0.0}, {1.0}, {}, 0.0, {0.0}, {}});
    const std::vector<double> x{0.0};
    EXPECT_NEAR(log_joint_density(p, 1.0, x, {}, 0.0), -std::log(2.0 * kPi), 1e-12);
    EXPECT_NEAR(log_joint_density(p, 1.0, x, {}, 0.0), -1.837877, 1e-6);
}

TEST(Density, MatchesNaiveSumOracle) {
    const SurrogateSpec s = spec_for(3, 2, {3}, 0.8);
    const ParamSet p = random_params(s, 17);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> z(0.0, 1.5);
    std::uniform_int_distribution<int> lvl(0, 2);
    for (int i = 0; i < 1000; ++i) {
        const std::vector<double> x{z(rng), z(rng)};
        const std::vector<int> d{lvl(rng)};
        const double y = z(rng);
        EXPECT_NEAR(log_joint_density(p, s.sigma, x, d, y), naive_density(p, s.sigma, x, d, y), 1e-10);
    }
}

TEST(Density, LabelPermutationInvariance) {
    const SurrogateSpec s = spec_for(3, 2, {2}, 1.1);
    const ParamSet p = random_params(s, 5);
    std::vector<std::size_t> order{0, 1, 2};
    std::mt19937_64 rng(8);
    std::normal_distribution<double> z(0.0, 1.0);
    const std::vector<double> x{z(rng), z(rng)};
    const std::vector<int> d{1};
    const double base = log_joint_density(p, s.sigma, x, d, 0.4);
    SurrogateModel m0(s, {p}, p, DensityMode::sample_average);
    while (std::next_permutation(order.begin(), order.end())) {
        const ParamSet q = p.permuted(order);
        EXPECT_NEAR(log_joint_density(q, s.sigma, x, d, 0.4), base, 1e-12);
        SurrogateModel m(s, {q}, q, DensityMode::sample_average);
        EXPECT_NEAR(m.node_log_density(x, d, 0.4), m0.node_log_density(x, d, 0.4), 1e-12);
    }
}

TEST(Density, FarPointsStayFinite) {
    const SurrogateSpec s = spec_for(2, 2);
    const ParamSet p = random_params(s, 2);
    const std::vector<double> x{50.0, -50.0};
    const double v = log_joint_density(p, s.sigma, x, {}, 50.0);
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_LT(v, -100.0);
}

TEST(Density, RejectsBadInput) {
    const SurrogateSpec s = spec_for(1, 2, {2});
    const ParamSet p = random_params(s, 1);
    const std::vector<double> x1{0.0}, x2{0.0, 0.0}, xnan{0.0, std::nan("")};
    const std::vector<int> d{0}, dbad{2};
    EXPECT_THROW(log_joint_density(p, 1.0, x1, d, 0.0), ValidationError);
    EXPECT_THROW(log_joint_density(p, 1.0, x2, dbad, 0.0), ValidationError);
    EXPECT_THROW(log_joint_density(p, 1.0, xnan, d, 0.0), ValidationError);
}

TEST(Density, MonteCarloMassIsOne) {
    const SurrogateSpec s = spec_for(2, 2, {}, 1.0);
    const ParamSet p = random_params(s, 11);
    // Importance sampling from a broad Gaussian over (x1, x2, y).
    std::mt19937_64 rng(99);
    const double qs = 6.0;
    std::normal_distribution<double> q(0.0, qs);
    const int n = 200000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        const std::vector<double> x{q(rng), q(rng)};
        const double y = q(rng);
        const double logq = 3 * (-0.5 * std::log(2 * kPi * qs * qs)) - 0.5 * (x[0] * x[0] + x[1] * x[1] + y * y) / (qs * qs);
        sum += std::exp(log_joint_density(p, s.sigma, x, {}, y) - logq);
    }
    EXPECT_NEAR(sum / n, 1.0, 0.05);
}

TEST(Prior, ComponentPieces) {
    EXPECT_DOUBLE_EQ(log_laplace(0.0), std::log(0.5));
    EXPECT_EQ(log_half_cauchy(-1.0, 2.5), -kInf);
    EXPECT_EQ(log_half_cauchy(0.0, 2.5), -kInf);
    EXPECT_NEAR(log_half_cauchy(1.0, 2.5), std::log(2.0 / (kPi * 2.5 * (1.0 + 0.16))), 1e-14);
    const std::vector<double> w{0.2, 0.3, 0.5};
    EXPECT_NEAR(log_dirichlet_ones(w), std::log(2.0), 1e-14);
}

TEST(Prior, HalfCauchyIntegratesToOne) {
    // Simpson's rule on s = e^t, t in [-20, 12], plus the analytic tail.
    const int n = 200000;
    const double a = -20.0, b = 12.0, h = (b - a) / n;
    double acc = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double t = a + i * h;
        const double f = std::exp(log_half_cauchy(std::exp(t), 2.5) + t);
        acc += f * (i == 0 || i == n ? 1.0 : (i % 2 ? 4.0 : 2.0));
    }
    const double mass = acc * h / 3.0;
    const double tail = 1.0 - 2.0 / kPi * std::atan(std::exp(b) / 2.5);
    EXPECT_NEAR(mass + tail, 1.0, 1e-6);
}

TEST(Prior, NegativeVarianceIsOutsideSupport) {
    const SurrogateSpec s = spec_for(1, 1);
    ParamSet p = random_params(s, 3);
    EXPECT_TRUE(std::isfinite(log_prior(p, s)));
    p.comps[0].var[0] = -1.0;
    EXPECT_EQ(log_prior(p, s), -kInf);
}

TEST(Mcmc, SameSeedSameDraws) {
    const SurrogateData data = normal_data(80, 2, 4);
    const SurrogateSpec s = spec_for(2, 2, {}, 0.5);
    McmcConfig cfg{200, 50, 13, 0.3};
    const auto a = fit_mcmc(data, s, 1.0, cfg);
    const auto b = fit_mcmc(data, s, 1.0, cfg);
    ASSERT_EQ(a.draws.size(), 150u);
    EXPECT_EQ(a.draws, b.draws);
    cfg.seed = 14;
    EXPECT_NE(fit_mcmc(data, s, 1.0, cfg).draws, a.draws);
}

TEST(Mcmc, DrawsAreValidParameterSets) {
    const SurrogateData data = normal_data(60, 2, 6);
    const SurrogateSpec s = spec_for(3, 2, {}, 0.5);
    const auto res = fit_mcmc(data, s, 1.0, McmcConfig{150, 50, 2, 0.3});
    for (const auto& p : res.draws) EXPECT_NO_THROW(check_param_set(p, s));
    EXPECT_EQ(res.draws.size(), res.log_lik.size());
}

TEST(Mcmc, TooFewRowsOrBadTemperatureFail) {
    const SurrogateData data = normal_data(15, 1, 1);
    EXPECT_THROW(fit_mcmc(data, spec_for(2, 1), 1.0, McmcConfig{20, 5, 1, 0.3}), ValidationError);
    EXPECT_THROW(fit_mcmc(data, spec_for(1, 1), 0.0, McmcConfig{20, 5, 1, 0.3}), ValidationError);
    EXPECT_THROW(fit_mcmc(data, spec_for(1, 1), 1.0, McmcConfig{20, 20, 1, 0.3}), ValidationError);
}

TEST(Mcmc, SingleComponentMeanMatchesConjugateBand) {
    const SurrogateData data = normal_data(500, 1, 21);
    double xbar = 0.0;
    for (double v : data.x) xbar += v / 500.0;
    const auto res = fit_mcmc(data, spec_for(1, 1, {}, 1.0), 1.0, McmcConfig{1500, 500, 5, 0.3});
    double mean_m = 0.0;
    for (const auto& p : res.draws) mean_m += p.comps[0].m[0] / static_cast<double>(res.draws.size());
    EXPECT_NEAR(mean_m, xbar, 3.0 / std::sqrt(500.0));
}

TEST(Mcmc, NearZeroTemperatureRecoversDirichletMean) {
    const SurrogateData data = normal_data(60, 1, 2);
    const auto res = fit_mcmc(data, spec_for(3, 1), 1e-9, McmcConfig{4000, 500, 9, 0.3});
    for (std::size_t k = 0; k < 3; ++k) {
        std::vector<double> chain;
        for (const auto& p : res.draws) chain.push_back(p.pi[k]);
        const double mean = mean_of(chain);
        double var = 0.0;
        for (double v : chain) var += (v - mean) * (v - mean) / static_cast<double>(chain.size());
        const double se = std::sqrt(var / effective_sample_size(chain));
        EXPECT_NEAR(mean, 1.0 / 3.0, 3.0 * se) << "component " << k;
    }
}

TEST(Wbic, SingleDrawEqualsNegativeLogLikelihood) {
    const SurrogateData data = normal_data(40, 1, 3);
    const SurrogateSpec s = spec_for(1, 1);
    PosteriorSamples ps;
    ps.spec = s;
    ps.temper_beta = wbic_temperature(data.n);
    ps.draws = {random_params(s, 4)};
    EXPECT_NEAR(wbic(ps, data), -total_log_likelihood(ps.draws[0], s.sigma, data), 1e-9);
    ps.temper_beta = 1.0;
    EXPECT_THROW(wbic(ps, data), ValidationError);
}

TEST(Wbic, TemperatureIsOneOverLogN) {
    EXPECT_DOUBLE_EQ(wbic_temperature(100), 1.0 / std::log(100.0));
    EXPECT_THROW(wbic_temperature(2), ValidationError);
}

TEST(Selection, SingletonRangeIsHonoured) {
    const SurrogateData data = normal_data(60, 1, 7);
    SelectionConfig cfg;
    cfg.k_range = {3};
    cfg.mcmc = McmcConfig{120, 40, 1, 0.3};
    const SurrogateModel m = select_k(data, spec_for(1, 1), cfg);
    EXPECT_EQ(m.spec().k, 3);
    ASSERT_EQ(m.wbic_table.size(), 1u);
    EXPECT_TRUE(std::isfinite(m.chosen_wbic()));
}

TEST(Model, AveragingModes) {
    const SurrogateSpec s = spec_for(2, 2, {2}, 0.7);
    const ParamSet p = random_params(s, 31), q = random_params(s, 32);
    const std::vector<double> x{0.3, -0.2};
    const std::vector<int> d{1};
    const SurrogateModel single(s, {p}, p, DensityMode::sample_average);
    EXPECT_NEAR(single.node_log_density(x, d, 0.1), log_joint_density(p, s.sigma, x, d, 0.1), 1e-12);
    const SurrogateModel same(s, {p, p, p, p}, p, DensityMode::sample_average);
    EXPECT_NEAR(same.node_log_density(x, d, 0.1), log_joint_density(p, s.sigma, x, d, 0.1), 1e-12);
    const SurrogateModel two(s, {p, q}, q, DensityMode::sample_average);
    const double want = std::log(0.5 * std::exp(log_joint_density(p, s.sigma, x, d, 0.1)) +
                                 0.5 * std::exp(log_joint_density(q, s.sigma, x, d, 0.1)));
    EXPECT_NEAR(two.node_log_density(x, d, 0.1), want, 1e-12);
    SurrogateModel map = two;
    map.set_density_mode(DensityMode::map_sample);
    EXPECT_NEAR(map.node_log_density(x, d, 0.1), log_joint_density(q, s.sigma, x, d, 0.1), 1e-12);
    EXPECT_THROW(SurrogateModel().node_log_density(x, d, 0.1), RuntimeFailure);
}

TEST(Model, JsonRoundTripPreservesDensity) {
    const SurrogateData data = normal_data(80, 2, 12);
    SelectionConfig cfg;
    cfg.k_range = {1, 2};
    cfg.mcmc = McmcConfig{200, 50, 3, 0.3};
    cfg.density_draws = 16;
    const SurrogateModel m = select_k(data, spec_for(1, 2, {}, 0.5), cfg);
    const SurrogateModel back = SurrogateModel::from_json(Json::parse(m.to_json().dump()));
    EXPECT_EQ(back.spec().k, m.spec().k);
    EXPECT_EQ(back.wbic_table.size(), 2u);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> z(0.0, 1.0);
    for (int i = 0; i < 50; ++i) {
        const std::vector<double> x{z(rng), z(rng)};
        const double y = z(rng);
        EXPECT_NEAR(back.node_log_density(x, {}, y), m.node_log_density(x, {}, y), 1e-12);
    }
}

TEST(Model, ThinnedAverageIsStable) {
    const SurrogateData data = normal_data(150, 2, 14);
    const SurrogateSpec s = spec_for(2, 2, {}, 0.5);
    const auto res = fit_mcmc(data, s, 1.0, McmcConfig{800, 300, 6, 0.3});
    const auto best = res.draws.front();
    const SurrogateModel m64(s, thin_draws(res.draws, 64), best, DensityMode::sample_average);
    const SurrogateModel m256(s, thin_draws(res.draws, 256), best, DensityMode::sample_average);
    std::vector<double> diffs;
    for (std::size_t i = 0; i < 100; ++i) {
        const auto x = data.x_row(i);
        diffs.push_back(std::abs(m64.node_log_density(x, {}, data.y[i]) - m256.node_log_density(x, {}, data.y[i])));
    }
    EXPECT_LT(median_of(diffs), 0.1);
}

TEST(Diagnostics, EffectiveSampleSize) {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<double> iid(20000), ar(20000);
    double prev = 0.0;
    for (std::size_t i = 0; i < iid.size(); ++i) {
        iid[i] = z(rng);
        ar[i] = prev = 0.9 * prev + z(rng);
    }
    EXPECT_NEAR(effective_sample_size(iid) / 20000.0, 1.0, 0.15);
    // AR(1): n (1 - rho) / (1 + rho)
    EXPECT_NEAR(effective_sample_size(ar) / (20000.0 * 0.1 / 1.9), 1.0, 0.3);
}

TEST(ParamSet, ShapeChecks) {
    const SurrogateSpec s = spec_for(2, 1, {2});
    ParamSet p = random_params(s, 1);
    EXPECT_NO_THROW(check_param_set(p, s));
    p.pi = {0.7, 0.7};
    EXPECT_THROW(check_param_set(p, s), ValidationError);
    p = random_params(s, 1);
    p.comps[1].phi[0] = {0.5, 0.6};
    EXPECT_THROW(check_param_set(p, s), ValidationError);
    EXPECT_EQ(ParamSet::from_json(random_params(s, 2).to_json()), random_params(s, 2));
}
