#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <map>

#include "bgcon/errors.hpp"
#include "bgcon/samplers.hpp"
#include "fixtures.hpp"
#include "model_oracles.hpp"
#include "oracles.hpp"

using namespace bgcon;
using oracle::design_row;

namespace {

const LogTarget kStdNormal = [](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
  if (g) *g = -x;
  return -0.5 * x.squaredNorm();
};

ModelSpec small_spec() {
  Hyperparams h;
  h.K = 4;
  h.a = 2.0;
  return ModelSpec::make(h, ModelOptions{}, 4);
}

double gamma_cdf(double x, double shape, double rate) {
  return boost::math::cdf(boost::math::gamma_distribution<double>(shape, 1.0 / rate), x);
}

}  // namespace

TEST_CASE("leapfrog identity limit") {
  Rng rng(1);
  Eigen::VectorXd x(2);
  x << 0.3, -1.1;
  for (int r = 0; r < 20; ++r) {
    const Eigen::VectorXd before = x;
    const auto step = hmc_step(kStdNormal, x, 1e-12, 10, MassMatrix::identity(2), rng);
    CHECK(step.accepted);
    CHECK((x - before).norm() < 1e-9);
  }
}

TEST_CASE("HMC recovers a standard normal") {
  Rng rng(2);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(1);
  const auto mass = MassMatrix::identity(1);
  double sum = 0.0, sum_sq = 0.0;
  const int iters = 50000;
  for (int t = 0; t < iters; ++t) {
    hmc_step(kStdNormal, x, 0.1, 10, mass, rng);
    sum += x[0];
    sum_sq += x[0] * x[0];
  }
  const double mean = sum / iters;
  const double var = sum_sq / iters - mean * mean;
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("leapfrog energy error scales with the square of the step") {
  const auto mean_abs_dh = [](double eps) {
    Rng rng(3);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(3);
    double total = 0.0;
    for (int t = 0; t < 4000; ++t) {
      total += std::abs(hmc_step(kStdNormal, x, eps, 10, MassMatrix::identity(3), rng).delta_h);
    }
    return total / 4000;
  };
  const double ratio = mean_abs_dh(0.2) / mean_abs_dh(0.1);
  CHECK(ratio > 3.2);
  CHECK(ratio < 4.8);
}

TEST_CASE("dense mass matrix") {
  Eigen::Matrix2d M;
  M << 4.0, 1.0, 1.0, 2.0;
  const auto mass = MassMatrix::dense(M);
  const Eigen::Vector2d p(0.7, -0.4);
  CHECK(std::abs(mass.kinetic(p) - 0.5 * p.dot(M.inverse() * p)) < 1e-14);
  CHECK((mass.velocity(p) - M.inverse() * p).norm() < 1e-14);
  Eigen::Matrix2d bad;
  bad << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(MassMatrix::dense(bad), DomainError);
  // Preconditioned HMC on a correlated Gaussian with precision M.
  const LogTarget target = [&](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
    if (g) *g = -(M * x);
    return -0.5 * x.dot(M * x);
  };
  Rng rng(4);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(2);
  Eigen::Matrix2d second = Eigen::Matrix2d::Zero();
  const int iters = 40000;
  for (int t = 0; t < iters; ++t) {
    hmc_step(target, x, 0.15, 10, mass, rng);
    second += x * x.transpose();
  }
  second /= iters;
  CHECK((second - M.inverse()).cwiseAbs().maxCoeff() < 0.03);
}

TEST_CASE("step-size adaptation") {
  HmcConfig cfg;
  CHECK(adapt_step_size(0.70, 0.1, cfg) == 0.1);
  CHECK(adapt_step_size(0.30, 0.1, cfg) < 0.1);
  CHECK(adapt_step_size(0.95, 0.1, cfg) > 0.1);

  Rng rng(5);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(1);
  double eps = 3.0;
  int reached = -1;
  for (int window = 0; window < 20 && reached < 0; ++window) {
    int accepted = 0;
    for (int t = 0; t < cfg.adapt_window; ++t) {
      accepted += hmc_step(kStdNormal, x, eps, 10, MassMatrix::identity(1), rng).accepted;
    }
    const double rate = static_cast<double>(accepted) / cfg.adapt_window;
    if (rate >= cfg.band_low && rate <= cfg.band_high) reached = window;
    eps = adapt_step_size(rate, eps, cfg);
  }
  CHECK(reached >= 0);

  cfg.band_low = 0.95;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("Albert-Chib truncated normal draws") {
  Rng rng(6);
  const int draws = 1000000;
  double pos = 0.0, neg = 0.0;
  for (int r = 0; r < draws; ++r) {
    pos += albert_chib_draw(true, 0.0, rng);
    neg += albert_chib_draw(false, 0.0, rng);
  }
  CHECK(std::abs(pos / draws - std::sqrt(2.0 / M_PI)) < 0.003);
  CHECK(std::abs(neg / draws + std::sqrt(2.0 / M_PI)) < 0.003);

  for (double pi : {-6.0, -8.0, 8.0}) {
    for (int r = 0; r < 10000; ++r) {
      const double w = albert_chib_draw(true, pi, rng);
      REQUIRE(std::isfinite(w));
      REQUIRE(w > 0.0);
      const double v = albert_chib_draw(false, -pi, rng);
      REQUIRE(std::isfinite(v));
      REQUIRE(v <= 0.0);
    }
  }
  // KS against the exact truncated-normal CDF, both in the body and in the tail.
  for (double pi : {0.7, -2.5}) {
    std::vector<double> sample(100000);
    for (auto& s : sample) s = albert_chib_draw(true, pi, rng);
    const double tail = 0.5 * std::erfc(-pi / std::sqrt(2.0));  // P(w > 0)
    const auto cdf = [&](double w) {
      const double below = 0.5 * std::erfc(-(w - pi) / std::sqrt(2.0));
      return (below - (1.0 - tail)) / tail;
    };
    CHECK(oracle::ks_test(sample, cdf) > 0.01);
  }
}

TEST_CASE("zero-inflation conditional") {
  CHECK(zero_inflation_probability(0.5, 30.0) == 0.0);
  CHECK(zero_inflation_probability(1000.0, 0.3) == 1.0);
  const double expected = std::exp(-1.0) / (1.0 + std::exp(-1.0));
  CHECK(std::abs(zero_inflation_probability(0.0, 0.0) - expected) < 1e-12);
  CHECK(std::abs(expected - 0.2689) < 1e-4);

  // Forward simulation: Xi ~ Bern(1/2), N | Xi=1 ~ Pois(1); frequency of Xi=1 among N=0.
  Rng rng(7);
  int zeros = 0, inflated = 0;
  for (int r = 0; r < 2000000; ++r) {
    const bool xi = stats::draw_uniform(rng) < 0.5;
    const std::int64_t count = xi ? stats::draw_poisson(1.0, rng) : 0;
    if (count == 0) {
      ++zeros;
      inflated += xi;
    }
  }
  CHECK(std::abs(static_cast<double>(inflated) / zeros - expected) < 0.005);

  // Indicators are forced where counts are positive and redrawn elsewhere.
  const auto spec = small_spec();
  auto data = fixtures::random_dataset(5, 4, 8);
  auto s = fixtures::random_state(spec, data, 9);
  std::fill(s.inflation.begin(), s.inflation.end(), 0);
  draw_zero_inflation(s, data, spec, rng);
  for (std::size_t o = 0; o < data.counts.size(); ++o) {
    if (data.counts[o] >= 1) REQUIRE(s.inflation[o] == 1);
  }
  CHECK_NOTHROW(s.validate(data));
}

TEST_CASE("conjugate coefficient blocks") {
  const auto spec = small_spec();
  auto data = fixtures::random_dataset(3, 3, 10);
  auto s = fixtures::random_state(spec, data, 11);
  Rng rng(12);
  const Eigen::VectorXd w = draw_presence_latents(s, data, spec, rng);

  SUBCASE("matches explicit normal equations") {
    for (Channel t : {kLength, kPresence}) {
      const auto cond = coefficient_conditional(t, s, data, spec, &w);
      const int D = 5 * spec.P();
      Eigen::MatrixXd prec = Eigen::MatrixXd::Identity(D, D) / (spec.hyper.a * spec.hyper.a);
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(D);
      for (int i = 0; i < data.n; ++i) {
        for (int e = 0; e < data.edges(); ++e) {
          const std::size_t o = data.obs(i, e);
          double weight, y;
          if (t == kLength) {
            if (data.counts[o] == 0) continue;
            weight = data.counts[o] / s.sigma2;
            y = std::log(data.lengths[o]);
          } else {
            weight = 1.0;
            y = w[o];
          }
          const Eigen::RowVectorXd x = design_row(s, data, spec, i, e);
          prec += weight * x.transpose() * x;
          rhs += weight * (y - s.eta(t, i)) * x.transpose();
        }
      }
      const Eigen::VectorXd mean = prec.ldlt().solve(rhs);
      CHECK((cond.precision - prec).cwiseAbs().maxCoeff() < 1e-8);
      CHECK((cond.mean - mean).cwiseAbs().maxCoeff() < 1e-8);
    }
  }
  SUBCASE("draws follow the conditional marginal") {
    const auto cond = coefficient_conditional(kLength, s, data, spec, nullptr);
    const Eigen::MatrixXd cov = cond.precision.inverse();
    std::vector<double> first(100000), last(100000);
    for (int r = 0; r < 100000; ++r) {
      const Eigen::VectorXd v = draw_normal_conditional(cond, rng);
      first[r] = v[0];
      last[r] = v[v.size() - 1];
    }
    const auto cdf_of = [&](Eigen::Index c) {
      return [&, c](double x) {
        return 0.5 * std::erfc(-(x - cond.mean[c]) / std::sqrt(2.0 * cov(c, c)));
      };
    };
    CHECK(oracle::ks_test(first, cdf_of(0)) > 0.01);
    CHECK(oracle::ks_test(last, cdf_of(cond.mean.size() - 1)) > 0.01);
  }
  SUBCASE("no data gives the prior") {
    auto empty = ConnectomeDataset::empty(0, 3, 4);
    auto s0 = ModelState::zeros(spec, 3, 0, empty.edges());
    std::vector<double> sample(100000);
    for (auto& v : sample) {
      gibbs_coefficients(kLength, s0, empty, spec, nullptr, rng);
      v = s0.gamma[kLength][2].upper()[3];
    }
    const double a = spec.hyper.a;
    CHECK(oracle::ks_test(sample, [a](double x) {
            return 0.5 * std::erfc(-x / (a * std::sqrt(2.0)));
          }) > 0.01);
  }
}

TEST_CASE("conjugate random effects") {
  auto spec = small_spec();
  SUBCASE("likelihood-dominated limit is the least-squares value") {
    auto data = ConnectomeDataset::empty(1, 2, 4);
    data.set(0, 0, 4, std::exp(1.7));
    auto s = ModelState::zeros(spec, 2, 1, 1);
    s.tau2(kLength, 0) = 1e12;
    s.theta[kLength].upper().setConstant(0.25);  // graphon == 0.25
    const auto cond = random_effect_conditional(kLength, s, data, spec, nullptr);
    CHECK(std::abs(cond.mean[0] - (1.7 - 0.25)) < 1e-6);
  }
  SUBCASE("matches direct per-subject sums") {
    auto data = fixtures::random_dataset(4, 3, 13);
    auto s = fixtures::random_state(spec, data, 14);
    Rng rng(15);
    const Eigen::VectorXd w = draw_presence_latents(s, data, spec, rng);
    const auto cond = random_effect_conditional(kPresence, s, data, spec, &w);
    for (int i = 0; i < data.n; ++i) {
      double prec = 1.0 / s.tau2(kPresence, i), rhs = 0.0;
      for (int e = 0; e < data.edges(); ++e) {
        const auto lp = linear_predictors(s, data, spec, i, data.edge_list[e].a, data.edge_list[e].b);
        prec += 1.0;
        rhs += w[data.obs(i, e)] - (lp.pi - s.eta(kPresence, i));
      }
      CHECK(std::abs(cond.precision(i, i) - prec) < 1e-12);
      CHECK(std::abs(cond.mean[i] - rhs / prec) < 1e-10);
    }
  }
}

TEST_CASE("sigma2 conditional") {
  auto spec = small_spec();
  SUBCASE("zero residuals") {
    auto data = ConnectomeDataset::empty(2, 5, 4);
    int observed = 0;
    for (int i = 0; i < 2; ++i) {
      for (int e = 0; e < data.edges() && observed < 10; ++e) {
        data.set(i, e, 2, 1.0);
        ++observed;
      }
    }
    const auto s = ModelState::zeros(spec, 5, 2, data.edges());
    const auto [shape, rate] = sigma2_conditional(s, data, spec);
    CHECK(shape == spec.hyper.d1 + 5.0);
    CHECK(rate == spec.hyper.d2);
  }
  SUBCASE("no observed edges gives the prior") {
    auto data = ConnectomeDataset::empty(2, 3, 4);
    const auto s = ModelState::zeros(spec, 3, 2, data.edges());
    const auto [shape, rate] = sigma2_conditional(s, data, spec);
    CHECK(shape == spec.hyper.d1);
    CHECK(rate == spec.hyper.d2);
  }
  SUBCASE("draws follow the analytic gamma") {
    auto data = fixtures::random_dataset(3, 4, 16);
    auto s = fixtures::random_state(spec, data, 17);
    double shape = spec.hyper.d1, rate = spec.hyper.d2;
    for (int i = 0; i < data.n; ++i) {
      for (int e = 0; e < data.edges(); ++e) {
        const std::size_t o = data.obs(i, e);
        if (data.counts[o] == 0) continue;
        const auto lp = linear_predictors(s, data, spec, i, data.edge_list[e].a, data.edge_list[e].b);
        const double r = std::log(data.lengths[o]) - lp.mu;
        shape += 0.5;
        rate += 0.5 * data.counts[o] * r * r;
      }
    }
    Rng rng(18);
    std::vector<double> sample(100000);
    for (auto& v : sample) {
      gibbs_sigma2(s, data, spec, rng);
      v = 1.0 / s.sigma2;
    }
    CHECK(oracle::ks_test(sample, [&](double x) { return gamma_cdf(x, shape, rate); }) > 0.01);
  }
}

TEST_CASE("indicator flips") {
  auto spec = small_spec();
  auto data = fixtures::random_dataset(1, 3, 19);
  auto s = fixtures::random_state(spec, data, 20);
  s.delta << 0.5, 0.1, 0.97;
  Rng rng(21);
  std::vector<int> ones(3, 0);
  const int sweeps = 200000;
  for (int r = 0; r < sweeps; ++r) {
    flip_indicators(s, spec, rng);
    for (int j = 0; j < 3; ++j) ones[j] += s.indicator[j];
  }
  for (int j = 0; j < 3; ++j) {
    const double y = s.delta[j];
    const double beta = std::pow(y * (1 - y), spec.hyper.M - 1) * std::tgamma(2 * spec.hyper.M) /
                        std::pow(std::tgamma(spec.hyper.M), 2);
    const double p = spec.hyper.q / (spec.hyper.q + (1 - spec.hyper.q) * beta);
    CHECK(std::abs(static_cast<double>(ones[j]) / sweeps - p) < 0.005);
  }
}

TEST_CASE("DP scale mixture") {
  Hyperparams h;
  h.b1 = 2.0;
  h.b2 = 1.0;
  h.K = 4;
  const auto spec = ModelSpec::make(h, ModelOptions{}, 4);

  SUBCASE("vanishing precision collapses to one cluster") {
    auto s = ModelState::zeros(spec, 2, 10, 1);
    s.alpha[0] = 1e-12;
    for (int i = 0; i < 10; ++i) {
      s.eta(0, i) = 0.3 * (i - 5);
      s.cluster[0][i] = i;
      s.tau2(0, i) = 0.5 + 0.1 * i;
    }
    Rng rng(22);
    for (int sweep = 0; sweep < 100; ++sweep) dp_scale_update(0, s, spec, rng);
    CHECK(cluster_count(s.cluster[0]) == 1);
  }
  SUBCASE("single subject scale is inverse gamma") {
    auto s = ModelState::zeros(spec, 2, 1, 1);
    s.eta(0, 0) = 0.8;
    Rng rng(23);
    std::vector<double> sample(100000);
    for (auto& v : sample) {
      dp_scale_update(0, s, spec, rng);
      v = 1.0 / s.tau2(0, 0);
    }
    const double shape = h.b1 + 0.5, rate = h.b2 + 0.5 * 0.8 * 0.8;
    CHECK(oracle::ks_test(sample, [&](double x) { return gamma_cdf(x, shape, rate); }) > 0.01);
  }
  SUBCASE("partition frequencies match exhaustive enumeration") {
    auto s = ModelState::zeros(spec, 2, 3, 1);
    const double eta[3] = {0.3, -1.2, 2.0};
    for (int i = 0; i < 3; ++i) s.eta(0, i) = eta[i];
    s.alpha[0] = 1.0;
    // Marginal likelihood of a block of eta values under N(0, s2), s2 ~ IG(b1, b2).
    const auto block = [&](std::vector<int> members) {
      double ss = 0.0;
      for (int i : members) ss += eta[i] * eta[i];
      const double m = static_cast<double>(members.size());
      return std::exp(h.b1 * std::log(h.b2) + std::lgamma(h.b1 + m / 2) - std::lgamma(h.b1) -
                      m / 2 * std::log(2 * M_PI) - (h.b1 + m / 2) * std::log(h.b2 + ss / 2));
    };
    const double a = s.alpha[0];
    // CRP weights a^k Gamma(a)/Gamma(a+3) prod (n_c-1)!; the common factor cancels.
    std::map<std::vector<int>, double> exact;
    exact[{0, 0, 0}] = a * 2.0 * block({0, 1, 2});
    exact[{0, 0, 1}] = a * a * block({0, 1}) * block({2});
    exact[{0, 1, 0}] = a * a * block({0, 2}) * block({1});
    exact[{0, 1, 1}] = a * a * block({1, 2}) * block({0});
    exact[{0, 1, 2}] = a * a * a * block({0}) * block({1}) * block({2});
    double z = 0.0;
    for (auto& [k, v] : exact) z += v;
    Rng rng(24);
    std::map<std::vector<int>, int> counts;
    const int sweeps = 200000;
    for (int r = 0; r < sweeps; ++r) {
      dp_scale_update(0, s, spec, rng);
      counts[s.cluster[0]] += 1;
      // Labels stay canonical and members of a cluster share one scale.
      REQUIRE(s.cluster[0][0] == 0);
      for (int i = 0; i < 3; ++i) {
        for (int k = 0; k < 3; ++k) {
          if (s.cluster[0][i] == s.cluster[0][k]) REQUIRE(s.tau2(0, i) == s.tau2(0, k));
        }
      }
    }
    for (auto& [k, v] : exact) {
      CHECK(std::abs(static_cast<double>(counts[k]) / sweeps - v / z) < 0.01);
    }
  }
}

TEST_CASE("DP precision update") {
  Rng rng(25);
  for (int r = 0; r < 1000; ++r) {
    const double a = update_alpha(1.0, 1, 1, 10.0, 10.0, rng);
    REQUIRE(std::isfinite(a));
    REQUIRE(a > 0.0);
  }
  double alpha = 1.0, mean = 0.0;
  for (int r = 0; r < 1000; ++r) {
    alpha = update_alpha(alpha, 3, 10, 10.0, 1e6, rng);
    mean += alpha / 1000;
  }
  CHECK(mean < 1e-4);

  // Conditional density of alpha given k = 3 of n = 10, by quadrature.
  const double c1 = 10.0, c2 = 10.0;
  const auto density = [&](double a) {
    if (a <= 0.0) return 0.0;
    return std::exp((c1 - 1) * std::log(a) - c2 * a + 3 * std::log(a) + std::lgamma(a) -
                    std::lgamma(a + 10));
  };
  const double z = oracle::simpson(density, 1e-9, 20.0, 20000);
  const double ref = oracle::simpson([&](double a) { return a * density(a); }, 1e-9, 20.0, 20000) / z;
  alpha = 1.0;
  double sum = 0.0;
  const int draws = 100000;
  for (int r = 0; r < draws; ++r) {
    alpha = update_alpha(alpha, 3, 10, c1, c2, rng);
    sum += alpha;
  }
  CHECK(std::abs(sum / draws - ref) / ref < 0.01);
}

TEST_CASE("HMC on model blocks keeps the state valid") {
  const auto spec = small_spec();
  auto data = fixtures::random_dataset(4, 4, 26);
  auto s = fixtures::random_state(spec, data, 27);
  Rng rng(28);
  for (auto block : {HmcBlock::count_coefficients, HmcBlock::count_random_effects,
                     HmcBlock::latent_xi, HmcBlock::latent_delta}) {
    const auto mass = block_mass(block, s, data, spec);
    int accepted = 0;
    for (int r = 0; r < 50; ++r) {
      accepted += hmc_update(block, s, data, spec, 0.1, 10, mass, rng).accepted;
      REQUIRE_NOTHROW(s.validate(data));
    }
    INFO(block_name(block));
    CHECK(accepted > 10);
  }
}
