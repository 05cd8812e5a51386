#include "bgcon/stats.hpp"

#include <cmath>
#include <limits>

namespace bgcon {

Rng make_stream(std::uint64_t seed, std::uint64_t chain, std::uint64_t counter) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(chain), static_cast<std::uint32_t>(chain >> 32),
                    static_cast<std::uint32_t>(counter),
                    static_cast<std::uint32_t>(counter >> 32)};
  return Rng(seq);
}

namespace stats {

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;
}

double normal_pdf(double x) { return std::exp(normal_log_pdf(x)); }

double normal_log_pdf(double x) { return -0.5 * x * x - kLogSqrt2Pi; }

double normal_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

double normal_log_cdf(double x) {
  if (x > 5.0) return std::log1p(-0.5 * std::erfc(x * kInvSqrt2));
  if (x > -30.0) return std::log(0.5 * std::erfc(-x * kInvSqrt2));
  // Mills-ratio asymptotic expansion for the far lower tail.
  const double z2 = 1.0 / (x * x);
  const double series = 1.0 - z2 + 3.0 * z2 * z2 - 15.0 * z2 * z2 * z2;
  return normal_log_pdf(x) - std::log(-x) + std::log(series);
}

double log_add_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double hi = a > b ? a : b;
  const double lo = a > b ? b : a;
  return hi + std::log1p(std::exp(lo - hi));
}

double log_beta_density(double x, double shape_a, double shape_b) {
  if (!(x > 0.0 && x < 1.0)) return -std::numeric_limits<double>::infinity();
  return (shape_a - 1.0) * std::log(x) + (shape_b - 1.0) * std::log1p(-x) +
         std::lgamma(shape_a + shape_b) - std::lgamma(shape_a) - std::lgamma(shape_b);
}

double log_gamma_density(double x, double shape, double rate) {
  if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

double log_inverse_gamma_density(double x, double shape, double scale) {
  if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
  return shape * std::log(scale) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - scale / x;
}

double log_normal_density(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - kLogSqrt2Pi;
}

double logit(double p) { return std::log(p) - std::log1p(-p); }

double inv_logit(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double draw_normal(Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

double draw_uniform(Rng& rng) {
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

double draw_gamma(double shape, double rate, Rng& rng) {
  std::gamma_distribution<double> dist(shape, 1.0 / rate);
  return dist(rng);
}

double draw_inverse_gamma(double shape, double scale, Rng& rng) {
  return 1.0 / draw_gamma(shape, scale, rng);
}

double draw_beta(double shape_a, double shape_b, Rng& rng) {
  const double x = draw_gamma(shape_a, 1.0, rng);
  const double y = draw_gamma(shape_b, 1.0, rng);
  return x / (x + y);
}

bool draw_bernoulli(double p, Rng& rng) { return draw_uniform(rng) < p; }

std::int64_t draw_poisson(double mean, Rng& rng) {
  if (!(mean > 0.0)) return 0;
  if (!std::isfinite(mean) || mean > 1e15) return static_cast<std::int64_t>(1e15);
  std::poisson_distribution<std::int64_t> dist(mean);
  return dist(rng);
}

double draw_std_normal_above(double lower, Rng& rng) {
  if (lower < 0.45) {
    // Acceptance probability is at least ~0.33 here.
    for (;;) {
      const double z = draw_normal(rng);
      if (z > lower) return z;
    }
  }
  // Robert (1995) translated-exponential proposal with the optimal rate.
  const double rate = 0.5 * (lower + std::sqrt(lower * lower + 4.0));
  for (;;) {
    const double z = lower - std::log1p(-draw_uniform(rng)) / rate;
    const double d = z - rate;
    if (std::log(draw_uniform(rng)) <= -0.5 * d * d) return z;
  }
}

}  // namespace stats
}  // namespace bgcon
