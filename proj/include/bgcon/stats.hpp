#pragma once

#include <cstdint>
#include <random>

namespace bgcon {

using Rng = std::mt19937_64;

/**
 * Deterministic RNG stream keyed by (seed, chain, counter).
 *
 * Every iteration of a chain reseeds from its own key, so a chain can be
 * resumed at any iteration and parallel chains never share state.
 */
Rng make_stream(std::uint64_t seed, std::uint64_t chain, std::uint64_t counter);

namespace stats {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

double normal_pdf(double x);
double normal_log_pdf(double x);
double normal_cdf(double x);
/// log Phi(x), accurate far into the lower tail.
double normal_log_cdf(double x);

/// log(exp(a) + exp(b)) without overflow.
double log_add_exp(double a, double b);

double log_beta_density(double x, double shape_a, double shape_b);
/// Gamma density with shape/rate parameterization.
double log_gamma_density(double x, double shape, double rate);
double log_inverse_gamma_density(double x, double shape, double scale);
double log_normal_density(double x, double mean, double sd);

double logit(double p);
double inv_logit(double x);

double draw_normal(Rng& rng);
double draw_uniform(Rng& rng);
/// Gamma(shape, rate).
double draw_gamma(double shape, double rate, Rng& rng);
/// InverseGamma(shape, scale): 1 / Gamma(shape, rate = scale).
double draw_inverse_gamma(double shape, double scale, Rng& rng);
double draw_beta(double shape_a, double shape_b, Rng& rng);
bool draw_bernoulli(double p, Rng& rng);
/// Poisson(mean) with a guard against non-finite means.
std::int64_t draw_poisson(double mean, Rng& rng);

/// N(0,1) truncated to (lower, inf). Exponential-proposal rejection in the tail.
double draw_std_normal_above(double lower, Rng& rng);

}  // namespace stats
}  // namespace bgcon
