#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "bgcon/dataset.hpp"
#include "bgcon/splines.hpp"

namespace bgcon {

/// The three regression channels: log mean length, presence (probit), count (Poisson).
enum Channel : int { kLength = 0, kPresence = 1, kCount = 2 };
inline constexpr int kChannels = 3;

enum class DeltaPrior { beta_mixture, logit_normal };

struct Hyperparams {
  double a = 10.0;   ///< prior sd of graphon coefficients and latent logits
  double M = 10.0;   ///< Beta(M, M) shape for the non-uniform delta component
  double q = 0.5;    ///< prior weight of the uniform delta component
  double b1 = 0.1;   ///< inverse-gamma base measure shape
  double b2 = 0.1;   ///< inverse-gamma base measure scale
  double c1 = 10.0;  ///< gamma prior on the DP precision (shape)
  double c2 = 10.0;  ///< gamma prior on the DP precision (rate)
  double d1 = 0.1;   ///< gamma prior on 1/sigma^2 (shape)
  double d2 = 0.1;   ///< gamma prior on 1/sigma^2 (rate)
  int K = 7;
  int degree = 3;

  void validate() const;
};

struct ModelOptions {
  bool random_effects = true;
  DeltaPrior delta_prior = DeltaPrior::beta_mixture;
};

/// Everything about the model that stays fixed for the lifetime of a chain.
struct ModelSpec {
  Hyperparams hyper;
  ModelOptions options;
  BasisConfig basis;
  int d = 4;

  static ModelSpec make(const Hyperparams& hyper, const ModelOptions& options, int d);
  int P() const { return upper_size(hyper.K); }
  /// Number of effect families: one baseline plus d covariate effects per channel.
  int families() const { return kChannels * (1 + d); }
  int family_index(int channel, int column) const { return channel * (1 + d) + column; }
};

/**
 * Full parameter state.
 *
 * theta[t] are the baseline graphon coefficients over the xi latents and
 * gamma[t][l] the covariate-effect coefficients over the delta latents.
 * Random-effect scales carry their DP cluster labels; subjects sharing a
 * label share the same tau2 value.
 */
struct ModelState {
  int K = 0;
  int d = 0;
  int J = 0;
  int n = 0;

  std::array<SymmetricCoeffMatrix, kChannels> theta;
  std::array<std::vector<SymmetricCoeffMatrix>, kChannels> gamma;

  Eigen::VectorXd xi;
  Eigen::VectorXd delta;
  std::vector<std::uint8_t> indicator;  ///< I_j: 1 = uniform component

  Eigen::MatrixXd eta;   ///< kChannels x n
  Eigen::MatrixXd tau2;  ///< kChannels x n
  std::array<std::vector<int>, kChannels> cluster;
  std::array<double, kChannels> alpha{1.0, 1.0, 1.0};
  double sigma2 = 1.0;

  std::vector<std::uint8_t> inflation;  ///< Xi per observation, 1 wherever count >= 1

  static ModelState zeros(const ModelSpec& spec, int J, int n, int edges);

  /// Coefficients of effect family `family` (layout of ModelSpec::family_index).
  const SymmetricCoeffMatrix& coefficients(int family) const;
  SymmetricCoeffMatrix& coefficients(int family);

  /// Throws InvariantError on structural problems (sizes, forced Xi).
  void validate(const ConnectomeDataset& data) const;
};

struct LinearPredictors {
  double mu = 0.0;
  double pi = 0.0;
  double lambda = 0.0;
};

/**
 * Graphon values for every edge at the current latents.
 * values(e, t*(1+d) + c): c = 0 is the baseline, c = l + 1 covariate l.
 */
struct EdgeTerms {
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> values;
  Eigen::MatrixXd basis_xi, dbasis_xi;        ///< J x K
  Eigen::MatrixXd basis_delta, dbasis_delta;  ///< J x K
  Eigen::MatrixXd features_xi;                ///< P x E
  Eigen::MatrixXd features_delta;             ///< P x E
};

EdgeTerms compute_edge_terms(const ModelState& state, const ConnectomeDataset& data,
                             const ModelSpec& spec);

/// Linear predictor of observation (i, e) given precomputed edge terms.
inline double linear_predictor(const EdgeTerms& terms, const ModelState& state,
                               const ConnectomeDataset& data, int channel, int i, int e) {
  const int width = 1 + state.d;
  double value = terms.values(e, channel * width) + state.eta(channel, i);
  for (int l = 0; l < state.d; ++l) value += terms.values(e, channel * width + 1 + l) * data.Z(i, l);
  return value;
}

LinearPredictors linear_predictors(const ModelState& state, const ConnectomeDataset& data,
                                   const ModelSpec& spec, int i, int j, int k);

/**
 * Observed-data log-likelihood with the zero-inflation indicators
 * integrated out: N = 0 edges contribute log[(1 - Phi(pi)) + Phi(pi) exp(-e^lambda)],
 * N >= 1 edges log Phi(pi) + Poisson(N; e^lambda) + the Gaussian length term.
 */
double log_likelihood(const ModelState& state, const ConnectomeDataset& data,
                      const ModelSpec& spec);

/// Log prior density in the natural parameterization; -inf off the support.
double log_prior(const ModelState& state, const ModelSpec& spec);

/// log_likelihood + log_prior + log-Jacobians of the logit maps of xi and delta.
double log_posterior_unconstrained(const ModelState& state, const ConnectomeDataset& data,
                                   const ModelSpec& spec);

/// Blocks updated by Hamiltonian Monte Carlo.
enum class HmcBlock { count_coefficients, count_random_effects, latent_xi, latent_delta };

std::string block_name(HmcBlock block);

/// Block coordinates (latents on the logit scale).
Eigen::VectorXd get_block(const ModelState& state, HmcBlock block);
void set_block(ModelState& state, HmcBlock block, const Eigen::VectorXd& values);

/// log Phi(pi) and log(1 - Phi(pi)) per observation at the current presence predictors.
struct PresenceCache {
  std::vector<double> log_present;
  std::vector<double> log_absent;
};

PresenceCache presence_cache(const ModelState& state, const ConnectomeDataset& data,
                             const ModelSpec& spec);

/**
 * Log posterior restricted to the terms that depend on `block`, in block
 * coordinates, and its gradient. Differences of the returned value equal
 * differences of log_posterior_unconstrained along the block. For the count
 * blocks a cache of the (fixed) presence terms may be supplied; it is ignored
 * for the latent blocks.
 */
double block_log_target(const ModelState& state, const ConnectomeDataset& data,
                        const ModelSpec& spec, HmcBlock block, Eigen::VectorXd* gradient,
                        const PresenceCache* cache = nullptr);

Eigen::VectorXd grad_log_posterior(const ModelState& state, const ConnectomeDataset& data,
                                   const ModelSpec& spec, HmcBlock block);

/// One J x J symmetric matrix per effect family, evaluated at the node latents.
std::vector<Eigen::MatrixXd> reconstruct_effect_matrices(const ModelState& state,
                                                         const ModelSpec& spec);

/// "mu0", "pi0", "lambda0", "chi_mci", "beta_ad", "nu_age", ...
std::string family_name(int family, const ModelSpec& spec,
                        const std::vector<std::string>& covariate_names);

}  // namespace bgcon
