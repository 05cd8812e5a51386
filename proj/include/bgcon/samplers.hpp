#pragma once

#include <Eigen/Dense>
#include <functional>

#include "bgcon/dataset.hpp"
#include "bgcon/model.hpp"
#include "bgcon/stats.hpp"

namespace bgcon {

struct HmcConfig {
  int leapfrog_steps = 10;
  double step_size = 0.1;
  int adapt_window = 100;
  double band_low = 0.55;
  double band_high = 0.90;
  double shrink = 0.8;
  double grow = 1.25;

  void validate() const;
};

/// Gaussian kinetic energy 0.5 p' M^{-1} p for a symmetric positive definite M.
class MassMatrix {
public:
  MassMatrix() = default;
  static MassMatrix identity(Eigen::Index dim);
  static MassMatrix diagonal(const Eigen::VectorXd& diag);
  /// Dense mass; throws DomainError if M is not positive definite.
  static MassMatrix dense(const Eigen::MatrixXd& M);
  /// Dense mass from its lower Cholesky factor (checkpoint restore).
  static MassMatrix from_cholesky(const Eigen::MatrixXd& L);

  Eigen::Index dim() const { return dim_; }
  bool is_dense() const { return is_dense_; }
  const Eigen::VectorXd& diagonal_values() const { return diag_; }
  const Eigen::MatrixXd& cholesky() const { return chol_; }
  Eigen::VectorXd draw_momentum(Rng& rng) const;
  double kinetic(const Eigen::VectorXd& p) const;
  /// M^{-1} p.
  Eigen::VectorXd velocity(const Eigen::VectorXd& p) const;

private:
  Eigen::Index dim_ = 0;
  bool is_dense_ = false;
  Eigen::VectorXd diag_;
  Eigen::MatrixXd chol_;  // lower factor L with M = L L'
};

/// Log density and (when grad != nullptr) its gradient.
using LogTarget = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* grad)>;

struct HmcStep {
  bool accepted = false;
  double accept_prob = 0.0;
  /// H(start) - H(end); exp of it is the Metropolis ratio.
  double delta_h = 0.0;
  /// Non-finite energy or a thrown evaluation error along the trajectory.
  bool divergent = false;
};

/// One Metropolis-corrected leapfrog transition; x is left unchanged on rejection.
HmcStep hmc_step(const LogTarget& target, Eigen::VectorXd& x, double step_size,
                 int leapfrog_steps, const MassMatrix& mass, Rng& rng);

/// Window rule: below the band shrink, above it grow, inside keep.
double adapt_step_size(double window_acceptance, double step_size, const HmcConfig& cfg);

/// HMC update of one model block in its unconstrained coordinates.
HmcStep hmc_update(HmcBlock block, ModelState& state, const ConnectomeDataset& data,
                   const ModelSpec& spec, double step_size, int leapfrog_steps,
                   const MassMatrix& mass, Rng& rng);

/// Curvature-based mass matrix for a block at the current state.
MassMatrix block_mass(HmcBlock block, const ModelState& state, const ConnectomeDataset& data,
                      const ModelSpec& spec);

/// Latent w ~ N(pi, 1) truncated to (0, inf) if present, else (-inf, 0].
double albert_chib_draw(bool presence, double pi_linear, Rng& rng);

/// One augmented latent per observation, driven by the zero-inflation indicators.
Eigen::VectorXd draw_presence_latents(const ModelState& state, const ConnectomeDataset& data,
                                      const ModelSpec& spec, Rng& rng);

/// P(Xi = 1 | N = 0, pi, lambda).
double zero_inflation_probability(double pi_linear, double lambda);

/// Redraws Xi where N = 0; Xi stays 1 where N >= 1.
void draw_zero_inflation(ModelState& state, const ConnectomeDataset& data, const ModelSpec& spec,
                         Rng& rng);

/// Gaussian full conditional N(precision^{-1} b, precision^{-1}).
struct NormalConditional {
  Eigen::MatrixXd precision;
  Eigen::VectorXd mean;
};

/**
 * Full conditional of [theta_t; gamma_t1..gamma_td] for the length channel
 * (response log L, weights N / sigma2) or the presence channel (response w,
 * unit weights). `latents` is required for the presence channel.
 */
NormalConditional coefficient_conditional(Channel channel, const ModelState& state,
                                          const ConnectomeDataset& data, const ModelSpec& spec,
                                          const Eigen::VectorXd* latents);

/// Full conditional of the random effects eta_t (independent across subjects).
NormalConditional random_effect_conditional(Channel channel, const ModelState& state,
                                            const ConnectomeDataset& data, const ModelSpec& spec,
                                            const Eigen::VectorXd* latents);

Eigen::VectorXd draw_normal_conditional(const NormalConditional& cond, Rng& rng);

void gibbs_coefficients(Channel channel, ModelState& state, const ConnectomeDataset& data,
                        const ModelSpec& spec, const Eigen::VectorXd* latents, Rng& rng);

void gibbs_random_effects(Channel channel, ModelState& state, const ConnectomeDataset& data,
                          const ModelSpec& spec, const Eigen::VectorXd* latents, Rng& rng);

/// Shape and rate of the gamma conditional of 1 / sigma2.
std::pair<double, double> sigma2_conditional(const ModelState& state,
                                             const ConnectomeDataset& data,
                                             const ModelSpec& spec);

void gibbs_sigma2(ModelState& state, const ConnectomeDataset& data, const ModelSpec& spec,
                  Rng& rng);

/// Exact Bernoulli update of the delta mixture indicators.
void flip_indicators(ModelState& state, const ModelSpec& spec, Rng& rng);

/// log of the marginal density of x under N(0, s2) with s2 ~ IG(b1, b2).
double log_scale_mixture_marginal(double x, double b1, double b2);

/// One collapsed Chinese-restaurant sweep over the random-effect scales of channel t.
void dp_scale_update(int channel, ModelState& state, const ModelSpec& spec, Rng& rng);

/// Auxiliary-variable update of a DP precision given k clusters among n subjects.
double update_alpha(double alpha, int clusters, int n, double c1, double c2, Rng& rng);

/// Number of distinct cluster labels.
int cluster_count(const std::vector<int>& labels);

}  // namespace bgcon
