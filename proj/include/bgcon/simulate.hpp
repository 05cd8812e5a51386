#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <utility>
#include <string>
#include <vector>

#include "bgcon/dataset.hpp"
#include "bgcon/model.hpp"
#include "bgcon/stats.hpp"

namespace bgcon {

/// Draw of every parameter from the prior (sequential CRP for the random-effect scales).
ModelState draw_prior_state(const ModelSpec& spec, int J, int n, int edges, Rng& rng);

/**
 * Replaces the observations of `data` with a draw from the likelihood at
 * `state`, keeping subjects, regions and covariates. The realized
 * zero-inflation indicators are written back to state.inflation.
 */
void simulate_observations(ModelState& state, ConnectomeDataset& data, const ModelSpec& spec,
                           Rng& rng);

}  // namespace bgcon

namespace bgcon {

/// Settings of the synthetic-data generator.
struct GeneratorConfig {
  double sigma = 0.5;          ///< error sd of log L for one fibre
  double noise_var = 0.05;     ///< variance of the entrywise perturbations e_jk
  double age_sd = 1.0;         ///< sd of the age draw (centered afterwards)
  double baseline_shift = 0.0; ///< added to every pi0 entry (negative => sparser networks)
};

/**
 * Ground truth of one simulation design: node latents and the 15 effect
 * matrices (layout of ModelSpec::family_index with d = 4). Diagonals are
 * unused because self-edges are excluded.
 */
struct TruthSpec {
  int J = 0;
  Eigen::VectorXd xi;
  Eigen::VectorXd delta;
  std::vector<Eigen::MatrixXd> effects;
  GeneratorConfig config;
};

/// Draws xi, delta ~ U(0,1) and builds the cubic/exp/sin/cos/linear truths plus noise.
TruthSpec make_truth(int J, const GeneratorConfig& config, Rng& rng);

/// Draws n subjects (covariates and observations) from a truth.
ConnectomeDataset generate_observations(const TruthSpec& truth, int n, Rng& rng);

/// make_truth followed by generate_observations on one stream of `seed`.
std::pair<ConnectomeDataset, TruthSpec> generate_dataset(int J, int n, std::uint64_t seed,
                                                         const GeneratorConfig& config = {});

/**
 * Independent per-edge regressions on (1, Z). Row e of each estimate matrix
 * holds the intercept and the d covariate coefficients; rows whose fit
 * failed are NaN and flagged in `ok`.
 */
struct AncovaFit {
  std::array<Eigen::MatrixXd, kChannels> estimates;  ///< edges x (1 + d)
  std::array<std::vector<std::uint8_t>, kChannels> ok;
  std::vector<Edge> edge_list;
  int J = 0;
  int d = 0;

  /// One J x J matrix per family (NaN where missing or on unused entries).
  std::vector<Eigen::MatrixXd> effect_matrices() const;
};

AncovaFit ancova_fit(const ConnectomeDataset& data);

}  // namespace bgcon
