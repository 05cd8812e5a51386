#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "bgcon/chain.hpp"
#include "bgcon/dataset.hpp"
#include "bgcon/metrics.hpp"
#include "bgcon/simulate.hpp"

namespace bgcon {

/// Posterior summary of one scalar.
struct IntervalSummary {
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  double tail_prob = 0.0;  ///< max(P(> 0), P(< 0))
  double interval_len = 0.0;
  bool significant = false;  ///< 0 outside [lo, hi]
};

/// Linear-interpolation quantile of a sorted sample (order-statistic position (S - 1) p).
double sorted_quantile(const std::vector<double>& sorted, double p);

/// Equal-tailed interval at `level`; throws DomainError on an empty sample.
IntervalSummary summarize_sample(std::vector<double> values, double level = 0.95);

struct EffectRow {
  int family = 0;
  int edge = 0;
  int a = 0;
  int b = 0;
  IntervalSummary summary;
  int rank = 0;  ///< 1 = most significant within the family
};

struct EffectSummary {
  std::vector<std::string> family_names;
  std::vector<std::string> region_names;
  /// Family-major, edges in edge-list order.
  std::vector<EffectRow> rows;
  double level = 0.95;
};

/**
 * Per family and edge: posterior mean, equal-tailed interval and tail
 * probability of the reconstructed effect over the stored draws. Within a
 * family edges are ranked by tail probability (descending), then interval
 * length (ascending), then edge index. Throws DomainError with fewer than two draws.
 */
EffectSummary summarize_effects(const McmcRun& run, double level = 0.95);

/// Same, from explicit per-draw effect values: samples[family] is draws x edges.
EffectSummary summarize_effect_samples(const std::vector<Eigen::MatrixXd>& samples,
                                       const std::vector<Edge>& edges,
                                       std::vector<std::string> family_names,
                                       std::vector<std::string> region_names, double level = 0.95);

/// CSV columns family,region_a,region_b,mean,lo,hi,tail_prob,interval_len,rank sorted by family then rank.
/// `top` > 0 keeps only the first `top` ranks of each family.
std::string effect_summary_csv(const EffectSummary& summary, int top = 0);

/// Ring layout of the regions plus the significant edges of every family.
std::string edge_plot_json(const EffectSummary& summary);

struct TuneOptions {
  std::vector<int> grid{7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20};
  int latent_draws = 10;
  double latent_sd = 10.0;  ///< sd of the logit-normal latent draws (the prior's a)
  std::uint64_t seed = 1;
  double knee = 0.01;  ///< relative AIC improvement regarded as negligible
  int degree = 3;
};

struct TuneReport {
  std::vector<int> grid;
  Eigen::MatrixXd aic;        ///< grid x draws, NaN where a fit failed
  Eigen::VectorXd mean_aic;   ///< NaN when every draw failed
  std::vector<int> used_draws;
  int argmin_K = 0;
  int chosen_K = 0;
};

/**
 * AIC of the three maximum-likelihood graphon regressions at fixed latents.
 * Aliased design columns are dropped and p counts the estimated coefficients.
 * NaN when a fit does not converge.
 */
double graphon_aic(const ConnectomeDataset& data, const BasisConfig& basis,
                   const Eigen::VectorXd& xi, const Eigen::VectorXd& delta);

/**
 * Grid search over the basis size: for each K the AIC is averaged over
 * fresh logit-normal latent draws. The chosen K is the
 * smallest grid value that no larger one improves on by a relative margin of
 * `knee` or more. Throws DomainError when no K yields a finite AIC.
 */
TuneReport tune_basis_size(const ConnectomeDataset& data, const TuneOptions& options = {});

/**
 * Knee rule over averaged AICs (NaN entries ignored): the smallest K that no
 * larger K improves on by a relative margin of `knee` or more.
 */
int knee_choice(const std::vector<int>& grid, const Eigen::VectorXd& mean_aic, double knee);

std::string tune_report_csv(const TuneReport& report);

/**
 * Posterior-predictive evaluation on held-out subjects: per draw and subject
 * new random effects come from the fitted DP mixture (new-cluster rule
 * included). Lengths are predicted by the draw-averaged mean; counts are
 * scored by the log of the draw-averaged zero-inflated Poisson probability.
 * Throws InvariantError when the region set differs from the run's.
 */
HeldoutPrediction posterior_predict(const McmcRun& run, const ConnectomeDataset& heldout,
                                    std::uint64_t seed);

/// Plug-in predictions of the per-edge ANCOVA fits (NaN where a fit is missing).
HeldoutPrediction ancova_predict(const AncovaFit& fit, const ConnectomeDataset& heldout);

}  // namespace bgcon
