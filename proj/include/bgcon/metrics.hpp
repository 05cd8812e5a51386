#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "bgcon/dataset.hpp"

namespace bgcon {

/// Entrywise estimation accuracy averaged over the available entries.
struct AccuracyCell {
  double bias2 = 0.0;
  double variance = 0.0;
  double mse = 0.0;
  long n_entries = 0;
};

/**
 * Accuracy of replicated estimates of `truth`. NaN marks a missing estimate;
 * NaN in `truth` removes the entry. Only entries with at least two present
 * replications count. bias = mean - truth, variance uses n - 1, mse = bias2 + variance.
 * Throws DomainError when no entry qualifies or shapes differ.
 */
AccuracyCell accuracy(const std::vector<Eigen::MatrixXd>& estimates, const Eigen::MatrixXd& truth);

/// log P(N) under the zero-inflated Poisson with presence probit pi and log-rate lambda.
double zip_log_pmf(std::int32_t count, double pi, double lambda);

/**
 * Predictions for held-out observations (n x edges, subject-major like the
 * dataset). NaN means the method has no prediction there.
 */
struct HeldoutPrediction {
  Eigen::MatrixXd mean_log_length;
  Eigen::MatrixXd count_log_prob;
};

struct PredictionMetrics {
  double length_mse = 0.0;
  double count_mean_loglik = 0.0;
  long length_entries = 0;
  long count_entries = 0;
};

/**
 * length_mse: mean of (log L - predicted) over held-out entries with N >= 1.
 * count_mean_loglik: per-subject sum of count log-probabilities, averaged over subjects.
 * Throws DomainError on an empty held-out set.
 */
PredictionMetrics prediction_metrics(const HeldoutPrediction& prediction,
                                     const ConnectomeDataset& heldout);

/// Sets entries of both predictions to NaN wherever either one is NaN.
void common_support(HeldoutPrediction& a, HeldoutPrediction& b);

struct AccuracyRow {
  std::string family;
  std::string method;
  AccuracyCell cell;
};

/// CSV with columns family,method,bias2,variance,mse,n_entries.
std::string accuracy_csv(const std::vector<AccuracyRow>& rows);

}  // namespace bgcon
