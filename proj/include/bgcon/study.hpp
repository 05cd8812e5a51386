#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "bgcon/chain.hpp"
#include "bgcon/metrics.hpp"
#include "bgcon/simulate.hpp"

namespace bgcon {

struct StudyConfig {
  int J = 20;
  std::vector<int> n_list{500};
  int replications = 5;
  std::vector<std::string> methods{"bayes", "ancova"};
  std::uint64_t seed = 1;
  GeneratorConfig generator;
  /// Estimation accuracy over replications, fitting all n subjects.
  bool estimation = true;
  /// Prediction of the second half of the subjects from a fit to the first half.
  bool prediction = true;
  Hyperparams hyper;  ///< K = 7 and random effects off unless changed
  Schedule schedule{1000, 1000, 1, 1, 0};
  ChainOptions chain;
  int threads = 1;

  void validate() const;
  bool has(const std::string& method) const;
};

struct StudyAccuracyRow {
  int n = 0;
  std::string family;
  std::string method;
  AccuracyCell cell;
};

struct StudyPredictionRow {
  int n = 0;
  int replication = 0;
  std::string method;
  PredictionMetrics metrics;
};

struct StudyReport {
  StudyConfig config;
  std::vector<StudyAccuracyRow> accuracy;
  std::vector<StudyPredictionRow> prediction;
};

/// Progress messages (replication finished etc.); may be called from worker threads.
using StudyLog = std::function<void(const std::string&)>;

/**
 * Simulation study: one truth from the study seed, then for every
 * (n, replication) a fresh dataset, the requested fits and their metrics.
 * Replications may run on several threads; results do not depend on the
 * thread count. Errors are rethrown with the (n, replication) context.
 */
StudyReport run_study(const StudyConfig& config, const StudyLog& log = {});

/// Posterior mean of every effect matrix over the retained draws.
std::vector<Eigen::MatrixXd> posterior_mean_effects(const McmcRun& run);

/// Accuracy CSV for one n (columns family,method,bias2,variance,mse,n_entries).
std::string study_accuracy_csv(const StudyReport& report, int n);
/// Columns n,replication,method,length_mse,count_mean_loglik.
std::string study_prediction_csv(const StudyReport& report);
/// Markdown accuracy (x 1e-2) and prediction tables.
std::string study_markdown(const StudyReport& report);

/// Writes accuracy_n<N>.csv, prediction.csv and report.md into `dir`.
void write_study(const StudyReport& report, const std::string& dir);

}  // namespace bgcon
