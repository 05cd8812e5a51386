#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace bgcon {

struct Edge {
  int a = 0;
  int b = 0;
};

/**
 * Multi-subject weighted network observations.
 *
 * Observations are stored subject-major: entry (i, e) lives at i * edges() + e.
 * Lengths are NaN exactly where the count is zero.
 */
struct ConnectomeDataset {
  int n = 0;
  int J = 0;
  bool self_edges = false;

  std::vector<std::string> subject_ids;
  std::vector<std::string> region_names;
  std::vector<std::string> covariate_names{"mci", "ad", "male", "age"};

  std::vector<Edge> edge_list;
  std::vector<std::int32_t> counts;
  std::vector<double> lengths;
  std::vector<double> log_lengths;

  /// n x d covariate rows (age already centered).
  Eigen::MatrixXd Z;
  double age_center = 0.0;

  int edges() const { return static_cast<int>(edge_list.size()); }
  int covariates() const { return static_cast<int>(Z.cols()); }
  std::size_t obs(int i, int e) const {
    return static_cast<std::size_t>(i) * edge_list.size() + static_cast<std::size_t>(e);
  }
  /// Index of the edge joining regions j and k, or -1.
  int edge_index(int j, int k) const;

  /// Builds the (j<k) or (j<=k) edge list for J regions.
  static std::vector<Edge> make_edges(int J, bool self_edges);

  /// Allocates storage for n subjects with zero counts and no lengths.
  static ConnectomeDataset empty(int n, int J, int d, bool self_edges = false);

  /// Sets a count and its mean length (pass NaN when count is zero).
  void set(int i, int e, std::int32_t count, double length);

  /// Throws InvariantError naming the offending subject/edge.
  void validate() const;

  /// Dataset restricted to the listed subjects (in the given order).
  ConnectomeDataset subset(const std::vector<int>& subjects) const;

  std::size_t observed_lengths() const;
};

struct IngestOptions {
  bool self_edges = false;
  bool center_age = true;
};

/// Reads `subject,region_a,region_b,count,mean_length` and `subject,mci,ad,male,age`.
ConnectomeDataset read_dataset(const std::string& edges_path, const std::string& covariates_path,
                               const IngestOptions& options = {});

/// Writes the dataset in the ingestion format (age written back uncentered).
void write_edges_csv(const ConnectomeDataset& data, const std::string& path);
void write_covariates_csv(const ConnectomeDataset& data, const std::string& path);

}  // namespace bgcon
