#include "bgcon/metrics.hpp"

#include <cmath>
#include <sstream>

#include "bgcon/errors.hpp"
#include "bgcon/io.hpp"
#include "bgcon/stats.hpp"

namespace bgcon {

AccuracyCell accuracy(const std::vector<Eigen::MatrixXd>& estimates, const Eigen::MatrixXd& truth) {
  for (const auto& m : estimates) {
    if (m.rows() != truth.rows() || m.cols() != truth.cols()) {
      throw DomainError("estimate and truth matrices differ in shape");
    }
  }
  AccuracyCell cell;
  double bias2 = 0.0, variance = 0.0;
  for (Eigen::Index r = 0; r < truth.rows(); ++r) {
    for (Eigen::Index c = 0; c < truth.cols(); ++c) {
      if (std::isnan(truth(r, c))) continue;
      // Shifted by the first present value so identical estimates average exactly.
      double first = NAN, shift = 0.0;
      int present = 0;
      for (const auto& m : estimates) {
        if (std::isnan(m(r, c))) continue;
        if (present == 0) first = m(r, c);
        shift += m(r, c) - first;
        ++present;
      }
      if (present < 2) continue;
      const double mean = first + shift / present;
      double ss = 0.0;
      for (const auto& m : estimates) {
        if (!std::isnan(m(r, c))) ss += (m(r, c) - mean) * (m(r, c) - mean);
      }
      bias2 += (mean - truth(r, c)) * (mean - truth(r, c));
      variance += ss / (present - 1);
      ++cell.n_entries;
    }
  }
  if (cell.n_entries == 0) throw DomainError("no entry has two present replications");
  cell.bias2 = bias2 / cell.n_entries;
  cell.variance = variance / cell.n_entries;
  cell.mse = cell.bias2 + cell.variance;
  return cell;
}

double zip_log_pmf(std::int32_t count, double pi, double lambda) {
  const double rate = std::exp(lambda);
  if (count >= 1) {
    return stats::normal_log_cdf(pi) + count * lambda - rate - std::lgamma(count + 1.0);
  }
  return stats::log_add_exp(stats::normal_log_cdf(-pi), stats::normal_log_cdf(pi) - rate);
}

PredictionMetrics prediction_metrics(const HeldoutPrediction& prediction,
                                     const ConnectomeDataset& heldout) {
  if (heldout.n == 0 || heldout.edges() == 0) throw DomainError("empty held-out set");
  if (prediction.mean_log_length.rows() != heldout.n ||
      prediction.mean_log_length.cols() != heldout.edges() ||
      prediction.count_log_prob.rows() != heldout.n ||
      prediction.count_log_prob.cols() != heldout.edges()) {
    throw DomainError("prediction shape does not match the held-out data");
  }
  PredictionMetrics out;
  double sse = 0.0, loglik = 0.0;
  for (int i = 0; i < heldout.n; ++i) {
    for (int e = 0; e < heldout.edges(); ++e) {
      const std::size_t o = heldout.obs(i, e);
      const double mu = prediction.mean_log_length(i, e);
      if (heldout.counts[o] >= 1 && !std::isnan(mu)) {
        const double r = heldout.log_lengths[o] - mu;
        sse += r * r;
        ++out.length_entries;
      }
      const double lp = prediction.count_log_prob(i, e);
      if (!std::isnan(lp)) {
        loglik += lp;
        ++out.count_entries;
      }
    }
  }
  if (out.length_entries == 0) throw DomainError("no held-out edge with an observed length");
  out.length_mse = sse / out.length_entries;
  out.count_mean_loglik = loglik / heldout.n;
  return out;
}

void common_support(HeldoutPrediction& a, HeldoutPrediction& b) {
  const auto mask = [](Eigen::MatrixXd& x, Eigen::MatrixXd& y) {
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      for (Eigen::Index c = 0; c < x.cols(); ++c) {
        if (std::isnan(x(r, c)) || std::isnan(y(r, c))) x(r, c) = y(r, c) = NAN;
      }
    }
  };
  mask(a.mean_log_length, b.mean_log_length);
  mask(a.count_log_prob, b.count_log_prob);
}

std::string accuracy_csv(const std::vector<AccuracyRow>& rows) {
  std::ostringstream out;
  out << "family,method,bias2,variance,mse,n_entries\n";
  for (const auto& r : rows) {
    out << r.family << ',' << r.method << ',' << io::format_double(r.cell.bias2) << ','
        << io::format_double(r.cell.variance) << ',' << io::format_double(r.cell.mse) << ','
        << r.cell.n_entries << '\n';
  }
  return out.str();
}

}  // namespace bgcon
