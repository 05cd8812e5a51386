#pragma once

#include <array>
#include <cmath>
#include <map>

#include "bgcon/model.hpp"
#include "oracles.hpp"

// Direct term-by-term reference implementations of the model densities.
namespace oracle {

using namespace bgcon;

inline double Phi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Graphon value by a double sum over the full coefficient matrix.
inline double naive_graphon(const SymmetricCoeffMatrix& c, double u, double v, const ModelSpec& spec) {
  const Eigen::VectorXd bu = oracle::basis(u, spec.hyper.K, spec.hyper.degree, spec.basis.knots);
  const Eigen::VectorXd bv = oracle::basis(v, spec.hyper.K, spec.hyper.degree, spec.basis.knots);
  const Eigen::MatrixXd full = c.to_full();
  double s = 0.0;
  for (int m = 0; m < spec.hyper.K; ++m) {
    for (int mp = 0; mp < spec.hyper.K; ++mp) s += full(m, mp) * bu[m] * bv[mp];
  }
  return s;
}

inline std::array<double, 3> naive_predictors(const ModelState& s, const ConnectomeDataset& data,
                                       const ModelSpec& spec, int i, int j, int k) {
  std::array<double, 3> out{};
  for (int t = 0; t < 3; ++t) {
    double v = naive_graphon(s.theta[t], s.xi[j], s.xi[k], spec) + s.eta(t, i);
    for (int l = 0; l < 4; ++l) {
      v += naive_graphon(s.gamma[t][l], s.delta[j], s.delta[k], spec) * data.Z(i, l);
    }
    out[t] = v;
  }
  return out;
}

inline double naive_log_likelihood(const ModelState& s, const ConnectomeDataset& data,
                            const ModelSpec& spec) {
  double total = 0.0;
  for (int i = 0; i < data.n; ++i) {
    for (int e = 0; e < data.edges(); ++e) {
      const auto [j, k] = data.edge_list[e];
      const auto lin = naive_predictors(s, data, spec, i, j, k);
      const int N = data.counts[data.obs(i, e)];
      const double rate = std::exp(lin[2]);
      if (N == 0) {
        total += std::log((1.0 - Phi(lin[1])) + Phi(lin[1]) * std::exp(-rate));
      } else {
        const double pmf = std::pow(rate, N) * std::exp(-rate) / std::tgamma(N + 1.0);
        const double var = s.sigma2 / N;
        const double y = std::log(data.lengths[data.obs(i, e)]);
        const double dens =
            std::exp(-(y - lin[0]) * (y - lin[0]) / (2 * var)) / std::sqrt(2 * M_PI * var);
        total += std::log(Phi(lin[1])) + std::log(pmf) + std::log(dens);
      }
    }
  }
  return total;
}

inline double naive_log_prior(const ModelState& s, const ModelSpec& spec) {
  const auto& h = spec.hyper;
  const auto normal = [](double x, double sd) {
    return std::log(std::exp(-x * x / (2 * sd * sd)) / (sd * std::sqrt(2 * M_PI)));
  };
  double total = 0.0;
  for (int f = 0; f < spec.families(); ++f) {
    const Eigen::MatrixXd full = s.coefficients(f).to_full();
    for (int m = 0; m < h.K; ++m) {
      for (int mp = m; mp < h.K; ++mp) total += normal(full(m, mp), h.a);
    }
  }
  const double beta_norm = std::tgamma(2 * h.M) / (std::tgamma(h.M) * std::tgamma(h.M));
  for (int j = 0; j < s.J; ++j) {
    const double x = s.xi[j];
    total += normal(std::log(x / (1 - x)), h.a) + std::log(1.0 / (x * (1 - x)));
    const double y = s.delta[j];
    const double I = s.indicator[j];
    const double beta = std::pow(y, h.M - 1) * std::pow(1 - y, h.M - 1) * beta_norm;
    total += std::log((1 - I) * beta + I) + I * std::log(h.q) + (1 - I) * std::log(1 - h.q);
  }
  if (spec.options.random_effects) {
    for (int t = 0; t < 3; ++t) {
      std::map<int, std::pair<int, double>> clusters;
      for (int i = 0; i < s.n; ++i) {
        total += normal(s.eta(t, i), std::sqrt(s.tau2(t, i)));
        clusters[s.cluster[t][i]].first++;
        clusters[s.cluster[t][i]].second = s.tau2(t, i);
      }
      const double a = s.alpha[t];
      // CRP partition probability: a^k Gamma(a)/Gamma(a+n) prod (n_c - 1)!
      double eppf = std::pow(a, clusters.size()) * std::tgamma(a) / std::tgamma(a + s.n);
      for (const auto& [label, c] : clusters) {
        eppf *= std::tgamma(c.first);
        const double x = c.second;
        total += std::log(std::pow(h.b2, h.b1) / std::tgamma(h.b1) * std::pow(x, -h.b1 - 1) *
                          std::exp(-h.b2 / x));
      }
      total += std::log(eppf);
      total += std::log(std::pow(h.c2, h.c1) / std::tgamma(h.c1) * std::pow(a, h.c1 - 1) *
                        std::exp(-h.c2 * a));
    }
  }
  const double prec = 1.0 / s.sigma2;
  total += std::log(std::pow(h.d2, h.d1) / std::tgamma(h.d1) * std::pow(prec, h.d1 - 1) *
                    std::exp(-h.d2 * prec));
  return total;
}

// Dense design rows built entry by entry from the basis definitions.
inline Eigen::RowVectorXd design_row(const ModelState& s, const ConnectomeDataset& data,
                              const ModelSpec& spec, int i, int e) {
  const int K = spec.hyper.K;
  const int P = spec.P();
  const auto [j, k] = data.edge_list[e];
  const auto features = [&](double u, double v) {
    const Eigen::VectorXd bu = oracle::basis(u, K, 3, spec.basis.knots);
    const Eigen::VectorXd bv = oracle::basis(v, K, 3, spec.basis.knots);
    Eigen::RowVectorXd f(P);
    int c = 0;
    for (int m = 0; m < K; ++m) {
      for (int mp = m; mp < K; ++mp) {
        f[c++] = m == mp ? bu[m] * bv[m] : bu[m] * bv[mp] + bu[mp] * bv[m];
      }
    }
    return f;
  };
  Eigen::RowVectorXd row(P * 5);
  row.segment(0, P) = features(s.xi[j], s.xi[k]);
  const Eigen::RowVectorXd fd = features(s.delta[j], s.delta[k]);
  for (int l = 0; l < 4; ++l) row.segment(P * (l + 1), P) = data.Z(i, l) * fd;
  return row;
}

}  // namespace oracle
