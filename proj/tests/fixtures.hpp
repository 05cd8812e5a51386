#pragma once

#include <random>

#include "bgcon/dataset.hpp"
#include "bgcon/model.hpp"
#include "bgcon/stats.hpp"

namespace fixtures {

/// Small dataset with mixed zero / positive counts and random covariates.
inline bgcon::ConnectomeDataset random_dataset(int n, int J, std::uint64_t seed,
                                               bool self_edges = false) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  std::poisson_distribution<int> pd(3.0);
  auto data = bgcon::ConnectomeDataset::empty(n, J, 4, self_edges);
  for (int i = 0; i < n; ++i) {
    const int category = static_cast<int>(ud(rng) * 3.0);
    data.Z(i, 0) = category == 1;
    data.Z(i, 1) = category == 2;
    data.Z(i, 2) = ud(rng) < 0.5;
    data.Z(i, 3) = nd(rng);
    for (int e = 0; e < data.edges(); ++e) {
      const int count = ud(rng) < 0.4 ? 0 : pd(rng);
      data.set(i, e, count, std::exp(3.0 + 0.3 * nd(rng)));
    }
  }
  return data;
}

/// Random in-support state; `scale` controls the coefficient magnitude.
inline bgcon::ModelState random_state(const bgcon::ModelSpec& spec,
                                      const bgcon::ConnectomeDataset& data, std::uint64_t seed,
                                      double scale = 0.3) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> ud(0.05, 0.95);
  auto s = bgcon::ModelState::zeros(spec, data.J, data.n, data.edges());
  for (int f = 0; f < spec.families(); ++f) {
    auto& u = s.coefficients(f).upper();
    for (Eigen::Index m = 0; m < u.size(); ++m) u[m] = scale * nd(rng);
  }
  for (int j = 0; j < data.J; ++j) {
    s.xi[j] = ud(rng);
    s.delta[j] = ud(rng);
    s.indicator[j] = ud(rng) < 0.5;
  }
  for (int t = 0; t < bgcon::kChannels; ++t) {
    s.alpha[t] = 0.5 + ud(rng);
    // Two clusters with distinct scales.
    const double scales[2] = {0.2 + ud(rng), 1.0 + ud(rng)};
    for (int i = 0; i < data.n; ++i) {
      s.cluster[t][i] = i % 2;
      s.tau2(t, i) = scales[i % 2];
      if (spec.options.random_effects) s.eta(t, i) = 0.3 * nd(rng);
    }
  }
  s.sigma2 = 0.5 + ud(rng);
  for (std::size_t o = 0; o < s.inflation.size(); ++o) {
    s.inflation[o] = data.counts[o] >= 1 ? 1 : (ud(rng) < 0.5);
  }
  return s;
}

}  // namespace fixtures
