#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "bgcon/chain.hpp"
#include "bgcon/simulate.hpp"

namespace geweke {

struct Statistic {
  std::string name;
  double z = 0.0;
  double forward_mean = 0.0;
  double chain_mean = 0.0;
};

inline bgcon::ModelSpec tiny_spec() {
  bgcon::Hyperparams h;
  h.K = 4;
  h.a = 0.7;
  h.M = 3.0;
  h.q = 0.5;
  h.b1 = 3.0;
  h.b2 = 2.0;
  h.c1 = 2.0;
  h.c2 = 2.0;
  h.d1 = 3.0;
  h.d2 = 1.0;
  return bgcon::ModelSpec::make(h, {}, 4);
}

inline bgcon::ConnectomeDataset tiny_design() {
  auto data = bgcon::ConnectomeDataset::empty(4, 4, 4);
  data.Z << 0, 0, 1, 0.5,  //
      1, 0, 0, -0.3,       //
      0, 1, 1, 1.0,        //
      0, 0, 0, -1.2;
  return data;
}

inline std::vector<std::string> names() {
  // Squares for the parameters whose prior is symmetric about zero.
  return {"theta_length[0]^2", "theta_presence[0]^2", "theta_count[0]^2",
          "gamma_count_age[2]^2", "logit_xi[0]^2",    "delta[1]",
          "eta_length[0]^2",   "eta_count[1]^2",     "log_tau2_presence[2]",
          "log_sigma2"};
}

inline std::vector<double> statistics(const bgcon::ModelState& s) {
  using bgcon::kCount;
  using bgcon::kLength;
  using bgcon::kPresence;
  const auto sq = [](double x) { return x * x; };
  return {sq(s.theta[kLength].upper()[0]),
          sq(s.theta[kPresence].upper()[0]),
          sq(s.theta[kCount].upper()[0]),
          sq(s.gamma[kCount][3].upper()[2]),
          sq(bgcon::stats::logit(s.xi[0])),
          s.delta[1],
          sq(s.eta(kLength, 0)),
          sq(s.eta(kCount, 1)),
          std::log(s.tau2(kPresence, 2)),
          std::log(s.sigma2)};
}

/// Variance of the mean of a correlated series by non-overlapping batch means.
inline double batch_mean_variance(const std::vector<double>& x, int batches) {
  const std::size_t size = x.size() / batches;
  std::vector<double> means(batches, 0.0);
  double grand = 0.0;
  for (int b = 0; b < batches; ++b) {
    for (std::size_t t = 0; t < size; ++t) means[b] += x[b * size + t];
    means[b] /= static_cast<double>(size);
    grand += means[b];
  }
  grand /= batches;
  double v = 0.0;
  for (double m : means) v += (m - grand) * (m - grand);
  return v / (batches - 1) / batches;
}

/**
 * Compares forward draws from the joint (prior, then data) with a chain that
 * alternates one sampler sweep and a fresh data draw.
 */
inline std::vector<Statistic> run(int forward_draws, int sweeps, std::uint64_t seed) {
  const bgcon::ModelSpec spec = tiny_spec();
  bgcon::ConnectomeDataset data = tiny_design();
  const int k = static_cast<int>(names().size());

  std::vector<std::vector<double>> forward(k), chain(k);
  for (int r = 0; r < forward_draws; ++r) {
    bgcon::Rng rng = bgcon::make_stream(seed, 1, static_cast<std::uint64_t>(r));
    const bgcon::ModelState s = bgcon::draw_prior_state(spec, data.J, data.n, data.edges(), rng);
    const auto g = statistics(s);
    for (int c = 0; c < k; ++c) forward[c].push_back(g[c]);
  }

  bgcon::ChainOptions opt;
  opt.adapt = false;
  opt.precondition = false;
  opt.coefficient_step = 0.12;
  opt.latent_step = 0.25;
  bgcon::Rng rng0 = bgcon::make_stream(seed, 2, 0);
  bgcon::ModelState s0 = bgcon::draw_prior_state(spec, data.J, data.n, data.edges(), rng0);
  bgcon::simulate_observations(s0, data, spec, rng0);
  bgcon::ChainState cs = bgcon::make_chain_state(s0, data, spec, opt);
  for (int t = 0; t < sweeps; ++t) {
    bgcon::Rng rng = bgcon::make_stream(seed, 3, static_cast<std::uint64_t>(t));
    bgcon::sweep(cs, data, spec, opt, rng);
    bgcon::simulate_observations(cs.state, data, spec, rng);
    const auto g = statistics(cs.state);
    for (int c = 0; c < k; ++c) chain[c].push_back(g[c]);
  }

  std::vector<Statistic> out;
  for (int c = 0; c < k; ++c) {
    double mf = 0.0, vf = 0.0, mc = 0.0;
    for (double v : forward[c]) mf += v;
    mf /= forward[c].size();
    for (double v : forward[c]) vf += (v - mf) * (v - mf);
    vf /= (forward[c].size() - 1.0);
    for (double v : chain[c]) mc += v;
    mc /= chain[c].size();
    const double se2 = vf / forward[c].size() + batch_mean_variance(chain[c], 50);
    out.push_back({names()[c], (mf - mc) / std::sqrt(se2), mf, mc});
  }
  return out;
}

}  // namespace geweke
