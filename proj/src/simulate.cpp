#include "bgcon/simulate.hpp"

#include <cmath>
#include <limits>

#include "bgcon/errors.hpp"
#include "bgcon/glm.hpp"

namespace bgcon {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}  // namespace

ModelState draw_prior_state(const ModelSpec& spec, int J, int n, int edges, Rng& rng) {
  const Hyperparams& h = spec.hyper;
  ModelState s = ModelState::zeros(spec, J, n, edges);
  for (int f = 0; f < spec.families(); ++f) {
    Eigen::VectorXd u(spec.P());
    for (Eigen::Index m = 0; m < u.size(); ++m) u[m] = h.a * stats::draw_normal(rng);
    s.coefficients(f) = SymmetricCoeffMatrix(h.K, u);
  }
  for (int j = 0; j < J; ++j) {
    s.xi[j] = stats::inv_logit(h.a * stats::draw_normal(rng));
    if (spec.options.delta_prior == DeltaPrior::beta_mixture) {
      s.indicator[j] = stats::draw_bernoulli(h.q, rng) ? 1 : 0;
      s.delta[j] = s.indicator[j] ? stats::draw_uniform(rng) : stats::draw_beta(h.M, h.M, rng);
    } else {
      s.delta[j] = stats::inv_logit(h.a * stats::draw_normal(rng));
    }
  }
  if (spec.options.random_effects) {
    for (int t = 0; t < kChannels; ++t) {
      s.alpha[t] = stats::draw_gamma(h.c1, h.c2, rng);
      std::vector<int> size;
      std::vector<double> scale;
      for (int i = 0; i < n; ++i) {
        // Seat subject i: existing cluster with weight size, new with weight alpha.
        double u = stats::draw_uniform(rng) * (i + s.alpha[t]);
        int chosen = static_cast<int>(size.size());
        for (std::size_t c = 0; c < size.size(); ++c) {
          u -= size[c];
          if (u < 0.0) {
            chosen = static_cast<int>(c);
            break;
          }
        }
        if (chosen == static_cast<int>(size.size())) {
          size.push_back(0);
          scale.push_back(stats::draw_inverse_gamma(h.b1, h.b2, rng));
        }
        ++size[chosen];
        s.cluster[t][i] = chosen;
        s.tau2(t, i) = scale[chosen];
        s.eta(t, i) = std::sqrt(scale[chosen]) * stats::draw_normal(rng);
      }
    }
  }
  s.sigma2 = 1.0 / stats::draw_gamma(h.d1, h.d2, rng);
  return s;
}

void simulate_observations(ModelState& state, ConnectomeDataset& data, const ModelSpec& spec,
                           Rng& rng) {
  if (state.J != data.J || state.n != data.n) {
    throw InvariantError("state and dataset dimensions differ");
  }
  const EdgeTerms terms = compute_edge_terms(state, data, spec);
  state.inflation.assign(data.counts.size(), 0);
  for (int i = 0; i < data.n; ++i) {
    for (int e = 0; e < data.edges(); ++e) {
      const double pi = linear_predictor(terms, state, data, kPresence, i, e);
      const double lambda = linear_predictor(terms, state, data, kCount, i, e);
      const double mu = linear_predictor(terms, state, data, kLength, i, e);
      const bool present = stats::draw_uniform(rng) < stats::normal_cdf(pi);
      std::int64_t count = present ? stats::draw_poisson(std::exp(lambda), rng) : 0;
      count = std::min<std::int64_t>(count, std::numeric_limits<std::int32_t>::max());
      double length = kNaN;
      if (count >= 1) {
        const double sd = std::sqrt(state.sigma2 / static_cast<double>(count));
        length = std::exp(mu + sd * stats::draw_normal(rng));
      }
      data.set(i, e, static_cast<std::int32_t>(count), length);
      state.inflation[data.obs(i, e)] = present ? 1 : 0;
    }
  }
}

}  // namespace bgcon

namespace bgcon {

namespace {

// Symmetrized truth (f(-c1 a_j - c2 a_k) + f(-c2 a_j - c1 a_k)) / 2.
template <typename F>
Eigen::MatrixXd symmetric_truth(const Eigen::VectorXd& a, double c1, double c2, F f) {
  const Eigen::Index J = a.size();
  Eigen::MatrixXd m(J, J);
  for (Eigen::Index j = 0; j < J; ++j) {
    for (Eigen::Index k = j; k < J; ++k) {
      m(j, k) = m(k, j) = 0.5 * (f(-c1 * a[j] - c2 * a[k]) + f(-c2 * a[j] - c1 * a[k]));
    }
  }
  return m;
}

}  // namespace

TruthSpec make_truth(int J, const GeneratorConfig& config, Rng& rng) {
  if (J < 2) throw DomainError("the generator needs at least two regions");
  TruthSpec t;
  t.J = J;
  t.config = config;
  t.xi.resize(J);
  t.delta.resize(J);
  for (int j = 0; j < J; ++j) t.xi[j] = stats::draw_uniform(rng);
  for (int j = 0; j < J; ++j) t.delta[j] = stats::draw_uniform(rng);

  const auto cube = [](double x) { return x * x * x; };
  const auto expf = [](double x) { return std::exp(x); };
  const auto sinf = [](double x) { return std::sin(x); };
  const auto cosf = [](double x) { return std::cos(x); };
  const auto linf = [](double x) { return x; };
  // Per channel: length and count share (0.5, 0.4), presence uses (0.7, 1.0).
  const double c1[kChannels] = {0.5, 0.7, 0.5};
  const double c2[kChannels] = {0.4, 1.0, 0.4};
  t.effects.resize(kChannels * 5);
  for (int ch = 0; ch < kChannels; ++ch) {
    t.effects[ch * 5 + 0] = symmetric_truth(t.xi, c1[ch], c2[ch], cube);
    t.effects[ch * 5 + 1] = symmetric_truth(t.delta, c1[ch], c2[ch], expf);
    t.effects[ch * 5 + 2] = symmetric_truth(t.delta, c1[ch], c2[ch], sinf);
    t.effects[ch * 5 + 3] = symmetric_truth(t.delta, c1[ch], c2[ch], cosf);
    t.effects[ch * 5 + 4] = symmetric_truth(t.delta, c1[ch], c2[ch], linf);
  }
  const double sd = std::sqrt(config.noise_var);
  for (auto& m : t.effects) {
    Eigen::MatrixXd e(J, J);
    for (int j = 0; j < J; ++j) {
      for (int k = 0; k < J; ++k) e(j, k) = sd * stats::draw_normal(rng);
    }
    m += 0.5 * (e + e.transpose());
  }
  t.effects[kPresence * 5].array() += config.baseline_shift;
  return t;
}

ConnectomeDataset generate_observations(const TruthSpec& truth, int n, Rng& rng) {
  if (n < 1) throw DomainError("the generator needs at least one subject");
  const int d = 4;
  ConnectomeDataset data = ConnectomeDataset::empty(n, truth.J, d, false);
  for (int j = 0; j < truth.J; ++j) data.region_names[j] = "R" + std::to_string(j + 1);
  double age_sum = 0.0;
  for (int i = 0; i < n; ++i) {
    data.subject_ids[i] = "S" + std::to_string(i + 1);
    const int category = std::min(2, static_cast<int>(3.0 * stats::draw_uniform(rng)));
    data.Z(i, 0) = category == 1 ? 1.0 : 0.0;
    data.Z(i, 1) = category == 2 ? 1.0 : 0.0;
    data.Z(i, 2) = stats::draw_bernoulli(0.5, rng) ? 1.0 : 0.0;
    data.Z(i, 3) = truth.config.age_sd * stats::draw_normal(rng);
    age_sum += data.Z(i, 3);
  }
  data.age_center = age_sum / n;
  data.Z.col(3).array() -= data.age_center;

  const double sigma = truth.config.sigma;
  for (int i = 0; i < n; ++i) {
    for (int e = 0; e < data.edges(); ++e) {
      const int j = data.edge_list[e].a, k = data.edge_list[e].b;
      double lp[kChannels];
      for (int ch = 0; ch < kChannels; ++ch) {
        lp[ch] = truth.effects[ch * 5](j, k);
        for (int l = 0; l < d; ++l) lp[ch] += truth.effects[ch * 5 + 1 + l](j, k) * data.Z(i, l);
      }
      const bool present = stats::draw_uniform(rng) < stats::normal_cdf(lp[kPresence]);
      std::int64_t count = present ? stats::draw_poisson(std::exp(lp[kCount]), rng) : 0;
      count = std::min<std::int64_t>(count, std::numeric_limits<std::int32_t>::max());
      double length = kNaN;
      if (count >= 1) {
        const double sd = sigma / std::sqrt(static_cast<double>(count));
        length = std::exp(lp[kLength] + sd * stats::draw_normal(rng));
      }
      data.set(i, e, static_cast<std::int32_t>(count), length);
    }
  }
  return data;
}

std::pair<ConnectomeDataset, TruthSpec> generate_dataset(int J, int n, std::uint64_t seed,
                                                         const GeneratorConfig& config) {
  Rng rng = make_stream(seed, 0, 0);
  TruthSpec truth = make_truth(J, config, rng);
  ConnectomeDataset data = generate_observations(truth, n, rng);
  return {std::move(data), std::move(truth)};
}

std::vector<Eigen::MatrixXd> AncovaFit::effect_matrices() const {
  std::vector<Eigen::MatrixXd> out(kChannels * (1 + d), Eigen::MatrixXd::Constant(J, J, kNaN));
  for (int ch = 0; ch < kChannels; ++ch) {
    for (std::size_t e = 0; e < edge_list.size(); ++e) {
      if (!ok[ch][e]) continue;
      const int j = edge_list[e].a, k = edge_list[e].b;
      for (int c = 0; c <= d; ++c) {
        out[ch * (1 + d) + c](j, k) = out[ch * (1 + d) + c](k, j) = estimates[ch](e, c);
      }
    }
  }
  return out;
}

AncovaFit ancova_fit(const ConnectomeDataset& data) {
  data.validate();
  const int n = data.n, d = data.covariates(), E = data.edges();
  AncovaFit fit;
  fit.J = data.J;
  fit.d = d;
  fit.edge_list = data.edge_list;
  for (int ch = 0; ch < kChannels; ++ch) {
    fit.estimates[ch] = Eigen::MatrixXd::Constant(E, 1 + d, kNaN);
    fit.ok[ch].assign(E, 0);
  }
  Eigen::MatrixXd X(n, 1 + d);
  X.col(0).setOnes();
  X.rightCols(d) = data.Z;
  const glm::DenseDesign design(X);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);
  const Eigen::VectorXd all = Eigen::VectorXd::Ones(n);
  glm::IrlsOptions opt;
  opt.max_iterations = 50;
  opt.tolerance = 1e-8;

  Eigen::VectorXd y_len(n), w_len(n), y_pres(n), y_count(n), w_count(n);
  for (int e = 0; e < E; ++e) {
    for (int i = 0; i < n; ++i) {
      const std::size_t o = data.obs(i, e);
      const bool seen = data.counts[o] >= 1;
      y_len[i] = seen ? data.log_lengths[o] : 0.0;
      w_len[i] = seen ? static_cast<double>(data.counts[o]) : 0.0;
      y_pres[i] = seen ? 1.0 : 0.0;
      y_count[i] = static_cast<double>(data.counts[o]);
      w_count[i] = seen ? 1.0 : 0.0;
    }
    const glm::FitResult r[kChannels] = {glm::wls(design, y_len, w_len, zero, opt),
                                         glm::probit_irls(design, y_pres, all, zero, opt),
                                         glm::poisson_irls(design, y_count, w_count, zero, opt)};
    for (int ch = 0; ch < kChannels; ++ch) {
      if (!r[ch].converged || r[ch].rank_deficient || !r[ch].beta.allFinite()) continue;
      fit.estimates[ch].row(e) = r[ch].beta.transpose();
      fit.ok[ch][e] = 1;
    }
  }
  return fit;
}

}  // namespace bgcon
