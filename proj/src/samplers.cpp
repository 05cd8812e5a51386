#include "bgcon/samplers.hpp"

#include <cmath>
#include <limits>
#include <map>

#include "bgcon/errors.hpp"
#include "bgcon/glm.hpp"

namespace bgcon {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Response and weight of one observation for a Gaussian-conjugate channel.
struct ConjugateObs {
  double weight = 0.0;
  double response = 0.0;
};

ConjugateObs conjugate_obs(Channel channel, const ModelState& state, const ConnectomeDataset& data,
                           const Eigen::VectorXd* latents, std::size_t o) {
  ConjugateObs out;
  if (channel == kLength) {
    const std::int32_t count = data.counts[o];
    if (count >= 1) {
      out.weight = count / state.sigma2;
      out.response = data.log_lengths[o];
    }
  } else if (channel == kPresence) {
    if (!latents) throw InvariantError("presence channel needs augmented latents");
    out.weight = 1.0;
    out.response = (*latents)[static_cast<Eigen::Index>(o)];
  } else {
    throw InvariantError("count channel has no conjugate update");
  }
  return out;
}

Eigen::VectorXd covariate_row(const ConnectomeDataset& data, int i) {
  Eigen::VectorXd z(1 + data.covariates());
  z[0] = 1.0;
  z.tail(data.covariates()) = data.Z.row(i).transpose();
  return z;
}

}  // namespace

void HmcConfig::validate() const {
  if (leapfrog_steps < 1) throw ConfigError("leapfrog_steps must be at least 1");
  if (!(step_size > 0.0)) throw ConfigError("step_size must be positive");
  if (adapt_window < 1) throw ConfigError("adapt_window must be at least 1");
  if (!(band_low > 0.0 && band_low < band_high && band_high < 1.0)) {
    throw ConfigError("acceptance band must satisfy 0 < low < high < 1");
  }
}

MassMatrix MassMatrix::identity(Eigen::Index dim) {
  return diagonal(Eigen::VectorXd::Ones(dim));
}

MassMatrix MassMatrix::diagonal(const Eigen::VectorXd& diag) {
  if (!(diag.array() > 0.0).all() || !diag.allFinite()) {
    throw DomainError("mass matrix diagonal must be positive and finite");
  }
  MassMatrix m;
  m.dim_ = diag.size();
  m.diag_ = diag;
  return m;
}

MassMatrix MassMatrix::dense(const Eigen::MatrixXd& M) {
  const Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() != Eigen::Success || !M.allFinite()) {
    throw DomainError("mass matrix is not positive definite");
  }
  MassMatrix m;
  m.dim_ = M.rows();
  m.is_dense_ = true;
  m.chol_ = llt.matrixL();
  return m;
}

MassMatrix MassMatrix::from_cholesky(const Eigen::MatrixXd& L) {
  if (L.rows() != L.cols() || !L.allFinite() || !(L.diagonal().array() > 0.0).all()) {
    throw DomainError("invalid Cholesky factor for a mass matrix");
  }
  MassMatrix m;
  m.dim_ = L.rows();
  m.is_dense_ = true;
  m.chol_ = L.triangularView<Eigen::Lower>();
  return m;
}

Eigen::VectorXd MassMatrix::draw_momentum(Rng& rng) const {
  Eigen::VectorXd z(dim_);
  for (Eigen::Index c = 0; c < dim_; ++c) z[c] = stats::draw_normal(rng);
  if (is_dense_) return chol_ * z;
  return z.cwiseProduct(diag_.cwiseSqrt());
}

Eigen::VectorXd MassMatrix::velocity(const Eigen::VectorXd& p) const {
  if (is_dense_) {
    const Eigen::VectorXd y = chol_.triangularView<Eigen::Lower>().solve(p);
    return chol_.transpose().triangularView<Eigen::Upper>().solve(y);
  }
  return p.cwiseQuotient(diag_);
}

double MassMatrix::kinetic(const Eigen::VectorXd& p) const {
  if (is_dense_) {
    const Eigen::VectorXd y = chol_.triangularView<Eigen::Lower>().solve(p);
    return 0.5 * y.squaredNorm();
  }
  return 0.5 * p.cwiseAbs2().cwiseQuotient(diag_).sum();
}

HmcStep hmc_step(const LogTarget& target, Eigen::VectorXd& x, double step_size,
                 int leapfrog_steps, const MassMatrix& mass, Rng& rng) {
  HmcStep out;
  const Eigen::VectorXd p0 = mass.draw_momentum(rng);
  // The uniform is drawn up front so the stream advances identically on every path.
  const double u = stats::draw_uniform(rng);
  Eigen::VectorXd grad;
  double logp0;
  try {
    logp0 = target(x, &grad);
  } catch (const EvaluationError&) {
    out.divergent = true;
    return out;
  }
  if (!std::isfinite(logp0) || !grad.allFinite()) {
    out.divergent = true;
    return out;
  }
  const double h0 = -logp0 + mass.kinetic(p0);
  Eigen::VectorXd q = x;
  Eigen::VectorXd p = p0 + 0.5 * step_size * grad;
  double logp = logp0;
  try {
    for (int s = 0; s < leapfrog_steps; ++s) {
      q += step_size * mass.velocity(p);
      logp = target(q, &grad);
      if (!std::isfinite(logp) || !grad.allFinite()) {
        out.divergent = true;
        return out;
      }
      p += (s + 1 < leapfrog_steps ? 1.0 : 0.5) * step_size * grad;
    }
  } catch (const EvaluationError&) {
    out.divergent = true;
    return out;
  }
  const double h1 = -logp + mass.kinetic(p);
  out.delta_h = h0 - h1;
  if (!std::isfinite(out.delta_h)) {
    out.divergent = true;
    return out;
  }
  out.accept_prob = out.delta_h >= 0.0 ? 1.0 : std::exp(out.delta_h);
  if (u < out.accept_prob) {
    out.accepted = true;
    x = q;
  }
  return out;
}

double adapt_step_size(double window_acceptance, double step_size, const HmcConfig& cfg) {
  if (window_acceptance < cfg.band_low) return step_size * cfg.shrink;
  if (window_acceptance > cfg.band_high) return step_size * cfg.grow;
  return step_size;
}

HmcStep hmc_update(HmcBlock block, ModelState& state, const ConnectomeDataset& data,
                   const ModelSpec& spec, double step_size, int leapfrog_steps,
                   const MassMatrix& mass, Rng& rng) {
  ModelState scratch = state;
  const bool count_side =
      block == HmcBlock::count_coefficients || block == HmcBlock::count_random_effects;
  const PresenceCache cache = count_side ? presence_cache(state, data, spec) : PresenceCache{};
  const LogTarget target = [&](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    set_block(scratch, block, x);
    return block_log_target(scratch, data, spec, block, grad, count_side ? &cache : nullptr);
  };
  Eigen::VectorXd x = get_block(state, block);
  const HmcStep step = hmc_step(target, x, step_size, leapfrog_steps, mass, rng);
  if (step.accepted) set_block(state, block, x);
  return step;
}

// Expected Fisher information of the logit latents, diagonal only, plus the
// prior curvature. Always positive, unlike the observed curvature.
namespace {
MassMatrix latent_fisher_mass(bool is_xi, const ModelState& state, const ConnectomeDataset& data,
                              const ModelSpec& spec, const EdgeTerms& terms) {
  const int J = state.J;
  const int E = data.edges();
  const int width = 1 + state.d;
  const int c_begin = is_xi ? 0 : 1;
  const int c_end = is_xi ? 1 : width;
  const Eigen::VectorXd& x = is_xi ? state.xi : state.delta;
  const Eigen::MatrixXd& basis = is_xi ? terms.basis_xi : terms.basis_delta;
  const Eigen::MatrixXd& dbasis = is_xi ? terms.dbasis_xi : terms.dbasis_delta;
  // slope[t](e, 2 * c + side): derivative of graphon (t, c) on edge e in the latent of one endpoint.
  std::array<Eigen::MatrixXd, kChannels> slope;
  for (int t = 0; t < kChannels; ++t) {
    slope[t] = Eigen::MatrixXd::Zero(E, 2 * width);
    for (int c = c_begin; c < c_end; ++c) {
      const Eigen::MatrixXd weighted =
          (c == 0 ? state.theta[t] : state.gamma[t][c - 1]).to_full() * basis.transpose();
      for (int e = 0; e < E; ++e) {
        const Edge& edge = data.edge_list[e];
        slope[t](e, 2 * c) = dbasis.row(edge.a).dot(weighted.col(edge.b));
        slope[t](e, 2 * c + 1) = dbasis.row(edge.b).dot(weighted.col(edge.a));
      }
    }
  }
  Eigen::VectorXd info = Eigen::VectorXd::Zero(J);
  Eigen::VectorXd z(width);
  for (int i = 0; i < data.n; ++i) {
    z[0] = 1.0;
    z.tail(width - 1) = data.Z.row(i).transpose();
    for (int e = 0; e < E; ++e) {
      const std::size_t o = data.obs(i, e);
      const double pi = linear_predictor(terms, state, data, kPresence, i, e);
      const double p = std::clamp(stats::normal_cdf(pi), 1e-12, 1.0 - 1e-12);
      const double phi = stats::normal_pdf(pi);
      double weight[kChannels];
      weight[kLength] = data.counts[o] >= 1 ? data.counts[o] / state.sigma2 : 0.0;
      weight[kPresence] = phi * phi / (p * (1.0 - p));
      weight[kCount] = std::min(p * std::exp(linear_predictor(terms, state, data, kCount, i, e)), 1e8);
      const Edge& edge = data.edge_list[e];
      for (int side = 0; side < 2; ++side) {
        double sum = 0.0;
        for (int t = 0; t < kChannels; ++t) {
          double g = 0.0;
          for (int c = c_begin; c < c_end; ++c) g += z[c] * slope[t](e, 2 * c + side);
          sum += weight[t] * g * g;
        }
        info[side == 0 ? edge.a : edge.b] += sum;
      }
    }
  }
  const Hyperparams& h = spec.hyper;
  Eigen::VectorXd diag(J);
  for (int j = 0; j < J; ++j) {
    const double jac = x[j] * (1.0 - x[j]);
    double prior;
    if (is_xi || spec.options.delta_prior == DeltaPrior::logit_normal) {
      prior = 1.0 / (h.a * h.a);
    } else {
      prior = 2.0 * (state.indicator[j] ? 1.0 : h.M) * jac;
    }
    diag[j] = info[j] * jac * jac + std::max(prior, 1e-6);
    if (!std::isfinite(diag[j])) diag[j] = 1.0;
  }
  return MassMatrix::diagonal(diag);
}
}  // namespace

MassMatrix block_mass(HmcBlock block, const ModelState& state, const ConnectomeDataset& data,
                      const ModelSpec& spec) {
  const double prior_precision = 1.0 / (spec.hyper.a * spec.hyper.a);
  const EdgeTerms terms = compute_edge_terms(state, data, spec);
  const int E = data.edges();
  switch (block) {
    case HmcBlock::count_coefficients: {
      // Expected Poisson information under the current inflation indicators.
      const int width = 1 + data.covariates();
      std::vector<Eigen::MatrixXd> A(E, Eigen::MatrixXd::Zero(width, width));
      for (int i = 0; i < data.n; ++i) {
        const Eigen::VectorXd z = covariate_row(data, i);
        const Eigen::MatrixXd zz = z * z.transpose();
        for (int e = 0; e < E; ++e) {
          const std::size_t o = data.obs(i, e);
          if (!state.inflation[o]) continue;
          A[e] += std::exp(linear_predictor(terms, state, data, kCount, i, e)) * zz;
        }
      }
      const glm::GraphonDesign design(terms.features_xi, terms.features_delta, data.Z);
      Eigen::MatrixXd info;
      Eigen::VectorXd unused;
      design.gram_from_aggregates(A, Eigen::MatrixXd::Zero(E, width), info, unused);
      info.diagonal().array() += prior_precision;
      return MassMatrix::dense(info);
    }
    case HmcBlock::count_random_effects: {
      Eigen::VectorXd diag(data.n);
      for (int i = 0; i < data.n; ++i) {
        double s = 1.0 / state.tau2(kCount, i);
        for (int e = 0; e < E; ++e) {
          if (state.inflation[data.obs(i, e)]) {
            s += std::exp(linear_predictor(terms, state, data, kCount, i, e));
          }
        }
        diag[i] = s;
      }
      return MassMatrix::diagonal(diag);
    }
    case HmcBlock::latent_xi:
    case HmcBlock::latent_delta:
      return latent_fisher_mass(block == HmcBlock::latent_xi, state, data, spec, terms);
  }
  return MassMatrix::identity(1);
}

double albert_chib_draw(bool presence, double pi_linear, Rng& rng) {
  if (presence) return pi_linear + stats::draw_std_normal_above(-pi_linear, rng);
  return pi_linear - stats::draw_std_normal_above(pi_linear, rng);
}

Eigen::VectorXd draw_presence_latents(const ModelState& state, const ConnectomeDataset& data,
                                      const ModelSpec& spec, Rng& rng) {
  const EdgeTerms terms = compute_edge_terms(state, data, spec);
  Eigen::VectorXd w(static_cast<Eigen::Index>(data.counts.size()));
  for (int i = 0; i < data.n; ++i) {
    for (int e = 0; e < data.edges(); ++e) {
      const std::size_t o = data.obs(i, e);
      const double pi = linear_predictor(terms, state, data, kPresence, i, e);
      w[static_cast<Eigen::Index>(o)] = albert_chib_draw(state.inflation[o] != 0, pi, rng);
    }
  }
  return w;
}

double zero_inflation_probability(double pi_linear, double lambda) {
  const double log_present = stats::normal_log_cdf(pi_linear) - std::exp(lambda);
  const double log_absent = stats::normal_log_cdf(-pi_linear);
  if (log_absent == kNegInf) return 1.0;
  if (log_present == kNegInf) return 0.0;
  return 1.0 / (1.0 + std::exp(log_absent - log_present));
}

void draw_zero_inflation(ModelState& state, const ConnectomeDataset& data, const ModelSpec& spec,
                         Rng& rng) {
  const EdgeTerms terms = compute_edge_terms(state, data, spec);
  for (int i = 0; i < data.n; ++i) {
    for (int e = 0; e < data.edges(); ++e) {
      const std::size_t o = data.obs(i, e);
      if (data.counts[o] >= 1) {
        state.inflation[o] = 1;
        continue;
      }
      const double p = zero_inflation_probability(
          linear_predictor(terms, state, data, kPresence, i, e),
          linear_predictor(terms, state, data, kCount, i, e));
      state.inflation[o] = stats::draw_uniform(rng) < p ? 1 : 0;
    }
  }
}

NormalConditional coefficient_conditional(Channel channel, const ModelState& state,
                                          const ConnectomeDataset& data, const ModelSpec& spec,
                                          const Eigen::VectorXd* latents) {
  const int E = data.edges();
  const int width = 1 + data.covariates();
  const EdgeTerms terms = compute_edge_terms(state, data, spec);
  std::vector<Eigen::MatrixXd> A(E, Eigen::MatrixXd::Zero(width, width));
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(E, width);
  for (int i = 0; i < data.n; ++i) {
    const Eigen::VectorXd z = covariate_row(data, i);
    const Eigen::MatrixXd zz = z * z.transpose();
    const double eta = state.eta(channel, i);
    for (int e = 0; e < E; ++e) {
      const ConjugateObs ob = conjugate_obs(channel, state, data, latents, data.obs(i, e));
      if (ob.weight == 0.0) continue;
      A[e] += ob.weight * zz;
      b.row(e) += (ob.weight * (ob.response - eta)) * z.transpose();
    }
  }
  const glm::GraphonDesign design(terms.features_xi, terms.features_delta, data.Z);
  NormalConditional cond;
  Eigen::VectorXd rhs;
  design.gram_from_aggregates(A, b, cond.precision, rhs);
  cond.precision.diagonal().array() += 1.0 / (spec.hyper.a * spec.hyper.a);
  const Eigen::LLT<Eigen::MatrixXd> llt(cond.precision);
  if (llt.info() != Eigen::Success) {
    throw InvariantError("coefficient conditional precision is not positive definite");
  }
  cond.mean = llt.solve(rhs);
  return cond;
}

NormalConditional random_effect_conditional(Channel channel, const ModelState& state,
                                            const ConnectomeDataset& data, const ModelSpec& spec,
                                            const Eigen::VectorXd* latents) {
  const EdgeTerms terms = compute_edge_terms(state, data, spec);
  NormalConditional cond;
  cond.precision = Eigen::MatrixXd::Zero(data.n, data.n);
  cond.mean.resize(data.n);
  for (int i = 0; i < data.n; ++i) {
    double prec = 1.0 / state.tau2(channel, i);
    double rhs = 0.0;
    const double eta = state.eta(channel, i);
    for (int e = 0; e < data.edges(); ++e) {
      const ConjugateObs ob = conjugate_obs(channel, state, data, latents, data.obs(i, e));
      if (ob.weight == 0.0) continue;
      const double fixed = linear_predictor(terms, state, data, channel, i, e) - eta;
      prec += ob.weight;
      rhs += ob.weight * (ob.response - fixed);
    }
    cond.precision(i, i) = prec;
    cond.mean[i] = rhs / prec;
  }
  return cond;
}

Eigen::VectorXd draw_normal_conditional(const NormalConditional& cond, Rng& rng) {
  const Eigen::LLT<Eigen::MatrixXd> llt(cond.precision);
  if (llt.info() != Eigen::Success) throw InvariantError("conditional precision is singular");
  Eigen::VectorXd z(cond.mean.size());
  for (Eigen::Index c = 0; c < z.size(); ++c) z[c] = stats::draw_normal(rng);
  // precision = L L', so L'^{-1} z has covariance precision^{-1}.
  return cond.mean + llt.matrixU().solve(z);
}

void gibbs_coefficients(Channel channel, ModelState& state, const ConnectomeDataset& data,
                        const ModelSpec& spec, const Eigen::VectorXd* latents, Rng& rng) {
  const NormalConditional cond = coefficient_conditional(channel, state, data, spec, latents);
  const Eigen::VectorXd draw = draw_normal_conditional(cond, rng);
  const int P = spec.P();
  state.theta[channel].upper() = draw.segment(0, P);
  for (int l = 0; l < state.d; ++l) state.gamma[channel][l].upper() = draw.segment(P * (l + 1), P);
}

void gibbs_random_effects(Channel channel, ModelState& state, const ConnectomeDataset& data,
                          const ModelSpec& spec, const Eigen::VectorXd* latents, Rng& rng) {
  const NormalConditional cond = random_effect_conditional(channel, state, data, spec, latents);
  for (int i = 0; i < data.n; ++i) {
    state.eta(channel, i) =
        cond.mean[i] + stats::draw_normal(rng) / std::sqrt(cond.precision(i, i));
  }
}

std::pair<double, double> sigma2_conditional(const ModelState& state,
                                             const ConnectomeDataset& data,
                                             const ModelSpec& spec) {
  const EdgeTerms terms = compute_edge_terms(state, data, spec);
  double shape = spec.hyper.d1;
  double rate = spec.hyper.d2;
  for (int i = 0; i < data.n; ++i) {
    for (int e = 0; e < data.edges(); ++e) {
      const std::size_t o = data.obs(i, e);
      const std::int32_t count = data.counts[o];
      if (count < 1) continue;
      const double r = data.log_lengths[o] - linear_predictor(terms, state, data, kLength, i, e);
      shape += 0.5;
      rate += 0.5 * count * r * r;
    }
  }
  return {shape, rate};
}

void gibbs_sigma2(ModelState& state, const ConnectomeDataset& data, const ModelSpec& spec,
                  Rng& rng) {
  const auto [shape, rate] = sigma2_conditional(state, data, spec);
  state.sigma2 = 1.0 / stats::draw_gamma(shape, rate, rng);
}

void flip_indicators(ModelState& state, const ModelSpec& spec, Rng& rng) {
  if (spec.options.delta_prior != DeltaPrior::beta_mixture) return;
  const double log_q = std::log(spec.hyper.q);
  const double log_not_q = std::log1p(-spec.hyper.q);
  for (int j = 0; j < state.J; ++j) {
    const double log_beta =
        log_not_q + stats::log_beta_density(state.delta[j], spec.hyper.M, spec.hyper.M);
    const double p_uniform = 1.0 / (1.0 + std::exp(log_beta - log_q));
    state.indicator[j] = stats::draw_uniform(rng) < p_uniform ? 1 : 0;
  }
}

double log_scale_mixture_marginal(double x, double b1, double b2) {
  return std::lgamma(b1 + 0.5) - std::lgamma(b1) + b1 * std::log(b2) - stats::kLogSqrt2Pi -
         (b1 + 0.5) * std::log(b2 + 0.5 * x * x);
}

void dp_scale_update(int channel, ModelState& state, const ModelSpec& spec, Rng& rng) {
  const double b1 = spec.hyper.b1;
  const double b2 = spec.hyper.b2;
  const int n = state.n;
  if (n == 0) return;
  std::vector<int>& label = state.cluster[channel];
  // Compact representation: per-cluster size and scale.
  std::vector<int> size;
  std::vector<double> scale;
  {
    std::map<int, int> remap;
    for (int i = 0; i < n; ++i) {
      const auto [it, inserted] = remap.emplace(label[i], static_cast<int>(size.size()));
      if (inserted) {
        size.push_back(0);
        scale.push_back(state.tau2(channel, i));
      }
      label[i] = it->second;
      size[it->second] += 1;
    }
  }
  const double alpha = state.alpha[channel];
  std::vector<double> logw;
  for (int i = 0; i < n; ++i) {
    const double x = state.eta(channel, i);
    const int old = label[i];
    size[old] -= 1;
    logw.assign(size.size() + 1, kNegInf);
    for (std::size_t c = 0; c < size.size(); ++c) {
      if (size[c] == 0) continue;
      logw[c] = std::log(static_cast<double>(size[c])) +
                stats::log_normal_density(x, 0.0, std::sqrt(scale[c]));
    }
    logw.back() = std::log(alpha) + log_scale_mixture_marginal(x, b1, b2);
    double top = kNegInf;
    for (double v : logw) top = std::max(top, v);
    double total = 0.0;
    for (double& v : logw) {
      v = std::exp(v - top);
      total += v;
    }
    double u = stats::draw_uniform(rng) * total;
    std::size_t pick = 0;
    for (; pick + 1 < logw.size(); ++pick) {
      if (u < logw[pick]) break;
      u -= logw[pick];
    }
    if (pick + 1 == logw.size()) {
      const double fresh = stats::draw_inverse_gamma(b1 + 0.5, b2 + 0.5 * x * x, rng);
      // Reuse an emptied slot when possible to keep labels compact.
      std::size_t slot = size.size();
      for (std::size_t c = 0; c < size.size(); ++c) {
        if (size[c] == 0) {
          slot = c;
          break;
        }
      }
      if (slot == size.size()) {
        size.push_back(0);
        scale.push_back(fresh);
      } else {
        scale[slot] = fresh;
      }
      pick = slot;
    }
    label[i] = static_cast<int>(pick);
    size[pick] += 1;
  }
  // Refresh each occupied cluster's scale from its conjugate conditional.
  std::vector<double> sum_sq(size.size(), 0.0);
  for (int i = 0; i < n; ++i) sum_sq[label[i]] += state.eta(channel, i) * state.eta(channel, i);
  for (std::size_t c = 0; c < size.size(); ++c) {
    if (size[c] == 0) continue;
    scale[c] = stats::draw_inverse_gamma(b1 + 0.5 * size[c], b2 + 0.5 * sum_sq[c], rng);
  }
  // Relabel in order of first appearance.
  std::map<int, int> canon;
  for (int i = 0; i < n; ++i) {
    const auto [it, inserted] = canon.emplace(label[i], static_cast<int>(canon.size()));
    (void)inserted;
    state.tau2(channel, i) = scale[label[i]];
    label[i] = it->second;
  }
}

double update_alpha(double alpha, int clusters, int n, double c1, double c2, Rng& rng) {
  const double aux = stats::draw_beta(alpha + 1.0, static_cast<double>(n), rng);
  const double rate = c2 - std::log(aux);
  const double odds = (c1 + clusters - 1.0) / (n * rate);
  const double weight = odds / (1.0 + odds);
  const double shape = stats::draw_uniform(rng) < weight ? c1 + clusters : c1 + clusters - 1.0;
  return stats::draw_gamma(shape, rate, rng);
}

int cluster_count(const std::vector<int>& labels) {
  std::map<int, int> seen;
  for (int l : labels) seen[l] = 1;
  return static_cast<int>(seen.size());
}

}  // namespace bgcon
