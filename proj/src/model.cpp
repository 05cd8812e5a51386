#include "bgcon/model.hpp"

#include <cmath>
#include <limits>
#include <map>

#include "bgcon/errors.hpp"
#include "bgcon/stats.hpp"

namespace bgcon {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum Part : unsigned { kGaussianPart = 1u, kZipPart = 2u };

// Per-edge and per-subject sums of d loglik / d linear predictor.
struct ScoreSums {
  RowMajor edge;          // E x kChannels*(1+d), weighted by (1, Z_i)
  Eigen::MatrixXd subject;  // kChannels x n
};

struct ZipTerm {
  double value = 0.0;
  double d_pi = 0.0;
  double d_lambda = 0.0;
};

// Zero-inflated count + probit presence contribution of one observation with
// the inflation indicator integrated out.
ZipTerm zip_term(std::int32_t count, double pi, double lambda, bool include_constants) {
  ZipTerm out;
  const double rate = std::exp(lambda);
  // One tail probability gives both Phi(pi) and 1 - Phi(pi) accurately.
  const double tail = pi >= 0.0 ? stats::normal_cdf(-pi) : stats::normal_cdf(pi);
  const double p_present = pi >= 0.0 ? 1.0 - tail : tail;
  const double p_absent = pi >= 0.0 ? tail : 1.0 - tail;
  if (count >= 1) {
    const double log_cdf = pi >= 0.0           ? std::log1p(-tail)
                           : tail > 1e-300 ? std::log(tail)
                                           : stats::normal_log_cdf(pi);
    out.value = log_cdf + count * lambda - rate;
    if (include_constants) out.value -= std::lgamma(count + 1.0);
    out.d_pi = std::exp(stats::normal_log_pdf(pi) - log_cdf);
    out.d_lambda = count - rate;
    return out;
  }
  const double keep = std::exp(-rate);
  const double mix = p_absent + p_present * keep;
  if (mix > 1e-300) {
    out.value = std::log(mix);
    // -phi(pi)(1 - e^{-rate}) / mix and -Phi(pi) e^{-rate} rate / mix.
    out.d_pi = -stats::normal_pdf(pi) * -std::expm1(-rate) / mix;
    out.d_lambda = -p_present * keep * rate / mix;
    return out;
  }
  const double log_present = stats::normal_log_cdf(pi);
  const double log_absent = stats::normal_log_cdf(-pi);
  const double log_mix = stats::log_add_exp(log_absent, log_present - rate);
  out.value = log_mix;
  const double one_minus = -std::expm1(-rate);
  out.d_pi = one_minus > 0.0
                 ? -std::exp(stats::normal_log_pdf(pi) + std::log(one_minus) - log_mix)
                 : 0.0;
  out.d_lambda = -std::exp(log_present - rate + lambda - log_mix);
  return out;
}

// Count-side term when the probit pieces are already known; the presence score is not needed.
ZipTerm zip_count_term(std::int32_t count, double log_present, double log_absent, double lambda) {
  ZipTerm out;
  const double rate = std::exp(lambda);
  if (count >= 1) {
    out.value = log_present + count * lambda - rate;
    out.d_lambda = count - rate;
  } else {
    const double log_mix = stats::log_add_exp(log_absent, log_present - rate);
    out.value = log_mix;
    out.d_lambda = -std::exp(log_present - rate + lambda - log_mix);
  }
  return out;
}

// Sum of likelihood parts over all observations, optionally accumulating scores.
double accumulate(const ModelState& state, const ConnectomeDataset& data, const EdgeTerms& terms,
                  unsigned parts, bool include_constants, ScoreSums* sums,
                  const PresenceCache* cache = nullptr) {
  const int E = data.edges();
  const int d = state.d;
  const int width = 1 + d;
  if (sums) {
    sums->edge = RowMajor::Zero(E, kChannels * width);
    sums->subject = Eigen::MatrixXd::Zero(kChannels, data.n);
  }
  const double inv_sigma2 = 1.0 / state.sigma2;
  const double log_two_pi_sigma2 = std::log(2.0 * M_PI * state.sigma2);
  std::vector<double> zrow(width);
  double total = 0.0;
  for (int i = 0; i < data.n; ++i) {
    zrow[0] = 1.0;
    for (int l = 0; l < d; ++l) zrow[l + 1] = data.Z(i, l);
    for (int e = 0; e < E; ++e) {
      const std::size_t o = data.obs(i, e);
      const std::int32_t count = data.counts[o];
      const double* v = &terms.values(e, 0);
      double lin[kChannels];
      for (int t = 0; t < kChannels; ++t) {
        double acc = state.eta(t, i);
        for (int c = 0; c < width; ++c) acc += v[t * width + c] * zrow[c];
        lin[t] = acc;
      }
      double score[kChannels] = {0.0, 0.0, 0.0};
      if ((parts & kGaussianPart) && count >= 1) {
        const double resid = data.log_lengths[o] - lin[kLength];
        total += -0.5 * count * resid * resid * inv_sigma2 - 0.5 * log_two_pi_sigma2 +
                 0.5 * std::log(static_cast<double>(count));
        score[kLength] = count * resid * inv_sigma2;
      }
      if (cache) {
        const ZipTerm z =
            zip_count_term(count, cache->log_present[o], cache->log_absent[o], lin[kCount]);
        total += z.value;
        score[kCount] = z.d_lambda;
      } else if (parts & kZipPart) {
        const ZipTerm z = zip_term(count, lin[kPresence], lin[kCount], include_constants);
        total += z.value;
        score[kPresence] = z.d_pi;
        score[kCount] = z.d_lambda;
      }
      if (sums) {
        double* row = &sums->edge(e, 0);
        for (int t = 0; t < kChannels; ++t) {
          if (score[t] == 0.0) continue;
          for (int c = 0; c < width; ++c) row[t * width + c] += score[t] * zrow[c];
          sums->subject(t, i) += score[t];
        }
      }
    }
  }
  return total;
}

int family_channel(int family, int d) { return family / (1 + d); }
int family_column(int family, int d) { return family % (1 + d); }

double latent_logit_normal(double u, double a) { return -0.5 * u * u / (a * a); }

void check_finite(const Eigen::VectorXd& v, const std::string& block, const std::string& what) {
  if (!v.allFinite()) throw EvaluationError(block, "non-finite " + what);
}

}  // namespace

void Hyperparams::validate() const {
  const auto positive = [](double x, const char* name) {
    if (!(x > 0.0) || !std::isfinite(x)) {
      throw ConfigError(std::string("hyperparameter ") + name + " must be positive and finite");
    }
  };
  positive(a, "a");
  positive(M, "M");
  positive(b1, "b1");
  positive(b2, "b2");
  positive(c1, "c1");
  positive(c2, "c2");
  positive(d1, "d1");
  positive(d2, "d2");
  if (!(q > 0.0 && q < 1.0)) throw ConfigError("hyperparameter q must lie in (0,1)");
  if (degree < 1 || K < degree + 1) throw ConfigError("K must be at least degree + 1");
}

ModelSpec ModelSpec::make(const Hyperparams& hyper, const ModelOptions& options, int d) {
  hyper.validate();
  ModelSpec spec;
  spec.hyper = hyper;
  spec.options = options;
  spec.basis = BasisConfig::uniform(hyper.K, hyper.degree);
  spec.d = d;
  return spec;
}

ModelState ModelState::zeros(const ModelSpec& spec, int J, int n, int edges) {
  ModelState s;
  s.K = spec.hyper.K;
  s.d = spec.d;
  s.J = J;
  s.n = n;
  for (int t = 0; t < kChannels; ++t) {
    s.theta[t] = SymmetricCoeffMatrix(s.K);
    s.gamma[t].assign(s.d, SymmetricCoeffMatrix(s.K));
    s.cluster[t].assign(n, 0);
  }
  s.xi = Eigen::VectorXd::Constant(J, 0.5);
  s.delta = Eigen::VectorXd::Constant(J, 0.5);
  s.indicator.assign(J, 0);
  s.eta = Eigen::MatrixXd::Zero(kChannels, n);
  s.tau2 = Eigen::MatrixXd::Ones(kChannels, n);
  s.inflation.assign(static_cast<std::size_t>(n) * edges, 1);
  return s;
}

const SymmetricCoeffMatrix& ModelState::coefficients(int family) const {
  const int t = family_channel(family, d);
  const int c = family_column(family, d);
  return c == 0 ? theta[t] : gamma[t][c - 1];
}

SymmetricCoeffMatrix& ModelState::coefficients(int family) {
  const int t = family_channel(family, d);
  const int c = family_column(family, d);
  return c == 0 ? theta[t] : gamma[t][c - 1];
}

void ModelState::validate(const ConnectomeDataset& data) const {
  if (J != data.J || n != data.n || d != data.covariates()) {
    throw InvariantError("state dimensions do not match the dataset");
  }
  for (int t = 0; t < kChannels; ++t) {
    if (theta[t].K() != K || static_cast<int>(gamma[t].size()) != d) {
      throw InvariantError("coefficient arrays have the wrong shape");
    }
    for (const auto& g : gamma[t]) {
      if (g.K() != K) throw InvariantError("coefficient arrays have the wrong shape");
    }
    if (static_cast<int>(cluster[t].size()) != n) throw InvariantError("cluster labels size");
  }
  if (xi.size() != J || delta.size() != J || static_cast<int>(indicator.size()) != J) {
    throw InvariantError("latent vectors must have J entries");
  }
  for (int j = 0; j < J; ++j) {
    if (!(xi[j] > 0.0 && xi[j] < 1.0) || !(delta[j] > 0.0 && delta[j] < 1.0)) {
      throw InvariantError("latent of node " + std::to_string(j) + " outside (0,1)");
    }
  }
  if (eta.rows() != kChannels || eta.cols() != n || tau2.rows() != kChannels ||
      tau2.cols() != n) {
    throw InvariantError("random-effect arrays must be 3 x n");
  }
  if (!(sigma2 > 0.0)) throw InvariantError("sigma2 must be positive");
  for (int t = 0; t < kChannels; ++t) {
    if (!(alpha[t] > 0.0)) throw InvariantError("alpha must be positive");
    std::map<int, double> scale_of;
    for (int i = 0; i < n; ++i) {
      if (!(tau2(t, i) > 0.0)) throw InvariantError("tau2 must be positive");
      const auto [it, inserted] = scale_of.emplace(cluster[t][i], tau2(t, i));
      if (!inserted && it->second != tau2(t, i)) {
        throw InvariantError("subjects in one DP cluster must share tau2");
      }
    }
  }
  if (inflation.size() != data.counts.size()) throw InvariantError("inflation indicator size");
  for (std::size_t o = 0; o < inflation.size(); ++o) {
    if (data.counts[o] >= 1 && inflation[o] != 1) {
      throw InvariantError("inflation indicator must be 1 where the count is positive");
    }
  }
}

EdgeTerms compute_edge_terms(const ModelState& state, const ConnectomeDataset& data,
                             const ModelSpec& spec) {
  const int J = state.J;
  const int K = state.K;
  const int E = data.edges();
  const int P = spec.P();
  const int d = state.d;
  EdgeTerms terms;
  terms.basis_xi.resize(J, K);
  terms.dbasis_xi.resize(J, K);
  terms.basis_delta.resize(J, K);
  terms.dbasis_delta.resize(J, K);
  Eigen::VectorXd b, db;
  for (int j = 0; j < J; ++j) {
    bspline_basis_with_derivative(state.xi[j], spec.basis, b, db);
    terms.basis_xi.row(j) = b.transpose();
    terms.dbasis_xi.row(j) = db.transpose();
    bspline_basis_with_derivative(state.delta[j], spec.basis, b, db);
    terms.basis_delta.row(j) = b.transpose();
    terms.dbasis_delta.row(j) = db.transpose();
  }
  terms.features_xi.resize(P, E);
  terms.features_delta.resize(P, E);
  Eigen::VectorXd bu(K), bv(K);
  for (int e = 0; e < E; ++e) {
    const Edge& edge = data.edge_list[e];
    bu = terms.basis_xi.row(edge.a).transpose();
    bv = terms.basis_xi.row(edge.b).transpose();
    symmetric_features(bu, bv, terms.features_xi.col(e));
    bu = terms.basis_delta.row(edge.a).transpose();
    bv = terms.basis_delta.row(edge.b).transpose();
    symmetric_features(bu, bv, terms.features_delta.col(e));
  }
  const int width = 1 + d;
  terms.values.resize(E, kChannels * width);
  for (int t = 0; t < kChannels; ++t) {
    terms.values.col(t * width) = terms.features_xi.transpose() * state.theta[t].upper();
    for (int l = 0; l < d; ++l) {
      terms.values.col(t * width + 1 + l) =
          terms.features_delta.transpose() * state.gamma[t][l].upper();
    }
  }
  return terms;
}

LinearPredictors linear_predictors(const ModelState& state, const ConnectomeDataset& data,
                                   const ModelSpec& spec, int i, int j, int k) {
  if (i < 0 || i >= data.n) throw DomainError("subject index out of range");
  const int e = data.edge_index(j, k);
  if (e < 0) throw DomainError("edge index out of range");
  LinearPredictors out;
  double lin[kChannels];
  for (int t = 0; t < kChannels; ++t) {
    double v = graphon_eval(state.theta[t], state.xi[j], state.xi[k], spec.basis) + state.eta(t, i);
    for (int l = 0; l < state.d; ++l) {
      v += graphon_eval(state.gamma[t][l], state.delta[j], state.delta[k], spec.basis) *
           data.Z(i, l);
    }
    lin[t] = v;
  }
  out.mu = lin[kLength];
  out.pi = lin[kPresence];
  out.lambda = lin[kCount];
  return out;
}

double log_likelihood(const ModelState& state, const ConnectomeDataset& data,
                      const ModelSpec& spec) {
  if (data.n == 0) return 0.0;
  const EdgeTerms terms = compute_edge_terms(state, data, spec);
  const double value = accumulate(state, data, terms, kGaussianPart | kZipPart, true, nullptr);
  if (std::isnan(value)) throw EvaluationError("likelihood", "NaN log-likelihood");
  return value;
}

double log_prior(const ModelState& state, const ModelSpec& spec) {
  const Hyperparams& h = spec.hyper;
  const auto nan_check = [](double x, const char* block) {
    if (std::isnan(x)) throw EvaluationError(block, "NaN parameter value");
  };
  double total = 0.0;
  for (int f = 0; f < spec.families(); ++f) {
    const auto& u = state.coefficients(f).upper();
    for (Eigen::Index m = 0; m < u.size(); ++m) {
      nan_check(u[m], "coefficients");
      total += stats::log_normal_density(u[m], 0.0, h.a);
    }
  }
  for (int j = 0; j < state.J; ++j) {
    const double x = state.xi[j];
    const double y = state.delta[j];
    nan_check(x, "xi");
    nan_check(y, "delta");
    if (!(x > 0.0 && x < 1.0) || !(y > 0.0 && y < 1.0)) return kNegInf;
    total += stats::log_normal_density(stats::logit(x), 0.0, h.a) - std::log(x) - std::log1p(-x);
    if (spec.options.delta_prior == DeltaPrior::logit_normal) {
      total +=
          stats::log_normal_density(stats::logit(y), 0.0, h.a) - std::log(y) - std::log1p(-y);
    } else {
      const bool uniform = state.indicator[j] != 0;
      total += uniform ? std::log(h.q) : std::log1p(-h.q) + stats::log_beta_density(y, h.M, h.M);
    }
  }
  if (spec.options.random_effects) {
    for (int t = 0; t < kChannels; ++t) {
      const double alpha = state.alpha[t];
      nan_check(alpha, "alpha");
      if (!(alpha > 0.0)) return kNegInf;
      std::map<int, std::pair<int, double>> clusters;
      for (int i = 0; i < state.n; ++i) {
        const double s2 = state.tau2(t, i);
        nan_check(s2, "tau2");
        nan_check(state.eta(t, i), "eta");
        if (!(s2 > 0.0)) return kNegInf;
        total += stats::log_normal_density(state.eta(t, i), 0.0, std::sqrt(s2));
        auto& c = clusters[state.cluster[t][i]];
        c.first += 1;
        c.second = s2;
      }
      // Exchangeable partition probability of the Chinese restaurant process.
      total += static_cast<double>(clusters.size()) * std::log(alpha) + std::lgamma(alpha) -
               std::lgamma(alpha + state.n);
      for (const auto& [label, c] : clusters) {
        total += std::lgamma(static_cast<double>(c.first)) +
                 stats::log_inverse_gamma_density(c.second, h.b1, h.b2);
      }
      total += stats::log_gamma_density(alpha, h.c1, h.c2);
    }
  }
  nan_check(state.sigma2, "sigma2");
  if (!(state.sigma2 > 0.0)) return kNegInf;
  // Gamma prior on the precision 1/sigma2.
  total += stats::log_gamma_density(1.0 / state.sigma2, h.d1, h.d2);
  return total;
}

double log_posterior_unconstrained(const ModelState& state, const ConnectomeDataset& data,
                                   const ModelSpec& spec) {
  const double prior = log_prior(state, spec);
  if (prior == kNegInf) return kNegInf;
  double jacobian = 0.0;
  for (int j = 0; j < state.J; ++j) {
    jacobian += std::log(state.xi[j]) + std::log1p(-state.xi[j]);
    jacobian += std::log(state.delta[j]) + std::log1p(-state.delta[j]);
  }
  return log_likelihood(state, data, spec) + prior + jacobian;
}

std::string block_name(HmcBlock block) {
  switch (block) {
    case HmcBlock::count_coefficients:
      return "count_coefficients";
    case HmcBlock::count_random_effects:
      return "count_random_effects";
    case HmcBlock::latent_xi:
      return "latent_xi";
    case HmcBlock::latent_delta:
      return "latent_delta";
  }
  return "unknown";
}

Eigen::VectorXd get_block(const ModelState& state, HmcBlock block) {
  switch (block) {
    case HmcBlock::count_coefficients: {
      const int P = state.theta[kCount].upper().size();
      Eigen::VectorXd v(P * (1 + state.d));
      v.segment(0, P) = state.theta[kCount].upper();
      for (int l = 0; l < state.d; ++l) v.segment(P * (l + 1), P) = state.gamma[kCount][l].upper();
      return v;
    }
    case HmcBlock::count_random_effects:
      return state.eta.row(kCount).transpose();
    case HmcBlock::latent_xi:
      return state.xi.unaryExpr([](double x) { return stats::logit(x); });
    case HmcBlock::latent_delta:
      return state.delta.unaryExpr([](double x) { return stats::logit(x); });
  }
  return {};
}

void set_block(ModelState& state, HmcBlock block, const Eigen::VectorXd& values) {
  switch (block) {
    case HmcBlock::count_coefficients: {
      const int P = state.theta[kCount].upper().size();
      state.theta[kCount].upper() = values.segment(0, P);
      for (int l = 0; l < state.d; ++l) state.gamma[kCount][l].upper() = values.segment(P * (l + 1), P);
      return;
    }
    case HmcBlock::count_random_effects:
      state.eta.row(kCount) = values.transpose();
      return;
    case HmcBlock::latent_xi:
      state.xi = values.unaryExpr([](double u) { return stats::inv_logit(u); });
      return;
    case HmcBlock::latent_delta:
      state.delta = values.unaryExpr([](double u) { return stats::inv_logit(u); });
      return;
  }
}

PresenceCache presence_cache(const ModelState& state, const ConnectomeDataset& data,
                             const ModelSpec& spec) {
  const EdgeTerms terms = compute_edge_terms(state, data, spec);
  PresenceCache cache;
  cache.log_present.resize(data.counts.size());
  cache.log_absent.resize(data.counts.size());
  for (int i = 0; i < data.n; ++i) {
    for (int e = 0; e < data.edges(); ++e) {
      const std::size_t o = data.obs(i, e);
      const double pi = linear_predictor(terms, state, data, kPresence, i, e);
      cache.log_present[o] = stats::normal_log_cdf(pi);
      cache.log_absent[o] = stats::normal_log_cdf(-pi);
    }
  }
  return cache;
}

double block_log_target(const ModelState& state, const ConnectomeDataset& data,
                        const ModelSpec& spec, HmcBlock block, Eigen::VectorXd* gradient,
                        const PresenceCache* cache) {
  const Hyperparams& h = spec.hyper;
  const double inv_a2 = 1.0 / (h.a * h.a);
  const int d = state.d;
  const int width = 1 + d;
  const int P = spec.P();
  const std::string name = block_name(block);

  const bool latent = block == HmcBlock::latent_xi || block == HmcBlock::latent_delta;
  const unsigned parts = latent ? (kGaussianPart | kZipPart) : kZipPart;
  const EdgeTerms terms = compute_edge_terms(state, data, spec);
  ScoreSums sums;
  if (latent) cache = nullptr;
  double value = data.n > 0 ? accumulate(state, data, terms, parts, false,
                                         gradient ? &sums : nullptr, cache)
                            : 0.0;
  if (gradient && data.n == 0) {
    sums.edge = RowMajor::Zero(data.edges(), kChannels * width);
    sums.subject = Eigen::MatrixXd::Zero(kChannels, 0);
  }

  switch (block) {
    case HmcBlock::count_coefficients: {
      const Eigen::VectorXd theta = get_block(state, block);
      value -= 0.5 * inv_a2 * theta.squaredNorm();
      if (gradient) {
        gradient->resize(P * width);
        for (int c = 0; c < width; ++c) {
          const Eigen::MatrixXd& features = c == 0 ? terms.features_xi : terms.features_delta;
          gradient->segment(P * c, P) = features * sums.edge.col(kCount * width + c);
        }
        *gradient -= inv_a2 * theta;
      }
      break;
    }
    case HmcBlock::count_random_effects: {
      for (int i = 0; i < state.n; ++i) {
        value -= 0.5 * state.eta(kCount, i) * state.eta(kCount, i) / state.tau2(kCount, i);
      }
      if (gradient) {
        gradient->resize(state.n);
        for (int i = 0; i < state.n; ++i) {
          (*gradient)[i] = sums.subject(kCount, i) - state.eta(kCount, i) / state.tau2(kCount, i);
        }
      }
      break;
    }
    case HmcBlock::latent_xi:
    case HmcBlock::latent_delta: {
      const bool is_xi = block == HmcBlock::latent_xi;
      const Eigen::VectorXd& x = is_xi ? state.xi : state.delta;
      for (int j = 0; j < state.J; ++j) {
        const double u = stats::logit(x[j]);
        const double log_jac = std::log(x[j]) + std::log1p(-x[j]);
        if (is_xi || spec.options.delta_prior == DeltaPrior::logit_normal) {
          value += latent_logit_normal(u, h.a);
        } else if (state.indicator[j]) {
          value += log_jac;
        } else {
          value += h.M * log_jac;
        }
      }
      if (gradient) {
        const Eigen::MatrixXd& basis = is_xi ? terms.basis_xi : terms.basis_delta;
        const Eigen::MatrixXd& dbasis = is_xi ? terms.dbasis_xi : terms.dbasis_delta;
        Eigen::VectorXd grad_x = Eigen::VectorXd::Zero(state.J);
        for (int t = 0; t < kChannels; ++t) {
          const int c_begin = is_xi ? 0 : 1;
          const int c_end = is_xi ? 1 : width;
          for (int c = c_begin; c < c_end; ++c) {
            const Eigen::MatrixXd full =
                (c == 0 ? state.theta[t] : state.gamma[t][c - 1]).to_full();
            // Column b holds Theta * B(x_b).
            const Eigen::MatrixXd weighted = full * basis.transpose();
            const Eigen::VectorXd edge_scores = sums.edge.col(t * width + c);
            for (int e = 0; e < data.edges(); ++e) {
              const double s = edge_scores[e];
              if (s == 0.0) continue;
              const Edge& edge = data.edge_list[e];
              grad_x[edge.a] += s * dbasis.row(edge.a).dot(weighted.col(edge.b));
              grad_x[edge.b] += s * dbasis.row(edge.b).dot(weighted.col(edge.a));
            }
          }
        }
        gradient->resize(state.J);
        for (int j = 0; j < state.J; ++j) {
          const double jac = x[j] * (1.0 - x[j]);
          double prior_grad;
          if (is_xi || spec.options.delta_prior == DeltaPrior::logit_normal) {
            prior_grad = -stats::logit(x[j]) * inv_a2;
          } else {
            prior_grad = (state.indicator[j] ? 1.0 : h.M) * (1.0 - 2.0 * x[j]);
          }
          (*gradient)[j] = grad_x[j] * jac + prior_grad;
        }
      }
      break;
    }
  }
  if (gradient) check_finite(*gradient, name, "gradient");
  return value;
}

Eigen::VectorXd grad_log_posterior(const ModelState& state, const ConnectomeDataset& data,
                                   const ModelSpec& spec, HmcBlock block) {
  Eigen::VectorXd grad;
  block_log_target(state, data, spec, block, &grad);
  return grad;
}

std::vector<Eigen::MatrixXd> reconstruct_effect_matrices(const ModelState& state,
                                                         const ModelSpec& spec) {
  const int J = state.J;
  const int K = state.K;
  Eigen::MatrixXd bxi(K, J), bdelta(K, J);
  for (int j = 0; j < J; ++j) {
    bxi.col(j) = bspline_basis(state.xi[j], spec.basis);
    bdelta.col(j) = bspline_basis(state.delta[j], spec.basis);
  }
  std::vector<Eigen::MatrixXd> out;
  out.reserve(spec.families());
  Eigen::VectorXd f(spec.P());
  for (int fam = 0; fam < spec.families(); ++fam) {
    const bool baseline = family_column(fam, state.d) == 0;
    const Eigen::MatrixXd& B = baseline ? bxi : bdelta;
    const Eigen::VectorXd& coeffs = state.coefficients(fam).upper();
    Eigen::MatrixXd m(J, J);
    for (int j = 0; j < J; ++j) {
      for (int k = j; k < J; ++k) {
        symmetric_features(B.col(j), B.col(k), f);
        double v = 0.0;
        for (Eigen::Index p = 0; p < f.size(); ++p) v += coeffs[p] * f[p];
        m(j, k) = m(k, j) = v;
      }
    }
    out.push_back(std::move(m));
  }
  return out;
}

std::string family_name(int family, const ModelSpec& spec,
                        const std::vector<std::string>& covariate_names) {
  static const char* kBaseline[kChannels] = {"mu0", "pi0", "lambda0"};
  static const char* kEffect[kChannels] = {"chi", "beta", "nu"};
  const int t = family_channel(family, spec.d);
  const int c = family_column(family, spec.d);
  if (c == 0) return kBaseline[t];
  const std::string cov = c - 1 < static_cast<int>(covariate_names.size())
                              ? covariate_names[c - 1]
                              : "z" + std::to_string(c);
  return std::string(kEffect[t]) + "_" + cov;
}

}  // namespace bgcon
