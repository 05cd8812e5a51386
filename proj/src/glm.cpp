#include "bgcon/glm.hpp"

#include <cmath>
#include <functional>
#include <limits>

#include "bgcon/errors.hpp"
#include "bgcon/stats.hpp"

namespace bgcon::glm {

namespace {

// Mean, derivative dmu/deta and variance of one response family.
struct Link {
  std::function<double(double)> mean;
  std::function<double(double)> dmean;
  std::function<double(double)> variance;
  std::function<double(double, double)> loglik;  // (y, eta)
  // Linear predictors beyond this bound mean the MLE is at infinity (separation).
  double eta_bound = std::numeric_limits<double>::infinity();
};

struct Solve {
  Eigen::VectorXd beta;
  bool singular = false;
  Eigen::Index rank = 0;
  std::vector<Eigen::Index> keep;
};

// Diagonally pivoted Cholesky: columns enter in order of largest remaining
// residual and selection stops once every residual is <= rank_tolerance
// times the largest diagonal. A nonempty `fixed` set (a previous pivot order)
// is reused, dropping columns that have become numerically dependent.
Solve solve_dropping_aliased(const Eigen::MatrixXd& xtwx, const Eigen::VectorXd& xtwr,
                             const IrlsOptions& opt, const std::vector<Eigen::Index>& fixed) {
  const Eigen::Index p = xtwx.rows();
  Eigen::VectorXd resid = xtwx.diagonal();
  const double scale = resid.maxCoeff();
  Solve out;
  if (!(scale > 0.0)) {
    out.singular = true;
    return out;
  }
  const double floor = opt.rank_tolerance * scale;
  Eigen::MatrixXd Lc(p, std::min<Eigen::Index>(p, fixed.empty() ? p : fixed.size()));
  std::vector<Eigen::Index> keep;
  std::vector<char> used(p, 0);
  const auto add = [&](Eigen::Index j) {
    const Eigen::Index k = static_cast<Eigen::Index>(keep.size());
    Eigen::VectorXd col = xtwx.col(j);
    if (k > 0) col.noalias() -= Lc.leftCols(k) * Lc.row(j).head(k).transpose();
    col /= std::sqrt(resid[j]);
    Lc.col(k) = col;
    for (Eigen::Index i = 0; i < p; ++i) {
      if (!used[i]) resid[i] -= col[i] * col[i];
    }
    used[j] = 1;
    keep.push_back(j);
  };
  if (fixed.empty()) {
    for (;;) {
      Eigen::Index best = -1;
      for (Eigen::Index i = 0; i < p; ++i) {
        if (!used[i] && (best < 0 || resid[i] > resid[best])) best = i;
      }
      if (best < 0 || !(resid[best] > floor)) break;
      add(best);
    }
  } else {
    for (Eigen::Index j : fixed) {
      if (resid[j] > 1e-3 * floor) add(j);
    }
  }
  out.keep = keep;
  out.rank = static_cast<Eigen::Index>(keep.size());
  if (out.rank == 0) {
    out.singular = true;
    return out;
  }
  Eigen::MatrixXd L(out.rank, out.rank);
  Eigen::VectorXd b(out.rank);
  for (Eigen::Index i = 0; i < out.rank; ++i) {
    L.row(i) = Lc.row(keep[i]).head(out.rank);
    b[i] = xtwr[keep[i]];
  }
  L.triangularView<Eigen::Lower>().solveInPlace(b);
  L.transpose().triangularView<Eigen::Upper>().solveInPlace(b);
  out.beta = Eigen::VectorXd::Zero(p);
  for (Eigen::Index i = 0; i < out.rank; ++i) out.beta[keep[i]] = b[i];
  return out;
}

Solve solve_normal(Eigen::MatrixXd xtwx, const Eigen::VectorXd& xtwr, const IrlsOptions& opt,
                   const std::vector<Eigen::Index>& fixed = {}) {
  if (opt.ridge > 0.0) xtwx.diagonal().array() += opt.ridge;
  if (opt.drop_aliased) return solve_dropping_aliased(xtwx, xtwr, opt, fixed);
  Solve out;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(xtwx);
  const Eigen::VectorXd D = ldlt.vectorD();
  const double dmax = D.cwiseAbs().maxCoeff();
  if (ldlt.info() != Eigen::Success || !(dmax > 0.0) ||
      D.minCoeff() <= opt.rank_tolerance * dmax) {
    out.singular = true;
    return out;
  }
  out.beta = ldlt.solve(xtwr);
  out.rank = xtwx.rows();
  return out;
}

FitResult irls(const Design& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
               const Eigen::VectorXd& offset, const Eigen::VectorXd& eta_start, const Link& link,
               const IrlsOptions& opt) {
  const Eigen::Index n = X.rows();
  FitResult fit;
  fit.used = (w.array() > 0.0).count();
  const auto total_loglik = [&](const Eigen::VectorXd& eta) {
    double ll = 0.0;
    for (Eigen::Index r = 0; r < n; ++r) {
      if (w[r] > 0.0) ll += w[r] * link.loglik(y[r], eta[r]);
    }
    return ll;
  };
  Eigen::VectorXd eta = eta_start;
  Eigen::VectorXd work_w(n), work_z(n);
  double ll_old = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd beta_old;
  Eigen::MatrixXd xtwx;
  Eigen::VectorXd xtwr;
  // Aliasing is decided once, at the starting weights.
  std::vector<Eigen::Index> keep;
  for (int it = 1; it <= opt.max_iterations; ++it) {
    for (Eigen::Index r = 0; r < n; ++r) {
      if (!(w[r] > 0.0)) {
        work_w[r] = 0.0;
        work_z[r] = 0.0;
        continue;
      }
      const double mu = link.mean(eta[r]);
      const double g = link.dmean(eta[r]);
      const double v = link.variance(eta[r]);
      work_w[r] = w[r] * g * g / v;
      work_z[r] = eta[r] - offset[r] + (y[r] - mu) / g;
    }
    X.gram(work_w, work_z, xtwx, xtwr);
    const Solve s = solve_normal(xtwx, xtwr, opt, keep);
    if (s.singular) {
      fit.rank_deficient = true;
      fit.iterations = it;
      return fit;
    }
    keep = s.keep;
    fit.rank = s.rank;
    Eigen::VectorXd beta = s.beta;
    Eigen::VectorXd eta_new = X.multiply(beta) + offset;
    double ll = total_loglik(eta_new);
    // Step halving when the log-likelihood drops or leaves the finite range.
    for (int half = 0; half < 20 && beta_old.size() > 0 && !(ll >= ll_old - 1e-12); ++half) {
      beta = 0.5 * (beta + beta_old);
      eta_new = X.multiply(beta) + offset;
      ll = total_loglik(eta_new);
    }
    fit.beta = beta;
    fit.loglik = ll;
    fit.iterations = it;
    if (!std::isfinite(ll)) return fit;
    // Relative deviance change, the usual GLM stopping rule.
    if (std::abs(ll - ll_old) / (std::abs(ll) + 0.1) < opt.tolerance) {
      bool bounded = true;
      for (Eigen::Index r = 0; r < n; ++r) {
        if (w[r] > 0.0 && std::abs(eta_new[r]) >= link.eta_bound) bounded = false;
      }
      fit.converged = bounded;
      return fit;
    }
    ll_old = ll;
    beta_old = beta;
    eta = eta_new;
  }
  return fit;
}

}  // namespace

void DenseDesign::gram(const Eigen::VectorXd& w, const Eigen::VectorXd& r, Eigen::MatrixXd& xtwx,
                       Eigen::VectorXd& xtwr) const {
  const Eigen::MatrixXd WX = X_.array().colwise() * w.array();
  xtwx = X_.transpose() * WX;
  xtwr = WX.transpose() * r;
}

GraphonDesign::GraphonDesign(Eigen::MatrixXd features_xi, Eigen::MatrixXd features_delta,
                             Eigen::MatrixXd Z)
    : features_xi_(std::move(features_xi)),
      features_delta_(std::move(features_delta)),
      Z_(std::move(Z)) {
  if (features_xi_.rows() != features_delta_.rows() ||
      features_xi_.cols() != features_delta_.cols()) {
    throw InvariantError("graphon design feature blocks differ in shape");
  }
}

Eigen::VectorXd GraphonDesign::multiply(const Eigen::VectorXd& beta) const {
  const Eigen::Index P = features_xi_.rows();
  const Eigen::Index E = features_xi_.cols();
  const Eigen::Index d = Z_.cols();
  // values(e, c): graphon c evaluated on edge e.
  Eigen::MatrixXd values(E, 1 + d);
  values.col(0) = features_xi_.transpose() * beta.segment(0, P);
  for (Eigen::Index l = 0; l < d; ++l) {
    values.col(l + 1) = features_delta_.transpose() * beta.segment(P * (l + 1), P);
  }
  Eigen::VectorXd out(rows());
  for (Eigen::Index i = 0; i < Z_.rows(); ++i) {
    Eigen::VectorXd zi(1 + d);
    zi[0] = 1.0;
    zi.tail(d) = Z_.row(i).transpose();
    out.segment(i * E, E) = values * zi;
  }
  return out;
}

void GraphonDesign::gram(const Eigen::VectorXd& w, const Eigen::VectorXd& r,
                         Eigen::MatrixXd& xtwx, Eigen::VectorXd& xtwr) const {
  const Eigen::Index E = features_xi_.cols();
  const Eigen::Index width = 1 + Z_.cols();
  std::vector<Eigen::MatrixXd> A(E, Eigen::MatrixXd::Zero(width, width));
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(E, width);
  Eigen::VectorXd z(width);
  for (Eigen::Index i = 0; i < Z_.rows(); ++i) {
    z[0] = 1.0;
    z.tail(width - 1) = Z_.row(i).transpose();
    const Eigen::MatrixXd zz = z * z.transpose();
    for (Eigen::Index e = 0; e < E; ++e) {
      const double we = w[i * E + e];
      if (we == 0.0) continue;
      A[e] += we * zz;
      b.row(e) += (we * r[i * E + e]) * z.transpose();
    }
  }
  gram_from_aggregates(A, b, xtwx, xtwr);
}

void GraphonDesign::gram_from_aggregates(const std::vector<Eigen::MatrixXd>& A,
                                         const Eigen::MatrixXd& b, Eigen::MatrixXd& xtwx,
                                         Eigen::VectorXd& xtwr) const {
  const Eigen::Index P = features_xi_.rows();
  const Eigen::Index E = features_xi_.cols();
  const Eigen::Index width = 1 + Z_.cols();
  xtwx.resize(P * width, P * width);
  xtwr.resize(P * width);
  Eigen::VectorXd a(E);
  for (Eigen::Index c = 0; c < width; ++c) {
    const Eigen::MatrixXd& Fc = c == 0 ? features_xi_ : features_delta_;
    xtwr.segment(P * c, P) = Fc * b.col(c);
    for (Eigen::Index c2 = c; c2 < width; ++c2) {
      const Eigen::MatrixXd& Fc2 = c2 == 0 ? features_xi_ : features_delta_;
      for (Eigen::Index e = 0; e < E; ++e) a[e] = A[e](c, c2);
      const Eigen::MatrixXd block = (Fc.array().rowwise() * a.transpose().array()).matrix() *
                                    Fc2.transpose();
      xtwx.block(P * c, P * c2, P, P) = block;
      if (c2 != c) xtwx.block(P * c2, P * c, P, P) = block.transpose();
    }
  }
}

FitResult wls(const Design& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
              const Eigen::VectorXd& offset, const IrlsOptions& opt) {
  FitResult fit;
  fit.used = (w.array() > 0.0).count();
  Eigen::VectorXd yy = y - offset;
  for (Eigen::Index r = 0; r < yy.size(); ++r) {
    if (!(w[r] > 0.0)) yy[r] = 0.0;
  }
  Eigen::MatrixXd xtwx;
  Eigen::VectorXd xtwr;
  X.gram(w, yy, xtwx, xtwr);
  const Solve s = solve_normal(xtwx, xtwr, opt);
  fit.iterations = 1;
  fit.rank = s.rank;
  if (s.singular || fit.used <= (opt.drop_aliased ? s.rank : X.cols())) {
    fit.rank_deficient = true;
    return fit;
  }
  fit.beta = s.beta;
  const Eigen::VectorXd resid = yy - X.multiply(fit.beta);
  double rss = 0.0, log_w = 0.0;
  for (Eigen::Index r = 0; r < yy.size(); ++r) {
    if (w[r] > 0.0) {
      rss += w[r] * resid[r] * resid[r];
      log_w += std::log(w[r]);
    }
  }
  const double m = static_cast<double>(fit.used);
  fit.sigma2 = rss / m;
  if (fit.sigma2 > 0.0) {
    fit.loglik = -0.5 * m * std::log(2.0 * M_PI * fit.sigma2) + 0.5 * log_w - 0.5 * m;
  } else {
    fit.loglik = std::numeric_limits<double>::infinity();
  }
  fit.converged = true;
  return fit;
}

FitResult poisson_irls(const Design& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                       const Eigen::VectorXd& offset, const IrlsOptions& opt) {
  Link link;
  link.mean = [](double eta) { return std::exp(eta); };
  link.dmean = [](double eta) { return std::exp(eta); };
  link.variance = [](double eta) { return std::exp(eta); };
  link.loglik = [](double y, double eta) {
    return y * eta - std::exp(eta) - std::lgamma(y + 1.0);
  };
  Eigen::VectorXd eta(y.size());
  for (Eigen::Index r = 0; r < y.size(); ++r) eta[r] = std::log(std::max(y[r], 0.0) + 0.1);
  return irls(X, y, w, offset, eta, link, opt);
}

FitResult probit_irls(const Design& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                      const Eigen::VectorXd& offset, const IrlsOptions& opt) {
  // The mean is kept away from 0 and 1 so the working weights stay finite.
  const auto clamp = [](double eta) { return std::max(-8.0, std::min(8.0, eta)); };
  Link link;
  link.mean = [clamp](double eta) { return stats::normal_cdf(clamp(eta)); };
  link.dmean = [clamp](double eta) { return stats::normal_pdf(clamp(eta)); };
  link.variance = [clamp](double eta) {
    const double p = stats::normal_cdf(clamp(eta));
    return p * (1.0 - p);
  };
  link.eta_bound = 8.0;
  link.loglik = [](double y, double eta) {
    return y * stats::normal_log_cdf(eta) + (1.0 - y) * stats::normal_log_cdf(-eta);
  };
  return irls(X, y, w, offset, offset, link, opt);
}

}  // namespace bgcon::glm
