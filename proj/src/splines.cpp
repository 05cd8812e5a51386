#include "bgcon/splines.hpp"

#include <cmath>
#include <string>

#include "bgcon/errors.hpp"

namespace bgcon {

BasisConfig BasisConfig::uniform(int K, int degree) {
  if (degree < 1) throw ConfigError("spline degree must be >= 1");
  if (K < degree + 1) {
    throw ConfigError("K = " + std::to_string(K) + " too small for degree " +
                      std::to_string(degree));
  }
  BasisConfig cfg;
  cfg.K = K;
  cfg.degree = degree;
  const int interior = K - degree - 1;
  cfg.knots.assign(degree + 1, 0.0);
  for (int i = 1; i <= interior; ++i) {
    cfg.knots.push_back(static_cast<double>(i) / static_cast<double>(interior + 1));
  }
  cfg.knots.insert(cfg.knots.end(), degree + 1, 1.0);
  return cfg;
}

void BasisConfig::validate() const {
  if (degree < 1) throw ConfigError("spline degree must be >= 1");
  if (K < degree + 1) throw ConfigError("K must be at least degree + 1");
  if (static_cast<int>(knots.size()) != K + degree + 1) {
    throw ConfigError("knot vector must have K + degree + 1 entries");
  }
  for (int i = 0; i <= degree; ++i) {
    if (knots[i] != 0.0 || knots[knots.size() - 1 - i] != 1.0) {
      throw ConfigError("knot vector must be clamped at 0 and 1");
    }
  }
  for (std::size_t i = 1; i < knots.size(); ++i) {
    if (knots[i] < knots[i - 1]) throw ConfigError("knot vector must be non-decreasing");
  }
  for (int i = degree + 1; i < K; ++i) {
    if (!(knots[i] > 0.0 && knots[i] < 1.0)) {
      throw ConfigError("interior knots must lie strictly inside (0,1)");
    }
  }
}

namespace {

void check_x(double x) {
  if (!(x >= 0.0 && x <= 1.0)) {
    throw DomainError("spline argument " + std::to_string(x) + " outside [0,1]");
  }
}

// Knot span s with knots[s] <= x < knots[s+1]; x == 1 maps to the last span.
int find_span(double x, const BasisConfig& cfg) {
  const int last = cfg.K - 1;
  if (x >= cfg.knots[last + 1]) return last;
  int lo = cfg.degree;
  int hi = last + 1;
  int mid = (lo + hi) / 2;
  while (x < cfg.knots[mid] || x >= cfg.knots[mid + 1]) {
    if (x < cfg.knots[mid]) {
      hi = mid;
    } else {
      lo = mid;
    }
    mid = (lo + hi) / 2;
  }
  return mid;
}

// The degree + 1 nonzero basis values of the given degree on span s.
void nonzero_basis(int span, double x, int degree, const std::vector<double>& U, double* out) {
  std::vector<double> left(degree + 1), right(degree + 1);
  out[0] = 1.0;
  for (int j = 1; j <= degree; ++j) {
    left[j] = x - U[span + 1 - j];
    right[j] = U[span + j] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double temp = out[r] / (right[r + 1] + left[j - r]);
      out[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    out[j] = saved;
  }
}

}  // namespace

Eigen::VectorXd bspline_basis(double x, const BasisConfig& cfg) {
  check_x(x);
  Eigen::VectorXd values = Eigen::VectorXd::Zero(cfg.K);
  const int span = find_span(x, cfg);
  std::vector<double> local(cfg.degree + 1);
  nonzero_basis(span, x, cfg.degree, cfg.knots, local.data());
  for (int r = 0; r <= cfg.degree; ++r) values[span - cfg.degree + r] = local[r];
  return values;
}

void bspline_basis_with_derivative(double x, const BasisConfig& cfg, Eigen::VectorXd& values,
                                   Eigen::VectorXd& derivatives) {
  check_x(x);
  const int p = cfg.degree;
  const auto& U = cfg.knots;
  values = Eigen::VectorXd::Zero(cfg.K);
  derivatives = Eigen::VectorXd::Zero(cfg.K);
  const int span = find_span(x, cfg);
  std::vector<double> local(p + 1), lower(p + 1, 0.0);
  nonzero_basis(span, x, p, U, local.data());
  nonzero_basis(span, x, p - 1, U, lower.data());
  // lower[r] is N_{span-p+1+r, p-1}; N'_{i,p} = p N_{i,p-1}/(U_{i+p}-U_i) - p N_{i+1,p-1}/(U_{i+p+1}-U_{i+1}).
  for (int r = 0; r <= p; ++r) {
    const int i = span - p + r;
    double d = 0.0;
    if (r >= 1) {
      const double denom = U[i + p] - U[i];
      if (denom > 0.0) d += p * lower[r - 1] / denom;
    }
    if (r <= p - 1) {
      const double denom = U[i + p + 1] - U[i + 1];
      if (denom > 0.0) d -= p * lower[r] / denom;
    }
    values[i] = local[r];
    derivatives[i] = d;
  }
}

SymmetricCoeffMatrix::SymmetricCoeffMatrix(int K)
    : K_(K), upper_(Eigen::VectorXd::Zero(upper_size(K))) {}

SymmetricCoeffMatrix::SymmetricCoeffMatrix(int K, Eigen::VectorXd upper)
    : K_(K), upper_(std::move(upper)) {
  if (upper_.size() != upper_size(K)) {
    throw InvariantError("upper-triangle length does not match K");
  }
}

SymmetricCoeffMatrix SymmetricCoeffMatrix::from_full(const Eigen::MatrixXd& full) {
  if (full.rows() != full.cols()) throw InvariantError("coefficient matrix must be square");
  const int K = static_cast<int>(full.rows());
  SymmetricCoeffMatrix out(K);
  for (int m = 0; m < K; ++m) {
    for (int mp = m; mp < K; ++mp) {
      if (full(m, mp) != full(mp, m)) {
        throw InvariantError("coefficient matrix not symmetric at (" + std::to_string(m) + "," +
                             std::to_string(mp) + ")");
      }
      out(m, mp) = full(m, mp);
    }
  }
  return out;
}

Eigen::MatrixXd SymmetricCoeffMatrix::to_full() const {
  Eigen::MatrixXd full(K_, K_);
  for (int m = 0; m < K_; ++m) {
    for (int mp = m; mp < K_; ++mp) {
      full(m, mp) = full(mp, m) = (*this)(m, mp);
    }
  }
  return full;
}

int SymmetricCoeffMatrix::index(int m, int mp) const {
  if (m > mp) std::swap(m, mp);
  // Row-major upper triangle: rows before m hold K + (K-1) + ... entries.
  return m * K_ - m * (m - 1) / 2 + (mp - m);
}

void symmetric_features(const Eigen::VectorXd& basis_u, const Eigen::VectorXd& basis_v,
                        Eigen::Ref<Eigen::VectorXd> out) {
  const int K = static_cast<int>(basis_u.size());
  int idx = 0;
  for (int m = 0; m < K; ++m) {
    out[idx++] = basis_u[m] * basis_v[m];
    for (int mp = m + 1; mp < K; ++mp) {
      out[idx++] = basis_u[m] * basis_v[mp] + basis_u[mp] * basis_v[m];
    }
  }
}

Eigen::VectorXd symmetric_features(const Eigen::VectorXd& basis_u,
                                   const Eigen::VectorXd& basis_v) {
  Eigen::VectorXd out(upper_size(static_cast<int>(basis_u.size())));
  symmetric_features(basis_u, basis_v, out);
  return out;
}

double graphon_eval(const SymmetricCoeffMatrix& coeffs, double u, double v,
                    const BasisConfig& cfg) {
  if (coeffs.K() != cfg.K) throw InvariantError("coefficient size does not match basis size");
  const Eigen::VectorXd bu = bspline_basis(u, cfg);
  const Eigen::VectorXd bv = bspline_basis(v, cfg);
  const Eigen::VectorXd f = symmetric_features(bu, bv);
  // Plain ordered loop: the summation order must not depend on (u,v).
  double total = 0.0;
  for (Eigen::Index i = 0; i < f.size(); ++i) total += coeffs.upper()[i] * f[i];
  return total;
}

GraphonGradient graphon_gradient(const SymmetricCoeffMatrix& coeffs, double u, double v,
                                 const BasisConfig& cfg) {
  if (coeffs.K() != cfg.K) throw InvariantError("coefficient size does not match basis size");
  Eigen::VectorXd bu, du, bv, dv;
  bspline_basis_with_derivative(u, cfg, bu, du);
  bspline_basis_with_derivative(v, cfg, bv, dv);
  const Eigen::VectorXd f = symmetric_features(bu, bv);
  GraphonGradient g;
  g.coefficients.resize(cfg.K, cfg.K);
  for (int m = 0; m < cfg.K; ++m) {
    for (int mp = m; mp < cfg.K; ++mp) {
      g.coefficients(m, mp) = g.coefficients(mp, m) = f[coeffs.index(m, mp)];
    }
  }
  const Eigen::MatrixXd full = coeffs.to_full();
  g.du = du.dot(full * bv);
  g.dv = bu.dot(full * dv);
  return g;
}

}  // namespace bgcon
