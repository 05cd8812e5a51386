#pragma once

#include <Eigen/Dense>
#include <vector>

namespace bgcon {

/**
 * Clamped B-spline basis on [0,1].
 *
 * The knot vector has K + degree + 1 entries; the first and last degree + 1
 * of them sit at 0 and 1 respectively.
 */
struct BasisConfig {
  int K = 7;
  int degree = 3;
  std::vector<double> knots;

  /// Uniform interior knots with clamped ends.
  static BasisConfig uniform(int K, int degree = 3);

  /// Throws ConfigError when the knot vector is malformed.
  void validate() const;
};

/// Values of all K basis functions at x.
Eigen::VectorXd bspline_basis(double x, const BasisConfig& cfg);

/// Values and first derivatives of all K basis functions at x.
void bspline_basis_with_derivative(double x, const BasisConfig& cfg, Eigen::VectorXd& values,
                                   Eigen::VectorXd& derivatives);

/// Number of free entries of a symmetric K x K matrix.
inline int upper_size(int K) { return K * (K + 1) / 2; }

/**
 * Symmetric K x K coefficient matrix stored as its upper triangle
 * (row-major over m <= m'). Symmetry is structural, so mirrored entries
 * can never drift apart.
 */
class SymmetricCoeffMatrix {
public:
  SymmetricCoeffMatrix() = default;
  explicit SymmetricCoeffMatrix(int K);
  SymmetricCoeffMatrix(int K, Eigen::VectorXd upper);

  /// Throws InvariantError unless `full` is exactly symmetric.
  static SymmetricCoeffMatrix from_full(const Eigen::MatrixXd& full);

  int K() const { return K_; }
  double operator()(int m, int mp) const { return upper_[index(m, mp)]; }
  double& operator()(int m, int mp) { return upper_[index(m, mp)]; }

  const Eigen::VectorXd& upper() const { return upper_; }
  Eigen::VectorXd& upper() { return upper_; }

  Eigen::MatrixXd to_full() const;

  int index(int m, int mp) const;

private:
  int K_ = 0;
  Eigen::VectorXd upper_;
};

/**
 * Tied design features of the symmetric tensor product at (u, v):
 * B_m(u)B_m'(v) + B_m'(u)B_m(v) for m < m' and B_m(u)B_m(v) on the diagonal.
 * Swapping the two arguments yields a bit-identical vector.
 */
Eigen::VectorXd symmetric_features(const Eigen::VectorXd& basis_u, const Eigen::VectorXd& basis_v);

/// In-place version writing into `out` (size upper_size(K)).
void symmetric_features(const Eigen::VectorXd& basis_u, const Eigen::VectorXd& basis_v,
                        Eigen::Ref<Eigen::VectorXd> out);

double graphon_eval(const SymmetricCoeffMatrix& coeffs, double u, double v,
                    const BasisConfig& cfg);

struct GraphonGradient {
  /// K x K, entry (m,m') holds the partial w.r.t. the tied coefficient.
  Eigen::MatrixXd coefficients;
  double du = 0.0;
  double dv = 0.0;
};

GraphonGradient graphon_gradient(const SymmetricCoeffMatrix& coeffs, double u, double v,
                                 const BasisConfig& cfg);

}  // namespace bgcon
