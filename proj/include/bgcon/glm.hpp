#pragma once

#include <Eigen/Dense>
#include <vector>

namespace bgcon::glm {

/// Linear-predictor design. Observations with prior weight 0 are ignored.
class Design {
public:
  virtual ~Design() = default;
  virtual Eigen::Index rows() const = 0;
  virtual Eigen::Index cols() const = 0;
  /// X * beta.
  virtual Eigen::VectorXd multiply(const Eigen::VectorXd& beta) const = 0;
  /// X' W X and X' W r for per-row weights w.
  virtual void gram(const Eigen::VectorXd& w, const Eigen::VectorXd& r, Eigen::MatrixXd& xtwx,
                    Eigen::VectorXd& xtwr) const = 0;
};

class DenseDesign : public Design {
public:
  explicit DenseDesign(Eigen::MatrixXd X) : X_(std::move(X)) {}
  Eigen::Index rows() const override { return X_.rows(); }
  Eigen::Index cols() const override { return X_.cols(); }
  Eigen::VectorXd multiply(const Eigen::VectorXd& beta) const override { return X_ * beta; }
  void gram(const Eigen::VectorXd& w, const Eigen::VectorXd& r, Eigen::MatrixXd& xtwx,
            Eigen::VectorXd& xtwr) const override;

private:
  Eigen::MatrixXd X_;
};

/**
 * Design of a graphon regression: row (i, e) is
 * [f_xi(e), Z_i1 f_delta(e), ..., Z_id f_delta(e)] with rows ordered i * E + e.
 * Coefficients are stacked [theta; gamma_1; ...; gamma_d].
 */
class GraphonDesign : public Design {
public:
  GraphonDesign(Eigen::MatrixXd features_xi, Eigen::MatrixXd features_delta, Eigen::MatrixXd Z);
  Eigen::Index rows() const override { return Z_.rows() * features_xi_.cols(); }
  Eigen::Index cols() const override { return features_xi_.rows() * (1 + Z_.cols()); }
  Eigen::VectorXd multiply(const Eigen::VectorXd& beta) const override;
  void gram(const Eigen::VectorXd& w, const Eigen::VectorXd& r, Eigen::MatrixXd& xtwx,
            Eigen::VectorXd& xtwr) const override;

  /// Same assembly from per-edge aggregates: A[e] = sum_i w z z', b[e] = sum_i w r z.
  void gram_from_aggregates(const std::vector<Eigen::MatrixXd>& A, const Eigen::MatrixXd& b,
                            Eigen::MatrixXd& xtwx, Eigen::VectorXd& xtwr) const;

private:
  Eigen::MatrixXd features_xi_;     // P x E
  Eigen::MatrixXd features_delta_;  // P x E
  Eigen::MatrixXd Z_;               // n x d
};

struct FitResult {
  Eigen::VectorXd beta;
  double loglik = 0.0;
  int iterations = 0;
  bool converged = false;
  bool rank_deficient = false;
  /// Gaussian fits only: maximum-likelihood residual variance scale.
  double sigma2 = 0.0;
  /// Number of observations with positive prior weight.
  Eigen::Index used = 0;
  /// Number of estimated (non-aliased) coefficients.
  Eigen::Index rank = 0;
};

struct IrlsOptions {
  int max_iterations = 50;
  double tolerance = 1e-8;
  /// Relative eigenvalue cutoff on X'WX below which the design counts as singular.
  double rank_tolerance = 1e-10;
  /// Optional ridge added to X'WX (0 = plain maximum likelihood).
  double ridge = 0.0;
  /**
   * Drop numerically aliased columns (coefficients reported as 0) instead of
   * failing, as R's lm/glm do. Columns are chosen by diagonally pivoted
   * Cholesky of X'WX until every remaining residual is <= rank_tolerance
   * times the largest diagonal entry.
   */
  bool drop_aliased = false;
};

/**
 * Weighted least squares for y ~ N(X beta + offset, sigma2 / w).
 * loglik is the Gaussian log-likelihood at the MLE of sigma2.
 */
FitResult wls(const Design& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
              const Eigen::VectorXd& offset, const IrlsOptions& opt = {});

/// Poisson log-link regression by IRLS; w are prior weights (0 excludes a row).
FitResult poisson_irls(const Design& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                       const Eigen::VectorXd& offset, const IrlsOptions& opt = {});

/// Probit regression of a 0/1 response by IRLS.
FitResult probit_irls(const Design& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                      const Eigen::VectorXd& offset, const IrlsOptions& opt = {});

}  // namespace bgcon::glm
