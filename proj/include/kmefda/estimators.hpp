#pragma once

#include "kmefda/basis.hpp"
#include "kmefda/funcspace.hpp"
#include "kmefda/operator.hpp"

#include <Eigen/Dense>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace kmefda {

/// n x p design with optional column labels.
class DesignMatrix {
public:
    explicit DesignMatrix(Eigen::MatrixXd x, std::vector<std::string> labels = {});

    /// Column of ones.
    static DesignMatrix intercept(Eigen::Index n);
    /// [1, covariates].
    static DesignMatrix with_intercept(const Eigen::MatrixXd& covariates);

    [[nodiscard]] const Eigen::MatrixXd& matrix() const noexcept { return x_; }
    [[nodiscard]] Eigen::Index rows() const noexcept { return x_.rows(); }
    [[nodiscard]] Eigen::Index cols() const noexcept { return x_.cols(); }
    [[nodiscard]] const std::vector<std::string>& labels() const noexcept { return labels_; }

private:
    Eigen::MatrixXd x_;
    std::vector<std::string> labels_;
};

struct FittedRegression {
    BasisHandle basis;
    Eigen::MatrixXd beta;       // p x K, row k is beta_k
    Eigen::MatrixXd residuals;  // n x K
    CovOperator cov;            // restricted estimate
    DesignMatrix design;

    [[nodiscard]] Fn beta_fn(Eigen::Index k) const;
    [[nodiscard]] std::vector<Fn> betas() const;
    [[nodiscard]] Fn residual(Eigen::Index i) const;
};

/// beta = (X^T X)^{-1} X^T Y applied coefficient-wise, with the restricted
/// covariance (1/(n - p)) sum of contrast outer products.
FittedRegression ols_fit(const FunctionalDataset& ds, const DesignMatrix& x);

/// y*_i = u_i^T Y for an orthonormal basis u_1..u_{n-p} of the
/// eigenvalue-one eigenspace of I - X (X^T X)^{-1} X^T.
std::vector<Fn> error_contrasts(const FunctionalDataset& ds, const DesignMatrix& x);

/// Eigensystem of (1/m) sum_i y*_i y*_i^T over the m given contrasts.
CovOperator restricted_cov(std::span<const Fn> contrasts);

/// Eigenfunctions of (1/n) sum_i y_i y_i^T with eigenvalues shifted by
/// -1/(2 sigma) and clamped at zero. sigma = infinity skips the shift.
CovOperator mkm_cov_eigen(const FunctionalDataset& ds, double sigma = std::numeric_limits<double>::infinity());

/// OLS on the samples projected onto the top-h eigenfunctions.
std::vector<Fn> small_ball_fit(const FunctionalDataset& ds, const DesignMatrix& x, const CovOperator& eigensystem, int h);

/// h = max{j : r^2 <= lambda_j}; 0 when r^2 exceeds every eigenvalue.
int small_ball_order(const CovOperator& eigensystem, double radius);

namespace detail {

struct OlsSolution {
    Eigen::MatrixXd beta;       // p x K
    Eigen::MatrixXd residuals;  // n x K
};

/// Validated least squares on raw matrices; the hot path of the regression tests.
OlsSolution ols_solve(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y);

}  // namespace detail

}  // namespace kmefda
