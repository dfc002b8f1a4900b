#pragma once

#include "kmefda/basis.hpp"

#include <Eigen/Dense>

namespace kmefda {

/// Descending eigenvalues with matching orthonormal eigenvector columns.
struct EigenSystem {
    Eigen::VectorXd values;   // r entries, nonincreasing, >= 0
    Eigen::MatrixXd vectors;  // K x r

    [[nodiscard]] Eigen::Index dim() const noexcept { return vectors.rows(); }
    [[nodiscard]] Eigen::Index rank() const noexcept { return values.size(); }
    /// sum_j lambda_j psi_j psi_j^T
    [[nodiscard]] Eigen::MatrixXd dense() const;
};

/// Symmetric eigendecomposition with descending order.
///
/// Eigenvalues in [-tol, 0) are clamped to 0 and anything below -tol raises
/// NotPositiveSemidefinite, with tol = 1e-10 * max(1, |lambda_max|).
/// Asymmetry beyond 1e-10 * max(1, max|M_ij|) raises InvalidArgument.
/// Eigenvector signs are fixed so the first component above 1e-12 in
/// magnitude is positive.
EigenSystem eigh(const Eigen::MatrixXd& matrix);

/// Same as eigh() after replacing the input by (M + M^T) / 2.
EigenSystem eigh_symmetrized(const Eigen::MatrixXd& matrix);

/// Trace-class covariance operator carried as an eigensystem in the
/// coordinates of a basis. Directions outside the stored eigenvectors carry
/// eigenvalue zero.
class CovOperator {
public:
    CovOperator(BasisHandle basis, EigenSystem eig);

    static CovOperator from_matrix(BasisHandle basis, const Eigen::MatrixXd& matrix);
    static CovOperator zero(BasisHandle basis);
    /// Operator with the given eigenvalues along e_1, e_2, ...
    static CovOperator diagonal(BasisHandle basis, const Eigen::VectorXd& eigenvalues);

    [[nodiscard]] const BasisHandle& basis() const noexcept { return basis_; }
    [[nodiscard]] const EigenSystem& eigensystem() const noexcept { return eig_; }
    [[nodiscard]] const Eigen::VectorXd& eigenvalues() const noexcept { return eig_.values; }
    [[nodiscard]] const Eigen::MatrixXd& eigenfuncs() const noexcept { return eig_.vectors; }
    [[nodiscard]] Eigen::Index rank() const noexcept { return eig_.rank(); }
    [[nodiscard]] int dim() const noexcept { return basis_->size(); }
    [[nodiscard]] Eigen::MatrixXd dense() const { return eig_.dense(); }
    [[nodiscard]] double trace() const { return eig_.values.sum(); }
    [[nodiscard]] Fn eigenfunction(Eigen::Index j) const;

private:
    BasisHandle basis_;
    EigenSystem eig_;
};

/// C_a + C_b, re-decomposed from the dense sum.
CovOperator operator_sum(const CovOperator& a, const CovOperator& b);

/// sum_j log(1 + c lambda_j). Requires c > 0.
double log_det_shifted(const EigenSystem& eig, double c);
double log_det_shifted(const CovOperator& cov, double c);

/// |I + c C|^{-1/2}, evaluated as exp(-log_det_shifted / 2).
double det_inv_sqrt_shifted(const EigenSystem& eig, double c);
double det_inv_sqrt_shifted(const CovOperator& cov, double c);

/// <(I + c C)^{-1} v, v>: sum_j <v, psi_j>^2 / (1 + c lambda_j) plus the
/// squared norm of v outside span{psi_j}.
double resolvent_quad_form(const EigenSystem& eig, double c, const Eigen::Ref<const Eigen::VectorXd>& v);
double resolvent_quad_form(const CovOperator& cov, double c, const Fn& v);

}  // namespace kmefda
