#include "kmefda/operator.hpp"

#include "kmefda/error.hpp"

#include <cmath>

namespace kmefda {

namespace {

void require_positive_shift(double c)
{
    require(std::isfinite(c) && c > 0.0, ErrorCode::InvalidArgument, "shift c must be a positive finite real");
}

}  // namespace

Eigen::MatrixXd EigenSystem::dense() const
{
    return vectors * values.asDiagonal() * vectors.transpose();
}

EigenSystem eigh(const Eigen::MatrixXd& matrix)
{
    require(matrix.rows() == matrix.cols(), ErrorCode::InvalidArgument, "eigh requires a square matrix");
    const Eigen::Index dim = matrix.rows();
    if (dim == 0) {
        return {};
    }
    const double scale = std::max(1.0, matrix.cwiseAbs().maxCoeff());
    require((matrix - matrix.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * scale, ErrorCode::InvalidArgument,
            "eigh requires a symmetric matrix");

    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(matrix);
    require(solver.info() == Eigen::Success, ErrorCode::NumericalInconsistency, "symmetric eigensolver failed");

    EigenSystem out;
    out.values = solver.eigenvalues().reverse();
    out.vectors = solver.eigenvectors().rowwise().reverse();

    const double tol = 1e-10 * std::max(1.0, std::abs(out.values[0]));
    for (Eigen::Index j = 0; j < dim; ++j) {
        double& lambda = out.values[j];
        if (lambda < -tol) {
            fail(ErrorCode::NotPositiveSemidefinite,
                 "matrix has eigenvalue " + std::to_string(lambda) + " below the PSD tolerance");
        }
        lambda = std::max(lambda, 0.0);

        auto column = out.vectors.col(j);
        for (Eigen::Index i = 0; i < dim; ++i) {
            if (std::abs(column[i]) > 1e-12) {
                if (column[i] < 0.0) {
                    column *= -1.0;
                }
                break;
            }
        }
    }
    return out;
}

EigenSystem eigh_symmetrized(const Eigen::MatrixXd& matrix)
{
    return eigh(0.5 * (matrix + matrix.transpose()));
}

CovOperator::CovOperator(BasisHandle basis, EigenSystem eig) : basis_(std::move(basis)), eig_(std::move(eig))
{
    require(basis_ != nullptr, ErrorCode::InvalidArgument, "CovOperator requires a basis handle");
    require(eig_.values.size() == eig_.vectors.cols(), ErrorCode::LengthMismatch, "eigenvalue/eigenvector count mismatch");
    require(eig_.rank() == 0 || eig_.vectors.rows() == basis_->size(), ErrorCode::LengthMismatch,
            "eigenvector length differs from basis size");
    if (eig_.rank() == 0) {
        eig_.vectors.resize(basis_->size(), 0);
    }
    for (Eigen::Index j = 0; j < eig_.rank(); ++j) {
        require(eig_.values[j] >= 0.0, ErrorCode::NotPositiveSemidefinite, "covariance eigenvalues must be >= 0");
        require(j == 0 || eig_.values[j] <= eig_.values[j - 1], ErrorCode::InvalidArgument,
                "covariance eigenvalues must be nonincreasing");
    }
}

CovOperator CovOperator::from_matrix(BasisHandle basis, const Eigen::MatrixXd& matrix)
{
    return {std::move(basis), eigh(matrix)};
}

CovOperator CovOperator::zero(BasisHandle basis)
{
    EigenSystem eig;
    eig.vectors.resize(basis->size(), 0);
    return {std::move(basis), std::move(eig)};
}

CovOperator CovOperator::diagonal(BasisHandle basis, const Eigen::VectorXd& eigenvalues)
{
    const int dim = basis->size();
    require(eigenvalues.size() <= dim, ErrorCode::LengthMismatch, "more eigenvalues than basis functions");
    EigenSystem eig;
    eig.values = eigenvalues;
    eig.vectors = Eigen::MatrixXd::Identity(dim, eigenvalues.size());
    return {std::move(basis), std::move(eig)};
}

Fn CovOperator::eigenfunction(Eigen::Index j) const
{
    require(j >= 0 && j < rank(), ErrorCode::InvalidArgument, "eigenfunction index out of range");
    return {basis_, eig_.vectors.col(j)};
}

CovOperator operator_sum(const CovOperator& a, const CovOperator& b)
{
    require_same_basis(a.basis(), b.basis());
    return {a.basis(), eigh_symmetrized(a.dense() + b.dense())};
}

double log_det_shifted(const EigenSystem& eig, double c)
{
    require_positive_shift(c);
    double total = 0.0;
    for (Eigen::Index j = 0; j < eig.rank(); ++j) {
        total += std::log1p(c * eig.values[j]);
    }
    return total;
}

double log_det_shifted(const CovOperator& cov, double c) { return log_det_shifted(cov.eigensystem(), c); }

double det_inv_sqrt_shifted(const EigenSystem& eig, double c) { return std::exp(-0.5 * log_det_shifted(eig, c)); }

double det_inv_sqrt_shifted(const CovOperator& cov, double c) { return det_inv_sqrt_shifted(cov.eigensystem(), c); }

double resolvent_quad_form(const EigenSystem& eig, double c, const Eigen::Ref<const Eigen::VectorXd>& v)
{
    require_positive_shift(c);
    require(eig.rank() == 0 || v.size() == eig.dim(), ErrorCode::LengthMismatch, "vector length differs from operator");
    if (eig.rank() == 0) {
        return v.squaredNorm();
    }
    const Eigen::VectorXd scores = eig.vectors.transpose() * v;
    double total = 0.0;
    for (Eigen::Index j = 0; j < scores.size(); ++j) {
        total += scores[j] * scores[j] / (1.0 + c * eig.values[j]);
    }
    const Eigen::VectorXd complement = v - eig.vectors * scores;
    return total + complement.squaredNorm();
}

double resolvent_quad_form(const CovOperator& cov, double c, const Fn& v)
{
    require_same_basis(cov.basis(), v.basis());
    return resolvent_quad_form(cov.eigensystem(), c, v.coeffs());
}

}  // namespace kmefda
