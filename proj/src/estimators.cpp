#include "kmefda/estimators.hpp"

#include "kmefda/error.hpp"

#include <cmath>

namespace kmefda {

DesignMatrix::DesignMatrix(Eigen::MatrixXd x, std::vector<std::string> labels)
    : x_(std::move(x)), labels_(std::move(labels))
{
    require(x_.cols() >= 1, ErrorCode::InvalidArgument, "design needs at least one column");
    require(labels_.empty() || static_cast<Eigen::Index>(labels_.size()) == x_.cols(), ErrorCode::LengthMismatch,
            "one label per design column");
    require(x_.allFinite(), ErrorCode::InvalidArgument, "design entries must be finite");
}

DesignMatrix DesignMatrix::intercept(Eigen::Index n)
{
    return DesignMatrix(Eigen::MatrixXd::Ones(n, 1), {"intercept"});
}

DesignMatrix DesignMatrix::with_intercept(const Eigen::MatrixXd& covariates)
{
    Eigen::MatrixXd x(covariates.rows(), covariates.cols() + 1);
    x.col(0).setOnes();
    x.rightCols(covariates.cols()) = covariates;
    std::vector<std::string> labels{"intercept"};
    for (Eigen::Index j = 0; j < covariates.cols(); ++j) {
        labels.push_back("x" + std::to_string(j + 1));
    }
    return DesignMatrix(std::move(x), std::move(labels));
}

Fn FittedRegression::beta_fn(Eigen::Index k) const
{
    require(k >= 0 && k < beta.rows(), ErrorCode::InvalidArgument, "coefficient index out of range");
    return {basis, beta.row(k).transpose()};
}

std::vector<Fn> FittedRegression::betas() const
{
    std::vector<Fn> out;
    for (Eigen::Index k = 0; k < beta.rows(); ++k) {
        out.push_back(beta_fn(k));
    }
    return out;
}

Fn FittedRegression::residual(Eigen::Index i) const
{
    require(i >= 0 && i < residuals.rows(), ErrorCode::InvalidArgument, "residual index out of range");
    return {basis, residuals.row(i).transpose()};
}

namespace detail {

OlsSolution ols_solve(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y)
{
    require(x.rows() == y.rows(), ErrorCode::LengthMismatch, "design rows must equal sample count");
    require(x.rows() > x.cols(), ErrorCode::UnderDetermined,
            "need more samples than design columns (n=" + std::to_string(x.rows()) +
                ", p=" + std::to_string(x.cols()) + ")");
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    qr.setThreshold(1e-10);
    require(qr.rank() == x.cols(), ErrorCode::SingularDesign, "design matrix is not of full column rank");
    OlsSolution out;
    out.beta = qr.solve(y);
    out.residuals = y - x * out.beta;
    return out;
}

}  // namespace detail

FittedRegression ols_fit(const FunctionalDataset& ds, const DesignMatrix& x)
{
    detail::OlsSolution sol = detail::ols_solve(x.matrix(), ds.coeffs());
    const double dof = static_cast<double>(x.rows() - x.cols());
    CovOperator cov(ds.basis(), eigh(detail::second_moment(sol.residuals, dof)));
    return {ds.basis(), std::move(sol.beta), std::move(sol.residuals), std::move(cov), x};
}

std::vector<Fn> error_contrasts(const FunctionalDataset& ds, const DesignMatrix& x)
{
    detail::ols_solve(x.matrix(), ds.coeffs());
    const Eigen::Index n = x.rows();
    const Eigen::Index p = x.cols();
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(x.matrix());
    const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, p);
    const Eigen::MatrixXd annihilator = Eigen::MatrixXd::Identity(n, n) - q * q.transpose();
    const EigenSystem eig = eigh_symmetrized(annihilator);
    const Eigen::MatrixXd u = eig.vectors.leftCols(n - p);
    const Eigen::MatrixXd contrasts = u.transpose() * ds.coeffs();
    std::vector<Fn> out;
    out.reserve(static_cast<std::size_t>(n - p));
    for (Eigen::Index i = 0; i < n - p; ++i) {
        out.emplace_back(ds.basis(), contrasts.row(i).transpose());
    }
    return out;
}

CovOperator restricted_cov(std::span<const Fn> contrasts)
{
    require(!contrasts.empty(), ErrorCode::InvalidArgument, "restricted_cov needs at least one contrast");
    const BasisHandle& basis = contrasts.front().basis();
    Eigen::MatrixXd rows(static_cast<Eigen::Index>(contrasts.size()), basis->size());
    for (std::size_t i = 0; i < contrasts.size(); ++i) {
        require_same_basis(basis, contrasts[i].basis());
        rows.row(static_cast<Eigen::Index>(i)) = contrasts[i].coeffs().transpose();
    }
    return {basis, eigh(detail::second_moment(rows, static_cast<double>(contrasts.size())))};
}

CovOperator mkm_cov_eigen(const FunctionalDataset& ds, double sigma)
{
    require(sigma > 0.0, ErrorCode::InvalidArgument, "sigma must be positive");
    require(ds.size() >= 1, ErrorCode::InvalidArgument, "mkm_cov_eigen needs at least one sample");
    EigenSystem eig = eigh(detail::second_moment(ds.coeffs(), static_cast<double>(ds.size())));
    if (std::isfinite(sigma)) {
        const double shift = 1.0 / (2.0 * sigma);
        for (Eigen::Index j = 0; j < eig.rank(); ++j) {
            eig.values[j] = std::max(eig.values[j] - shift, 0.0);
        }
    }
    return {ds.basis(), std::move(eig)};
}

std::vector<Fn> small_ball_fit(const FunctionalDataset& ds, const DesignMatrix& x, const CovOperator& eigensystem, int h)
{
    require_same_basis(ds.basis(), eigensystem.basis());
    require(h >= 1 && h <= eigensystem.rank(), ErrorCode::InvalidArgument,
            "h must lie in 1.." + std::to_string(eigensystem.rank()));
    const Eigen::MatrixXd psi = eigensystem.eigenfuncs().leftCols(h);
    const Eigen::MatrixXd projected = (ds.coeffs() * psi) * psi.transpose();
    const detail::OlsSolution sol = detail::ols_solve(x.matrix(), projected);
    std::vector<Fn> out;
    for (Eigen::Index k = 0; k < sol.beta.rows(); ++k) {
        out.emplace_back(ds.basis(), sol.beta.row(k).transpose());
    }
    return out;
}

int small_ball_order(const CovOperator& eigensystem, double radius)
{
    require(std::isfinite(radius) && radius > 0.0, ErrorCode::InvalidArgument, "radius must be positive");
    const double r2 = radius * radius;
    int h = 0;
    for (Eigen::Index j = 0; j < eigensystem.rank(); ++j) {
        if (r2 <= eigensystem.eigenvalues()[j]) {
            h = static_cast<int>(j + 1);
        }
    }
    return h;
}

}  // namespace kmefda
