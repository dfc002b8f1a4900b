#include "kmefda/embedding.hpp"

#include "kmefda/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace kmefda {

namespace {

void require_sigma(double sigma)
{
    require(std::isfinite(sigma) && sigma > 0.0, ErrorCode::InvalidArgument, "kernel sigma must be a positive finite real");
}

}  // namespace

GaussianMeasure::GaussianMeasure(Fn mean, CovOperator cov) : mean_(std::move(mean)), cov_(std::move(cov))
{
    require_same_basis(mean_.basis(), cov_.basis());
}

KernelConfig::KernelConfig(double sigma_value, KernelVariant v) : sigma(sigma_value), variant(v)
{
    require_sigma(sigma);
}

double gaussian_kernel(const Fn& x, const Fn& y, double sigma)
{
    require_sigma(sigma);
    require_same_basis(x.basis(), y.basis());
    return std::exp(-sigma * (x.coeffs() - y.coeffs()).squaredNorm());
}

double log_kernel_mean_at(const GaussianMeasure& p, const Fn& x, double sigma)
{
    require_sigma(sigma);
    require_same_basis(p.basis(), x.basis());
    const Eigen::VectorXd offset = x.coeffs() - p.mean().coeffs();
    const double c = 2.0 * sigma;
    return -0.5 * log_det_shifted(p.cov(), c) - sigma * resolvent_quad_form(p.cov().eigensystem(), c, offset);
}

double kernel_mean_at(const GaussianMeasure& p, const Fn& x, double sigma)
{
    return std::exp(log_kernel_mean_at(p, x, sigma));
}

double log_kernel_mean_norm_sq(const GaussianMeasure& p, double sigma)
{
    require_sigma(sigma);
    return -0.5 * log_det_shifted(p.cov(), 4.0 * sigma);
}

double kernel_mean_norm_sq(const GaussianMeasure& p, double sigma) { return std::exp(log_kernel_mean_norm_sq(p, sigma)); }

double log_kernel_mean_inner(const GaussianMeasure& p, const GaussianMeasure& q, double sigma)
{
    require_sigma(sigma);
    require_same_basis(p.basis(), q.basis());
    const CovOperator sum = operator_sum(p.cov(), q.cov());
    const Eigen::VectorXd offset = p.mean().coeffs() - q.mean().coeffs();
    const double c = 2.0 * sigma;
    return -0.5 * log_det_shifted(sum, c) - sigma * resolvent_quad_form(sum.eigensystem(), c, offset);
}

double kernel_mean_inner(const GaussianMeasure& p, const GaussianMeasure& q, double sigma)
{
    return std::exp(log_kernel_mean_inner(p, q, sigma));
}

double mmd_sq_gaussian(const GaussianMeasure& p, const GaussianMeasure& q, double sigma)
{
    const double value =
        kernel_mean_norm_sq(p, sigma) + kernel_mean_norm_sq(q, sigma) - 2.0 * kernel_mean_inner(p, q, sigma);
    if (value < -1e-9) {
        fail(ErrorCode::NumericalInconsistency, "squared MMD evaluated to " + std::to_string(value));
    }
    return std::max(value, 0.0);
}

double log_kernel_mean_product(const FunctionalDataset& samples, std::span<const Fn> means, const CovOperator& cov,
                               double sigma)
{
    require_sigma(sigma);
    require(static_cast<Eigen::Index>(means.size()) == samples.size(), ErrorCode::LengthMismatch,
            "one mean function per sample is required");
    require_same_basis(samples.basis(), cov.basis());
    const double c = 2.0 * sigma;
    double total = 0.0;
    for (Eigen::Index i = 0; i < samples.size(); ++i) {
        const Fn& mu = means[static_cast<std::size_t>(i)];
        require_same_basis(samples.basis(), mu.basis());
        const Eigen::VectorXd offset = samples.coeffs().row(i).transpose() - mu.coeffs();
        total -= sigma * resolvent_quad_form(cov.eigensystem(), c, offset);
    }
    return total - 0.5 * static_cast<double>(samples.size()) * log_det_shifted(cov, c);
}

double kernel_score(const GaussianMeasure& p, const Fn& x, double sigma)
{
    return -kernel_mean_at(p, x, sigma) + 0.5 * kernel_mean_norm_sq(p, sigma);
}

double signed_log_sum_exp(std::span<const double> exponents, std::span<const double> weights, double tolerance)
{
    require(exponents.size() == weights.size(), ErrorCode::LengthMismatch, "exponent/weight length mismatch");
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < exponents.size(); ++k) {
        if (weights[k] != 0.0) {
            top = std::max(top, exponents[k]);
        }
    }
    if (!std::isfinite(top)) {
        return -std::numeric_limits<double>::infinity();
    }
    double total = 0.0;
    double positive = 0.0;
    for (std::size_t k = 0; k < exponents.size(); ++k) {
        const double term = weights[k] * std::exp(exponents[k] - top);
        total += term;
        if (term > 0.0) {
            positive += term;
        }
    }
    if (total <= 0.0) {
        if (total < -tolerance * std::max(positive, 1e-300)) {
            fail(ErrorCode::NumericalInconsistency, "signed exponential sum is negative beyond rounding");
        }
        return -std::numeric_limits<double>::infinity();
    }
    return top + std::log(total);
}

}  // namespace kmefda
