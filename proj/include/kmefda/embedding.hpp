#pragma once

#include "kmefda/basis.hpp"
#include "kmefda/funcspace.hpp"
#include "kmefda/operator.hpp"

#include <span>
#include <vector>

namespace kmefda {

/// N(mean, cov) on the span of a basis.
class GaussianMeasure {
public:
    GaussianMeasure(Fn mean, CovOperator cov);

    [[nodiscard]] const Fn& mean() const noexcept { return mean_; }
    [[nodiscard]] const CovOperator& cov() const noexcept { return cov_; }
    [[nodiscard]] const BasisHandle& basis() const noexcept { return mean_.basis(); }

private:
    Fn mean_;
    CovOperator cov_;
};

enum class KernelVariant { Sum, Product };

struct KernelConfig {
    double sigma;
    KernelVariant variant = KernelVariant::Sum;

    explicit KernelConfig(double sigma_value, KernelVariant v = KernelVariant::Sum);
};

/// exp(-sigma ||x - y||^2)
double gaussian_kernel(const Fn& x, const Fn& y, double sigma);

// Kernel mean m_P(x) = |I + 2 sigma C|^{-1/2} exp(-sigma <(I + 2 sigma C)^{-1}(x - mu), x - mu>).
double log_kernel_mean_at(const GaussianMeasure& p, const Fn& x, double sigma);
double kernel_mean_at(const GaussianMeasure& p, const Fn& x, double sigma);

// ||m_P||^2 = |I + 4 sigma C|^{-1/2}; does not depend on the mean.
double log_kernel_mean_norm_sq(const GaussianMeasure& p, double sigma);
double kernel_mean_norm_sq(const GaussianMeasure& p, double sigma);

// <m_P, m_Q> = |I + 2 sigma (C_P + C_Q)|^{-1/2} exp(-sigma <(I + 2 sigma (C_P + C_Q))^{-1} d, d>), d = mu_P - mu_Q.
double log_kernel_mean_inner(const GaussianMeasure& p, const GaussianMeasure& q, double sigma);
double kernel_mean_inner(const GaussianMeasure& p, const GaussianMeasure& q, double sigma);

/// ||m_P - m_Q||^2. Negative values down to -1e-9 are rounding and clamp to 0;
/// anything lower raises NumericalInconsistency.
double mmd_sq_gaussian(const GaussianMeasure& p, const GaussianMeasure& q, double sigma);

/// log of the product-kernel mean of the product measure prod_i N(mu_i, C)
/// evaluated at (y_1, ..., y_n).
double log_kernel_mean_product(const FunctionalDataset& samples, std::span<const Fn> means, const CovOperator& cov,
                               double sigma);

/// Kernel score S_k(P, x) = -m_P(x) + ||m_P||^2 / 2.
double kernel_score(const GaussianMeasure& p, const Fn& x, double sigma);

/// log(sum_k w_k exp(x_k)) for signed weights. Returns -inf when the signed
/// sum is zero or within `tolerance` (relative to the positive mass) below zero;
/// throws NumericalInconsistency below that.
double signed_log_sum_exp(std::span<const double> exponents, std::span<const double> weights, double tolerance = 1e-9);

}  // namespace kmefda
