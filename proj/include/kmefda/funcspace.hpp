#pragma once

#include "kmefda/basis.hpp"
#include "kmefda/operator.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace kmefda {

struct Provenance {
    std::uint64_t seed = 0;
    std::string scenario;
};

/// n functional samples in one basis, plus optional scalar covariates (n x p)
/// and 1-based group labels.
class FunctionalDataset {
public:
    FunctionalDataset(BasisHandle basis, Eigen::MatrixXd coeffs);

    [[nodiscard]] const BasisHandle& basis() const noexcept { return basis_; }
    [[nodiscard]] Eigen::Index size() const noexcept { return coeffs_.rows(); }
    [[nodiscard]] int dim() const noexcept { return basis_->size(); }
    /// n x K coefficient matrix; row i is sample i.
    [[nodiscard]] const Eigen::MatrixXd& coeffs() const noexcept { return coeffs_; }
    [[nodiscard]] Fn sample(Eigen::Index i) const;
    [[nodiscard]] std::vector<Fn> samples() const;

    [[nodiscard]] const std::optional<Eigen::MatrixXd>& covariates() const noexcept { return covariates_; }
    [[nodiscard]] const std::optional<std::vector<int>>& groups() const noexcept { return groups_; }
    [[nodiscard]] const Provenance& provenance() const noexcept { return provenance_; }

    /// Number of groups k (labels are 1..k); 0 when no labels are attached.
    [[nodiscard]] int group_count() const noexcept { return group_count_; }
    [[nodiscard]] std::vector<Eigen::Index> group_sizes() const;

    FunctionalDataset& set_covariates(Eigen::MatrixXd covariates);
    FunctionalDataset& set_groups(std::vector<int> groups);
    FunctionalDataset& set_provenance(Provenance provenance);

    /// Copy with the coefficient matrix replaced; covariates, groups and
    /// provenance are kept.
    [[nodiscard]] FunctionalDataset with_coeffs(Eigen::MatrixXd coeffs) const;

private:
    BasisHandle basis_;
    Eigen::MatrixXd coeffs_;
    std::optional<Eigen::MatrixXd> covariates_;
    std::optional<std::vector<int>> groups_;
    int group_count_ = 0;
    Provenance provenance_;
};

/// Least-squares projection of raw curves (n x T, one per row) onto the basis.
FunctionalDataset smooth_project(const Eigen::MatrixXd& raw, const BasisHandle& basis);

/// Coefficient-wise average over all samples or the given subset.
Fn sample_mean(const FunctionalDataset& ds, std::optional<std::span<const Eigen::Index>> subset = std::nullopt);

enum class Centering { GrandMean, GroupMean, None };

/// Eigensystem of (1/n) sum_i (y_i - c_i)(y_i - c_i)^T with c_i the grand mean,
/// the sample's group mean, or zero.
CovOperator sample_cov(const FunctionalDataset& ds, Centering center);

namespace detail {

/// Row-wise centering of an n x K coefficient matrix by group means; labels are 0-based.
Eigen::MatrixXd center_by_group(const Eigen::MatrixXd& coeffs, std::span<const int> labels, int group_count);

/// (1/divisor) * R^T R, symmetrized.
Eigen::MatrixXd second_moment(const Eigen::MatrixXd& rows, double divisor);

/// 0-based labels from a dataset's 1-based groups.
std::vector<int> zero_based_groups(const FunctionalDataset& ds);

}  // namespace detail

}  // namespace kmefda
