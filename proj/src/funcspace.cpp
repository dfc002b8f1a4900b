#include "kmefda/funcspace.hpp"

#include "kmefda/error.hpp"

#include <algorithm>
#include <set>

namespace kmefda {

FunctionalDataset::FunctionalDataset(BasisHandle basis, Eigen::MatrixXd coeffs)
    : basis_(std::move(basis)), coeffs_(std::move(coeffs))
{
    require(basis_ != nullptr, ErrorCode::InvalidArgument, "dataset requires a basis handle");
    require(coeffs_.cols() == basis_->size(), ErrorCode::LengthMismatch, "coefficient columns differ from basis size");
}

Fn FunctionalDataset::sample(Eigen::Index i) const
{
    require(i >= 0 && i < size(), ErrorCode::InvalidArgument, "sample index out of range");
    return {basis_, coeffs_.row(i).transpose()};
}

std::vector<Fn> FunctionalDataset::samples() const
{
    std::vector<Fn> out;
    out.reserve(static_cast<std::size_t>(size()));
    for (Eigen::Index i = 0; i < size(); ++i) {
        out.push_back(sample(i));
    }
    return out;
}

std::vector<Eigen::Index> FunctionalDataset::group_sizes() const
{
    std::vector<Eigen::Index> sizes(static_cast<std::size_t>(group_count_), 0);
    if (groups_) {
        for (const int g : *groups_) {
            ++sizes[static_cast<std::size_t>(g - 1)];
        }
    }
    return sizes;
}

FunctionalDataset& FunctionalDataset::set_covariates(Eigen::MatrixXd covariates)
{
    require(covariates.rows() == size(), ErrorCode::LengthMismatch, "covariate rows must equal sample count");
    covariates_ = std::move(covariates);
    return *this;
}

FunctionalDataset& FunctionalDataset::set_groups(std::vector<int> groups)
{
    require(static_cast<Eigen::Index>(groups.size()) == size(), ErrorCode::LengthMismatch,
            "group label count must equal sample count");
    const std::set<int> distinct(groups.begin(), groups.end());
    require(!distinct.empty() && *distinct.begin() == 1 && *distinct.rbegin() == static_cast<int>(distinct.size()),
            ErrorCode::InvalidArgument, "group labels must be contiguous from 1");
    group_count_ = static_cast<int>(distinct.size());
    groups_ = std::move(groups);
    return *this;
}

FunctionalDataset& FunctionalDataset::set_provenance(Provenance provenance)
{
    provenance_ = std::move(provenance);
    return *this;
}

FunctionalDataset FunctionalDataset::with_coeffs(Eigen::MatrixXd coeffs) const
{
    require(coeffs.rows() == size() && coeffs.cols() == coeffs_.cols(), ErrorCode::LengthMismatch,
            "replacement coefficients must keep the dataset shape");
    FunctionalDataset out = *this;
    out.coeffs_ = std::move(coeffs);
    return out;
}

FunctionalDataset smooth_project(const Eigen::MatrixXd& raw, const BasisHandle& basis)
{
    require(basis != nullptr, ErrorCode::InvalidArgument, "smooth_project requires a basis");
    require(raw.cols() == static_cast<Eigen::Index>(basis->grid().size()), ErrorCode::LengthMismatch,
            "raw curves have " + std::to_string(raw.cols()) + " columns but the grid has " +
                std::to_string(basis->grid().size()) + " points");
    require(basis->condition_number() < 1e10, ErrorCode::IllConditionedBasis, "basis design is rank deficient");
    Eigen::MatrixXd coeffs = raw * basis->projector().transpose();
    return {basis, std::move(coeffs)};
}

Fn sample_mean(const FunctionalDataset& ds, std::optional<std::span<const Eigen::Index>> subset)
{
    if (!subset) {
        require(ds.size() > 0, ErrorCode::InvalidArgument, "sample_mean of an empty dataset");
        return {ds.basis(), ds.coeffs().colwise().mean().transpose()};
    }
    require(!subset->empty(), ErrorCode::InvalidArgument, "sample_mean over an empty subset");
    Eigen::VectorXd total = Eigen::VectorXd::Zero(ds.dim());
    for (const Eigen::Index i : *subset) {
        require(i >= 0 && i < ds.size(), ErrorCode::InvalidArgument, "subset index out of range");
        total += ds.coeffs().row(i).transpose();
    }
    return {ds.basis(), total / static_cast<double>(subset->size())};
}

CovOperator sample_cov(const FunctionalDataset& ds, Centering center)
{
    const Eigen::Index n = ds.size();
    require(n >= 1, ErrorCode::InvalidArgument, "sample_cov needs at least one sample");
    switch (center) {
    case Centering::None:
        return {ds.basis(), eigh(detail::second_moment(ds.coeffs(), static_cast<double>(n)))};
    case Centering::GrandMean: {
        require(n >= 2, ErrorCode::InvalidArgument, "centered sample_cov needs at least two samples");
        const Eigen::RowVectorXd mean = ds.coeffs().colwise().mean();
        return {ds.basis(), eigh(detail::second_moment(ds.coeffs().rowwise() - mean, static_cast<double>(n)))};
    }
    case Centering::GroupMean: {
        require(n >= 2, ErrorCode::InvalidArgument, "centered sample_cov needs at least two samples");
        require(ds.groups().has_value(), ErrorCode::InvalidArgument, "group-mean centering needs group labels");
        const auto labels = detail::zero_based_groups(ds);
        const Eigen::MatrixXd centered = detail::center_by_group(ds.coeffs(), labels, ds.group_count());
        return {ds.basis(), eigh(detail::second_moment(centered, static_cast<double>(n)))};
    }
    }
    fail(ErrorCode::InvalidArgument, "unknown centering");
}

namespace detail {

Eigen::MatrixXd center_by_group(const Eigen::MatrixXd& coeffs, std::span<const int> labels, int group_count)
{
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(group_count, coeffs.cols());
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(group_count);
    for (Eigen::Index i = 0; i < coeffs.rows(); ++i) {
        sums.row(labels[i]) += coeffs.row(i);
        counts[labels[i]] += 1.0;
    }
    Eigen::MatrixXd centered = coeffs;
    for (Eigen::Index i = 0; i < coeffs.rows(); ++i) {
        centered.row(i) -= sums.row(labels[i]) / counts[labels[i]];
    }
    return centered;
}

Eigen::MatrixXd second_moment(const Eigen::MatrixXd& rows, double divisor)
{
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(rows.cols(), rows.cols());
    m.selfadjointView<Eigen::Lower>().rankUpdate(rows.transpose(), 1.0 / divisor);
    return m.selfadjointView<Eigen::Lower>();
}

std::vector<int> zero_based_groups(const FunctionalDataset& ds)
{
    require(ds.groups().has_value(), ErrorCode::InvalidArgument, "dataset has no group labels");
    std::vector<int> out(ds.groups()->begin(), ds.groups()->end());
    for (int& g : out) {
        --g;
    }
    return out;
}

}  // namespace detail

}  // namespace kmefda
