#include "kmefda/basis.hpp"

#include "kmefda/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace kmefda {

Grid Grid::from_points(std::vector<double> points)
{
    require(points.size() >= 2, ErrorCode::InvalidArgument, "grid needs at least 2 points");
    for (std::size_t j = 0; j < points.size(); ++j) {
        require(std::isfinite(points[j]) && points[j] >= 0.0 && points[j] <= 1.0, ErrorCode::InvalidArgument,
                "grid points must lie in [0, 1]");
        if (j > 0) {
            require(points[j] > points[j - 1], ErrorCode::InvalidArgument, "grid points must be strictly increasing");
        }
    }
    return Grid(std::move(points));
}

Eigen::VectorXd Grid::quadrature_weights() const
{
    const auto count = static_cast<Eigen::Index>(points_.size());
    Eigen::VectorXd w = Eigen::VectorXd::Zero(count);
    for (Eigen::Index j = 0; j + 1 < count; ++j) {
        const double half = 0.5 * (points_[j + 1] - points_[j]);
        w[j] += half;
        w[j + 1] += half;
    }
    w[0] += points_.front();
    w[count - 1] += 1.0 - points_.back();
    return w;
}

Grid make_grid(int count)
{
    require(count >= 2, ErrorCode::InvalidArgument, "make_grid: T must be >= 2");
    std::vector<double> points(static_cast<std::size_t>(count));
    for (int j = 1; j <= count; ++j) {
        points[static_cast<std::size_t>(j - 1)] = static_cast<double>(j) / static_cast<double>(count + 1);
    }
    return Grid::from_points(std::move(points));
}

std::string_view basis_kind_name(BasisKind kind)
{
    return kind == BasisKind::Fourier ? "fourier" : "bspline";
}

BasisKind parse_basis_kind(std::string_view text)
{
    if (text == "fourier") {
        return BasisKind::Fourier;
    }
    if (text == "bspline") {
        return BasisKind::BSpline;
    }
    fail(ErrorCode::InvalidArgument, "unknown basis kind '" + std::string(text) + "' (expected fourier|bspline)");
}

double fourier_value(int index, double t)
{
    // index is 1-based
    if (index == 1) {
        return 1.0;
    }
    const int r = index / 2;
    const double arg = 2.0 * std::numbers::pi * r * t;
    return std::numbers::sqrt2 * ((index % 2 == 0) ? std::sin(arg) : std::cos(arg));
}

Eigen::VectorXd bspline_values(int count, int order, double t)
{
    const int interior = count - order;
    const int knot_count = count + order;
    std::vector<double> knots(static_cast<std::size_t>(knot_count));
    for (int i = 0; i < knot_count; ++i) {
        if (i < order) {
            knots[i] = 0.0;
        } else if (i >= count) {
            knots[i] = 1.0;
        } else {
            knots[i] = static_cast<double>(i - order + 1) / static_cast<double>(interior + 1);
        }
    }

    // knot span s with knots[s] <= t < knots[s+1], s in [order-1, count-1]
    int span = order - 1;
    if (t >= 1.0) {
        span = count - 1;
    } else {
        while (span < count - 1 && knots[span + 1] <= t) {
            ++span;
        }
    }

    // Cox-de Boor triangle for the order nonzero functions on this span.
    std::vector<double> local(static_cast<std::size_t>(order), 0.0);
    std::vector<double> left(static_cast<std::size_t>(order), 0.0);
    std::vector<double> right(static_cast<std::size_t>(order), 0.0);
    local[0] = 1.0;
    for (int j = 1; j < order; ++j) {
        left[j] = t - knots[span + 1 - j];
        right[j] = knots[span + j] - t;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            const double denom = right[r + 1] + left[j - r];
            const double temp = denom > 0.0 ? local[r] / denom : 0.0;
            local[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        local[j] = saved;
    }

    Eigen::VectorXd values = Eigen::VectorXd::Zero(count);
    for (int r = 0; r < order; ++r) {
        values[span - order + 1 + r] = local[r];
    }
    return values;
}

Eigen::MatrixXd raw_design(BasisKind kind, int count, int order, const Grid& grid)
{
    const auto rows = static_cast<Eigen::Index>(grid.size());
    Eigen::MatrixXd design(rows, count);
    for (Eigen::Index j = 0; j < rows; ++j) {
        if (kind == BasisKind::Fourier) {
            for (int k = 0; k < count; ++k) {
                design(j, k) = fourier_value(k + 1, grid[j]);
            }
        } else {
            design.row(j) = bspline_values(count, order, grid[j]).transpose();
        }
    }
    return design;
}

BasisSystem::BasisSystem(BasisKind kind, int count, int order, Grid grid)
    : kind_(kind), count_(count), order_(order), grid_(std::move(grid))
{
    require(count >= 1, ErrorCode::InvalidArgument, "basis size must be positive");
    require(static_cast<std::size_t>(count) <= grid_.size(), ErrorCode::OverParameterized,
            "basis size " + std::to_string(count) + " exceeds grid size " + std::to_string(grid_.size()));
    if (kind == BasisKind::BSpline) {
        require(order >= 2, ErrorCode::InvalidArgument, "B-spline order must be >= 2");
        require(count >= order, ErrorCode::InvalidArgument, "B-spline basis size must be >= order");
    }

    raw_ = raw_design(kind, count, order, grid_);
    const Eigen::VectorXd w = grid_.quadrature_weights();
    const Eigen::MatrixXd gram = raw_.transpose() * w.asDiagonal() * raw_;

    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(raw_);
    const auto& sv = svd.singularValues();
    condition_ = sv[sv.size() - 1] > 0.0 ? sv[0] / sv[sv.size() - 1] : std::numeric_limits<double>::infinity();
    require(condition_ < 1e10, ErrorCode::IllConditionedBasis, "basis design is rank deficient on this grid");

    const Eigen::LLT<Eigen::MatrixXd> llt(gram);
    require(llt.info() == Eigen::Success, ErrorCode::IllConditionedBasis, "basis Gram matrix is not positive definite");
    // raw * L^{-T} has identity Gram.
    const Eigen::MatrixXd lower = llt.matrixL();
    orthonormalizer_ = lower.transpose().triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(count, count));
    design_ = raw_ * orthonormalizer_;

    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design_);
    const auto t_count = static_cast<Eigen::Index>(grid_.size());
    projector_ = qr.solve(Eigen::MatrixXd::Identity(t_count, t_count));
}

Eigen::MatrixXd BasisSystem::gram() const
{
    const Eigen::VectorXd w = grid_.quadrature_weights();
    return design_.transpose() * w.asDiagonal() * design_;
}

std::string BasisSystem::describe() const
{
    std::ostringstream out;
    out << basis_kind_name(kind_) << "(K=" << count_;
    if (kind_ == BasisKind::BSpline) {
        out << ", order=" << order_;
    }
    out << ", T=" << grid_.size() << ")";
    return out.str();
}

BasisHandle build_basis(BasisKind kind, int count, const Grid& grid, int order)
{
    return std::make_shared<const BasisSystem>(kind, count, order, grid);
}

Fn::Fn(BasisHandle basis, Eigen::VectorXd coeffs) : basis_(std::move(basis)), coeffs_(std::move(coeffs))
{
    require(basis_ != nullptr, ErrorCode::InvalidArgument, "Fn requires a basis handle");
    require(coeffs_.size() == basis_->size(), ErrorCode::LengthMismatch, "Fn coefficient length differs from basis size");
}

Fn Fn::zero(BasisHandle basis)
{
    const int count = basis->size();
    return {std::move(basis), Eigen::VectorXd::Zero(count)};
}

Fn Fn::unit(BasisHandle basis, int index)
{
    const int count = basis->size();
    require(index >= 0 && index < count, ErrorCode::InvalidArgument, "unit index out of range");
    return {std::move(basis), Eigen::VectorXd::Unit(count, index)};
}

Eigen::VectorXd Fn::evaluate() const { return basis_->design() * coeffs_; }

void require_same_basis(const BasisHandle& a, const BasisHandle& b)
{
    require(a.get() == b.get(), ErrorCode::IncompatibleBasis, "functions live in different basis systems");
}

Fn& Fn::operator+=(const Fn& other)
{
    require_same_basis(basis_, other.basis_);
    coeffs_ += other.coeffs_;
    return *this;
}

Fn& Fn::operator-=(const Fn& other)
{
    require_same_basis(basis_, other.basis_);
    coeffs_ -= other.coeffs_;
    return *this;
}

Fn& Fn::operator*=(double scale)
{
    coeffs_ *= scale;
    return *this;
}

Fn operator+(Fn lhs, const Fn& rhs) { return lhs += rhs; }
Fn operator-(Fn lhs, const Fn& rhs) { return lhs -= rhs; }
Fn operator*(double scale, Fn f) { return f *= scale; }
Fn operator-(Fn f) { return f *= -1.0; }

double inner(const Fn& f, const Fn& g)
{
    require_same_basis(f.basis(), g.basis());
    return f.coeffs().dot(g.coeffs());
}

double norm(const Fn& f) { return f.coeffs().norm(); }

}  // namespace kmefda
