#pragma once

#include <Eigen/Dense>

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace kmefda {

/// Ordered observation points in [0, 1].
class Grid {
public:
    /// Validates strict monotonicity and the [0, 1] range.
    static Grid from_points(std::vector<double> points);

    [[nodiscard]] std::size_t size() const noexcept { return points_.size(); }
    [[nodiscard]] const std::vector<double>& points() const noexcept { return points_; }
    [[nodiscard]] double operator[](std::size_t i) const { return points_[i]; }
    [[nodiscard]] Eigen::Map<const Eigen::VectorXd> as_vector() const
    {
        return {points_.data(), static_cast<Eigen::Index>(points_.size())};
    }

    /// Trapezoid weights over [0, 1] with the grid as nodes. The end segments
    /// [0, t_1] and [t_T, 1] are integrated by constant extension, so the
    /// weights sum to 1 and equally spaced grids t_j = j/(T+1) get 1/(T+1) inside.
    [[nodiscard]] Eigen::VectorXd quadrature_weights() const;

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    explicit Grid(std::vector<double> points) : points_(std::move(points)) {}
    std::vector<double> points_;
};

/// t_j = j / (T + 1), j = 1..T. Requires T >= 2.
Grid make_grid(int count);

enum class BasisKind { Fourier, BSpline };

std::string_view basis_kind_name(BasisKind kind);
BasisKind parse_basis_kind(std::string_view text);

/// phi_1 = 1, phi_{2r} = sqrt(2) sin(2 pi r t), phi_{2r+1} = sqrt(2) cos(2 pi r t).
double fourier_value(int index, double t);

/// Clamped B-spline basis of the given order (degree order-1) with equally
/// spaced interior knots on [0, 1]; returns all `count` values at t.
Eigen::VectorXd bspline_values(int count, int order, double t);

/// T x K matrix of raw (non-orthonormalized) basis evaluations.
Eigen::MatrixXd raw_design(BasisKind kind, int count, int order, const Grid& grid);

/// An orthonormalized basis system on a fixed grid.
///
/// The stored design is raw_design * orthonormalizer, whose Gram matrix under
/// the grid quadrature is the identity. All functional arithmetic downstream
/// happens in these orthonormal coordinates, so inner products are plain dot
/// products.
class BasisSystem {
public:
    BasisSystem(BasisKind kind, int count, int order, Grid grid);

    [[nodiscard]] BasisKind kind() const noexcept { return kind_; }
    [[nodiscard]] int size() const noexcept { return count_; }
    [[nodiscard]] int order() const noexcept { return order_; }
    [[nodiscard]] const Grid& grid() const noexcept { return grid_; }
    [[nodiscard]] const Eigen::MatrixXd& raw() const noexcept { return raw_; }
    [[nodiscard]] const Eigen::MatrixXd& orthonormalizer() const noexcept { return orthonormalizer_; }
    /// T x K orthonormal design.
    [[nodiscard]] const Eigen::MatrixXd& design() const noexcept { return design_; }
    /// K x T least-squares projector onto the design span.
    [[nodiscard]] const Eigen::MatrixXd& projector() const noexcept { return projector_; }
    /// Ratio of extreme singular values of the design.
    [[nodiscard]] double condition_number() const noexcept { return condition_; }

    /// Gram matrix of the stored system under the grid quadrature.
    [[nodiscard]] Eigen::MatrixXd gram() const;

    [[nodiscard]] std::string describe() const;

private:
    BasisKind kind_;
    int count_;
    int order_;
    Grid grid_;
    Eigen::MatrixXd raw_;
    Eigen::MatrixXd orthonormalizer_;
    Eigen::MatrixXd design_;
    Eigen::MatrixXd projector_;
    double condition_ = 0.0;
};

using BasisHandle = std::shared_ptr<const BasisSystem>;

/// Builds and orthonormalizes a basis. `order` is used for B-splines only.
BasisHandle build_basis(BasisKind kind, int count, const Grid& grid, int order = 4);

/// A function in orthonormal coordinates of a specific basis handle.
class Fn {
public:
    Fn(BasisHandle basis, Eigen::VectorXd coeffs);

    static Fn zero(BasisHandle basis);
    /// Unit coordinate vector e_{index+1}.
    static Fn unit(BasisHandle basis, int index);

    [[nodiscard]] const BasisHandle& basis() const noexcept { return basis_; }
    [[nodiscard]] const Eigen::VectorXd& coeffs() const noexcept { return coeffs_; }
    [[nodiscard]] int dim() const noexcept { return static_cast<int>(coeffs_.size()); }

    /// Values of the function on the basis grid.
    [[nodiscard]] Eigen::VectorXd evaluate() const;

    Fn& operator+=(const Fn& other);
    Fn& operator-=(const Fn& other);
    Fn& operator*=(double scale);

private:
    BasisHandle basis_;
    Eigen::VectorXd coeffs_;
};

Fn operator+(Fn lhs, const Fn& rhs);
Fn operator-(Fn lhs, const Fn& rhs);
Fn operator*(double scale, Fn f);
Fn operator-(Fn f);

/// Throws IncompatibleBasis unless both handles are the same object.
void require_same_basis(const BasisHandle& a, const BasisHandle& b);

double inner(const Fn& f, const Fn& g);
double norm(const Fn& f);

}  // namespace kmefda
