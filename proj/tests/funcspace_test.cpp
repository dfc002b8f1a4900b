#include "kmefda/basis.hpp"
#include "kmefda/error.hpp"
#include "kmefda/funcspace.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <numbers>

using namespace kmefda;
using namespace kmefda::testing;

namespace {

void expect_error(ErrorCode code, const auto& fn)
{
    try {
        fn();
        ADD_FAILURE() << "expected " << error_code_name(code);
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), code) << e.what();
    }
}

FunctionalDataset dataset_of(const BasisHandle& basis, const Eigen::MatrixXd& coeffs)
{
    return FunctionalDataset(basis, coeffs);
}

}  // namespace

TEST(Grid, MakeGridPoints)
{
    const Grid g80 = make_grid(80);
    ASSERT_EQ(g80.size(), 80u);
    EXPECT_DOUBLE_EQ(g80[0], 1.0 / 81.0);

    const Grid g2 = make_grid(2);
    EXPECT_DOUBLE_EQ(g2[0], 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(g2[1], 2.0 / 3.0);

    const Grid g10 = make_grid(10);
    double max_gap = 0.0;
    for (std::size_t i = 1; i < g10.size(); ++i) {
        max_gap = std::max(max_gap, g10[i] - g10[i - 1]);
    }
    EXPECT_NEAR(max_gap, 1.0 / 11.0, 1e-15);
}

TEST(Grid, RejectsBadInput)
{
    expect_error(ErrorCode::InvalidArgument, [] { (void)make_grid(1); });
    expect_error(ErrorCode::InvalidArgument, [] { (void)Grid::from_points({0.2, 0.1}); });
    expect_error(ErrorCode::InvalidArgument, [] { (void)Grid::from_points({0.5, 1.5}); });
}

TEST(Grid, QuadratureWeightsSumToOne)
{
    const Grid g = Grid::from_points({0.1, 0.25, 0.7, 0.9});
    EXPECT_NEAR(g.quadrature_weights().sum(), 1.0, 1e-15);
    const Eigen::VectorXd w = make_grid(10).quadrature_weights();
    EXPECT_NEAR(w[4], 1.0 / 11.0, 1e-15);
}

TEST(Basis, FourierValues)
{
    EXPECT_DOUBLE_EQ(fourier_value(1, 0.3), 1.0);
    EXPECT_NEAR(fourier_value(2, 0.3), std::sqrt(2.0) * std::sin(2 * std::numbers::pi * 0.3), 1e-15);
    EXPECT_NEAR(fourier_value(3, 0.3), std::sqrt(2.0) * std::cos(2 * std::numbers::pi * 0.3), 1e-15);
    EXPECT_NEAR(fourier_value(5, 0.3), std::sqrt(2.0) * std::cos(4 * std::numbers::pi * 0.3), 1e-15);
}

TEST(Basis, OrthonormalGram)
{
    for (const BasisKind kind : {BasisKind::Fourier, BasisKind::BSpline}) {
        const BasisHandle b = build_basis(kind, 41, make_grid(80));
        EXPECT_LT((b->gram() - Eigen::MatrixXd::Identity(41, 41)).cwiseAbs().maxCoeff(), 1e-8)
            << basis_kind_name(kind);
    }
}

TEST(Basis, BSplineGramMatchesCholeskyOracle)
{
    const Grid grid = make_grid(80);
    const Eigen::MatrixXd raw = raw_design(BasisKind::BSpline, 41, 4, grid);
    const Eigen::VectorXd w = grid.quadrature_weights();
    const Eigen::MatrixXd gram = raw.transpose() * w.asDiagonal() * raw;
    const Eigen::MatrixXd lower = gram.llt().matrixL();
    const Eigen::MatrixXd oracle = raw * lower.transpose().inverse();
    const BasisHandle b = build_basis(BasisKind::BSpline, 41, grid);
    EXPECT_LT((b->design() - oracle).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Basis, BSplinePartitionOfUnity)
{
    for (const double t : {0.0, 0.13, 0.5, 0.999, 1.0}) {
        EXPECT_NEAR(bspline_values(12, 4, t).sum(), 1.0, 1e-12) << t;
    }
}

TEST(Basis, SingleFourierIsConstant)
{
    const BasisHandle b = build_basis(BasisKind::Fourier, 1, make_grid(10));
    const Fn one = Fn::unit(b, 0);
    EXPECT_NEAR(norm(one), 1.0, 1e-15);
    const Eigen::VectorXd v = one.evaluate();
    EXPECT_LT((v.array() - v[0]).abs().maxCoeff(), 1e-12);
    EXPECT_NEAR(v[0], 1.0, 1e-8);
}

TEST(Basis, RejectsOverParameterized)
{
    expect_error(ErrorCode::OverParameterized, [] { (void)build_basis(BasisKind::Fourier, 11, make_grid(10)); });
    expect_error(ErrorCode::InvalidArgument, [] { (void)build_basis(BasisKind::BSpline, 3, make_grid(10), 4); });
}

TEST(Fn, InnerProducts)
{
    const BasisHandle b = fourier_basis(5, 20);
    const Fn e1 = Fn::unit(b, 0);
    const Fn e2 = Fn::unit(b, 1);
    EXPECT_EQ(inner(e1, e2), 0.0);
    const Fn f = 3.0 * e1 + 4.0 * e2;
    EXPECT_DOUBLE_EQ(norm(f), 5.0);
    EXPECT_DOUBLE_EQ(inner(f, f), 25.0);
    EXPECT_EQ(inner(f, e1), inner(e1, f));
}

TEST(Fn, BasisMismatch)
{
    const BasisHandle a = fourier_basis(5, 20);
    const BasisHandle b = fourier_basis(5, 20);
    expect_error(ErrorCode::IncompatibleBasis, [&] { (void)inner(Fn::unit(a, 0), Fn::unit(b, 0)); });
    expect_error(ErrorCode::IncompatibleBasis, [&] { (void)(Fn::unit(a, 0) + Fn::unit(b, 0)); });
}

TEST(SmoothProject, RoundTripBasisElements)
{
    for (const BasisKind kind : {BasisKind::Fourier, BasisKind::BSpline}) {
        const BasisHandle b = build_basis(kind, 21, make_grid(60));
        const Eigen::MatrixXd raw = b->design().transpose();
        const FunctionalDataset ds = smooth_project(raw, b);
        EXPECT_LT((ds.coeffs() - Eigen::MatrixXd::Identity(21, 21)).cwiseAbs().maxCoeff(), 1e-8);
    }
}

TEST(SmoothProject, ZeroCurve)
{
    const BasisHandle b = fourier_basis(9, 30);
    const FunctionalDataset ds = smooth_project(Eigen::MatrixXd::Zero(2, 30), b);
    EXPECT_EQ(ds.coeffs().cwiseAbs().maxCoeff(), 0.0);
}

TEST(SmoothProject, LinearCurveMatchesDenseLeastSquares)
{
    const Grid grid = make_grid(80);
    const BasisHandle b = build_basis(BasisKind::Fourier, 41, grid);
    const Eigen::RowVectorXd raw = 2.0 * grid.as_vector().transpose();
    const FunctionalDataset ds = smooth_project(raw, b);
    const Eigen::VectorXd fitted = ds.sample(0).evaluate();

    const Eigen::MatrixXd x = raw_design(BasisKind::Fourier, 41, 4, grid);
    const Eigen::VectorXd oracle = x * x.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(raw.transpose());
    EXPECT_LT((fitted - oracle).cwiseAbs().maxCoeff(), 1e-8);

    double interior = 0.0;
    for (Eigen::Index j = 0; j < 80; ++j) {
        if (grid[j] > 0.1 && grid[j] < 0.9) {
            interior = std::max(interior, std::abs(fitted[j] - raw[j]));
        }
    }
    EXPECT_LT(interior, 0.05);
}

TEST(SmoothProject, ParsevalInsideSpan)
{
    CounterRng rng(7);
    const BasisHandle b = build_basis(BasisKind::BSpline, 15, make_grid(50));
    const Eigen::VectorXd c = random_vector(15, rng);
    const Eigen::VectorXd values = b->design() * c;
    const FunctionalDataset ds = smooth_project(values.transpose(), b);
    const Eigen::VectorXd w = b->grid().quadrature_weights();
    const double quad_norm = std::sqrt((values.array().square() * w.array()).sum());
    EXPECT_NEAR(quad_norm, norm(ds.sample(0)), 1e-6);
}

TEST(SmoothProject, LengthMismatch)
{
    const BasisHandle b = fourier_basis(5, 20);
    expect_error(ErrorCode::LengthMismatch, [&] { (void)smooth_project(Eigen::MatrixXd::Zero(2, 19), b); });
}

TEST(SampleMean, Examples)
{
    const BasisHandle b = fourier_basis(4, 20);
    Eigen::MatrixXd single(1, 4);
    single << 1, 2, 3, 4;
    EXPECT_EQ(sample_mean(dataset_of(b, single)).coeffs(), single.row(0).transpose());

    Eigen::MatrixXd pm(2, 4);
    pm.row(0) = single.row(0);
    pm.row(1) = -single.row(0);
    EXPECT_EQ(sample_mean(dataset_of(b, pm)).coeffs().cwiseAbs().maxCoeff(), 0.0);

    const Eigen::MatrixXd e12 = Eigen::MatrixXd::Identity(2, 4);
    const Eigen::VectorXd half = sample_mean(dataset_of(b, e12)).coeffs();
    EXPECT_DOUBLE_EQ(half[0], 0.5);
    EXPECT_DOUBLE_EQ(half[1], 0.5);

    const std::vector<Eigen::Index> none;
    expect_error(ErrorCode::InvalidArgument, [&] {
        (void)sample_mean(dataset_of(b, e12), std::span<const Eigen::Index>(none));
    });
}

TEST(SampleCov, IdenticalSamplesGiveZero)
{
    const BasisHandle b = fourier_basis(4, 20);
    const Eigen::MatrixXd same = Eigen::MatrixXd::Ones(5, 4);
    const CovOperator c = sample_cov(dataset_of(b, same), Centering::GrandMean);
    EXPECT_LE(c.eigenvalues().cwiseAbs().maxCoeff(), 1e-15);
}

TEST(SampleCov, RankOne)
{
    const BasisHandle b = fourier_basis(4, 20);
    Eigen::MatrixXd pm = Eigen::MatrixXd::Zero(2, 4);
    pm(0, 0) = 1.0;
    pm(1, 0) = -1.0;
    const CovOperator c = sample_cov(dataset_of(b, pm), Centering::None);
    EXPECT_NEAR(c.eigenvalues()[0], 1.0, 1e-15);
    EXPECT_NEAR(std::abs(c.eigenfuncs()(0, 0)), 1.0, 1e-15);
}

TEST(SampleCov, MonteCarloDiagonal)
{
    const BasisHandle b = fourier_basis(3, 20);
    CounterRng rng(11);
    const Eigen::Vector3d lambda(1.0, 0.5, 0.25);
    const int n = 500;
    Eigen::MatrixXd coeffs(n, 3);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < 3; ++j) {
            coeffs(i, j) = std::sqrt(lambda[j]) * rng.normal();
        }
    }
    const CovOperator c = sample_cov(dataset_of(b, coeffs), Centering::GrandMean);
    for (int j = 0; j < 3; ++j) {
        // Var of a sample variance of a normal: 2 lambda^2 / n
        const double se = lambda[j] * std::sqrt(2.0 / n);
        EXPECT_NEAR(c.eigenvalues()[j], lambda[j], 3.0 * se) << j;
    }
}

TEST(SampleCov, InvariantsAndShift)
{
    const BasisHandle b = fourier_basis(7, 30);
    CounterRng rng(3);
    const Eigen::MatrixXd coeffs = random_matrix(12, 7, rng);
    const FunctionalDataset ds = dataset_of(b, coeffs);
    const CovOperator c = sample_cov(ds, Centering::GrandMean);
    const Eigen::VectorXd& l = c.eigenvalues();
    for (Eigen::Index j = 0; j < l.size(); ++j) {
        EXPECT_GE(l[j], 0.0);
        if (j > 0) {
            EXPECT_LE(l[j], l[j - 1]);
        }
    }
    const Eigen::MatrixXd& v = c.eigenfuncs();
    EXPECT_LT((v.transpose() * v - Eigen::MatrixXd::Identity(v.cols(), v.cols())).cwiseAbs().maxCoeff(), 1e-10);

    const Eigen::RowVectorXd shift = random_vector(7, rng, 5.0).transpose();
    const Eigen::MatrixXd shifted = coeffs.rowwise() + shift;
    const CovOperator cs = sample_cov(dataset_of(b, shifted), Centering::GrandMean);
    EXPECT_LT((cs.dense() - c.dense()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SampleCov, GroupCentering)
{
    const BasisHandle b = fourier_basis(3, 20);
    Eigen::MatrixXd coeffs(4, 3);
    coeffs << 1, 0, 0, 3, 0, 0, 10, 1, 0, 10, -1, 0;
    FunctionalDataset ds = dataset_of(b, coeffs);
    ds.set_groups({1, 1, 2, 2});
    // Within-group deviations: (+-1, 0, 0) and (0, +-1, 0), divisor n = 4.
    const Eigen::MatrixXd c = sample_cov(ds, Centering::GroupMean).dense();
    EXPECT_NEAR(c(0, 0), 0.5, 1e-15);
    EXPECT_NEAR(c(1, 1), 0.5, 1e-15);
    EXPECT_NEAR(c(0, 1), 0.0, 1e-15);
}

TEST(FunctionalDataset, Validation)
{
    const BasisHandle b = fourier_basis(3, 20);
    FunctionalDataset ds = dataset_of(b, Eigen::MatrixXd::Zero(4, 3));
    expect_error(ErrorCode::LengthMismatch, [&] { ds.set_covariates(Eigen::MatrixXd::Zero(3, 1)); });
    expect_error(ErrorCode::InvalidArgument, [&] { ds.set_groups({1, 3, 3, 1}); });
    ds.set_groups({2, 1, 2, 1});
    EXPECT_EQ(ds.group_count(), 2);
    EXPECT_EQ(ds.group_sizes(), (std::vector<Eigen::Index>{2, 2}));
}
