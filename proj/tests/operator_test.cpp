#include "kmefda/error.hpp"
#include "kmefda/operator.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace kmefda;
using namespace kmefda::testing;

namespace {

double dense_log_det(const Eigen::MatrixXd& c, double shift)
{
    const Eigen::MatrixXd m = Eigen::MatrixXd::Identity(c.rows(), c.cols()) + shift * c;
    return std::log(m.partialPivLu().determinant());
}

}  // namespace

TEST(Eigh, Identity)
{
    const EigenSystem e = eigh(Eigen::Matrix3d::Identity());
    EXPECT_EQ(e.rank(), 3);
    for (int j = 0; j < 3; ++j) {
        EXPECT_NEAR(e.values[j], 1.0, 1e-15);
    }
}

TEST(Eigh, DiagonalAxes)
{
    Eigen::Matrix2d m;
    m << 0.5, 0.0, 0.0, 2.0;
    const EigenSystem e = eigh(m);
    EXPECT_NEAR(e.values[0], 2.0, 1e-15);
    EXPECT_NEAR(e.values[1], 0.5, 1e-15);
    EXPECT_NEAR(e.vectors(1, 0), 1.0, 1e-15);
    EXPECT_NEAR(e.vectors(0, 1), 1.0, 1e-15);
}

TEST(Eigh, ReconstructionAndOrthonormality)
{
    CounterRng rng(101);
    for (int trial = 0; trial < 10; ++trial) {
        const Eigen::MatrixXd a = random_psd(15, rng, 8);
        const EigenSystem e = eigh(a);
        EXPECT_LT((e.dense() - a).cwiseAbs().maxCoeff(), 1e-8);
        const Eigen::MatrixXd vtv = e.vectors.transpose() * e.vectors;
        EXPECT_LT((vtv - Eigen::MatrixXd::Identity(vtv.rows(), vtv.cols())).cwiseAbs().maxCoeff(), 1e-10);
        for (Eigen::Index j = 1; j < e.rank(); ++j) {
            EXPECT_LE(e.values[j], e.values[j - 1]);
        }
    }
}

TEST(Eigh, Errors)
{
    Eigen::Matrix2d asym;
    asym << 1.0, 0.5, 0.4, 1.0;
    EXPECT_THROW((void)eigh(asym), Error);
    try {
        (void)eigh(asym);
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidArgument);
    }
    Eigen::Matrix2d neg;
    neg << 1.0, 0.0, 0.0, -1e-3;
    try {
        (void)eigh(neg);
        ADD_FAILURE();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NotPositiveSemidefinite);
    }
    Eigen::Matrix2d tiny;
    tiny << 1.0, 0.0, 0.0, -1e-12;
    const EigenSystem e = eigh(tiny);
    EXPECT_GE(e.values.minCoeff(), 0.0);
}

TEST(LogDet, Examples)
{
    const BasisHandle b = fourier_basis(4, 20);
    EXPECT_EQ(log_det_shifted(CovOperator::zero(b), 3.0), 0.0);
    EXPECT_EQ(det_inv_sqrt_shifted(CovOperator::zero(b), 3.0), 1.0);

    const CovOperator d = CovOperator::diagonal(b, Eigen::Vector2d(0.5, 0.25));
    EXPECT_NEAR(log_det_shifted(d, 2.0), std::log(3.0), 1e-15);
    EXPECT_NEAR(det_inv_sqrt_shifted(d, 2.0), 0.5773502691896258, 1e-15);

    try {
        (void)log_det_shifted(d, 0.0);
        ADD_FAILURE();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidArgument);
    }
}

TEST(LogDet, DenseDeterminantOracle)
{
    CounterRng rng(202);
    const BasisHandle b = fourier_basis(11, 30);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::MatrixXd a = random_psd(11, rng, 11, 0.01);
        const CovOperator c = CovOperator::from_matrix(b, a);
        const double shift = 4.0 * 1000.0;
        EXPECT_NEAR(std::exp(-0.5 * log_det_shifted(c, shift)), std::exp(-0.5 * dense_log_det(a, shift)), 1e-10);
        EXPECT_NEAR(log_det_shifted(c, shift), dense_log_det(a, shift), 1e-9 * std::abs(dense_log_det(a, shift)));
    }
}

TEST(LogDet, GeometricDecayDenseOracle)
{
    const BasisHandle b = fourier_basis(11, 30);
    Eigen::VectorXd lambda(11);
    for (int j = 0; j < 11; ++j) {
        lambda[j] = 1.5 * std::pow(0.5, j);
    }
    const CovOperator c = CovOperator::diagonal(b, lambda);
    const double value = det_inv_sqrt_shifted(c, 4000.0);
    const Eigen::MatrixXd dense = Eigen::MatrixXd::Identity(11, 11) + 4000.0 * Eigen::MatrixXd(lambda.asDiagonal());
    const double oracle = 1.0 / std::sqrt(dense.partialPivLu().determinant());
    EXPECT_GT(value, 0.0);
    EXPECT_TRUE(std::isfinite(value));
    EXPECT_NEAR(value / oracle, 1.0, 1e-8);
}

TEST(LogDet, NoUnderflowInLogDomain)
{
    const BasisHandle b = fourier_basis(41, 80);
    const CovOperator c = CovOperator::diagonal(b, Eigen::VectorXd::Constant(41, 1.0));
    const double l = log_det_shifted(c, 4.0 * 5e4);
    EXPECT_TRUE(std::isfinite(l));
    EXPECT_NEAR(l, 41.0 * std::log1p(2e5), 1e-9);
}

TEST(LogDet, ScaleLaw)
{
    CounterRng rng(303);
    const BasisHandle b = fourier_basis(9, 30);
    for (int trial = 0; trial < 10; ++trial) {
        const Eigen::MatrixXd a = random_psd(9, rng);
        const double alpha = 0.1 + 3.0 * rng.uniform();
        const CovOperator c = CovOperator::from_matrix(b, a);
        const CovOperator scaled = CovOperator::from_matrix(b, alpha * a);
        EXPECT_NEAR(log_det_shifted(scaled, 2.0), log_det_shifted(c, alpha * 2.0), 1e-12 * log_det_shifted(c, 2.0 * alpha) + 1e-12);
    }
}

TEST(LogDet, StrictlyDecreasingInShift)
{
    CounterRng rng(404);
    const BasisHandle b = fourier_basis(7, 30);
    const CovOperator c = CovOperator::from_matrix(b, random_psd(7, rng, 2));
    double previous = 1.0;
    for (double shift = 0.01; shift < 1e4; shift *= 3.0) {
        const double v = det_inv_sqrt_shifted(c, shift);
        EXPECT_LT(v, previous) << shift;
        previous = v;
    }
}

TEST(Resolvent, Examples)
{
    CounterRng rng(505);
    const BasisHandle b = fourier_basis(5, 20);
    const Fn v(b, random_vector(5, rng));
    EXPECT_NEAR(resolvent_quad_form(CovOperator::zero(b), 3.0, v), inner(v, v), 1e-15);

    const CovOperator single = CovOperator::diagonal(b, Eigen::VectorXd::Constant(1, 1.0));
    EXPECT_NEAR(resolvent_quad_form(single, 3.0, Fn::unit(b, 0)), 0.25, 1e-15);

    const BasisHandle other = fourier_basis(5, 20);
    try {
        (void)resolvent_quad_form(single, 3.0, Fn::unit(other, 0));
        ADD_FAILURE();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::IncompatibleBasis);
    }
}

TEST(Resolvent, DenseSolveOracleAndBound)
{
    CounterRng rng(606);
    const BasisHandle b = fourier_basis(11, 30);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::MatrixXd a = random_psd(11, rng, 1 + trial % 11);
        const CovOperator c = CovOperator::from_matrix(b, a);
        const Eigen::VectorXd v = random_vector(11, rng);
        const double shift = 0.5 + trial;
        const Eigen::MatrixXd m = Eigen::MatrixXd::Identity(11, 11) + shift * a;
        const double oracle = m.ldlt().solve(v).dot(v);
        const double value = resolvent_quad_form(c, shift, Fn(b, v));
        EXPECT_NEAR(value, oracle, 1e-10 * std::max(1.0, oracle));
        EXPECT_LE(value, v.squaredNorm() + 1e-12);
    }
}

TEST(Resolvent, EqualityOnlyInKernel)
{
    const BasisHandle b = fourier_basis(5, 20);
    const CovOperator c = CovOperator::diagonal(b, Eigen::Vector2d(1.0, 0.5));
    const Fn in_kernel = Fn::unit(b, 3);
    EXPECT_NEAR(resolvent_quad_form(c, 2.0, in_kernel), 1.0, 1e-15);
    EXPECT_LT(resolvent_quad_form(c, 2.0, Fn::unit(b, 1)), 1.0);
}

TEST(OperatorSum, MatchesDenseSum)
{
    CounterRng rng(707);
    const BasisHandle b = fourier_basis(8, 30);
    const Eigen::MatrixXd a = random_psd(8, rng, 3);
    const Eigen::MatrixXd c = random_psd(8, rng, 2);
    const CovOperator s = operator_sum(CovOperator::from_matrix(b, a), CovOperator::from_matrix(b, c));
    EXPECT_LT((s.dense() - (a + c)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(KyFan, ConvexityOfInverseRootDeterminant)
{
    CounterRng rng(808);
    const BasisHandle b = fourier_basis(9, 30);
    int violations = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const Eigen::MatrixXd a = random_psd(9, rng, 1 + trial % 9);
        const Eigen::MatrixXd bm = random_psd(9, rng, 1 + (trial / 9) % 9);
        const double lhs = 2.0 * det_inv_sqrt_shifted(CovOperator::from_matrix(b, (a + bm) / 2.0), 1.0);
        const double rhs =
            det_inv_sqrt_shifted(CovOperator::from_matrix(b, a), 1.0) + det_inv_sqrt_shifted(CovOperator::from_matrix(b, bm), 1.0);
        violations += lhs > rhs ? 1 : 0;
        EXPECT_GT(rhs - lhs, 1e-12) << trial;
    }
    EXPECT_EQ(violations, 0);

    const Eigen::MatrixXd a = random_psd(9, rng);
    const double same = det_inv_sqrt_shifted(CovOperator::from_matrix(b, a), 1.0);
    EXPECT_NEAR(2.0 * det_inv_sqrt_shifted(CovOperator::from_matrix(b, a), 1.0), 2.0 * same, 1e-12);
}
