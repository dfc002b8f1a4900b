#include "kmefda/hypothesis.hpp"

#include "kmefda/error.hpp"
#include "kmefda/parallel.hpp"
#include "kmefda/rng.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace kmefda {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void require_sigma(double sigma)
{
    require(std::isfinite(sigma) && sigma > 0.0, ErrorCode::InvalidArgument, "kernel sigma must be a positive finite real");
}

// Relative size below which a bracket is indistinguishable from zero.
constexpr double kRoundingFloor = 64.0 * std::numeric_limits<double>::epsilon();

// One term w * (e^a + e^b - 2 e^c), evaluated relative to e^top.
struct Bracket {
    double weight;
    double a;
    double b;
    double c;
};

double bracket_relative(const Bracket& t, double top)
{
    // Factor e^c out where cancellation matters; far from it the direct form is exact enough.
    if (t.a - t.c < 30.0 && t.b - t.c < 30.0) {
        return std::exp(t.c - top) * (std::expm1(t.a - t.c) + std::expm1(t.b - t.c));
    }
    return std::exp(t.a - top) + std::exp(t.b - top) - 2.0 * std::exp(t.c - top);
}

double bracket_mass(const Bracket& t, double top)
{
    return std::exp(t.a - top) + std::exp(t.b - top) + 2.0 * std::exp(t.c - top);
}

// log sum_k w_k (e^{a_k} + e^{b_k} - 2 e^{c_k}). Totals below the rounding
// floor of the positive mass give -inf (an exact zero); negatives beyond
// 1e-9 of the mass are an error. With clamp_each, every bracket is clamped
// the same way before summing.
double log_bracket_sum(const std::vector<Bracket>& terms, bool clamp_each)
{
    double top = kNegInf;
    for (const Bracket& t : terms) {
        top = std::max({top, t.a, t.b, t.c});
    }
    if (!std::isfinite(top)) {
        return kNegInf;
    }
    double total = 0.0;
    double mass = 0.0;
    for (const Bracket& t : terms) {
        double rel = bracket_relative(t, top);
        const double m = bracket_mass(t, top);
        if (clamp_each && rel <= kRoundingFloor * m) {
            if (rel < -1e-9 * m) {
                fail(ErrorCode::NumericalInconsistency, "MMD bracket is negative beyond rounding");
            }
            rel = 0.0;
        }
        total += t.weight * rel;
        mass += t.weight * m;
    }
    if (total <= kRoundingFloor * mass) {
        if (total < -1e-9 * mass) {
            fail(ErrorCode::NumericalInconsistency, "MMD radicand is negative beyond rounding");
        }
        return kNegInf;
    }
    return top + std::log(total);
}

void require_regression_design(const FunctionalDataset& ds, const DesignMatrix& x)
{
    require(x.cols() == 2, ErrorCode::InvalidArgument, "regression statistics need an intercept plus one covariate");
    require(x.rows() == ds.size(), ErrorCode::LengthMismatch, "design rows must equal sample count");
    require(ds.size() >= 3, ErrorCode::InvalidArgument, "regression statistics need at least three samples");
    require((x.matrix().col(0).array() == 1.0).all(), ErrorCode::InvalidArgument, "first design column must be ones");
}

DesignMatrix design_from(const FunctionalDataset& ds)
{
    require(ds.covariates().has_value(), ErrorCode::InvalidArgument, "dataset has no covariates");
    require(ds.covariates()->cols() == 1, ErrorCode::InvalidArgument, "regression tests take exactly one covariate");
    return DesignMatrix::with_intercept(*ds.covariates());
}

struct GroupMoments {
    std::vector<Eigen::Index> sizes;
    Eigen::MatrixXd means;   // k x K
    Eigen::VectorXd grand;   // K
    Eigen::MatrixXd pooled;  // within-group second moment, divisor n
    std::vector<Eigen::MatrixXd> within;  // per group, divisor n_i
};

GroupMoments group_moments(const FunctionalDataset& ds, bool per_group)
{
    require(ds.groups().has_value(), ErrorCode::InvalidArgument, "dataset has no group labels");
    const int k = ds.group_count();
    require(k >= 2, ErrorCode::InvalidArgument, "at least two groups are required");
    GroupMoments out;
    out.sizes = ds.group_sizes();
    for (const Eigen::Index s : out.sizes) {
        require(s >= 2, ErrorCode::InvalidArgument, "every group needs at least two samples");
    }
    const auto labels = detail::zero_based_groups(ds);
    const Eigen::MatrixXd& y = ds.coeffs();
    out.means = Eigen::MatrixXd::Zero(k, y.cols());
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
        out.means.row(labels[i]) += y.row(i);
    }
    for (int g = 0; g < k; ++g) {
        out.means.row(g) /= static_cast<double>(out.sizes[g]);
    }
    out.grand = y.colwise().mean().transpose();
    Eigen::MatrixXd centered = y;
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
        centered.row(i) -= out.means.row(labels[i]);
    }
    out.pooled = detail::second_moment(centered, static_cast<double>(y.rows()));
    if (per_group) {
        std::vector<Eigen::MatrixXd> rows(static_cast<std::size_t>(k));
        std::vector<Eigen::Index> fill(static_cast<std::size_t>(k), 0);
        for (int g = 0; g < k; ++g) {
            rows[g].resize(out.sizes[g], y.cols());
        }
        for (Eigen::Index i = 0; i < y.rows(); ++i) {
            const int g = labels[i];
            rows[g].row(fill[g]++) = centered.row(i);
        }
        for (int g = 0; g < k; ++g) {
            out.within.push_back(detail::second_moment(rows[g], static_cast<double>(out.sizes[g])));
        }
    }
    return out;
}

double log_of(double v) { return v > 0.0 ? std::log(v) : kNegInf; }

}  // namespace

StatValue StatValue::from_value(double v)
{
    require(v >= 0.0, ErrorCode::NumericalInconsistency, "statistic must be nonnegative");
    return {v, log_of(v)};
}

StatValue StatValue::from_log(double log_v) { return {std::exp(log_v), log_v}; }

RegressionPlugins RegressionPlugins::assemble(const Eigen::MatrixXd& c0, const Eigen::MatrixXd& c1,
                                              Eigen::MatrixXd offsets)
{
    require(c0.rows() == c1.rows() && offsets.cols() == c0.rows(), ErrorCode::LengthMismatch,
            "plug-in shapes disagree");
    RegressionPlugins out;
    out.n = offsets.rows();
    out.null_cov = eigh(c0);
    out.full_cov = eigh(c1);
    out.sum_cov = eigh_symmetrized(c0 + c1);
    out.offsets = std::move(offsets);
    out.slope = Eigen::VectorXd::Zero(c0.rows());
    return out;
}

RegressionPlugins regression_plugins(const FunctionalDataset& ds, const DesignMatrix& x)
{
    require_regression_design(ds, x);
    const Eigen::Index n = ds.size();
    const Eigen::MatrixXd& y = ds.coeffs();

    const Eigen::RowVectorXd alpha0 = y.colwise().mean();
    const Eigen::MatrixXd c0 = detail::second_moment(y.rowwise() - alpha0, static_cast<double>(n - 1));

    const detail::OlsSolution full = detail::ols_solve(x.matrix(), y);
    const Eigen::MatrixXd c1 = detail::second_moment(full.residuals, static_cast<double>(n - 2));

    const Eigen::RowVectorXd shift = alpha0 - full.beta.row(0);
    Eigen::MatrixXd offsets = x.matrix().col(1) * (-full.beta.row(1));
    offsets.rowwise() += shift;

    RegressionPlugins out = RegressionPlugins::assemble(c0, c1, std::move(offsets));
    out.slope = full.beta.row(1).transpose();
    return out;
}

StatValue mmds_from_plugins(const RegressionPlugins& p, double sigma)
{
    require_sigma(sigma);
    const double a = -0.5 * log_det_shifted(p.null_cov, 4.0 * sigma);
    const double b = -0.5 * log_det_shifted(p.full_cov, 4.0 * sigma);
    const double s = -0.5 * log_det_shifted(p.sum_cov, 2.0 * sigma);
    // n e^a + n e^b - 2 e^s sum_i e^{-sigma q_i} = sum_i (e^a + e^b - 2 e^{s - sigma q_i})
    std::vector<Bracket> terms;
    terms.reserve(static_cast<std::size_t>(p.n));
    for (Eigen::Index i = 0; i < p.n; ++i) {
        const double q = resolvent_quad_form(p.sum_cov, 2.0 * sigma, p.offsets.row(i).transpose());
        terms.push_back({1.0, a, b, s - sigma * q});
    }
    return StatValue::from_log(0.5 * log_bracket_sum(terms, false));
}

StatValue mmdp_from_plugins(const RegressionPlugins& p, double sigma)
{
    require_sigma(sigma);
    const double half_n = 0.5 * static_cast<double>(p.n);
    double quad_total = 0.0;
    for (Eigen::Index i = 0; i < p.n; ++i) {
        quad_total += resolvent_quad_form(p.sum_cov, 2.0 * sigma, p.offsets.row(i).transpose());
    }
    const Bracket term{1.0, -half_n * log_det_shifted(p.null_cov, 4.0 * sigma),
                       -half_n * log_det_shifted(p.full_cov, 4.0 * sigma),
                       -half_n * log_det_shifted(p.sum_cov, 2.0 * sigma) - sigma * quad_total};
    return StatValue::from_log(0.5 * log_bracket_sum({term}, false));
}

StatValue mmds_statistic(const FunctionalDataset& ds, const DesignMatrix& x, double sigma)
{
    return mmds_from_plugins(regression_plugins(ds, x), sigma);
}

StatValue mmdp_statistic(const FunctionalDataset& ds, const DesignMatrix& x, double sigma)
{
    return mmdp_from_plugins(regression_plugins(ds, x), sigma);
}

StatValue l2_slope_statistic(const FunctionalDataset& ds, const DesignMatrix& x)
{
    require_regression_design(ds, x);
    const detail::OlsSolution fit = detail::ols_solve(x.matrix(), ds.coeffs());
    return StatValue::from_value(fit.beta.row(1).squaredNorm());
}

StatValue anova_mmd0_statistic(const FunctionalDataset& ds, double sigma)
{
    require_sigma(sigma);
    const GroupMoments m = group_moments(ds, false);
    const EigenSystem pooled = eigh(m.pooled);
    double total = 0.0;
    for (std::size_t g = 0; g < m.sizes.size(); ++g) {
        const Eigen::VectorXd d = m.means.row(static_cast<Eigen::Index>(g)).transpose() - m.grand;
        total += static_cast<double>(m.sizes[g]) * resolvent_quad_form(pooled, 4.0 * sigma, d);
    }
    return StatValue::from_value(total);
}

StatValue anova_l2_statistic(const FunctionalDataset& ds)
{
    const GroupMoments m = group_moments(ds, false);
    double total = 0.0;
    for (std::size_t g = 0; g < m.sizes.size(); ++g) {
        const Eigen::VectorXd d = m.means.row(static_cast<Eigen::Index>(g)).transpose() - m.grand;
        total += static_cast<double>(m.sizes[g]) * d.squaredNorm();
    }
    return StatValue::from_value(total);
}

namespace {

std::vector<Bracket> cov_brackets(const FunctionalDataset& ds, double sigma)
{
    require_sigma(sigma);
    const GroupMoments m = group_moments(ds, true);
    const double a = -0.5 * log_det_shifted(eigh(m.pooled), 4.0 * sigma);
    std::vector<Bracket> terms;
    for (std::size_t g = 0; g < m.sizes.size(); ++g) {
        const double b = -0.5 * log_det_shifted(eigh(m.within[g]), 4.0 * sigma);
        const double c = -0.5 * log_det_shifted(eigh_symmetrized(m.pooled + m.within[g]), 2.0 * sigma);
        terms.push_back({static_cast<double>(m.sizes[g]), a, b, c});
    }
    return terms;
}

}  // namespace

std::vector<double> cov_mmd_brackets(const FunctionalDataset& ds, double sigma)
{
    std::vector<double> out;
    for (const Bracket& t : cov_brackets(ds, sigma)) {
        out.push_back(std::exp(t.a) + std::exp(t.b) - 2.0 * std::exp(t.c));
    }
    return out;
}

StatValue cov_mmd_statistic(const FunctionalDataset& ds, double sigma)
{
    return StatValue::from_log(0.5 * log_bracket_sum(cov_brackets(ds, sigma), true));
}

StatValue cov_l2_statistic(const FunctionalDataset& ds)
{
    const GroupMoments m = group_moments(ds, true);
    double total = 0.0;
    for (std::size_t g = 0; g < m.sizes.size(); ++g) {
        total += static_cast<double>(m.sizes[g]) * (m.within[g] - m.pooled).squaredNorm();
    }
    return StatValue::from_value(total);
}

StatisticBundle regression_bundle(double sigma_s, double sigma_p, bool with_l2)
{
    require_sigma(sigma_s);
    require_sigma(sigma_p);
    StatisticBundle bundle;
    bundle.names = {"MMDS", "MMDP"};
    if (with_l2) {
        bundle.names.emplace_back("L2");
    }
    bundle.evaluate = [sigma_s, sigma_p, with_l2](const FunctionalDataset& ds) {
        const DesignMatrix x = design_from(ds);
        const RegressionPlugins p = regression_plugins(ds, x);
        std::vector<StatValue> out{mmds_from_plugins(p, sigma_s), mmdp_from_plugins(p, sigma_p)};
        if (with_l2) {
            out.push_back(StatValue::from_value(p.slope.squaredNorm()));
        }
        return out;
    };
    return bundle;
}

StatisticBundle anova_bundle(double sigma, bool with_l2)
{
    require_sigma(sigma);
    StatisticBundle bundle;
    bundle.names = {"MMD"};
    if (with_l2) {
        bundle.names.emplace_back("L2");
    }
    bundle.evaluate = [sigma, with_l2](const FunctionalDataset& ds) {
        std::vector<StatValue> out{anova_mmd0_statistic(ds, sigma)};
        if (with_l2) {
            out.push_back(anova_l2_statistic(ds));
        }
        return out;
    };
    return bundle;
}

StatisticBundle covariance_bundle(double sigma, bool with_l2)
{
    require_sigma(sigma);
    StatisticBundle bundle;
    bundle.names = {"MMD"};
    if (with_l2) {
        bundle.names.emplace_back("L2");
    }
    bundle.evaluate = [sigma, with_l2](const FunctionalDataset& ds) {
        std::vector<StatValue> out{cov_mmd_statistic(ds, sigma)};
        if (with_l2) {
            out.push_back(cov_l2_statistic(ds));
        }
        return out;
    };
    return bundle;
}

std::string TestResult::to_json() const
{
    nlohmann::ordered_json j;
    j["statistic_name"] = statistic_name;
    j["statistic"] = statistic;
    j["p_value"] = p_value;
    j["permutations"] = permutations;
    j["seed"] = seed;
    return j.dump();
}

FunctionalDataset center_within_groups(const FunctionalDataset& ds)
{
    require(ds.groups().has_value(), ErrorCode::InvalidArgument, "dataset has no group labels");
    const auto labels = detail::zero_based_groups(ds);
    return ds.with_coeffs(detail::center_by_group(ds.coeffs(), labels, ds.group_count()));
}

FunctionalDataset permute_dataset(const FunctionalDataset& ds, PermutationScheme scheme,
                                  const std::vector<std::size_t>& perm)
{
    require(static_cast<Eigen::Index>(perm.size()) == ds.size(), ErrorCode::LengthMismatch,
            "permutation length differs from sample count");
    FunctionalDataset out = ds;
    switch (scheme) {
    case PermutationScheme::PermuteCovariates: {
        require(ds.covariates().has_value(), ErrorCode::InvalidArgument, "dataset has no covariates to permute");
        const Eigen::MatrixXd& x = *ds.covariates();
        Eigen::MatrixXd shuffled(x.rows(), x.cols());
        for (std::size_t i = 0; i < perm.size(); ++i) {
            shuffled.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(perm[i]));
        }
        out.set_covariates(std::move(shuffled));
        break;
    }
    case PermutationScheme::PermuteGroupLabels:
    case PermutationScheme::PermuteCenteredResidualLabels: {
        require(ds.groups().has_value(), ErrorCode::InvalidArgument, "dataset has no group labels to permute");
        const std::vector<int>& g = *ds.groups();
        std::vector<int> shuffled(g.size());
        for (std::size_t i = 0; i < perm.size(); ++i) {
            shuffled[i] = g[perm[i]];
        }
        out.set_groups(std::move(shuffled));
        break;
    }
    }
    return out;
}

double permutation_p_value(double observed_log, const std::vector<double>& permuted_log)
{
    std::size_t count = 0;
    for (const double v : permuted_log) {
        if (v >= observed_log - 1e-10) {
            ++count;
        }
    }
    return static_cast<double>(1 + count) / static_cast<double>(permuted_log.size() + 1);
}

std::vector<TestResult> permutation_test(const StatisticBundle& statistic, const FunctionalDataset& ds,
                                         PermutationScheme scheme, int permutations, std::uint64_t seed, int workers)
{
    require(permutations >= 19, ErrorCode::InsufficientPermutations,
            "at least 19 permutations are required, got " + std::to_string(permutations));
    const std::vector<StatValue> observed = statistic.evaluate(ds);
    require(observed.size() == statistic.names.size(), ErrorCode::LengthMismatch, "bundle returned wrong arity");

    const FunctionalDataset base =
        scheme == PermutationScheme::PermuteCenteredResidualLabels ? center_within_groups(ds) : ds;
    const auto count = static_cast<std::size_t>(permutations);
    std::vector<std::vector<StatValue>> replicates(count);
    parallel_for(count, workers, [&](std::size_t b) {
        CounterRng rng = CounterRng::stream(seed, {static_cast<std::uint64_t>(b)});
        const auto perm = random_permutation(static_cast<std::size_t>(ds.size()), rng);
        replicates[b] = statistic.evaluate(permute_dataset(base, scheme, perm));
    });

    std::vector<TestResult> out;
    for (std::size_t k = 0; k < observed.size(); ++k) {
        std::vector<double> logs(count);
        for (std::size_t b = 0; b < count; ++b) {
            logs[b] = replicates[b][k].log_value;
        }
        out.push_back({statistic.names[k], observed[k].value, permutation_p_value(observed[k].log_value, logs),
                       permutations, seed});
    }
    return out;
}

}  // namespace kmefda
