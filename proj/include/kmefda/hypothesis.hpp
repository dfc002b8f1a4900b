#pragma once

#include "kmefda/estimators.hpp"
#include "kmefda/funcspace.hpp"
#include "kmefda/operator.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace kmefda {

/// A nonnegative statistic with its logarithm carried separately, so
/// comparisons survive when the linear value underflows.
struct StatValue {
    double value = 0.0;
    double log_value = 0.0;  // -inf for an exact zero

    static StatValue from_value(double v);
    static StatValue from_log(double log_v);
};

/// Several statistics evaluated together on one dataset so they can share
/// fits and eigendecompositions. The permutation engine feeds every member
/// the same permuted datasets.
struct StatisticBundle {
    std::vector<std::string> names;
    std::function<std::vector<StatValue>(const FunctionalDataset&)> evaluate;
};

inline constexpr double kDefaultSigmaMmds = 5e4;
inline constexpr double kDefaultSigmaMmdp = 5e1;
inline constexpr double kDefaultSigmaAnova = 1e3;
inline constexpr double kDefaultSigmaCov = 1e3;

// Restricted plug-in fits for H0: beta = 0 against the full intercept + slope model.
struct RegressionPlugins {
    Eigen::Index n = 0;
    EigenSystem null_cov;   // C0: intercept-only, divisor n - 1
    EigenSystem full_cov;   // C1: intercept + slope, divisor n - 2
    EigenSystem sum_cov;    // C0 + C1
    Eigen::MatrixXd offsets;  // row i: alpha0 - alpha1 - x_i beta1
    Eigen::VectorXd slope;    // beta1

    /// Assembles plug-ins from explicit covariance matrices and offset rows.
    static RegressionPlugins assemble(const Eigen::MatrixXd& c0, const Eigen::MatrixXd& c1, Eigen::MatrixXd offsets);
};

/// Design must be [1, x] with n >= 3.
RegressionPlugins regression_plugins(const FunctionalDataset& ds, const DesignMatrix& x);

StatValue mmds_from_plugins(const RegressionPlugins& plugins, double sigma);
StatValue mmdp_from_plugins(const RegressionPlugins& plugins, double sigma);

/// Sum-kernel MMD between the null and full plug-in product measures.
StatValue mmds_statistic(const FunctionalDataset& ds, const DesignMatrix& x, double sigma = kDefaultSigmaMmds);
/// Product-kernel MMD between the null and full plug-in product measures.
StatValue mmdp_statistic(const FunctionalDataset& ds, const DesignMatrix& x, double sigma = kDefaultSigmaMmdp);
/// ||beta1||^2 of the OLS fit.
StatValue l2_slope_statistic(const FunctionalDataset& ds, const DesignMatrix& x);

/// sum_i n_i <(I + 4 sigma C)^{-1}(mu_i - mu), mu_i - mu> with C pooled within groups.
StatValue anova_mmd0_statistic(const FunctionalDataset& ds, double sigma = kDefaultSigmaAnova);
/// sum_i n_i ||mu_i - mu||^2.
StatValue anova_l2_statistic(const FunctionalDataset& ds);

/// Per-group MMD^2 brackets |I+4sC|^{-1/2} + |I+4sC_i|^{-1/2} - 2|I+2s(C+C_i)|^{-1/2}
/// in group order, before weighting by n_i.
std::vector<double> cov_mmd_brackets(const FunctionalDataset& ds, double sigma = kDefaultSigmaCov);
/// sqrt(sum_i n_i bracket_i).
StatValue cov_mmd_statistic(const FunctionalDataset& ds, double sigma = kDefaultSigmaCov);
/// sum_i n_i ||C_i - C||_HS^2.
StatValue cov_l2_statistic(const FunctionalDataset& ds);

/// MMDS, MMDP and L2 on the dataset's single covariate column.
StatisticBundle regression_bundle(double sigma_s = kDefaultSigmaMmds, double sigma_p = kDefaultSigmaMmdp,
                                  bool with_l2 = true);
/// MMD and L2 for group means.
StatisticBundle anova_bundle(double sigma = kDefaultSigmaAnova, bool with_l2 = true);
/// MMD and L2 for group covariances.
StatisticBundle covariance_bundle(double sigma = kDefaultSigmaCov, bool with_l2 = true);

enum class PermutationScheme { PermuteCovariates, PermuteGroupLabels, PermuteCenteredResidualLabels };

struct TestResult {
    std::string statistic_name;
    double statistic = 0.0;
    double p_value = 1.0;
    int permutations = 0;
    std::uint64_t seed = 0;

    /// Flat JSON object with the five fields above.
    [[nodiscard]] std::string to_json() const;
};

/// Dataset as seen under permutation `perm` (perm[i] is the source row for row i).
/// For the centered scheme pass the already centered dataset.
FunctionalDataset permute_dataset(const FunctionalDataset& ds, PermutationScheme scheme,
                                  const std::vector<std::size_t>& perm);

/// Subtracts each sample's group mean.
FunctionalDataset center_within_groups(const FunctionalDataset& ds);

/// Permutation p-values (1 + #{T_b >= T_obs}) / (B + 1) for every member of the
/// bundle. Permutation b is drawn from CounterRng::stream(seed, {b}) so the
/// result does not depend on `workers`. Ties are judged on log values with an
/// absolute slack of 1e-10.
std::vector<TestResult> permutation_test(const StatisticBundle& statistic, const FunctionalDataset& ds,
                                         PermutationScheme scheme, int permutations, std::uint64_t seed,
                                         int workers = 1);

/// Counts and p-values from observed and permuted log statistics.
double permutation_p_value(double observed_log, const std::vector<double>& permuted_log);

}  // namespace kmefda
