#pragma once

#include "kmefda/basis.hpp"
#include "kmefda/operator.hpp"
#include "kmefda/rng.hpp"

#include "json.hpp"

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace kmefda {

enum class Protocol { FoSRegression, OneWayAnova, CovHomogeneity };
enum class MaternKind { SqExp, Exp };
enum class CovariateDist { Normal, Uniform };

std::string_view protocol_name(Protocol p);
Protocol parse_protocol(std::string_view text);

/// Unit-variance noise families: N(0, 1) or scale * t_df with
/// scale = sqrt((df - 2) / df) unless given explicitly.
struct NoiseDist {
    enum class Kind { Normal, ScaledT };
    Kind kind = Kind::Normal;
    double df = 0.0;
    double scale = 1.0;

    static NoiseDist normal();
    static NoiseDist scaled_t(double df);
    static NoiseDist scaled_t(double df, double scale);

    void validate() const;
    [[nodiscard]] std::string describe() const;
};

std::vector<double> draw_noise(const NoiseDist& dist, std::size_t count, CounterRng& rng);
double draw_one(const NoiseDist& dist, CounterRng& rng);

struct ScenarioConfig {
    Protocol protocol = Protocol::FoSRegression;

    int n = 30;                                // FoS sample size
    std::vector<int> group_sizes{20, 30, 30};  // ANOVA / covariance
    int grid_size = 20;                        // m or T
    double effect = 0.0;                       // c0, delta or omega

    MaternKind matern_kind = MaternKind::SqExp;
    double matern_rho = 1.0;
    CovariateDist covariate = CovariateDist::Normal;

    double decay_a = 1.5;
    double decay_rho = 0.1;
    int components = 11;  // q

    NoiseDist noise = NoiseDist::normal();
    BasisKind perturbation_basis = BasisKind::Fourier;
    // Argument of h(t) = T/(t+1): the observation index j = 1..T, or t_j itself.
    bool envelope_by_index = true;

    BasisKind smoothing_basis = BasisKind::Fourier;
    int smoothing_components = 41;
    int bspline_order = 4;

    std::uint64_t seed = 1;

    /// Protocol defaults: FoS n=30, m=20; ANOVA T=80, q=11; covariance T=80, q=41.
    static ScenarioConfig defaults(Protocol protocol);

    void validate() const;

    /// Flat `key = value` text, one key per line, in a fixed order.
    [[nodiscard]] std::string to_text() const;
    /// Parses `key = value` lines; '#' starts a comment. `protocol` is required
    /// and selects the defaults; unknown keys are reported together by name.
    static ScenarioConfig from_text(const std::string& text);
    static ScenarioConfig from_file(const std::string& path);

    /// Smoothing size actually used: the configured K, capped for Fourier at
    /// the largest odd number not above the grid size and for B-splines at two
    /// thirds of it, beyond which equally spaced knots make the design singular.
    [[nodiscard]] int effective_smoothing_components() const;
    [[nodiscard]] Eigen::Index total_samples() const;
};

/// Documentation for every config key, one `key: description` line each.
std::string config_key_reference();

struct SimulatedData {
    Grid grid;
    Eigen::MatrixXd raw;                      // samples x grid points
    std::optional<Eigen::MatrixXd> covariates;
    std::optional<std::vector<int>> groups;   // 1-based
    nlohmann::ordered_json truth;
};

/// exp(-|s - t|^2 / rho) or exp(-|s - t| / rho) on the grid (T x T).
Eigen::MatrixXd matern_kernel_matrix(MaternKind kind, double rho, const Grid& grid);

/// Matérn operator in basis coordinates: Phi^T W K W Phi, eigendecomposed.
CovOperator matern_cov(MaternKind kind, double rho, const Grid& grid, const BasisHandle& basis);

/// Stream used for replicate r of a config.
CounterRng scenario_stream(const ScenarioConfig& cfg, std::uint64_t replicate);

/// y_i(t) = 2t - x_i c0 cos(pi t) + eps_i(t), eps from the Matérn kernel via
/// the eigen-decomposition of its grid matrix.
SimulatedData gen_fos_regression(const ScenarioConfig& cfg, std::uint64_t replicate = 0);
/// y_ij(t) = c_i^T [1, t, t^2, t^3] + sum_r sqrt(lambda_r) z_ijr psi_r(t).
SimulatedData gen_anova(const ScenarioConfig& cfg, std::uint64_t replicate = 0);
/// y_ij(t) = h(t) sum_r sqrt(lambda_r) z_ijr psi_ir(t) with a group-dependent psi_i2.
SimulatedData gen_cov_scenario(const ScenarioConfig& cfg, std::uint64_t replicate = 0);
/// Dispatches on cfg.protocol.
SimulatedData generate(const ScenarioConfig& cfg, std::uint64_t replicate = 0);

/// lambda_r = a rho^{r-1}, r = 1..q.
Eigen::VectorXd decay_eigenvalues(double a, double rho, int q);

}  // namespace kmefda
