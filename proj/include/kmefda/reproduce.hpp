#pragma once

#include "kmefda/funcspace.hpp"
#include "kmefda/hypothesis.hpp"
#include "kmefda/simgen.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace kmefda {

inline constexpr const char* kVersion = "1.0.0";

/// Matérn length scale used for the regression tables.
inline constexpr double kTableMaternRho = 0.55;

enum class TableId { T1 = 1, T2, T3, T4, T5, T6 };
enum class Scale { Desk, Full };

TableId parse_table(std::string_view text);
std::string table_name(TableId t);
Scale parse_scale(std::string_view text);
std::string_view scale_name(Scale s);

/// One scenario cell of a table with the published rejection rates (fractions)
/// keyed by statistic name.
struct CellSpec {
    std::string id;
    std::size_t index = 0;  // position in the full table; fixes the cell's RNG stream
    ScenarioConfig config;
    std::map<std::string, double> published;
};

std::vector<CellSpec> table_cells(TableId table);
/// Statistic names reported for a table, in column order.
std::vector<std::string> table_statistics(TableId table);

struct RunOptions {
    Scale scale = Scale::Desk;
    std::uint64_t seed = 20240601;
    int replicates = 0;          // 0: 500 at desk scale, 5000 (T1, T2) or 2000 otherwise at full scale
    int permutations = 200;
    int workers = 1;
    std::vector<std::string> cells;  // empty: every cell
    std::optional<double> sigma;     // overrides every MMD bandwidth
    std::optional<BasisKind> basis;  // smoothing basis override
    std::optional<int> components;   // smoothing size override
    std::optional<double> matern_rho;
    double level = 0.05;
};

int resolve_replicates(TableId table, const RunOptions& options);

struct CellResult {
    CellSpec cell;
    int replicates = 0;
    int permutations = 0;
    std::vector<std::string> statistics;
    std::vector<int> rejections;
    std::vector<std::vector<double>> p_values;  // [statistic][replicate]

    [[nodiscard]] double rate(std::size_t k) const;
    [[nodiscard]] double standard_error(std::size_t k) const;
};

struct RunReport {
    TableId table = TableId::T1;
    RunOptions options;
    std::vector<CellResult> cells;
    double wall_seconds = 0.0;

    /// Scenario cells as rows; rate, SE and published rate per statistic.
    [[nodiscard]] std::string to_csv() const;
    /// Config echo, per-cell rates and SEs, seed and version tag. Timing is kept
    /// out so the document depends only on the inputs.
    [[nodiscard]] std::string to_json() const;
    [[nodiscard]] std::string timing_json() const;
};

/// Smoothing basis for a scenario on its grid.
BasisHandle smoothing_basis(const ScenarioConfig& cfg, const Grid& grid);
/// Projects simulated curves and attaches covariates or groups.
FunctionalDataset to_dataset(const SimulatedData& data, const BasisHandle& basis);

/// The statistics of a protocol with paper-default bandwidths unless overridden.
StatisticBundle protocol_bundle(Protocol protocol, std::optional<double> sigma = std::nullopt, bool with_l2 = true);
PermutationScheme protocol_scheme(Protocol protocol);

/// Applies basis, size and Matérn overrides from the options.
ScenarioConfig apply_overrides(ScenarioConfig cfg, const RunOptions& options);

/// Seed of a cell's replicate streams under a master seed.
std::uint64_t cell_seed(std::uint64_t master, TableId table, std::size_t cell_index);

CellResult run_cell(TableId table, const CellSpec& cell, const RunOptions& options);
RunReport run_table(TableId table, const RunOptions& options);

}  // namespace kmefda
