#include "kmefda/reproduce.hpp"

#include "kmefda/csvio.hpp"
#include "kmefda/error.hpp"
#include "kmefda/parallel.hpp"

#include "json.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

namespace kmefda {

namespace {

constexpr std::uint64_t kPermutationTag = 0x9E57'0001;

std::string fmt(double v)
{
    std::ostringstream s;
    s << v;
    return s.str();
}

struct Block {
    std::vector<double> effects;
    std::map<std::string, std::vector<double>> published;  // percent, one per effect
};

void add_block(std::vector<CellSpec>& out, const ScenarioConfig& base, const std::string& prefix, const Block& b)
{
    for (std::size_t e = 0; e < b.effects.size(); ++e) {
        CellSpec cell;
        cell.config = base;
        cell.config.effect = b.effects[e];
        cell.id = prefix + "_e" + fmt(b.effects[e]);
        cell.index = out.size();
        for (const auto& [name, values] : b.published) {
            cell.published[name] = std::round(values[e] * 100.0) / 10000.0;
        }
        out.push_back(std::move(cell));
    }
}

std::vector<CellSpec> regression_cells(MaternKind kind)
{
    // published[m][n] for m in {10, 20, 50}, n in {30, 70}
    struct Row {
        int m;
        int n;
        Block block;
    };
    const std::vector<double> small{0, 0.2, 0.4, 0.6};
    const std::vector<double> large{0, 0.1, 0.2, 0.3};
    std::vector<Row> rows;
    if (kind == MaternKind::SqExp) {
        rows = {
            {10, 30, {small, {{"L2", {5.2, 10.7, 44.3, 88.2}}, {"MMDP", {4.8, 23.3, 77.2, 97.5}}, {"MMDS", {3.6, 27.4, 79.7, 97.6}}}}},
            {10, 70, {large, {{"L2", {4.7, 8.4, 24.8, 61.6}}, {"MMDP", {4.4, 16.1, 59.0, 89.9}}, {"MMDS", {4.8, 20.6, 61.9, 90.8}}}}},
            {20, 30, {small, {{"L2", {5.1, 10.6, 45.8, 87.6}}, {"MMDP", {5.1, 23.8, 74.1, 98.7}}, {"MMDS", {5.5, 26.9, 75.4, 98.7}}}}},
            {20, 70, {large, {{"L2", {2.7, 8.5, 23.4, 60.4}}, {"MMDP", {4.5, 17.7, 52.8, 88.2}}, {"MMDS", {4.8, 22.2, 62.5, 92.0}}}}},
            {50, 30, {small, {{"L2", {5.2, 14.2, 47.4, 86.4}}, {"MMDP", {4.0, 25.4, 76.5, 97.3}}, {"MMDS", {4.0, 28.8, 79.6, 98.0}}}}},
            {50, 70, {large, {{"L2", {7.2, 8.6, 26.0, 62.3}}, {"MMDP", {4.5, 15.9, 56.5, 90.5}}, {"MMDS", {4.8, 20.4, 65.2, 93.3}}}}},
        };
    } else {
        rows = {
            {10, 30, {small, {{"L2", {3.0, 11.9, 55.5, 91.1}}, {"MMDP", {5.1, 15.8, 58.1, 91.1}}, {"MMDS", {5.0, 8.5, 23.9, 52.2}}}}},
            {10, 70, {large, {{"L2", {2.7, 8.5, 29.4, 70.9}}, {"MMDP", {4.7, 12.4, 41.65, 78.2}}, {"MMDS", {4.6, 5.5, 9.3, 15.3}}}}},
            {20, 30, {small, {{"L2", {3.3, 11.9, 54.2, 92.2}}, {"MMDP", {4.6, 18.2, 61.3, 93.2}}, {"MMDS", {4.6, 20.8, 61.1, 91.9}}}}},
            {20, 70, {large, {{"L2", {3.8, 7.4, 29.5, 71.7}}, {"MMDP", {5.3, 12.5, 43.3, 82.5}}, {"MMDS", {5.4, 17.4, 54.7, 87.9}}}}},
            {50, 30, {small, {{"L2", {4.6, 12.0, 54.6, 91.4}}, {"MMDP", {4.4, 18.7, 61.6, 92.6}}, {"MMDS", {3.8, 21.2, 66.2, 93.5}}}}},
            {50, 70, {large, {{"L2", {4.6, 8.2, 32.0, 73.5}}, {"MMDP", {4.9, 11.7, 44.9, 82.3}}, {"MMDS", {5.1, 19.9, 61.5, 91.6}}}}},
        };
    }
    std::vector<CellSpec> out;
    for (const Row& row : rows) {
        ScenarioConfig cfg = ScenarioConfig::defaults(Protocol::FoSRegression);
        cfg.n = row.n;
        cfg.grid_size = row.m;
        cfg.matern_kind = kind;
        cfg.matern_rho = kTableMaternRho;
        add_block(out, cfg, "n" + std::to_string(row.n) + "_m" + std::to_string(row.m), row.block);
    }
    return out;
}

struct GroupRow {
    double rho;
    bool large;
    Block block;
};

std::vector<CellSpec> group_cells(Protocol protocol, bool heavy_tails, const std::vector<GroupRow>& rows)
{
    std::vector<CellSpec> out;
    for (const GroupRow& row : rows) {
        ScenarioConfig cfg = ScenarioConfig::defaults(protocol);
        cfg.decay_rho = row.rho;
        cfg.group_sizes = row.large ? std::vector<int>{70, 80, 100} : std::vector<int>{20, 30, 30};
        if (heavy_tails) {
            cfg.noise = NoiseDist::scaled_t(protocol == Protocol::OneWayAnova ? 4.0 : 5.0);
        }
        add_block(out, cfg, "rho" + fmt(row.rho) + (row.large ? "_large" : "_small"), row.block);
    }
    return out;
}

std::vector<CellSpec> anova_cells(bool heavy_tails)
{
    const std::vector<double> s1{0, 0.015, 0.03, 0.05, 0.065};
    const std::vector<double> l1{0, 0.01, 0.02, 0.03, 0.04};
    const std::vector<double> s5{0, 0.05, 0.1, 0.15, 0.2};
    const std::vector<double> l5{0, 0.04, 0.08, 0.12, 0.16};
    const std::vector<double> s9{0, 0.15, 0.3, 0.45, 0.6};
    const std::vector<double> l9{0, 0.1, 0.2, 0.3, 0.4};
    if (!heavy_tails) {
        return group_cells(Protocol::OneWayAnova, false,
                           {{0.1, false, {s1, {{"L2", {7.2, 8.1, 16.2, 43.8, 70.9}}, {"MMD", {5.8, 31.8, 99.9, 100, 100}}}}},
                            {0.1, true, {l1, {{"L2", {4.6, 9.8, 24.9, 55.9, 86.2}}, {"MMD", {4.2, 68.7, 100, 100, 100}}}}},
                            {0.5, false, {s5, {{"L2", {4.1, 5.9, 10.3, 15.4, 25.0}}, {"MMD", {4.8, 19.7, 92.7, 100, 100}}}}},
                            {0.5, true, {l5, {{"L2", {5.3, 8.5, 18.4, 35.7, 62.5}}, {"MMD", {4.9, 65.7, 100, 100, 100}}}}},
                            {0.9, false, {s9, {{"L2", {4.9, 5.8, 12.5, 25.3, 48.1}}, {"MMD", {5.3, 9.3, 31.1, 80.0, 100}}}}},
                            {0.9, true, {l9, {{"L2", {5.1, 8.3, 20.5, 46.9, 74.4}}, {"MMD", {4.4, 14.9, 74.6, 100, 100}}}}}});
    }
    return group_cells(Protocol::OneWayAnova, true,
                       {{0.1, false, {s1, {{"L2", {7.4, 7.7, 17.6, 42.0, 69.1}}, {"MMD", {6.3, 34.2, 100, 100, 100}}}}},
                        {0.1, true, {l1, {{"L2", {6.1, 9.3, 24.6, 53.9, 86.6}}, {"MMD", {6.0, 71.0, 100, 100, 100}}}}},
                        {0.5, false, {s5, {{"L2", {4.4, 6.1, 9.8, 16.0, 25.8}}, {"MMD", {5.4, 23.1, 94.2, 100, 100}}}}},
                        {0.5, true, {l5, {{"L2", {4.9, 8.0, 17.4, 36.7, 59.6}}, {"MMD", {4.6, 68.6, 100, 100, 100}}}}},
                        {0.9, false, {s9, {{"L2", {3.9, 4.5, 11.7, 27.7, 47.2}}, {"MMD", {5.0, 8.9, 30.9, 78.7, 100}}}}},
                        {0.9, true, {l9, {{"L2", {5.0, 7.3, 20.8, 46.2, 74.3}}, {"MMD", {5.3, 13.1, 75.7, 100, 100}}}}}});
}

std::vector<CellSpec> covariance_cells(bool heavy_tails)
{
    const std::vector<double> s1{0, 0.5, 1, 2.5, 5};
    const std::vector<double> l1{0, 0.5, 1, 2.5, 4};
    const std::vector<double> s5{0, 0.5, 1, 1.5, 3};
    const std::vector<double> l5{0, 0.5, 0.8, 1.1, 1.4};
    const std::vector<double> s9{0, 0.5, 0.8, 1.2, 1.5};
    const std::vector<double> l9{0, 0.4, 0.6, 0.8, 1};
    if (!heavy_tails) {
        return group_cells(Protocol::CovHomogeneity, false,
                           {{0.1, false, {s1, {{"L2", {5.3, 5.4, 6.3, 7.1, 8.1}}, {"MMD", {4.4, 100, 100, 100, 100}}}}},
                            {0.1, true, {l1, {{"L2", {4.8, 4.7, 6.3, 6.0, 7.2}}, {"MMD", {4.7, 100, 100, 100, 100}}}}},
                            {0.5, false, {s5, {{"L2", {4.6, 5.0, 6.3, 6.7, 5.3}}, {"MMD", {4.8, 99.7, 100, 100, 100}}}}},
                            {0.5, true, {l5, {{"L2", {4.8, 4.6, 4.4, 6.2, 5.3}}, {"MMD", {4.4, 100, 100, 100, 100}}}}},
                            {0.9, false, {s9, {{"L2", {5.7, 6.6, 5.7, 5.4, 6.7}}, {"MMD", {4.4, 100, 100, 100, 100}}}}},
                            {0.9, true, {l9, {{"L2", {5.9, 4.8, 5.6, 5.1, 5.8}}, {"MMD", {4.3, 100, 100, 100, 100}}}}}});
    }
    return group_cells(Protocol::CovHomogeneity, true,
                       {{0.1, false, {s1, {{"L2", {5.3, 4.4, 5.2, 4.3, 5.6}}, {"MMD", {4.2, 100, 100, 100, 100}}}}},
                        {0.1, true, {l1, {{"L2", {5.6, 7.2, 7.6, 6.4, 5.6}}, {"MMD", {4.4, 100, 100, 100, 100}}}}},
                        {0.5, false, {s5, {{"L2", {5.0, 4.3, 4.3, 5.1, 5.6}}, {"MMD", {4.8, 84.2, 100, 100, 100}}}}},
                        {0.5, true, {l5, {{"L2", {5.1, 5.6, 4.3, 6.9, 6.3}}, {"MMD", {5.0, 100, 100, 100, 100}}}}},
                        {0.9, false, {s9, {{"L2", {4.1, 4.3, 4.2, 3.8, 4.9}}, {"MMD", {5.4, 91.4, 100, 100, 100}}}}},
                        {0.9, true, {l9, {{"L2", {5.2, 6.4, 5.3, 6.7, 6.5}}, {"MMD", {4.8, 100, 100, 100, 100}}}}}});
}

Protocol table_protocol(TableId t)
{
    switch (t) {
    case TableId::T1:
    case TableId::T2: return Protocol::FoSRegression;
    case TableId::T3:
    case TableId::T4: return Protocol::OneWayAnova;
    default: return Protocol::CovHomogeneity;
    }
}

}  // namespace

TableId parse_table(std::string_view text)
{
    static const std::map<std::string, TableId, std::less<>> ids{
        {"T1", TableId::T1}, {"T2", TableId::T2}, {"T3", TableId::T3},
        {"T4", TableId::T4}, {"T5", TableId::T5}, {"T6", TableId::T6}};
    const auto it = ids.find(text);
    if (it == ids.end()) {
        fail(ErrorCode::InvalidArgument, "unknown table '" + std::string(text) + "' (expected T1..T6)");
    }
    return it->second;
}

std::string table_name(TableId t) { return "T" + std::to_string(static_cast<int>(t)); }

Scale parse_scale(std::string_view text)
{
    if (text == "desk") {
        return Scale::Desk;
    }
    if (text == "full") {
        return Scale::Full;
    }
    fail(ErrorCode::InvalidArgument, "unknown scale '" + std::string(text) + "' (expected desk|full)");
}

std::string_view scale_name(Scale s) { return s == Scale::Desk ? "desk" : "full"; }

std::vector<CellSpec> table_cells(TableId table)
{
    switch (table) {
    case TableId::T1: return regression_cells(MaternKind::SqExp);
    case TableId::T2: return regression_cells(MaternKind::Exp);
    case TableId::T3: return anova_cells(false);
    case TableId::T4: return anova_cells(true);
    case TableId::T5: return covariance_cells(false);
    case TableId::T6: return covariance_cells(true);
    }
    fail(ErrorCode::InvalidArgument, "unknown table");
}

std::vector<std::string> table_statistics(TableId table)
{
    return protocol_bundle(table_protocol(table)).names;
}

int resolve_replicates(TableId table, const RunOptions& options)
{
    if (options.replicates > 0) {
        return options.replicates;
    }
    if (options.scale == Scale::Desk) {
        return 500;
    }
    return table_protocol(table) == Protocol::FoSRegression ? 5000 : 2000;
}

double CellResult::rate(std::size_t k) const
{
    return static_cast<double>(rejections.at(k)) / static_cast<double>(replicates);
}

double CellResult::standard_error(std::size_t k) const
{
    const double p = rate(k);
    return std::sqrt(p * (1.0 - p) / static_cast<double>(replicates));
}

BasisHandle smoothing_basis(const ScenarioConfig& cfg, const Grid& grid)
{
    return build_basis(cfg.smoothing_basis, cfg.effective_smoothing_components(), grid, cfg.bspline_order);
}

FunctionalDataset to_dataset(const SimulatedData& data, const BasisHandle& basis)
{
    FunctionalDataset ds = smooth_project(data.raw, basis);
    if (data.covariates) {
        ds.set_covariates(*data.covariates);
    }
    if (data.groups) {
        ds.set_groups(*data.groups);
    }
    return ds;
}

StatisticBundle protocol_bundle(Protocol protocol, std::optional<double> sigma, bool with_l2)
{
    switch (protocol) {
    case Protocol::FoSRegression:
        return regression_bundle(sigma.value_or(kDefaultSigmaMmds), sigma.value_or(kDefaultSigmaMmdp), with_l2);
    case Protocol::OneWayAnova: return anova_bundle(sigma.value_or(kDefaultSigmaAnova), with_l2);
    case Protocol::CovHomogeneity: return covariance_bundle(sigma.value_or(kDefaultSigmaCov), with_l2);
    }
    fail(ErrorCode::InvalidArgument, "unknown protocol");
}

PermutationScheme protocol_scheme(Protocol protocol)
{
    switch (protocol) {
    case Protocol::FoSRegression: return PermutationScheme::PermuteCovariates;
    case Protocol::OneWayAnova: return PermutationScheme::PermuteGroupLabels;
    case Protocol::CovHomogeneity: return PermutationScheme::PermuteCenteredResidualLabels;
    }
    fail(ErrorCode::InvalidArgument, "unknown protocol");
}

ScenarioConfig apply_overrides(ScenarioConfig cfg, const RunOptions& options)
{
    if (options.basis) {
        cfg.smoothing_basis = *options.basis;
    }
    if (options.components) {
        cfg.smoothing_components = *options.components;
    }
    if (options.matern_rho && cfg.protocol == Protocol::FoSRegression) {
        cfg.matern_rho = *options.matern_rho;
    }
    cfg.validate();
    return cfg;
}

std::uint64_t cell_seed(std::uint64_t master, TableId table, std::size_t cell_index)
{
    return derive_key(master, {static_cast<std::uint64_t>(table), static_cast<std::uint64_t>(cell_index)});
}

CellResult run_cell(TableId table, const CellSpec& cell, const RunOptions& options)
{
    require(options.permutations >= 19, ErrorCode::InsufficientPermutations, "at least 19 permutations are required");
    ScenarioConfig cfg = apply_overrides(cell.config, options);
    cfg.seed = cell_seed(options.seed, table, cell.index);

    const int reps = resolve_replicates(table, options);
    const StatisticBundle bundle = protocol_bundle(cfg.protocol, options.sigma);
    const PermutationScheme scheme = protocol_scheme(cfg.protocol);
    const BasisHandle basis = smoothing_basis(cfg, make_grid(cfg.grid_size));

    CellResult result;
    result.cell = cell;
    result.cell.config = cfg;
    result.replicates = reps;
    result.permutations = options.permutations;
    result.statistics = bundle.names;
    result.p_values.assign(bundle.names.size(), std::vector<double>(static_cast<std::size_t>(reps)));

    parallel_for(static_cast<std::size_t>(reps), options.workers, [&](std::size_t r) {
        const SimulatedData data = generate(cfg, r);
        const FunctionalDataset ds = to_dataset(data, basis);
        const std::uint64_t perm_seed = derive_key(cfg.seed, {kPermutationTag, r});
        const auto tests = permutation_test(bundle, ds, scheme, options.permutations, perm_seed, 1);
        for (std::size_t k = 0; k < tests.size(); ++k) {
            result.p_values[k][r] = tests[k].p_value;
        }
    });

    for (const auto& ps : result.p_values) {
        int count = 0;
        for (const double p : ps) {
            count += p <= options.level ? 1 : 0;
        }
        result.rejections.push_back(count);
    }
    return result;
}

RunReport run_table(TableId table, const RunOptions& options)
{
    const auto start = std::chrono::steady_clock::now();
    RunReport report;
    report.table = table;
    report.options = options;
    const auto cells = table_cells(table);
    for (const std::string& wanted : options.cells) {
        const bool known = std::any_of(cells.begin(), cells.end(), [&](const CellSpec& c) { return c.id == wanted; });
        require(known, ErrorCode::InvalidArgument, "unknown cell '" + wanted + "' for table " + table_name(table));
    }
    for (const CellSpec& cell : cells) {
        if (!options.cells.empty() &&
            std::find(options.cells.begin(), options.cells.end(), cell.id) == options.cells.end()) {
            continue;
        }
        report.cells.push_back(run_cell(table, cell, options));
    }
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

namespace {

std::string cell_shape(const ScenarioConfig& cfg)
{
    if (cfg.protocol == Protocol::FoSRegression) {
        return std::to_string(cfg.n);
    }
    std::string s;
    for (std::size_t i = 0; i < cfg.group_sizes.size(); ++i) {
        s += (i ? "/" : "") + std::to_string(cfg.group_sizes[i]);
    }
    return s;
}

double cell_rho(const ScenarioConfig& cfg)
{
    return cfg.protocol == Protocol::FoSRegression ? cfg.matern_rho : cfg.decay_rho;
}

}  // namespace

std::string RunReport::to_csv() const
{
    std::ostringstream out;
    out << "table,cell,sizes,grid,rho,effect,replicates,permutations";
    const auto names = cells.empty() ? table_statistics(table) : cells.front().statistics;
    for (const auto& name : names) {
        out << ",rate_" << name << ",se_" << name << ",published_" << name;
    }
    out << "\n";
    for (const CellResult& c : cells) {
        const ScenarioConfig& cfg = c.cell.config;
        out << table_name(table) << "," << c.cell.id << "," << cell_shape(cfg) << "," << cfg.grid_size << ","
            << format_double(cell_rho(cfg)) << "," << format_double(cfg.effect) << "," << c.replicates << ","
            << c.permutations;
        for (std::size_t k = 0; k < c.statistics.size(); ++k) {
            out << "," << format_double(c.rate(k)) << "," << format_double(c.standard_error(k)) << ",";
            const auto it = c.cell.published.find(c.statistics[k]);
            if (it != c.cell.published.end()) {
                out << format_double(it->second);
            }
        }
        out << "\n";
    }
    return out.str();
}

std::string RunReport::to_json() const
{
    nlohmann::ordered_json j;
    j["version"] = kVersion;
    j["table"] = table_name(table);
    j["scale"] = scale_name(options.scale);
    j["seed"] = options.seed;
    j["replicates"] = resolve_replicates(table, options);
    j["permutations"] = options.permutations;
    j["level"] = options.level;
    if (options.sigma) {
        j["sigma"] = *options.sigma;
    }
    if (options.basis) {
        j["basis"] = basis_kind_name(*options.basis);
    }
    if (options.components) {
        j["components"] = *options.components;
    }
    if (options.matern_rho) {
        j["matern_rho"] = *options.matern_rho;
    }
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const CellResult& c : cells) {
        nlohmann::ordered_json row;
        row["cell"] = c.cell.id;
        row["config"] = c.cell.config.to_text();
        row["replicates"] = c.replicates;
        nlohmann::ordered_json stats;
        for (std::size_t k = 0; k < c.statistics.size(); ++k) {
            nlohmann::ordered_json s;
            s["rejections"] = c.rejections[k];
            s["rate"] = c.rate(k);
            s["se"] = c.standard_error(k);
            const auto it = c.cell.published.find(c.statistics[k]);
            if (it != c.cell.published.end()) {
                s["published"] = it->second;
            }
            stats[c.statistics[k]] = s;
        }
        row["statistics"] = stats;
        rows.push_back(row);
    }
    j["cells"] = rows;
    return j.dump(2) + "\n";
}

std::string RunReport::timing_json() const
{
    nlohmann::ordered_json j;
    j["table"] = table_name(table);
    j["wall_seconds"] = wall_seconds;
    j["workers"] = resolve_workers(options.workers);
    return j.dump(2) + "\n";
}

}  // namespace kmefda
