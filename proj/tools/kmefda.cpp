#include "kmefda/csvio.hpp"
#include "kmefda/error.hpp"
#include "kmefda/hypothesis.hpp"
#include "kmefda/reproduce.hpp"
#include "kmefda/simgen.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <unistd.h>

using namespace kmefda;

namespace {

void write_file(const std::string& path, const std::string& content)
{
    std::ofstream out(path, std::ios::binary);
    out << content;
    out.flush();
    require(static_cast<bool>(out), ErrorCode::IoError, "cannot write '" + path + "'");
}

void print_error(std::string_view code, const std::string& message)
{
    nlohmann::ordered_json j;
    j["error"] = code;
    j["message"] = message;
    std::cerr << j.dump() << "\n";
}

std::optional<BasisKind> parse_basis_option(const std::string& text)
{
    if (text.empty()) {
        return std::nullopt;
    }
    return parse_basis_kind(text);
}

struct ReproduceArgs {
    std::string table;
    std::string scale = "desk";
    std::uint64_t seed = RunOptions{}.seed;
    int permutations = 200;
    int replicates = 0;
    int workers = 1;
    std::vector<std::string> cells;
    std::optional<double> sigma;
    std::string basis;
    std::optional<int> components;
    std::optional<double> matern_rho;
    std::string out;
};

int run_reproduce(const ReproduceArgs& a)
{
    const TableId table = parse_table(a.table);
    RunOptions options;
    options.scale = parse_scale(a.scale);
    options.seed = a.seed;
    options.permutations = a.permutations;
    options.replicates = a.replicates;
    options.workers = a.workers;
    options.cells = a.cells;
    options.sigma = a.sigma;
    options.basis = parse_basis_option(a.basis);
    options.components = a.components;
    options.matern_rho = a.matern_rho;
    require(!options.sigma || (std::isfinite(*options.sigma) && *options.sigma > 0.0), ErrorCode::InvalidArgument,
            "--sigma must be positive");
    require(options.replicates >= 0, ErrorCode::InvalidArgument, "--reps must be nonnegative");

    const std::string prefix = a.out.empty() ? table_name(table) : a.out;
    // Check the destination before spending time on the run.
    const std::filesystem::path parent = std::filesystem::path(prefix).parent_path();
    const std::filesystem::path dir = parent.empty() ? std::filesystem::path(".") : parent;
    require(std::filesystem::is_directory(dir) && ::access(dir.c_str(), W_OK) == 0, ErrorCode::IoError,
            "cannot write into '" + dir.string() + "'");

    const RunReport report = run_table(table, options);
    write_file(prefix + ".csv", report.to_csv());
    write_file(prefix + ".json", report.to_json());
    write_file(prefix + ".timing.json", report.timing_json());
    std::cout << report.to_csv();
    return 0;
}

struct TestArgs {
    std::string kind;
    std::string data;
    std::optional<double> sigma;
    int permutations = 200;
    std::optional<int> components;
    std::string basis;
    std::uint64_t seed = 1;
    int workers = 1;
};

int run_test(const TestArgs& a)
{
    const Protocol protocol = parse_protocol(a.kind);
    const CurveTable table = read_curve_csv_file(a.data);

    ScenarioConfig cfg = ScenarioConfig::defaults(protocol);
    if (auto basis = parse_basis_option(a.basis)) {
        cfg.smoothing_basis = *basis;
    }
    if (a.components) {
        require(*a.components >= 1, ErrorCode::InvalidArgument, "--components must be positive");
        cfg.smoothing_components = *a.components;
    }
    cfg.grid_size = static_cast<int>(table.grid.size());
    const BasisHandle basis = build_basis(cfg.smoothing_basis, cfg.effective_smoothing_components(), table.grid,
                                          cfg.bspline_order);
    FunctionalDataset ds = smooth_project(table.values, basis);

    if (protocol == Protocol::FoSRegression) {
        require(table.covariates.cols() == 1, ErrorCode::SchemaError,
                "fos needs exactly one covariate column, found " + std::to_string(table.covariates.cols()));
        ds.set_covariates(table.covariates);
    } else {
        require(table.groups.has_value(), ErrorCode::SchemaError, a.kind + " needs a 'group' column");
        ds.set_groups(*table.groups);
        require(ds.group_count() >= 2, ErrorCode::SchemaError, a.kind + " needs at least two groups");
    }
    require(!a.sigma || (std::isfinite(*a.sigma) && *a.sigma > 0.0), ErrorCode::InvalidArgument,
            "--sigma must be positive");

    const StatisticBundle bundle = protocol_bundle(protocol, a.sigma);
    const auto results = permutation_test(bundle, ds, protocol_scheme(protocol), a.permutations, a.seed, a.workers);
    for (const TestResult& r : results) {
        std::cout << r.to_json() << "\n";
    }
    return 0;
}

struct SimulateArgs {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::uint64_t replicate = 0;
};

int run_simulate(const SimulateArgs& a)
{
    ScenarioConfig cfg = ScenarioConfig::from_file(a.config);
    if (a.seed) {
        cfg.seed = *a.seed;
    }
    cfg.validate();
    const SimulatedData data = generate(cfg, a.replicate);

    std::ostringstream csv;
    write_curve_csv(csv, data);
    const std::string prefix = a.out.size() > 4 && a.out.ends_with(".csv") ? a.out.substr(0, a.out.size() - 4) : a.out;
    write_file(prefix + ".csv", csv.str());

    nlohmann::ordered_json sidecar;
    sidecar["version"] = kVersion;
    sidecar["config"] = cfg.to_text();
    sidecar["replicate"] = a.replicate;
    sidecar["truth"] = data.truth;
    write_file(prefix + ".json", sidecar.dump(2) + "\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Kernel mean embedding tests for functional data"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    ReproduceArgs ra;
    auto* rep = app.add_subcommand("reproduce", "Rerun a simulation table and write CSV and JSON reports");
    rep->add_option("--table", ra.table, "T1..T6")->required();
    rep->add_option("--scale", ra.scale, "desk (500 replicates) or full (5000 for T1-T2, 2000 otherwise)");
    rep->add_option("--seed", ra.seed, "Master seed");
    rep->add_option("--permutations,-B", ra.permutations, "Permutations per test (>= 19)");
    rep->add_option("--reps", ra.replicates, "Replicates per cell; overrides --scale");
    rep->add_option("--workers,-j", ra.workers, "Worker threads, 0 for all cores");
    rep->add_option("--cells", ra.cells, "Restrict to these cell ids")->delimiter(',');
    rep->add_option("--sigma", ra.sigma, "Bandwidth for every MMD statistic");
    rep->add_option("--basis", ra.basis, "Smoothing basis: fourier | bspline");
    rep->add_option("--components,-K", ra.components, "Smoothing basis size");
    rep->add_option("--matern-rho", ra.matern_rho, "Matern length scale for T1-T2");
    rep->add_option("--out", ra.out, "Output prefix; writes PREFIX.csv, PREFIX.json, PREFIX.timing.json");

    TestArgs ta;
    auto* tst = app.add_subcommand("test", "Run one permutation test on curves from a CSV file");
    tst->add_option("--kind", ta.kind, "fos | anova | cov")->required();
    tst->add_option("--data", ta.data, "CSV with t_1..t_T columns, then covariates and/or group")->required();
    tst->add_option("--sigma", ta.sigma, "Bandwidth; defaults depend on the statistic");
    tst->add_option("--permutations,-B", ta.permutations, "Permutations (>= 19)");
    tst->add_option("--components,-K", ta.components, "Smoothing basis size (default 41, capped by the grid)");
    tst->add_option("--basis", ta.basis, "fourier | bspline (fos fourier, otherwise bspline)");
    tst->add_option("--seed", ta.seed, "Permutation seed");
    tst->add_option("--workers,-j", ta.workers, "Worker threads, 0 for all cores");

    SimulateArgs sa;
    auto* sim = app.add_subcommand("simulate", "Generate one scenario dataset as CSV plus a truth JSON sidecar");
    sim->add_option("--config", sa.config, "Scenario config file (flat key = value)")->required();
    sim->add_option("--out", sa.out, "Output prefix; writes PREFIX.csv and PREFIX.json")->required();
    sim->add_option("--seed", sa.seed, "Overrides the config seed");
    sim->add_option("--replicate", sa.replicate, "Replicate index");
    sim->footer("Config keys:\n" + config_key_reference());

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        print_error("usage-error", e.what());
        return 2;
    }

    try {
        if (rep->parsed()) {
            return run_reproduce(ra);
        }
        if (tst->parsed()) {
            return run_test(ta);
        }
        return run_simulate(sa);
    } catch (const Error& e) {
        print_error(error_code_name(e.code()), e.what());
        return 1;
    } catch (const std::exception& e) {
        print_error("internal-error", e.what());
        return 1;
    }
}
