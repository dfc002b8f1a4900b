#include "kmefda/embedding.hpp"
#include "kmefda/error.hpp"
#include "kmefda/estimators.hpp"
#include "kmefda/hypothesis.hpp"
#include "kmefda/reproduce.hpp"
#include "test_support.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <array>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <string>

using namespace kmefda;
using namespace kmefda::testing;

namespace {

struct Outcome {
    bool pass = true;
    std::string summary;
};

void detail(const std::string& line)
{
    std::cout << "  " << line << "\n";
}

std::string fmt(double v, int digits = 4)
{
    std::ostringstream out;
    out.precision(digits);
    out << v;
    return out.str();
}

double kernel_coeffs(const Eigen::VectorXd& x, const Eigen::VectorXd& y, double sigma)
{
    return std::exp(-sigma * (x - y).squaredNorm());
}

// |closed - mc| measured in Monte Carlo standard errors.
double z_score(double closed, const MeanSe& mc)
{
    return std::abs(closed - mc.mean) / mc.se;
}

Outcome closed_forms_vs_monte_carlo()
{
    constexpr int kDraws = 100000;
    CounterRng rng(derive_key(20240601, {1}));
    double worst = 0.0;
    int failures = 0;
    for (int m = 0; m < 20; ++m) {
        const int k = 1 + 2 * (m % 6);  // 1, 3, ..., 11
        const double sigma = std::array{0.2, 0.5, 1.0}[m % 3];
        const BasisHandle b = fourier_basis(k, 40);
        const GaussianMeasure p = random_measure(b, rng, 0.5, 0.4);
        const GaussianMeasure q = random_measure(b, rng, 0.5, 0.4);
        const Eigen::VectorXd x = random_vector(k, rng, 0.7);
        const GaussianSampler sp(p);
        const GaussianSampler sq(q);

        std::vector<double> at(kDraws);
        std::vector<double> inner(kDraws);
        std::vector<double> mmd(kDraws);
        for (int d = 0; d < kDraws; ++d) {
            const Eigen::VectorXd x1 = sp.draw(rng);
            const Eigen::VectorXd x2 = sp.draw(rng);
            const Eigen::VectorXd y1 = sq.draw(rng);
            const Eigen::VectorXd y2 = sq.draw(rng);
            at[d] = kernel_coeffs(x, x1, sigma);
            inner[d] = kernel_coeffs(x2, y2, sigma);
            mmd[d] = kernel_coeffs(x1, x2, sigma) + kernel_coeffs(y1, y2, sigma) - 2.0 * kernel_coeffs(x1, y1, sigma);
        }
        const double z1 = z_score(kernel_mean_at(p, Fn(b, x), sigma), mean_se(at));
        const double z2 = z_score(kernel_mean_inner(p, q, sigma), mean_se(inner));
        const double z3 = z_score(mmd_sq_gaussian(p, q, sigma), mean_se(mmd));
        worst = std::max({worst, z1, z2, z3});
        const bool ok = z1 <= 4.0 && z2 <= 4.0 && z3 <= 4.0;
        failures += ok ? 0 : 1;
        detail("measure " + std::to_string(m) + " K=" + std::to_string(k) + " sigma=" + fmt(sigma) +
               " z(kernel_mean_at)=" + fmt(z1, 3) + " z(kernel_mean_inner)=" + fmt(z2, 3) + " z(mmd_sq)=" + fmt(z3, 3));
    }
    return {failures == 0, "20 measures, 3 quantities, worst |z| = " + fmt(worst, 3) + " (limit 4)"};
}

const CellResult& find_cell(const RunReport& report, const std::string& id)
{
    for (const CellResult& c : report.cells) {
        if (c.cell.id == id) {
            return c;
        }
    }
    fail(ErrorCode::InvalidArgument, "cell " + id + " missing from report");
}

std::size_t statistic_index(const CellResult& c, const std::string& name)
{
    const auto it = std::find(c.statistics.begin(), c.statistics.end(), name);
    require(it != c.statistics.end(), ErrorCode::InvalidArgument, "statistic " + name + " missing");
    return static_cast<std::size_t>(it - c.statistics.begin());
}

struct RateCheck {
    std::string cell;
    std::string statistic;
    double lo;
    double hi;
};

Outcome check_rates(TableId table, const std::vector<RateCheck>& checks, int workers)
{
    RunOptions o;
    o.workers = workers;
    for (const RateCheck& c : checks) {
        if (std::find(o.cells.begin(), o.cells.end(), c.cell) == o.cells.end()) {
            o.cells.push_back(c.cell);
        }
    }
    const RunReport report = run_table(table, o);
    int failures = 0;
    for (const RateCheck& c : checks) {
        const CellResult& cell = find_cell(report, c.cell);
        const std::size_t k = statistic_index(cell, c.statistic);
        const double rate = cell.rate(k);
        const bool ok = rate >= c.lo - 1e-12 && rate <= c.hi + 1e-12;
        failures += ok ? 0 : 1;
        detail(std::string(ok ? "ok   " : "FAIL ") + c.cell + " " + c.statistic + " rate=" + fmt(rate) + " se=" +
               fmt(cell.standard_error(k), 3) + " required [" + fmt(c.lo) + ", " + fmt(c.hi) + "] published=" +
               fmt(cell.cell.published.at(c.statistic)));
    }
    return {failures == 0, std::to_string(checks.size() - failures) + "/" + std::to_string(checks.size()) +
                               " rate checks pass (" + std::to_string(report.cells.front().replicates) + " reps, B=" +
                               std::to_string(o.permutations) + ", " + fmt(report.wall_seconds, 3) + " s)"};
}

Outcome table1_desk(int workers)
{
    std::vector<RateCheck> checks;
    for (const char* n : {"n30", "n70"}) {
        for (const char* m : {"m10", "m20", "m50"}) {
            const std::string id = std::string(n) + "_" + m + "_e0";
            checks.push_back({id, "MMDS", 0.02, 0.08});
            checks.push_back({id, "MMDP", 0.02, 0.08});
        }
    }
    checks.push_back({"n30_m20_e0.4", "MMDS", 0.754 - 0.06, 0.754 + 0.06});
    checks.push_back({"n30_m20_e0.6", "MMDS", 0.987 - 0.06, 0.987 + 0.06});
    checks.push_back({"n30_m20_e0.4", "MMDP", 0.741 - 0.06, 0.741 + 0.06});
    checks.push_back({"n30_m20_e0.6", "MMDP", 0.987 - 0.06, 0.987 + 0.06});
    return check_rates(TableId::T1, checks, workers);
}

Outcome table3_desk(int workers)
{
    return check_rates(TableId::T3,
                       {{"rho0.1_small_e0", "MMD", 0.058 - 0.03, 0.058 + 0.03}, {"rho0.1_small_e0.03", "MMD", 0.95, 1.0}},
                       workers);
}

Outcome table5_desk(int workers)
{
    return check_rates(TableId::T5,
                       {{"rho0.1_small_e0", "MMD", 0.02, 0.08},
                        {"rho0.5_small_e0", "MMD", 0.02, 0.08},
                        {"rho0.9_small_e0", "MMD", 0.02, 0.08},
                        {"rho0.1_small_e0.5", "MMD", 0.95, 1.0},
                        {"rho0.5_small_e0.5", "MMD", 0.93, 1.0},
                        {"rho0.9_small_e0.5", "MMD", 0.95, 1.0}},
                       workers);
}

// Simple regression of each coordinate on [1, x] by closed-form normal equations.
Eigen::MatrixXd scalar_ols(const Eigen::MatrixXd& y, const Eigen::VectorXd& x)
{
    const double xbar = x.mean();
    const double sxx = (x.array() - xbar).square().sum();
    Eigen::MatrixXd beta(2, y.cols());
    for (Eigen::Index k = 0; k < y.cols(); ++k) {
        const double ybar = y.col(k).mean();
        beta(1, k) = ((x.array() - xbar) * (y.col(k).array() - ybar)).sum() / sxx;
        beta(0, k) = ybar - beta(1, k) * xbar;
    }
    return beta;
}

Outcome estimator_equivalences()
{
    double ols_gap = 0.0;
    double small_ball_gap = 0.0;
    double mkm_gap = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        CounterRng rng(derive_key(20240601, {5, seed}));
        const int k = 3 + static_cast<int>(seed % 9);
        const int n = 15 + static_cast<int>(seed);
        const BasisHandle b = fourier_basis(k, 40);
        const Eigen::MatrixXd x = random_matrix(n, 1, rng);
        Eigen::MatrixXd y = random_matrix(n, k, rng);
        y += Eigen::VectorXd::Ones(n) * random_vector(k, rng).transpose() + x * random_vector(k, rng).transpose();
        const FunctionalDataset ds(b, y);
        const DesignMatrix design = DesignMatrix::with_intercept(x);

        const FittedRegression fit = ols_fit(ds, design);
        ols_gap = std::max(ols_gap, (fit.beta - scalar_ols(y, x.col(0))).cwiseAbs().maxCoeff());

        const CovOperator eig = sample_cov(ds, Centering::GrandMean);
        const auto sb = small_ball_fit(ds, design, eig, static_cast<int>(eig.rank()));
        for (Eigen::Index j = 0; j < 2; ++j) {
            small_ball_gap = std::max(small_ball_gap, (sb[j].coeffs() - fit.beta_fn(j).coeffs()).cwiseAbs().maxCoeff());
        }

        const CovOperator m = mkm_cov_eigen(ds);
        const CovOperator s = sample_cov(ds, Centering::None);
        mkm_gap = std::max(mkm_gap, (m.dense() - s.dense()).cwiseAbs().maxCoeff());
    }
    detail("ols_fit vs scalar OLS: max gap " + fmt(ols_gap, 3) + " (limit 1e-10)");
    detail("small_ball_fit at full order vs ols_fit: max gap " + fmt(small_ball_gap, 3) + " (limit 1e-10)");
    detail("mkm_cov_eigen at infinite sigma vs sample_cov: max gap " + fmt(mkm_gap, 3) + " (limit 1e-12)");
    const bool ok = ols_gap <= 1e-10 && small_ball_gap <= 1e-10 && mkm_gap <= 1e-12;
    return {ok, "20 datasets, gaps " + fmt(ols_gap, 2) + " / " + fmt(small_ball_gap, 2) + " / " + fmt(mkm_gap, 2)};
}

Outcome ky_fan_suite()
{
    CounterRng rng(derive_key(20240601, {6}));
    int violations = 0;
    int false_equalities = 0;
    double min_gap = std::numeric_limits<double>::infinity();
    for (int trial = 0; trial < 200; ++trial) {
        const int k = 1 + trial % 11;
        const BasisHandle b = fourier_basis(k, 30);
        const Eigen::MatrixXd a = random_psd(k, rng, 1 + trial % k);
        const Eigen::MatrixXd c = random_psd(k, rng, 1 + (trial / 11) % k);
        const double lhs = 2.0 * det_inv_sqrt_shifted(CovOperator::from_matrix(b, (a + c) / 2.0), 1.0);
        const double rhs =
            det_inv_sqrt_shifted(CovOperator::from_matrix(b, a), 1.0) + det_inv_sqrt_shifted(CovOperator::from_matrix(b, c), 1.0);
        violations += lhs > rhs ? 1 : 0;
        const bool equal = std::abs(rhs - lhs) <= 1e-12;
        false_equalities += equal && (a - c).cwiseAbs().maxCoeff() >= 1e-12 ? 1 : 0;
        min_gap = std::min(min_gap, rhs - lhs);
    }
    int missed_equalities = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const int k = 1 + trial % 11;
        const BasisHandle b = fourier_basis(k, 30);
        const Eigen::MatrixXd a = random_psd(k, rng);
        const double lhs = 2.0 * det_inv_sqrt_shifted(CovOperator::from_matrix(b, a), 1.0);
        const double rhs = 2.0 * det_inv_sqrt_shifted(CovOperator::from_matrix(b, a), 1.0);
        missed_equalities += std::abs(rhs - lhs) <= 1e-12 ? 0 : 1;
    }
    detail("distinct pairs: violations=" + std::to_string(violations) + " equality-branch hits=" +
           std::to_string(false_equalities) + " smallest gap=" + fmt(min_gap, 3));
    detail("identical pairs: equality missed " + std::to_string(missed_equalities) + "/20");
    return {violations == 0 && false_equalities == 0 && missed_equalities == 0,
            "200 distinct PSD pairs, " + std::to_string(violations) + " violations, equality only for A=B"};
}

Outcome null_calibration(int workers)
{
    struct Case {
        TableId table;
        std::string cell;
        std::string statistic;
    };
    const std::vector<Case> cases{{TableId::T1, "n30_m20_e0", "MMDS"},
                                  {TableId::T1, "n30_m20_e0", "MMDP"},
                                  {TableId::T3, "rho0.1_small_e0", "MMD"},
                                  {TableId::T5, "rho0.5_small_e0", "MMD"}};
    RunOptions o;
    o.seed = 7;
    o.workers = workers;
    std::map<std::string, CellResult> cache;
    int failures = 0;
    for (const Case& c : cases) {
        const std::string key = table_name(c.table) + "/" + c.cell;
        if (!cache.count(key)) {
            const auto cells = table_cells(c.table);
            const auto it = std::find_if(cells.begin(), cells.end(), [&](const CellSpec& s) { return s.id == c.cell; });
            cache.emplace(key, run_cell(c.table, *it, o));
        }
        const CellResult& r = cache.at(key);
        const std::size_t k = statistic_index(r, c.statistic);
        const double ks = ks_uniform_p_value(r.p_values[k]);
        const double size = r.rate(k);
        const bool ok = ks > 0.01 && size >= 0.025 && size <= 0.085;
        failures += ok ? 0 : 1;
        detail(std::string(ok ? "ok   " : "FAIL ") + key + " " + c.statistic + " KS p=" + fmt(ks, 3) +
               " size=" + fmt(size) + " (" + std::to_string(r.replicates) + " p-values)");
    }
    return {failures == 0, std::to_string(cases.size() - failures) + "/4 tests calibrated"};
}

Outcome score_identity()
{
    constexpr int kDraws = 100000;
    CounterRng rng(derive_key(20240601, {8}));
    double worst = 0.0;
    int failures = 0;
    for (int pair = 0; pair < 20; ++pair) {
        const int k = 1 + 2 * (pair % 6);
        const double sigma = std::array{0.3, 0.6, 1.0}[pair % 3];
        const BasisHandle b = fourier_basis(k, 40);
        const GaussianMeasure p = random_measure(b, rng, 0.6, 0.4);
        const GaussianMeasure q = random_measure(b, rng, 0.6, 0.4);
        const GaussianSampler sp(p);
        std::vector<double> diff(kDraws);
        for (double& d : diff) {
            const Fn x(b, sp.draw(rng));
            d = 2.0 * (kernel_score(q, x, sigma) - kernel_score(p, x, sigma));
        }
        const double z = z_score(mmd_sq_gaussian(p, q, sigma), mean_se(diff));
        worst = std::max(worst, z);
        failures += z <= 4.0 ? 0 : 1;
        detail("pair " + std::to_string(pair) + " K=" + std::to_string(k) + " mmd_sq=" + fmt(mmd_sq_gaussian(p, q, sigma)) +
               " z=" + fmt(z, 3));
    }
    return {failures == 0, "20 pairs, worst |z| = " + fmt(worst, 3) + " (limit 4)"};
}

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome determinism(const std::string& cli)
{
    struct Run {
        TableId table;
        std::vector<std::string> cells;
    };
    const std::vector<Run> runs{{TableId::T1, {"n30_m10_e0", "n30_m20_e0.4"}},
                                {TableId::T3, {"rho0.1_small_e0.03"}},
                                {TableId::T5, {"rho0.5_small_e0.5"}}};
    int mismatches = 0;
    for (const Run& run : runs) {
        std::string csv;
        std::string json;
        for (const int workers : {1, 2, 3}) {
            RunOptions o;
            o.cells = run.cells;
            o.workers = workers;
            const RunReport r = run_table(run.table, o);
            if (workers == 1) {
                csv = r.to_csv();
                json = r.to_json();
                continue;
            }
            const bool same = r.to_csv() == csv && r.to_json() == json;
            mismatches += same ? 0 : 1;
            detail(table_name(run.table) + " workers=1 vs " + std::to_string(workers) + ": " +
                   (same ? "byte-identical" : "DIFFERENT"));
        }
    }
    if (!cli.empty()) {
        const auto dir = std::filesystem::temp_directory_path() / "kmefda_acceptance_determinism";
        std::filesystem::create_directories(dir);
        for (const int workers : {1, 2}) {
            const std::string cmd = cli + " reproduce --table T1 --cells n30_m10_e0 -j " + std::to_string(workers) +
                                    " --out " + (dir / ("w" + std::to_string(workers))).string() + " >/dev/null";
            if (std::system(cmd.c_str()) != 0) {
                ++mismatches;
            }
        }
        for (const char* ext : {".csv", ".json"}) {
            const bool same = slurp(dir / (std::string("w1") + ext)) == slurp(dir / (std::string("w2") + ext)) &&
                              !slurp(dir / (std::string("w1") + ext)).empty();
            mismatches += same ? 0 : 1;
            detail(std::string("CLI T1 ") + ext + " -j 1 vs -j 2: " + (same ? "byte-identical" : "DIFFERENT"));
        }
        std::filesystem::remove_all(dir);
    }
    return {mismatches == 0, std::to_string(mismatches) + " mismatches across worker counts"};
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Acceptance checks"};
    int criterion = 0;
    int workers = 0;
    std::string cli;
    app.add_option("--criterion", criterion, "criterion number 1-9")->required()->check(CLI::Range(1, 9));
    app.add_option("--workers", workers, "worker threads (0: one per hardware thread)");
    app.add_option("--cli", cli, "path to the kmefda executable");
    CLI11_PARSE(app, argc, argv);

    const std::map<int, std::pair<std::string, std::function<Outcome()>>> criteria{
        {1, {"closed forms vs Monte Carlo", closed_forms_vs_monte_carlo}},
        {2, {"T1 desk-scale rates", [&] { return table1_desk(workers); }}},
        {3, {"T3 desk-scale rates", [&] { return table3_desk(workers); }}},
        {4, {"T5 desk-scale rates", [&] { return table5_desk(workers); }}},
        {5, {"estimator equivalences", estimator_equivalences}},
        {6, {"Ky Fan convexity", ky_fan_suite}},
        {7, {"permutation-null calibration", [&] { return null_calibration(workers); }}},
        {8, {"MMD-score identity", score_identity}},
        {9, {"determinism across worker counts", [&] { return determinism(cli); }}},
    };
    const auto& [name, run] = criteria.at(criterion);
    Outcome outcome;
    try {
        outcome = run();
    } catch (const std::exception& e) {
        outcome = {false, std::string("error: ") + e.what()};
    }
    std::cout << "criterion " << criterion << " (" << name << "): " << (outcome.pass ? "PASS" : "FAIL") << " - "
              << outcome.summary << std::endl;
    return outcome.pass ? 0 : 1;
}
