#include "kmefda/simgen.hpp"

#include "kmefda/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

namespace kmefda {

namespace {

constexpr std::uint64_t kStreamTagData = 0x5EED'DA7A;

std::string trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

double parse_real(const std::string& key, const std::string& text)
{
    double value = 0.0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end || !std::isfinite(value)) {
        fail(ErrorCode::InvalidConfig, "key '" + key + "': expected a real number, got '" + text + "'");
    }
    return value;
}

long long parse_integer(const std::string& key, const std::string& text)
{
    long long value = 0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end) {
        fail(ErrorCode::InvalidConfig, "key '" + key + "': expected an integer, got '" + text + "'");
    }
    return value;
}

int parse_int(const std::string& key, const std::string& text)
{
    const long long v = parse_integer(key, text);
    require(v >= -2147483647LL && v <= 2147483647LL, ErrorCode::InvalidConfig, "key '" + key + "': out of range");
    return static_cast<int>(v);
}

std::string format_real(double v)
{
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return {buf, ptr};
}

std::string_view matern_name(MaternKind k) { return k == MaternKind::SqExp ? "sqexp" : "exp"; }
std::string_view covariate_name(CovariateDist d) { return d == CovariateDist::Normal ? "normal" : "uniform"; }

Eigen::VectorXd grid_vector(const Grid& grid) { return grid.as_vector(); }

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

nlohmann::ordered_json truth_header(const ScenarioConfig& cfg, std::uint64_t replicate, const Grid& grid)
{
    nlohmann::ordered_json j;
    j["protocol"] = protocol_name(cfg.protocol);
    j["seed"] = cfg.seed;
    j["replicate"] = replicate;
    j["effect"] = cfg.effect;
    j["noise"] = cfg.noise.describe();
    j["grid"] = grid.points();
    return j;
}

// T x q matrix of Fourier functions 1..q on the grid.
Eigen::MatrixXd fourier_matrix(const Grid& grid, int q)
{
    Eigen::MatrixXd out(static_cast<Eigen::Index>(grid.size()), q);
    for (std::size_t j = 0; j < grid.size(); ++j) {
        for (int r = 0; r < q; ++r) {
            out(static_cast<Eigen::Index>(j), r) = fourier_value(r + 1, grid[j]);
        }
    }
    return out;
}

}  // namespace

std::string_view protocol_name(Protocol p)
{
    switch (p) {
    case Protocol::FoSRegression: return "fos";
    case Protocol::OneWayAnova: return "anova";
    case Protocol::CovHomogeneity: return "cov";
    }
    return "unknown";
}

Protocol parse_protocol(std::string_view text)
{
    if (text == "fos") {
        return Protocol::FoSRegression;
    }
    if (text == "anova") {
        return Protocol::OneWayAnova;
    }
    if (text == "cov") {
        return Protocol::CovHomogeneity;
    }
    fail(ErrorCode::InvalidConfig, "unknown protocol '" + std::string(text) + "' (expected fos|anova|cov)");
}

NoiseDist NoiseDist::normal() { return {}; }

NoiseDist NoiseDist::scaled_t(double df)
{
    require(df > 2.0, ErrorCode::InvalidArgument, "t noise needs df > 2 for a finite variance");
    return {Kind::ScaledT, df, std::sqrt((df - 2.0) / df)};
}

NoiseDist NoiseDist::scaled_t(double df, double scale)
{
    NoiseDist d{Kind::ScaledT, df, scale};
    d.validate();
    return d;
}

void NoiseDist::validate() const
{
    if (kind == Kind::ScaledT) {
        require(std::isfinite(df) && df > 2.0, ErrorCode::InvalidArgument, "t noise needs df > 2 for a finite variance");
        require(std::isfinite(scale) && scale > 0.0, ErrorCode::InvalidArgument, "t noise scale must be positive");
    }
}

std::string NoiseDist::describe() const
{
    if (kind == Kind::Normal) {
        return "normal";
    }
    return format_real(scale) + "*t" + format_real(df);
}

double draw_one(const NoiseDist& dist, CounterRng& rng)
{
    if (dist.kind == NoiseDist::Kind::Normal) {
        return rng.normal();
    }
    const double z = rng.normal();
    const double chi2 = 2.0 * rng.gamma(0.5 * dist.df);
    return dist.scale * z / std::sqrt(chi2 / dist.df);
}

std::vector<double> draw_noise(const NoiseDist& dist, std::size_t count, CounterRng& rng)
{
    dist.validate();
    std::vector<double> out(count);
    for (double& v : out) {
        v = draw_one(dist, rng);
    }
    return out;
}

ScenarioConfig ScenarioConfig::defaults(Protocol protocol)
{
    ScenarioConfig cfg;
    cfg.protocol = protocol;
    switch (protocol) {
    case Protocol::FoSRegression:
        cfg.grid_size = 20;
        cfg.smoothing_basis = BasisKind::Fourier;
        break;
    case Protocol::OneWayAnova:
        cfg.grid_size = 80;
        cfg.components = 11;
        cfg.decay_rho = 0.1;
        cfg.smoothing_basis = BasisKind::BSpline;
        break;
    case Protocol::CovHomogeneity:
        cfg.grid_size = 80;
        cfg.components = 41;
        cfg.decay_rho = 0.1;
        cfg.smoothing_basis = BasisKind::BSpline;
        break;
    }
    return cfg;
}

void ScenarioConfig::validate() const
{
    auto bad = [](const std::string& msg) { fail(ErrorCode::InvalidConfig, msg); };
    if (!(std::isfinite(effect) && effect >= 0.0)) {
        bad("effect must be a finite nonnegative real");
    }
    if (grid_size < 2) {
        bad("grid_size must be at least 2");
    }
    if (smoothing_components < 1) {
        bad("smoothing_components must be positive");
    }
    if (smoothing_basis == BasisKind::BSpline && (bspline_order < 2 || effective_smoothing_components() < bspline_order)) {
        bad("B-spline smoothing needs order >= 2 and at least `order` components");
    }
    try {
        noise.validate();
    } catch (const Error& e) {
        bad(e.what());
    }
    if (protocol == Protocol::FoSRegression) {
        if (n < 3) {
            bad("n must be at least 3");
        }
        if (!(std::isfinite(matern_rho) && matern_rho > 0.0)) {
            bad("matern_rho must be positive");
        }
        return;
    }
    if (group_sizes.size() < 2) {
        bad("group_sizes needs at least two groups");
    }
    for (const int s : group_sizes) {
        if (s < 2) {
            bad("every group size must be at least 2");
        }
    }
    if (!(decay_rho > 0.0 && decay_rho < 1.0)) {
        bad("decay_rho must lie in (0, 1)");
    }
    if (!(std::isfinite(decay_a) && decay_a > 0.0)) {
        bad("decay_a must be positive");
    }
    if (components < 1) {
        bad("components must be at least 1");
    }
    if (protocol == Protocol::CovHomogeneity) {
        if (components < 2) {
            bad("the covariance protocol perturbs the second component, so components must be >= 2");
        }
        if (perturbation_basis == BasisKind::BSpline && (components > grid_size || components < 4)) {
            bad("a B-spline perturbation basis needs 4 <= components <= grid_size");
        }
    }
}

int ScenarioConfig::effective_smoothing_components() const
{
    if (smoothing_basis == BasisKind::Fourier) {
        const int odd_cap = grid_size % 2 == 1 ? grid_size : grid_size - 1;
        return std::min(smoothing_components, odd_cap);
    }
    return std::min(smoothing_components, std::max(bspline_order, 2 * grid_size / 3));
}

Eigen::Index ScenarioConfig::total_samples() const
{
    if (protocol == Protocol::FoSRegression) {
        return n;
    }
    Eigen::Index total = 0;
    for (const int s : group_sizes) {
        total += s;
    }
    return total;
}

std::string ScenarioConfig::to_text() const
{
    std::ostringstream out;
    out << "protocol = " << protocol_name(protocol) << "\n";
    if (protocol == Protocol::FoSRegression) {
        out << "n = " << n << "\n";
    } else {
        out << "group_sizes = ";
        for (std::size_t i = 0; i < group_sizes.size(); ++i) {
            out << (i ? "," : "") << group_sizes[i];
        }
        out << "\n";
    }
    out << "grid_size = " << grid_size << "\n";
    out << "effect = " << format_real(effect) << "\n";
    if (protocol == Protocol::FoSRegression) {
        out << "matern_kind = " << matern_name(matern_kind) << "\n";
        out << "matern_rho = " << format_real(matern_rho) << "\n";
        out << "covariate = " << covariate_name(covariate) << "\n";
    } else {
        out << "decay_a = " << format_real(decay_a) << "\n";
        out << "decay_rho = " << format_real(decay_rho) << "\n";
        out << "components = " << components << "\n";
    }
    if (protocol == Protocol::CovHomogeneity) {
        out << "perturbation_basis = " << basis_kind_name(perturbation_basis) << "\n";
        out << "envelope = " << (envelope_by_index ? "index" : "unit") << "\n";
    }
    if (noise.kind == NoiseDist::Kind::Normal) {
        out << "noise = normal\n";
    } else {
        out << "noise = t\n";
        out << "noise_df = " << format_real(noise.df) << "\n";
        out << "noise_scale = " << format_real(noise.scale) << "\n";
    }
    out << "smoothing_basis = " << basis_kind_name(smoothing_basis) << "\n";
    out << "smoothing_components = " << smoothing_components << "\n";
    out << "bspline_order = " << bspline_order << "\n";
    out << "seed = " << seed << "\n";
    return out.str();
}

ScenarioConfig ScenarioConfig::from_text(const std::string& text)
{
    std::map<std::string, std::string> pairs;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        const std::string body = trim(std::string_view(line).substr(0, hash));
        if (body.empty()) {
            continue;
        }
        const auto eq = body.find('=');
        if (eq == std::string::npos) {
            fail(ErrorCode::InvalidConfig, "line " + std::to_string(line_no) + ": expected `key = value`");
        }
        const std::string key = trim(std::string_view(body).substr(0, eq));
        const std::string value = trim(std::string_view(body).substr(eq + 1));
        if (key.empty()) {
            fail(ErrorCode::InvalidConfig, "line " + std::to_string(line_no) + ": empty key");
        }
        if (!pairs.emplace(key, value).second) {
            fail(ErrorCode::InvalidConfig, "line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
        }
    }

    static const std::vector<std::string> known{
        "protocol",   "n",          "group_sizes", "grid_size",          "effect",
        "matern_kind", "matern_rho", "covariate",  "decay_a",            "decay_rho",
        "components", "perturbation_basis", "envelope", "noise", "noise_df",         "noise_scale",
        "smoothing_basis", "smoothing_components", "bspline_order",      "seed"};
    std::string unknown;
    for (const auto& [key, value] : pairs) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            unknown += (unknown.empty() ? "" : ", ") + key;
        }
    }
    if (!unknown.empty()) {
        fail(ErrorCode::InvalidConfig, "unknown config keys: " + unknown);
    }
    const auto proto = pairs.find("protocol");
    if (proto == pairs.end()) {
        fail(ErrorCode::InvalidConfig, "missing required key 'protocol'");
    }
    ScenarioConfig cfg = defaults(parse_protocol(proto->second));

    auto get = [&](const char* key) -> const std::string* {
        const auto it = pairs.find(key);
        return it == pairs.end() ? nullptr : &it->second;
    };
    if (const auto* v = get("n")) {
        cfg.n = parse_int("n", *v);
    }
    if (const auto* v = get("group_sizes")) {
        cfg.group_sizes.clear();
        std::stringstream items(*v);
        std::string item;
        while (std::getline(items, item, ',')) {
            cfg.group_sizes.push_back(parse_int("group_sizes", trim(item)));
        }
    }
    if (const auto* v = get("grid_size")) {
        cfg.grid_size = parse_int("grid_size", *v);
    }
    if (const auto* v = get("effect")) {
        cfg.effect = parse_real("effect", *v);
    }
    if (const auto* v = get("matern_kind")) {
        if (*v == "sqexp") {
            cfg.matern_kind = MaternKind::SqExp;
        } else if (*v == "exp") {
            cfg.matern_kind = MaternKind::Exp;
        } else {
            fail(ErrorCode::InvalidConfig, "key 'matern_kind': expected sqexp|exp, got '" + *v + "'");
        }
    }
    if (const auto* v = get("matern_rho")) {
        cfg.matern_rho = parse_real("matern_rho", *v);
    }
    if (const auto* v = get("covariate")) {
        if (*v == "normal") {
            cfg.covariate = CovariateDist::Normal;
        } else if (*v == "uniform") {
            cfg.covariate = CovariateDist::Uniform;
        } else {
            fail(ErrorCode::InvalidConfig, "key 'covariate': expected normal|uniform, got '" + *v + "'");
        }
    }
    if (const auto* v = get("decay_a")) {
        cfg.decay_a = parse_real("decay_a", *v);
    }
    if (const auto* v = get("decay_rho")) {
        cfg.decay_rho = parse_real("decay_rho", *v);
    }
    if (const auto* v = get("components")) {
        cfg.components = parse_int("components", *v);
    }
    auto parse_basis = [](const std::string& key, const std::string& v) {
        try {
            return parse_basis_kind(v);
        } catch (const Error&) {
            fail(ErrorCode::InvalidConfig, "key '" + key + "': expected fourier|bspline, got '" + v + "'");
        }
    };
    if (const auto* v = get("perturbation_basis")) {
        cfg.perturbation_basis = parse_basis("perturbation_basis", *v);
    }
    if (const auto* v = get("envelope")) {
        if (*v != "index" && *v != "unit") {
            fail(ErrorCode::InvalidConfig, "key 'envelope': expected index|unit, got '" + *v + "'");
        }
        cfg.envelope_by_index = *v == "index";
    }
    if (const auto* v = get("noise")) {
        if (*v == "normal") {
            cfg.noise = NoiseDist::normal();
        } else if (*v == "t") {
            const auto* df = get("noise_df");
            if (df == nullptr) {
                fail(ErrorCode::InvalidConfig, "noise = t requires noise_df");
            }
            const double d = parse_real("noise_df", *df);
            if (!(d > 2.0)) {
                fail(ErrorCode::InvalidConfig, "key 'noise_df': df must exceed 2 for a finite variance");
            }
            cfg.noise = NoiseDist::scaled_t(d);
            if (const auto* s = get("noise_scale")) {
                cfg.noise.scale = parse_real("noise_scale", *s);
            }
        } else {
            fail(ErrorCode::InvalidConfig, "key 'noise': expected normal|t, got '" + *v + "'");
        }
    } else if (get("noise_df") != nullptr || get("noise_scale") != nullptr) {
        fail(ErrorCode::InvalidConfig, "noise_df/noise_scale need noise = t");
    }
    if (const auto* v = get("smoothing_basis")) {
        cfg.smoothing_basis = parse_basis("smoothing_basis", *v);
    }
    if (const auto* v = get("smoothing_components")) {
        cfg.smoothing_components = parse_int("smoothing_components", *v);
    }
    if (const auto* v = get("bspline_order")) {
        cfg.bspline_order = parse_int("bspline_order", *v);
    }
    if (const auto* v = get("seed")) {
        const long long s = parse_integer("seed", *v);
        if (s < 0) {
            fail(ErrorCode::InvalidConfig, "key 'seed': must be nonnegative");
        }
        cfg.seed = static_cast<std::uint64_t>(s);
    }
    cfg.validate();
    return cfg;
}

ScenarioConfig ScenarioConfig::from_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        fail(ErrorCode::IoError, "cannot read config file '" + path + "'");
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return from_text(buffer.str());
}

std::string config_key_reference()
{
    return "protocol: fos | anova | cov (required)\n"
           "n: sample size for fos (default 30)\n"
           "group_sizes: comma-separated group sizes for anova/cov (default 20,30,30)\n"
           "grid_size: number of equally spaced time points t_j = j/(T+1) (fos 20, anova/cov 80)\n"
           "effect: c0 for fos, delta for anova, omega for cov (default 0)\n"
           "matern_kind: sqexp | exp noise kernel for fos (default sqexp)\n"
           "matern_rho: Matern length scale for fos (default 1)\n"
           "covariate: normal | uniform scalar covariate law for fos (default normal)\n"
           "decay_a: leading eigenvalue a in lambda_r = a rho^(r-1) (default 1.5)\n"
           "decay_rho: eigenvalue decay rho in (0,1) (default 0.1)\n"
           "components: number q of noise components (anova 11, cov 41)\n"
           "perturbation_basis: fourier | bspline family phi_r for cov (default fourier)\n"
           "envelope: index | unit, argument of h(t) = T/(t+1) for cov: observation index 1..T or t_j (default index)\n"
           "noise: normal | t (default normal)\n"
           "noise_df: degrees of freedom for t noise, > 2\n"
           "noise_scale: multiplier for t noise (default sqrt((df-2)/df), unit variance)\n"
           "smoothing_basis: fourier | bspline (fos fourier, anova/cov bspline)\n"
           "smoothing_components: smoothing basis size K (default 41)\n"
           "bspline_order: B-spline order (default 4, cubic)\n"
           "seed: nonnegative 64-bit seed (default 1)\n";
}

Eigen::VectorXd decay_eigenvalues(double a, double rho, int q)
{
    Eigen::VectorXd out(q);
    for (int r = 0; r < q; ++r) {
        out[r] = a * std::pow(rho, r);
    }
    return out;
}

Eigen::MatrixXd matern_kernel_matrix(MaternKind kind, double rho, const Grid& grid)
{
    require(std::isfinite(rho) && rho > 0.0, ErrorCode::InvalidArgument, "Matern rho must be positive");
    const auto count = static_cast<Eigen::Index>(grid.size());
    Eigen::MatrixXd k(count, count);
    for (Eigen::Index a = 0; a < count; ++a) {
        for (Eigen::Index b = 0; b < count; ++b) {
            const double d = std::abs(grid[a] - grid[b]);
            k(a, b) = kind == MaternKind::SqExp ? std::exp(-d * d / rho) : std::exp(-d / rho);
        }
    }
    return k;
}

CovOperator matern_cov(MaternKind kind, double rho, const Grid& grid, const BasisHandle& basis)
{
    require(basis->grid() == grid, ErrorCode::IncompatibleBasis, "basis lives on a different grid");
    const Eigen::MatrixXd k = matern_kernel_matrix(kind, rho, grid);
    const Eigen::VectorXd w = grid.quadrature_weights();
    const Eigen::MatrixXd wphi = w.asDiagonal() * basis->design();
    return {basis, eigh_symmetrized(wphi.transpose() * k * wphi)};
}

CounterRng scenario_stream(const ScenarioConfig& cfg, std::uint64_t replicate)
{
    return CounterRng::stream(cfg.seed, {kStreamTagData, static_cast<std::uint64_t>(cfg.protocol), replicate});
}

SimulatedData gen_fos_regression(const ScenarioConfig& cfg, std::uint64_t replicate)
{
    require(cfg.protocol == Protocol::FoSRegression, ErrorCode::InvalidConfig, "config is not a fos scenario");
    cfg.validate();
    const Grid grid = make_grid(cfg.grid_size);
    const Eigen::VectorXd t = grid_vector(grid);
    const Eigen::Index m = t.size();
    CounterRng rng = scenario_stream(cfg, replicate);

    Eigen::MatrixXd x(cfg.n, 1);
    for (int i = 0; i < cfg.n; ++i) {
        x(i, 0) = cfg.covariate == CovariateDist::Normal ? rng.normal() : rng.uniform();
    }

    const EigenSystem kl = eigh_symmetrized(matern_kernel_matrix(cfg.matern_kind, cfg.matern_rho, grid));
    const Eigen::MatrixXd loading = kl.vectors * kl.values.cwiseSqrt().asDiagonal();

    const Eigen::VectorXd alpha = 2.0 * t;
    const Eigen::VectorXd beta = -cfg.effect * (std::numbers::pi * t.array()).cos().matrix();

    Eigen::MatrixXd raw(cfg.n, m);
    Eigen::VectorXd z(m);
    for (int i = 0; i < cfg.n; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) {
            z[j] = draw_one(cfg.noise, rng);
        }
        raw.row(i) = (alpha + x(i, 0) * beta + loading * z).transpose();
    }

    nlohmann::ordered_json truth = truth_header(cfg, replicate, grid);
    truth["alpha"] = to_std(alpha);
    truth["beta"] = to_std(beta);
    truth["matern_kind"] = matern_name(cfg.matern_kind);
    truth["matern_rho"] = cfg.matern_rho;
    truth["covariate"] = covariate_name(cfg.covariate);
    return {grid, std::move(raw), std::move(x), std::nullopt, std::move(truth)};
}

namespace {

std::vector<int> labels_for(const std::vector<int>& sizes)
{
    std::vector<int> labels;
    for (std::size_t g = 0; g < sizes.size(); ++g) {
        labels.insert(labels.end(), static_cast<std::size_t>(sizes[g]), static_cast<int>(g + 1));
    }
    return labels;
}

}  // namespace

SimulatedData gen_anova(const ScenarioConfig& cfg, std::uint64_t replicate)
{
    require(cfg.protocol == Protocol::OneWayAnova, ErrorCode::InvalidConfig, "config is not an anova scenario");
    cfg.validate();
    const Grid grid = make_grid(cfg.grid_size);
    const Eigen::VectorXd t = grid_vector(grid);
    const Eigen::Index m = t.size();
    const int q = cfg.components;
    CounterRng rng = scenario_stream(cfg, replicate);

    const Eigen::VectorXd lambda = decay_eigenvalues(cfg.decay_a, cfg.decay_rho, q);
    const Eigen::MatrixXd loading = fourier_matrix(grid, q) * lambda.cwiseSqrt().asDiagonal();

    Eigen::MatrixXd poly(m, 4);
    poly.col(0).setOnes();
    poly.col(1) = t;
    poly.col(2) = t.array().square().matrix();
    poly.col(3) = t.array().cube().matrix();
    const Eigen::Vector4d c1(1.0, 2.3, 3.4, 1.5);
    const Eigen::Vector4d u = Eigen::Vector4d(1.0, 2.0, 3.0, 4.0) / std::sqrt(30.0);

    const std::vector<int> labels = labels_for(cfg.group_sizes);
    const auto total = static_cast<Eigen::Index>(labels.size());
    Eigen::MatrixXd means(static_cast<Eigen::Index>(cfg.group_sizes.size()), m);
    for (std::size_t g = 0; g < cfg.group_sizes.size(); ++g) {
        const Eigen::Vector4d c = c1 + static_cast<double>(g) * cfg.effect * u;
        means.row(static_cast<Eigen::Index>(g)) = (poly * c).transpose();
    }

    Eigen::MatrixXd raw(total, m);
    Eigen::VectorXd z(q);
    for (Eigen::Index i = 0; i < total; ++i) {
        for (int r = 0; r < q; ++r) {
            z[r] = draw_one(cfg.noise, rng);
        }
        raw.row(i) = means.row(labels[static_cast<std::size_t>(i)] - 1) + (loading * z).transpose();
    }

    nlohmann::ordered_json truth = truth_header(cfg, replicate, grid);
    std::vector<std::vector<double>> mean_rows;
    for (Eigen::Index g = 0; g < means.rows(); ++g) {
        mean_rows.push_back(to_std(means.row(g).transpose()));
    }
    truth["group_sizes"] = cfg.group_sizes;
    truth["group_means"] = mean_rows;
    truth["eigenvalues"] = to_std(lambda);
    truth["eigenfunctions"] = "fourier";
    return {grid, std::move(raw), std::nullopt, labels, std::move(truth)};
}

SimulatedData gen_cov_scenario(const ScenarioConfig& cfg, std::uint64_t replicate)
{
    require(cfg.protocol == Protocol::CovHomogeneity, ErrorCode::InvalidConfig, "config is not a cov scenario");
    cfg.validate();
    const Grid grid = make_grid(cfg.grid_size);
    const Eigen::VectorXd t = grid_vector(grid);
    const Eigen::Index m = t.size();
    const int q = cfg.components;
    CounterRng rng = scenario_stream(cfg, replicate);

    const Eigen::VectorXd lambda = decay_eigenvalues(cfg.decay_a, cfg.decay_rho, q);
    const Eigen::MatrixXd phi = cfg.perturbation_basis == BasisKind::Fourier
                                    ? fourier_matrix(grid, q)
                                    : build_basis(BasisKind::BSpline, q, grid, 4)->design();
    const Eigen::VectorXd arg =
        cfg.envelope_by_index ? Eigen::VectorXd::LinSpaced(m, 1.0, static_cast<double>(m)) : t;
    const Eigen::VectorXd h = static_cast<double>(cfg.grid_size) / (arg.array() + 1.0);

    const std::vector<int> labels = labels_for(cfg.group_sizes);
    const auto total = static_cast<Eigen::Index>(labels.size());
    const auto k = static_cast<Eigen::Index>(cfg.group_sizes.size());

    // Loadings per group: h(t) sqrt(lambda_r) psi_ir(t).
    std::vector<Eigen::MatrixXd> loadings;
    for (Eigen::Index g = 0; g < k; ++g) {
        Eigen::MatrixXd psi = phi;
        psi.col(1) += (static_cast<double>(g) * cfg.effect) * h.cwiseInverse();
        loadings.push_back(h.asDiagonal() * psi * lambda.cwiseSqrt().asDiagonal());
    }

    Eigen::MatrixXd raw(total, m);
    Eigen::VectorXd z(q);
    for (Eigen::Index i = 0; i < total; ++i) {
        for (int r = 0; r < q; ++r) {
            z[r] = draw_one(cfg.noise, rng);
        }
        raw.row(i) = (loadings[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)] - 1)] * z).transpose();
    }

    nlohmann::ordered_json truth = truth_header(cfg, replicate, grid);
    truth["group_sizes"] = cfg.group_sizes;
    truth["eigenvalues"] = to_std(lambda);
    truth["h"] = to_std(h);
    truth["perturbation_basis"] = basis_kind_name(cfg.perturbation_basis);
    return {grid, std::move(raw), std::nullopt, labels, std::move(truth)};
}

SimulatedData generate(const ScenarioConfig& cfg, std::uint64_t replicate)
{
    switch (cfg.protocol) {
    case Protocol::FoSRegression: return gen_fos_regression(cfg, replicate);
    case Protocol::OneWayAnova: return gen_anova(cfg, replicate);
    case Protocol::CovHomogeneity: return gen_cov_scenario(cfg, replicate);
    }
    fail(ErrorCode::InvalidConfig, "unknown protocol");
}

}  // namespace kmefda
