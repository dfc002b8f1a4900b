#include "kmefda/csvio.hpp"

#include "kmefda/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>

namespace kmefda {

namespace {

std::string trim(const std::string& s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& line)
{
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (;;) {
        const auto comma = line.find(',', start);
        cells.push_back(trim(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
        if (comma == std::string::npos) {
            return cells;
        }
        start = comma + 1;
    }
}

std::optional<double> to_real(const std::string& cell)
{
    double v = 0.0;
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    if (begin != end && *begin == '+') {
        ++begin;
    }
    const auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc{} || ptr != end || begin == end) {
        return std::nullopt;
    }
    return v;
}

std::optional<int> time_index(const std::string& header)
{
    if (header.size() < 3 || header[0] != 't' || header[1] != '_') {
        return std::nullopt;
    }
    int j = 0;
    const auto [ptr, ec] = std::from_chars(header.data() + 2, header.data() + header.size(), j);
    if (ec != std::errc{} || ptr != header.data() + header.size()) {
        return std::nullopt;
    }
    return j;
}

[[noreturn]] void parse_fail(int line, const std::string& msg)
{
    fail(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + msg);
}

}  // namespace

std::string format_double(double v)
{
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return {buf, ptr};
}

CurveTable read_curve_csv(std::istream& in)
{
    std::string line;
    int line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) {
            line.erase(0, 3);
        }
        if (!trim(line).empty()) {
            header = split(line);
            break;
        }
    }
    if (header.empty()) {
        fail(ErrorCode::ParseError, "line 1: missing header row");
    }
    const int header_line = line_no;

    // Leading time columns: all `t_<j>` (j = 1..T in order) or all numeric.
    std::size_t time_cols = 0;
    const bool named = time_index(header[0]).has_value();
    std::vector<double> points;
    for (; time_cols < header.size(); ++time_cols) {
        const std::string& h = header[time_cols];
        if (named) {
            const auto j = time_index(h);
            if (!j) {
                break;
            }
            if (*j != static_cast<int>(time_cols) + 1) {
                parse_fail(header_line, "time columns must be t_1..t_T in order, found '" + h + "'");
            }
        } else {
            const auto v = to_real(h);
            if (!v) {
                break;
            }
            points.push_back(*v);
        }
    }
    if (time_cols < 2) {
        fail(ErrorCode::SchemaError, "header needs at least two time columns (t_1,t_2,... or numeric time points)");
    }
    std::optional<Grid> grid;
    try {
        grid = named ? make_grid(static_cast<int>(time_cols)) : Grid::from_points(points);
    } catch (const Error& e) {
        parse_fail(header_line, std::string("bad time points: ") + e.what());
    }

    std::optional<std::size_t> group_col;
    std::vector<std::size_t> cov_cols;
    std::vector<std::string> cov_names;
    std::set<std::string> seen;
    for (std::size_t c = time_cols; c < header.size(); ++c) {
        const std::string& h = header[c];
        if (h.empty()) {
            parse_fail(header_line, "empty column name in column " + std::to_string(c + 1));
        }
        if (!seen.insert(h).second) {
            parse_fail(header_line, "duplicate column name '" + h + "'");
        }
        if (h == "group") {
            group_col = c;
        } else {
            cov_cols.push_back(c);
            cov_names.push_back(h);
        }
    }

    std::vector<std::vector<double>> curves;
    std::vector<std::vector<double>> covs;
    std::vector<long long> raw_groups;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        const auto cells = split(line);
        if (cells.size() != header.size()) {
            parse_fail(line_no, "expected " + std::to_string(header.size()) + " fields, found " +
                                    std::to_string(cells.size()));
        }
        std::vector<double> curve(time_cols);
        for (std::size_t c = 0; c < time_cols; ++c) {
            const auto v = to_real(cells[c]);
            if (!v || !std::isfinite(*v)) {
                parse_fail(line_no, "column " + std::to_string(c + 1) + ": '" + cells[c] + "' is not a finite number");
            }
            curve[c] = *v;
        }
        std::vector<double> cov_row;
        for (const std::size_t c : cov_cols) {
            const auto v = to_real(cells[c]);
            if (!v || !std::isfinite(*v)) {
                parse_fail(line_no, "column '" + header[c] + "': '" + cells[c] + "' is not a finite number");
            }
            cov_row.push_back(*v);
        }
        if (group_col) {
            const std::string& cell = cells[*group_col];
            long long g = 0;
            const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), g);
            if (ec != std::errc{} || ptr != cell.data() + cell.size() || cell.empty()) {
                parse_fail(line_no, "group label '" + cell + "' is not an integer");
            }
            raw_groups.push_back(g);
        }
        curves.push_back(std::move(curve));
        covs.push_back(std::move(cov_row));
    }
    if (curves.empty()) {
        fail(ErrorCode::SchemaError, "file has a header but no curves");
    }

    const auto n = static_cast<Eigen::Index>(curves.size());
    CurveTable out{*grid, Eigen::MatrixXd(n, static_cast<Eigen::Index>(time_cols)), cov_names,
                   Eigen::MatrixXd(n, static_cast<Eigen::Index>(cov_cols.size())), std::nullopt};
    for (Eigen::Index i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < time_cols; ++c) {
            out.values(i, static_cast<Eigen::Index>(c)) = curves[i][c];
        }
        for (std::size_t c = 0; c < cov_cols.size(); ++c) {
            out.covariates(i, static_cast<Eigen::Index>(c)) = covs[i][c];
        }
    }
    if (group_col) {
        const std::set<long long> distinct(raw_groups.begin(), raw_groups.end());
        std::map<long long, int> index;
        int next = 1;
        for (const long long g : distinct) {
            index[g] = next++;
        }
        std::vector<int> labels;
        for (const long long g : raw_groups) {
            labels.push_back(index[g]);
        }
        out.groups = std::move(labels);
    }
    return out;
}

CurveTable read_curve_csv_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        fail(ErrorCode::IoError, "cannot read data file '" + path + "'");
    }
    return read_curve_csv(in);
}

void write_curve_csv(std::ostream& out, const SimulatedData& data)
{
    const Eigen::Index m = data.raw.cols();
    for (Eigen::Index j = 0; j < m; ++j) {
        out << (j ? "," : "") << "t_" << (j + 1);
    }
    const Eigen::Index p = data.covariates ? data.covariates->cols() : 0;
    for (Eigen::Index c = 0; c < p; ++c) {
        out << "," << (p == 1 ? std::string("x") : "x" + std::to_string(c + 1));
    }
    if (data.groups) {
        out << ",group";
    }
    out << "\n";
    for (Eigen::Index i = 0; i < data.raw.rows(); ++i) {
        for (Eigen::Index j = 0; j < m; ++j) {
            out << (j ? "," : "") << format_double(data.raw(i, j));
        }
        for (Eigen::Index c = 0; c < p; ++c) {
            out << "," << format_double((*data.covariates)(i, c));
        }
        if (data.groups) {
            out << "," << (*data.groups)[static_cast<std::size_t>(i)];
        }
        out << "\n";
    }
}

}  // namespace kmefda
