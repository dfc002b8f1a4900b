#pragma once

#include "kmefda/basis.hpp"
#include "kmefda/simgen.hpp"

#include <Eigen/Dense>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace kmefda {

/// Curves read from the functional CSV layout
/// `t_1,...,t_T[,covariate...][,group]`.
///
/// Leading columns named `t_<j>` put the curves on make_grid(T); leading
/// numeric headers are taken as explicit time points instead. A column named
/// `group` holds integer labels (re-indexed 1..k in sorted order); every
/// other trailing column is a scalar covariate.
struct CurveTable {
    Grid grid;
    Eigen::MatrixXd values;  // curves x time points
    std::vector<std::string> covariate_names;
    Eigen::MatrixXd covariates;  // curves x covariate columns (may have 0 columns)
    std::optional<std::vector<int>> groups;
};

CurveTable read_curve_csv(std::istream& in);
CurveTable read_curve_csv_file(const std::string& path);

/// Writes a simulated dataset in the same layout, covariate column `x`.
/// Numbers use the shortest round-trip decimal form.
void write_curve_csv(std::ostream& out, const SimulatedData& data);

/// Shortest round-trip decimal text for a double.
std::string format_double(double v);

}  // namespace kmefda
