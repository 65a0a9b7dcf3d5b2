#pragma once

#include <Eigen/Core>
#include <vector>

namespace aquinv {

// Uniform rectangular cell grid. Row index runs along the short (y) axis,
// column index along the long (x) axis, so fields are H x W matrices.
struct Grid {
  int height_cells = 0;
  int width_cells = 0;
  double domain_height = 0.0;
  double domain_width = 0.0;

  Grid() = default;
  Grid(int h_cells, int w_cells, double dom_h, double dom_w);

  double dy() const { return domain_height / height_cells; }
  double dx() const { return domain_width / width_cells; }
  int n_cells() const { return height_cells * width_cells; }

  // cell centers
  double cell_x(int col) const { return (col + 0.5) * dx(); }
  double cell_y(int row) const { return (row + 0.5) * dy(); }

  int cell_index(int row, int col) const { return row * width_cells + col; }

  bool operator==(const Grid&) const = default;
};

enum class FieldKind { head, concentration, conductivity, log_conductivity, source_rate };

// Scalar field over a grid. Values are stored H x W.
struct Field {
  Grid grid;
  FieldKind kind = FieldKind::head;
  Eigen::MatrixXd values;

  Field() = default;
  Field(const Grid& g, FieldKind k);
  Field(const Grid& g, FieldKind k, Eigen::MatrixXd vals);

  double& operator()(int row, int col) { return values(row, col); }
  double operator()(int row, int col) const { return values(row, col); }
};

struct CellIndex {
  int row = 0;
  int col = 0;
  bool operator==(const CellIndex&) const = default;
};

// Maps a point to the cell whose area contains it (floor convention);
// points on the right/top domain boundary clamp to the last cell.
// Throws std::domain_error for points outside the domain.
CellIndex locate_cell(const Grid& grid, double x, double y);

// Contaminant source: a point location plus a piecewise-constant
// mass-loading history over strictly increasing segment boundaries.
struct SourceSpec {
  double x = 0.0;
  double y = 0.0;
  Eigen::VectorXd strengths;       // mass-loading rate per segment [M T^-1]
  std::vector<double> boundaries;  // t_0 .. t_{n_seg}, strictly increasing

  SourceSpec() = default;
  SourceSpec(double sx, double sy, Eigen::VectorXd strengths_, std::vector<double> boundaries_);

  int n_segments() const { return static_cast<int>(strengths.size()); }

  // Strength at time t; piecewise constant on [t_{j-1}, t_j), zero outside.
  double strength_at(double t) const;
};

// Default release timing of the case study: five segments [0,2),...,[8,10).
std::vector<double> default_segment_boundaries(int n_segments = 5, double segment_length = 2.0);

// One source image per time segment: image j holds strength j at the source
// cell, zero elsewhere; images beyond the release segments are all-zero.
std::vector<Field> source_images(const Grid& grid, const SourceSpec& source, int n_images);

// Uniform bounds for the source parameters (the "potential area" plus
// strength ranges); used by strict unpacking and prior sampling.
struct SourceBounds {
  double x_min = 3.0, x_max = 5.0;
  double y_min = 4.0, y_max = 6.0;
  double strength_min = 0.0, strength_max = 8.0;

  bool contains(const SourceSpec& s) const;
};

// The uncertain input vector m = (xi_1..xi_nkl, S_lx, S_ly, S_s1..S_sn).
struct ParameterVector {
  Eigen::VectorXd xi;
  SourceSpec source;

  int n_kl() const { return static_cast<int>(xi.size()); }
  int size() const { return n_kl() + 2 + source.n_segments(); }
};

Eigen::VectorXd pack(const ParameterVector& params);

// Inverse of pack. The expected layout (n_kl, n_strengths) and the segment
// boundaries are context, not part of the packed vector; a vector whose
// length disagrees with the layout is rejected. With bounds given,
// out-of-range source parameters are rejected (strict mode).
ParameterVector unpack(const Eigen::VectorXd& vec, int n_kl, int n_strengths,
                       const std::vector<double>& boundaries,
                       const SourceBounds* strict_bounds = nullptr);

}  // namespace aquinv
