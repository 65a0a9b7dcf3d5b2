#include "aquinv/grid.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace aquinv {

Grid::Grid(int h_cells, int w_cells, double dom_h, double dom_w)
    : height_cells(h_cells), width_cells(w_cells), domain_height(dom_h), domain_width(dom_w) {
  if (height_cells < 2 || width_cells < 2)
    throw std::invalid_argument("Grid: need at least 2 cells per axis");
  if (!(domain_height > 0.0) || !(domain_width > 0.0))
    throw std::invalid_argument("Grid: domain extents must be positive");
}

Field::Field(const Grid& g, FieldKind k)
    : grid(g), kind(k), values(Eigen::MatrixXd::Zero(g.height_cells, g.width_cells)) {}

Field::Field(const Grid& g, FieldKind k, Eigen::MatrixXd vals) : grid(g), kind(k), values(std::move(vals)) {
  if (values.rows() != grid.height_cells || values.cols() != grid.width_cells)
    throw std::invalid_argument("Field: value matrix shape does not match grid");
}

CellIndex locate_cell(const Grid& grid, double x, double y) {
  if (x < 0.0 || x > grid.domain_width || y < 0.0 || y > grid.domain_height)
    throw std::domain_error("locate_cell: point (" + std::to_string(x) + ", " + std::to_string(y) +
                            ") outside domain");
  int col = static_cast<int>(std::floor(x / grid.dx()));
  int row = static_cast<int>(std::floor(y / grid.dy()));
  if (col >= grid.width_cells) col = grid.width_cells - 1;
  if (row >= grid.height_cells) row = grid.height_cells - 1;
  return {row, col};
}

SourceSpec::SourceSpec(double sx, double sy, Eigen::VectorXd strengths_, std::vector<double> boundaries_)
    : x(sx), y(sy), strengths(std::move(strengths_)), boundaries(std::move(boundaries_)) {
  if (boundaries.size() != static_cast<size_t>(strengths.size()) + 1)
    throw std::invalid_argument("SourceSpec: need n_segments+1 segment boundaries");
  for (size_t i = 0; i + 1 < boundaries.size(); ++i)
    if (!(boundaries[i] < boundaries[i + 1]))
      throw std::invalid_argument("SourceSpec: segment boundaries must be strictly increasing");
  if ((strengths.array() < 0.0).any())
    throw std::invalid_argument("SourceSpec: strengths must be non-negative");
}

double SourceSpec::strength_at(double t) const {
  for (int j = 0; j < n_segments(); ++j)
    if (t >= boundaries[j] && t < boundaries[j + 1]) return strengths[j];
  return 0.0;
}

std::vector<double> default_segment_boundaries(int n_segments, double segment_length) {
  std::vector<double> b(n_segments + 1);
  for (int j = 0; j <= n_segments; ++j) b[j] = segment_length * j;
  return b;
}

std::vector<Field> source_images(const Grid& grid, const SourceSpec& source, int n_images) {
  if (n_images < source.n_segments())
    throw std::invalid_argument("source_images: n_images must cover all release segments");
  const CellIndex cell = locate_cell(grid, source.x, source.y);
  std::vector<Field> images;
  images.reserve(n_images);
  for (int j = 0; j < n_images; ++j) {
    Field img(grid, FieldKind::source_rate);
    if (j < source.n_segments()) img(cell.row, cell.col) = source.strengths[j];
    images.push_back(std::move(img));
  }
  return images;
}

bool SourceBounds::contains(const SourceSpec& s) const {
  if (s.x < x_min || s.x > x_max || s.y < y_min || s.y > y_max) return false;
  return !((s.strengths.array() < strength_min).any() || (s.strengths.array() > strength_max).any());
}

Eigen::VectorXd pack(const ParameterVector& params) {
  const int nkl = params.n_kl();
  const int ns = params.source.n_segments();
  Eigen::VectorXd v(nkl + 2 + ns);
  v.head(nkl) = params.xi;
  v[nkl] = params.source.x;
  v[nkl + 1] = params.source.y;
  v.tail(ns) = params.source.strengths;
  return v;
}

ParameterVector unpack(const Eigen::VectorXd& vec, int n_kl, int n_strengths,
                       const std::vector<double>& boundaries, const SourceBounds* strict_bounds) {
  const int nkl = n_kl;
  if (vec.size() != nkl + 2 + n_strengths)
    throw std::invalid_argument("unpack: vector of length " + std::to_string(vec.size()) +
                                " does not match layout length " +
                                std::to_string(nkl + 2 + n_strengths));
  ParameterVector p;
  p.xi = vec.head(nkl);
  Eigen::VectorXd strengths = vec.tail(n_strengths);
  if (strict_bounds && (strengths.array() < strict_bounds->strength_min).any())
    throw std::invalid_argument("unpack: source strength below prior range");
  // SourceSpec rejects negative strengths regardless of mode.
  p.source = SourceSpec(vec[nkl], vec[nkl + 1], std::move(strengths), boundaries);
  if (strict_bounds && !strict_bounds->contains(p.source))
    throw std::invalid_argument("unpack: source parameters outside prior ranges");
  return p;
}

}  // namespace aquinv
