#include "aquinv/flow.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "aquinv/errors.hpp"

namespace aquinv {

namespace {

double harmonic(double a, double b) { return 2.0 * a * b / (a + b); }

// Transmissibilities of the 5-point stencil. tw/te include the Dirichlet
// half-cell faces at the left/right domain boundary.
struct Stencil {
  Eigen::MatrixXd tw, te, ts, tn;  // west/east/south/north per cell
  Eigen::MatrixXd diag;

  explicit Stencil(const Grid& g, const Eigen::MatrixXd& k) {
    const int h = g.height_cells, w = g.width_cells;
    const double dx = g.dx(), dy = g.dy();
    tw.setZero(h, w);
    te.setZero(h, w);
    ts.setZero(h, w);
    tn.setZero(h, w);
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        if (c > 0) tw(r, c) = dy * harmonic(k(r, c - 1), k(r, c)) / dx;
        if (c + 1 < w) te(r, c) = dy * harmonic(k(r, c), k(r, c + 1)) / dx;
        if (r > 0) ts(r, c) = dx * harmonic(k(r - 1, c), k(r, c)) / dy;
        if (r + 1 < h) tn(r, c) = dx * harmonic(k(r, c), k(r + 1, c)) / dy;
      }
      tw(r, 0) = dy * k(r, 0) / (dx / 2.0);          // Dirichlet left face
      te(r, w - 1) = dy * k(r, w - 1) / (dx / 2.0);  // Dirichlet right face
    }
    diag = tw + te + ts + tn;
  }

  // y = A x with A the SPD operator (diag minus neighbor couplings).
  void apply(const Eigen::MatrixXd& x, Eigen::MatrixXd& y) const {
    const int h = static_cast<int>(x.rows()), w = static_cast<int>(x.cols());
    y = diag.cwiseProduct(x);
    y.block(0, 1, h, w - 1) -= tw.block(0, 1, h, w - 1).cwiseProduct(x.block(0, 0, h, w - 1));
    y.block(0, 0, h, w - 1) -= te.block(0, 0, h, w - 1).cwiseProduct(x.block(0, 1, h, w - 1));
    y.block(1, 0, h - 1, w) -= ts.block(1, 0, h - 1, w).cwiseProduct(x.block(0, 0, h - 1, w));
    y.block(0, 0, h - 1, w) -= tn.block(0, 0, h - 1, w).cwiseProduct(x.block(1, 0, h - 1, w));
  }
};

}  // namespace

Field solve_head(const Grid& grid, const Field& conductivity, const FlowBC& bc,
                 const FlowSolverOptions& options) {
  if (!std::isfinite(bc.left_head) || !std::isfinite(bc.right_head))
    throw std::invalid_argument("solve_head: boundary heads must be finite");
  const Eigen::MatrixXd& k = conductivity.values;
  if ((k.array() <= 0.0).any()) throw std::domain_error("solve_head: conductivity must be positive");

  const int h = grid.height_cells, w = grid.width_cells;
  Stencil st(grid, k);

  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(h, w);
  b.col(0) = st.tw.col(0) * bc.left_head;
  b.col(w - 1) += st.te.col(w - 1) * bc.right_head;

  // Diagonally preconditioned CG.
  Eigen::MatrixXd x = Eigen::MatrixXd::Constant(h, w, 0.5 * (bc.left_head + bc.right_head));
  Eigen::MatrixXd r(h, w), z(h, w), p(h, w), ap(h, w);
  st.apply(x, r);
  r = b - r;
  const double b_norm = b.norm();
  const double tol = options.rel_tolerance * (b_norm > 0.0 ? b_norm : 1.0);
  const long max_iter = static_cast<long>(options.max_iter_factor) * grid.n_cells();

  z = r.cwiseQuotient(st.diag);
  p = z;
  double rz = (r.array() * z.array()).sum();
  long it = 0;
  while (r.norm() > tol) {
    if (it++ >= max_iter)
      throw numeric_error("solve_head: PCG failed to converge, residual " +
                          std::to_string(r.norm() / (b_norm > 0.0 ? b_norm : 1.0)) + " after " +
                          std::to_string(max_iter) + " iterations");
    st.apply(p, ap);
    const double alpha = rz / (p.array() * ap.array()).sum();
    x += alpha * p;
    r -= alpha * ap;
    z = r.cwiseQuotient(st.diag);
    const double rz_new = (r.array() * z.array()).sum();
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }

  return Field(grid, FieldKind::head, std::move(x));
}

VelocityField darcy_velocity(const Grid& grid, const Field& conductivity, const Field& head,
                             double porosity, const FlowBC& bc) {
  if (!(porosity > 0.0 && porosity < 1.0))
    throw std::invalid_argument("darcy_velocity: porosity must lie in (0,1)");
  const Eigen::MatrixXd& k = conductivity.values;
  const Eigen::MatrixXd& hd = head.values;
  const int h = grid.height_cells, w = grid.width_cells;
  const double dx = grid.dx(), dy = grid.dy();

  VelocityField v;
  v.grid = grid;
  v.qx.setZero(h, w + 1);
  v.qy.setZero(h + 1, w);

  for (int r = 0; r < h; ++r) {
    v.qx(r, 0) = -k(r, 0) * (hd(r, 0) - bc.left_head) / (dx / 2.0);
    for (int c = 1; c < w; ++c)
      v.qx(r, c) = -harmonic(k(r, c - 1), k(r, c)) * (hd(r, c) - hd(r, c - 1)) / dx;
    v.qx(r, w) = -k(r, w - 1) * (bc.right_head - hd(r, w - 1)) / (dx / 2.0);
  }
  for (int r = 1; r < h; ++r)
    for (int c = 0; c < w; ++c)
      v.qy(r, c) = -harmonic(k(r - 1, c), k(r, c)) * (hd(r, c) - hd(r - 1, c)) / dy;
  // top/bottom rows of qy stay zero (no-flow)

  v.vx = (v.qx.leftCols(w) + v.qx.rightCols(w)) / (2.0 * porosity);
  v.vy = (v.qy.topRows(h) + v.qy.bottomRows(h)) / (2.0 * porosity);
  return v;
}

double boundary_flux_imbalance(const VelocityField& v) {
  const int w = static_cast<int>(v.qx.cols()) - 1;
  const double dy = v.grid.dy();
  const double in_left = v.qx.col(0).sum() * dy;
  const double out_right = v.qx.col(w).sum() * dy;
  const double scale = 0.5 * (std::abs(in_left) + std::abs(out_right));
  return (in_left - out_right) / (scale > 0.0 ? scale : 1.0);
}

}  // namespace aquinv
