#include "aquinv/transport.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "aquinv/errors.hpp"

namespace aquinv {

void DispersionSpec::validate() const {
  if (!(alpha_l >= alpha_t) || !(alpha_t >= 0.0))
    throw std::invalid_argument("DispersionSpec: require alpha_l >= alpha_t >= 0");
}

DispersionField dispersion_tensor(const VelocityField& v, const DispersionSpec& spec) {
  spec.validate();
  const int h = static_cast<int>(v.vx.rows()), w = static_cast<int>(v.vx.cols());
  DispersionField d;
  d.dxx.setZero(h, w);
  d.dyy.setZero(h, w);
  d.dxy.setZero(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const double ux = v.vx(r, c), uy = v.vy(r, c);
      const double speed = std::hypot(ux, uy);
      if (!std::isfinite(speed)) throw std::invalid_argument("dispersion_tensor: velocity not finite");
      if (speed == 0.0) continue;
      d.dxx(r, c) = (spec.alpha_l * ux * ux + spec.alpha_t * uy * uy) / speed;
      d.dyy(r, c) = (spec.alpha_l * uy * uy + spec.alpha_t * ux * ux) / speed;
      d.dxy(r, c) = (spec.alpha_l - spec.alpha_t) * ux * uy / speed;
    }
  return d;
}

struct TransportStepper::Impl {
  Grid grid;
  Eigen::MatrixXd qx, qy;          // Darcy face fluxes
  Eigen::MatrixXd dxy;             // cell-center cross dispersion
  Eigen::MatrixXd dxx_face_x;      // H x (W-1), interior x-faces
  Eigen::MatrixXd dyy_face_y;      // (H-1) x W, interior y-faces
  Eigen::SparseMatrix<double> m;   // implicit system matrix
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  double porosity = 0.0, dt = 0.0;
  int n_sub = 1;
  bool has_cross = false;
  Eigen::MatrixXd cross_work;

  // dc/dt contribution of the lagged cross-dispersion fluxes.
  void cross_rate(const Eigen::MatrixXd& c, Eigen::MatrixXd& rate) const {
    const int h = grid.height_cells, w = grid.width_cells;
    const double dx = grid.dx(), dy = grid.dy();
    const double inv_pv = 1.0 / (porosity * dx * dy);
    rate.setZero(h, w);
    for (int r = 0; r < h; ++r) {
      for (int cc = 1; cc < w; ++cc) {
        const double dface = 0.5 * (dxy(r, cc - 1) + dxy(r, cc));
        if (dface == 0.0) continue;
        const int rp = std::min(r + 1, h - 1), rm = std::max(r - 1, 0);
        const double dcdy =
            ((c(rp, cc - 1) + c(rp, cc)) - (c(rm, cc - 1) + c(rm, cc))) / (2.0 * (rp - rm) * dy);
        const double flux = -porosity * dface * dcdy * dy;  // +x direction
        rate(r, cc - 1) -= flux * inv_pv;
        rate(r, cc) += flux * inv_pv;
      }
    }
    for (int r = 1; r < h; ++r) {
      for (int cc = 0; cc < w; ++cc) {
        const double dface = 0.5 * (dxy(r - 1, cc) + dxy(r, cc));
        if (dface == 0.0) continue;
        const int cp = std::min(cc + 1, w - 1), cm = std::max(cc - 1, 0);
        const double dcdx =
            ((c(r - 1, cp) + c(r, cp)) - (c(r - 1, cm) + c(r, cm))) / (2.0 * (cp - cm) * dx);
        const double flux = -porosity * dface * dcdx * dx;  // +y direction
        rate(r - 1, cc) -= flux * inv_pv;
        rate(r, cc) += flux * inv_pv;
      }
    }
  }

  // L-infinity row-sum bound of the cross operator (in dc/dt units); the
  // explicit sub-step must satisfy dt_sub * bound <= ~1.
  double cross_row_sum_bound() const {
    const int h = grid.height_cells, w = grid.width_cells;
    const double dx = grid.dx(), dy = grid.dy();
    Eigen::MatrixXd row_sum = Eigen::MatrixXd::Zero(h, w);
    for (int r = 0; r < h; ++r)
      for (int cc = 1; cc < w; ++cc) {
        const double dface = std::abs(0.5 * (dxy(r, cc - 1) + dxy(r, cc)));
        if (dface == 0.0) continue;
        const int rp = std::min(r + 1, h - 1), rm = std::max(r - 1, 0);
        // four gradient cells, each coupling both receiving cells
        const double coupling = dface / (2.0 * (rp - rm) * dy) * dy / (dx * dy);
        row_sum(r, cc - 1) += 4.0 * coupling;
        row_sum(r, cc) += 4.0 * coupling;
      }
    for (int r = 1; r < h; ++r)
      for (int cc = 0; cc < w; ++cc) {
        const double dface = std::abs(0.5 * (dxy(r - 1, cc) + dxy(r, cc)));
        if (dface == 0.0) continue;
        const int cp = std::min(cc + 1, w - 1), cm = std::max(cc - 1, 0);
        const double coupling = dface / (2.0 * (cp - cm) * dx) * dx / (dx * dy);
        row_sum(r - 1, cc) += 4.0 * coupling;
        row_sum(r, cc) += 4.0 * coupling;
      }
    return row_sum.maxCoeff();
  }
};

TransportStepper::~TransportStepper() = default;
TransportStepper::TransportStepper(TransportStepper&&) noexcept = default;
TransportStepper& TransportStepper::operator=(TransportStepper&&) noexcept = default;

TransportStepper::TransportStepper(const Grid& grid, const VelocityField& v,
                                   const DispersionField& d, double porosity, double dt,
                                   int cross_substeps)
    : impl_(std::make_unique<Impl>()), porosity_(porosity), dt_(dt) {
  if (!(porosity > 0.0 && porosity < 1.0))
    throw std::invalid_argument("TransportStepper: porosity must lie in (0,1)");
  if (!(dt > 0.0)) throw std::invalid_argument("TransportStepper: dt must be positive");

  Impl& im = *impl_;
  im.grid = grid;
  im.qx = v.qx;
  im.qy = v.qy;
  im.dxy = d.dxy;
  im.porosity = porosity;
  im.dt = dt;
  im.has_cross = im.dxy.cwiseAbs().maxCoeff() > 0.0;
  if (cross_substeps > 0) {
    im.n_sub = cross_substeps;
  } else if (im.has_cross) {
    const double bound = im.cross_row_sum_bound();
    im.n_sub = std::max(1, static_cast<int>(std::ceil(dt * bound / 0.9)));
  }

  const int h = grid.height_cells, w = grid.width_cells;
  const double dx = grid.dx(), dy = grid.dy();
  const double vol = dx * dy;

  im.dxx_face_x = 0.5 * (d.dxx.leftCols(w - 1) + d.dxx.rightCols(w - 1));
  im.dyy_face_y = 0.5 * (d.dyy.topRows(h - 1) + d.dyy.bottomRows(h - 1));

  // Implicit operator: M = (phi*V/dt) I - L, with L the into-cell sum of
  // upwind advective and central diagonal-dispersive face contributions.
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<size_t>(5) * grid.n_cells());
  auto idx = [&](int r, int c) { return grid.cell_index(r, c); };
  auto add = [&](int row, int col, double val) { trips.emplace_back(row, col, val); };

  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) add(idx(r, c), idx(r, c), porosity * vol / dt);

  // interior x-faces between (r,c-1) and (r,c)
  for (int r = 0; r < h; ++r) {
    for (int c = 1; c < w; ++c) {
      const double q = im.qx(r, c) * dy;  // volumetric rate through the face
      const int left = idx(r, c - 1), right = idx(r, c);
      const int upw = q >= 0.0 ? left : right;
      add(left, upw, q);    // M -= L, L_into_left += -q c_upw
      add(right, upw, -q);  // L_into_right += +q c_upw
      const double g = porosity * dy * im.dxx_face_x(r, c - 1) / dx;
      add(left, left, g);
      add(left, right, -g);
      add(right, right, g);
      add(right, left, -g);
    }
    // boundary x-faces: outside concentration is zero, dispersive flux zero
    const double q0 = im.qx(r, 0) * dy;
    if (q0 < 0.0) add(idx(r, 0), idx(r, 0), -q0);  // outflow through the left face
    const double qw = im.qx(r, w) * dy;
    if (qw > 0.0) add(idx(r, w - 1), idx(r, w - 1), qw);  // outflow through the right face
  }
  // interior y-faces between (r-1,c) and (r,c); top/bottom faces carry no flux
  for (int r = 1; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double q = im.qy(r, c) * dx;
      const int south = idx(r - 1, c), north = idx(r, c);
      const int upw = q >= 0.0 ? south : north;
      add(south, upw, q);
      add(north, upw, -q);
      const double g = porosity * dx * im.dyy_face_y(r - 1, c) / dy;
      add(south, south, g);
      add(south, north, -g);
      add(north, north, g);
      add(north, south, -g);
    }
  }

  im.m.resize(grid.n_cells(), grid.n_cells());
  im.m.setFromTriplets(trips.begin(), trips.end());
  im.m.makeCompressed();
  im.lu.compute(im.m);
  if (im.lu.info() != Eigen::Success)
    throw numeric_error("TransportStepper: sparse factorization failed");
}

void TransportStepper::reset_accumulators() { injected_ = outflux_ = clamped_ = 0.0; }

int TransportStepper::cross_substeps() const { return impl_->n_sub; }

double TransportStepper::stored_mass(const TransportState& state) const {
  const Grid& g = impl_->grid;
  return porosity_ * g.dx() * g.dy() * state.concentration.values.sum();
}

void TransportStepper::step(TransportState& state, const SourceSpec& source) {
  Impl& im = *impl_;
  const Grid& grid = im.grid;
  const int h = grid.height_cells, w = grid.width_cells;
  const double dx = grid.dx(), dy = grid.dy();
  const double vol = dx * dy;
  const Eigen::MatrixXd& c = state.concentration.values;

  // Lagged cross-dispersion, sub-cycled at its stable explicit step; one
  // sub-step reduces to adding cross fluxes of c^n to the implicit rhs.
  Eigen::MatrixXd rhs;
  if (im.has_cross) {
    Eigen::MatrixXd c_work = c;
    const double dt_sub = dt_ / im.n_sub;
    for (int s = 0; s < im.n_sub; ++s) {
      im.cross_rate(c_work, im.cross_work);
      c_work += dt_sub * im.cross_work;
    }
    rhs = (porosity_ * vol / dt_) * c_work;
  } else {
    rhs = (porosity_ * vol / dt_) * c;
  }

  // Piecewise-constant source evaluated at the step midpoint.
  const double s_mid = source.strength_at(state.time + 0.5 * dt_);
  if (s_mid > 0.0) {
    const CellIndex cell = locate_cell(grid, source.x, source.y);
    rhs(cell.row, cell.col) += s_mid;
    injected_ += s_mid * dt_;
  }

  // Field storage is column-major over (row, col); build the solve vector in
  // cell-index (row-major) order.
  Eigen::VectorXd b(grid.n_cells());
  for (int r = 0; r < h; ++r)
    for (int cc = 0; cc < w; ++cc) b[grid.cell_index(r, cc)] = rhs(r, cc);
  Eigen::VectorXd x = im.lu.solve(b);
  if (im.lu.info() != Eigen::Success) throw numeric_error("TransportStepper: linear solve failed");

  Eigen::MatrixXd& cnew = state.concentration.values;
  for (int r = 0; r < h; ++r)
    for (int cc = 0; cc < w; ++cc) cnew(r, cc) = x[grid.cell_index(r, cc)];

  // Advective boundary outflow evaluated at the end-of-step concentrations,
  // consistent with the implicit face fluxes (keeps the balance telescoping).
  double out_rate = 0.0;
  for (int r = 0; r < h; ++r) {
    const double q0 = im.qx(r, 0) * dy;
    if (q0 < 0.0) out_rate += -q0 * cnew(r, 0);
    const double qw = im.qx(r, w) * dy;
    if (qw > 0.0) out_rate += qw * cnew(r, w - 1);
  }
  outflux_ += out_rate * dt_;

  // The implicit upwind part is monotone. The mixed-derivative cross term is
  // not, and near sharp fronts over empty cells it drains small negative
  // amounts; those are clamped with their mass logged into the balance
  // report. A negative beyond 1% of the field maximum is a scheme failure.
  const double max_abs = cnew.cwiseAbs().maxCoeff();
  const double floor = -1e-2 * std::max(1.0, max_abs);
  double clamped = 0.0;
  for (int r = 0; r < h; ++r)
    for (int cc = 0; cc < w; ++cc)
      if (cnew(r, cc) < 0.0) {
        if (cnew(r, cc) < floor)
          throw numeric_error("TransportStepper: negative concentration " +
                              std::to_string(cnew(r, cc)) + " at t=" + std::to_string(state.time + dt_));
        clamped += -cnew(r, cc) * porosity_ * vol;
        cnew(r, cc) = 0.0;
      }
  clamped_ += clamped;

  state.time += dt_;
}

TransportState advance(const TransportState& state, const VelocityField& v,
                       const DispersionField& d, const SourceSpec& source, const Grid& grid,
                       double porosity, double dt, const TransportOptions& options) {
  if (!(dt > 0.0) || dt > options.max_dt)
    throw std::invalid_argument("advance: dt must lie in (0, max_dt]");
  TransportStepper stepper(grid, v, d, porosity, dt, options.cross_substeps);
  TransportState next = state;
  stepper.step(next, source);
  return next;
}

namespace {

bool divides(double dt, double t) {
  const double k = t / dt;
  return std::abs(k - std::round(k)) < 1e-9 * std::max(1.0, std::abs(k));
}

}  // namespace

std::vector<Field> simulate_with_stepper(TransportStepper& stepper, const Grid& grid,
                                         const SourceSpec& source,
                                         const std::vector<double>& snapshot_times) {
  stepper.reset_accumulators();
  TransportState state{Field(grid, FieldKind::concentration), 0.0};
  std::vector<Field> snapshots;
  snapshots.reserve(snapshot_times.size());
  long steps_done = 0;
  for (double target : snapshot_times) {
    const long steps_to = std::lround(target / stepper.dt());
    while (steps_done < steps_to) {
      stepper.step(state, source);
      ++steps_done;
    }
    snapshots.push_back(state.concentration);
  }
  return snapshots;
}

std::vector<Field> simulate_transport(const Grid& grid, const VelocityField& v,
                                      const DispersionSpec& spec, const SourceSpec& source,
                                      double porosity, const std::vector<double>& snapshot_times,
                                      const TransportOptions& options, MassBalanceReport* report) {
  for (size_t i = 0; i + 1 < snapshot_times.size(); ++i)
    if (!(snapshot_times[i] < snapshot_times[i + 1]))
      throw std::invalid_argument("simulate_transport: snapshot times must be strictly increasing");
  for (double t : snapshot_times)
    if (!divides(options.dt, t))
      throw std::invalid_argument("simulate_transport: dt does not divide snapshot time " +
                                  std::to_string(t));
  for (double t : source.boundaries)
    if (!divides(options.dt, t))
      throw std::invalid_argument("simulate_transport: dt does not divide segment boundary " +
                                  std::to_string(t));

  std::vector<Field> snapshots;
  if (snapshot_times.empty()) return snapshots;

  DispersionField d = dispersion_tensor(v, spec);
  TransportStepper stepper(grid, v, d, porosity, options.dt, options.cross_substeps);
  TransportState state{Field(grid, FieldKind::concentration), 0.0};

  long steps_done = 0;
  for (double target : snapshot_times) {
    const long steps_to = std::lround(target / options.dt);
    while (steps_done < steps_to) {
      stepper.step(state, source);
      ++steps_done;
    }
    snapshots.push_back(state.concentration);
    if (report) {
      MassBalanceRow row;
      row.time = target;
      row.injected = stepper.injected_total();
      row.stored = stepper.stored_mass(state);
      row.outflux = stepper.outflux_total();
      row.clamped = stepper.clamped_total();
      const double scale = std::max(row.injected, 1e-300);
      row.residual_rel = (row.injected - row.stored - row.outflux) / scale;
      report->rows.push_back(row);
    }
  }
  return snapshots;
}

}  // namespace aquinv
