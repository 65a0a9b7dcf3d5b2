#include <doctest.h>

#include <Eigen/Dense>

#include "aquinv/errors.hpp"
#include "aquinv/flow.hpp"
#include "aquinv/transport.hpp"

using namespace aquinv;

namespace {

Field constant_k(const Grid& g, double k) {
  return Field(g, FieldKind::conductivity, Eigen::MatrixXd::Constant(g.height_cells, g.width_cells, k));
}

SourceSpec reference_source() {
  Eigen::VectorXd s(5);
  s << 6.5989, 1.0502, 1.8535, 6.5638, 2.9540;
  return SourceSpec(4.5234, 4.0618, s, default_segment_boundaries());
}

SourceSpec no_source() {
  return SourceSpec(1.0, 1.0, Eigen::VectorXd::Zero(1), std::vector<double>{0.0, 1.0});
}

struct CaseSetup {
  Grid grid;
  VelocityField v;
  CaseSetup(int h, int w, double dh, double dw, double k = 5.0, double phi = 0.25)
      : grid(h, w, dh, dw) {
    Field kf = constant_k(grid, k);
    FlowBC bc{1.0, 0.0};
    Field head = solve_head(grid, kf, bc);
    v = darcy_velocity(grid, kf, head, phi, bc);
  }
};

}  // namespace

TEST_CASE("dispersion tensor formulas") {
  Grid g(2, 2, 1.0, 1.0);
  VelocityField v;
  v.grid = g;
  v.vx.setZero(2, 2);
  v.vy.setZero(2, 2);
  v.qx.setZero(2, 3);
  v.qy.setZero(3, 2);
  DispersionSpec spec{1.0, 0.1};

  SUBCASE("axis-aligned flow") {
    v.vx.setConstant(2.0);
    DispersionField d = dispersion_tensor(v, spec);
    CHECK(d.dxx(0, 0) == doctest::Approx(2.0));       // alpha_l * u
    CHECK(d.dyy(0, 0) == doctest::Approx(0.2));       // alpha_t * u
    CHECK(d.dxy(0, 0) == doctest::Approx(0.0));
  }
  SUBCASE("zero velocity gives zero tensor") {
    DispersionField d = dispersion_tensor(v, spec);
    CHECK(d.dxx.cwiseAbs().maxCoeff() == 0.0);
    CHECK(d.dyy.cwiseAbs().maxCoeff() == 0.0);
    CHECK(d.dxy.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("oblique flow, hand-computed") {
    v.vx.setConstant(3.0);
    v.vy.setConstant(4.0);
    DispersionField d = dispersion_tensor(v, spec);
    CHECK(d.dxx(1, 1) == doctest::Approx(2.12));  // (1*9 + 0.1*16)/5
    CHECK(d.dyy(1, 1) == doctest::Approx(3.38));  // (1*16 + 0.1*9)/5
    CHECK(d.dxy(1, 1) == doctest::Approx(2.16));  // 0.9*12/5
  }
  SUBCASE("invalid dispersivities rejected") {
    CHECK_THROWS_AS(dispersion_tensor(v, DispersionSpec{0.1, 1.0}), std::invalid_argument);
  }
}

TEST_CASE("zero source and zero initial concentration stay zero") {
  CaseSetup s(5, 9, 5.0, 9.0);
  auto fields = simulate_transport(s.grid, s.v, DispersionSpec{}, no_source(), 0.25,
                                   {0.5, 1.0, 1.5}, TransportOptions{0.1, 0.5});
  REQUIRE(fields.size() == 3);
  for (const auto& f : fields) CHECK(f.values.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("uniform concentration with no flow is conserved") {
  Grid g(5, 9, 5.0, 9.0);
  VelocityField v;
  v.grid = g;
  v.vx.setZero(5, 9);
  v.vy.setZero(5, 9);
  v.qx.setZero(5, 10);
  v.qy.setZero(6, 9);

  TransportState state{Field(g, FieldKind::concentration,
                             Eigen::MatrixXd::Constant(5, 9, 3.25)),
                       0.0};
  DispersionField d = dispersion_tensor(v, DispersionSpec{});
  TransportState next = advance(state, v, d, no_source(), g, 0.25, 0.1);
  CHECK((next.concentration.values.array() - 3.25).abs().maxCoeff() < 1e-12);
  CHECK(next.time == doctest::Approx(0.1));
}

TEST_CASE("one implicit step matches a dense direct-solve oracle on a 3x3 grid") {
  CaseSetup s(3, 3, 3.0, 3.0, 2.0);
  const Grid& g = s.grid;
  const double phi = 0.25, dt = 0.1;
  DispersionSpec dspec{1.0, 0.1};
  DispersionField d = dispersion_tensor(s.v, dspec);

  Eigen::MatrixXd c0(3, 3);
  c0 << 0.0, 1.0, 0.5, 2.0, 0.25, 0.0, 0.125, 0.75, 1.5;
  SourceSpec src(1.6, 1.4, (Eigen::VectorXd(1) << 2.0).finished(), {0.0, 5.0});

  TransportState state{Field(g, FieldKind::concentration, c0), 0.0};
  TransportOptions one_shot{0.5, 0.5, 1};  // pin a single cross-term sub-step
  TransportState next = advance(state, s.v, d, src, g, phi, dt, one_shot);

  // Oracle: assemble the same implicit system densely and solve by LU.
  const double dx = g.dx(), dy = g.dy(), vol = dx * dy;
  const int n = g.n_cells();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  auto idx = [&](int r, int c) { return g.cell_index(r, c); };
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      a(idx(r, c), idx(r, c)) += phi * vol / dt;
      b[idx(r, c)] += phi * vol / dt * c0(r, c);
    }
  // x faces
  for (int r = 0; r < 3; ++r) {
    for (int c = 1; c < 3; ++c) {
      const double q = s.v.qx(r, c) * dy;
      const int up = q >= 0 ? idx(r, c - 1) : idx(r, c);
      a(idx(r, c - 1), up) += q;
      a(idx(r, c), up) -= q;
      const double gcoef = phi * dy * 0.5 * (d.dxx(r, c - 1) + d.dxx(r, c)) / dx;
      a(idx(r, c - 1), idx(r, c - 1)) += gcoef;
      a(idx(r, c - 1), idx(r, c)) -= gcoef;
      a(idx(r, c), idx(r, c)) += gcoef;
      a(idx(r, c), idx(r, c - 1)) -= gcoef;
    }
    const double q0 = s.v.qx(r, 0) * dy;
    if (q0 < 0) a(idx(r, 0), idx(r, 0)) -= q0;
    const double qw = s.v.qx(r, 3) * dy;
    if (qw > 0) a(idx(r, 2), idx(r, 2)) += qw;
  }
  // y faces
  for (int r = 1; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      const double q = s.v.qy(r, c) * dx;
      const int up = q >= 0 ? idx(r - 1, c) : idx(r, c);
      a(idx(r - 1, c), up) += q;
      a(idx(r, c), up) -= q;
      const double gcoef = phi * dx * 0.5 * (d.dyy(r - 1, c) + d.dyy(r, c)) / dy;
      a(idx(r - 1, c), idx(r - 1, c)) += gcoef;
      a(idx(r - 1, c), idx(r, c)) -= gcoef;
      a(idx(r, c), idx(r, c)) += gcoef;
      a(idx(r, c), idx(r - 1, c)) -= gcoef;
    }
  // explicit cross-dispersion fluxes from c0
  for (int r = 0; r < 3; ++r)
    for (int c = 1; c < 3; ++c) {
      const double dface = 0.5 * (d.dxy(r, c - 1) + d.dxy(r, c));
      const int rp = std::min(r + 1, 2), rm = std::max(r - 1, 0);
      const double dcdy = ((c0(rp, c - 1) + c0(rp, c)) - (c0(rm, c - 1) + c0(rm, c))) /
                          (2.0 * (rp - rm) * dy);
      const double flux = -phi * dface * dcdy * dy;
      b[idx(r, c - 1)] -= flux;
      b[idx(r, c)] += flux;
    }
  for (int r = 1; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      const double dface = 0.5 * (d.dxy(r - 1, c) + d.dxy(r, c));
      const int cp = std::min(c + 1, 2), cm = std::max(c - 1, 0);
      const double dcdx = ((c0(r - 1, cp) + c0(r, cp)) - (c0(r - 1, cm) + c0(r, cm))) /
                          (2.0 * (cp - cm) * dx);
      const double flux = -phi * dface * dcdx * dx;
      b[idx(r - 1, c)] -= flux;
      b[idx(r, c)] += flux;
    }
  b[idx(locate_cell(g, src.x, src.y).row, locate_cell(g, src.x, src.y).col)] += 2.0;

  Eigen::VectorXd x = a.fullPivLu().solve(b);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      CHECK(next.concentration(r, c) == doctest::Approx(x[idx(r, c)]).epsilon(1e-10));
}

TEST_CASE("simulated transport tracks the injected mass") {
  CaseSetup s(21, 41, 10.0, 20.0);
  std::vector<double> times{2, 4, 6, 8, 10, 12, 14};
  MassBalanceReport report;
  auto fields = simulate_transport(s.grid, s.v, DispersionSpec{}, reference_source(), 0.25, times,
                                   TransportOptions{0.05, 0.5}, &report);
  REQUIRE(fields.size() == 7);
  REQUIRE(report.rows.size() == 7);

  // cumulative injection: 2 * sum of strengths once the release has ended
  CHECK(report.rows[4].time == 10.0);
  CHECK(report.rows[4].injected == doctest::Approx(38.0408));
  CHECK(report.rows[6].injected == doctest::Approx(38.0408));
  CHECK(report.rows[0].injected == doctest::Approx(2.0 * 6.5989));

  for (const auto& row : report.rows) {
    CAPTURE(row.time);
    CHECK(std::abs(row.residual_rel) < 0.01);  // mass accounted within 1%
  }

  SUBCASE("concentrations stay non-negative") {
    for (const auto& f : fields) CHECK(f.values.minCoeff() >= 0.0);
  }
}

TEST_CASE("transport is linear in the source strength") {
  CaseSetup s(9, 17, 10.0, 20.0);
  SourceSpec src = reference_source();
  SourceSpec doubled(src.x, src.y, 2.0 * src.strengths, src.boundaries);
  std::vector<double> times{2, 6, 10};
  auto f1 = simulate_transport(s.grid, s.v, DispersionSpec{}, src, 0.25, times,
                               TransportOptions{0.1, 0.5});
  auto f2 = simulate_transport(s.grid, s.v, DispersionSpec{}, doubled, 0.25, times,
                               TransportOptions{0.1, 0.5});
  for (size_t i = 0; i < times.size(); ++i) {
    const double scale = f1[i].values.cwiseAbs().maxCoeff();
    CHECK((f2[i].values - 2.0 * f1[i].values).cwiseAbs().maxCoeff() < 1e-10 * scale);
  }
}

TEST_CASE("a reused stepper reproduces fresh simulations") {
  CaseSetup s(9, 17, 10.0, 20.0);
  DispersionField d = dispersion_tensor(s.v, DispersionSpec{});
  TransportStepper stepper(s.grid, s.v, d, 0.25, 0.1);
  std::vector<double> times{2, 6, 10};

  SourceSpec a = reference_source();
  SourceSpec b(3.2, 5.5, (Eigen::VectorXd(5) << 1, 2, 3, 4, 5).finished(),
               default_segment_boundaries());
  auto fresh_a = simulate_transport(s.grid, s.v, DispersionSpec{}, a, 0.25, times,
                                    TransportOptions{0.1, 0.5});
  auto fresh_b = simulate_transport(s.grid, s.v, DispersionSpec{}, b, 0.25, times,
                                    TransportOptions{0.1, 0.5});
  auto reused_a = simulate_with_stepper(stepper, s.grid, a, times);
  auto reused_b = simulate_with_stepper(stepper, s.grid, b, times);
  auto reused_a2 = simulate_with_stepper(stepper, s.grid, a, times);
  for (size_t i = 0; i < times.size(); ++i) {
    CHECK((fresh_a[i].values - reused_a[i].values).cwiseAbs().maxCoeff() == 0.0);
    CHECK((fresh_b[i].values - reused_b[i].values).cwiseAbs().maxCoeff() == 0.0);
    CHECK((reused_a[i].values - reused_a2[i].values).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("simulate_transport validates its time arguments") {
  CaseSetup s(5, 9, 5.0, 9.0);
  CHECK(simulate_transport(s.grid, s.v, DispersionSpec{}, no_source(), 0.25, {}).empty());
  CHECK_THROWS_AS(simulate_transport(s.grid, s.v, DispersionSpec{}, no_source(), 0.25, {2.0, 1.0},
                                     TransportOptions{0.1, 0.5}),
                  std::invalid_argument);
  // dt must divide the snapshot times
  CHECK_THROWS_AS(simulate_transport(s.grid, s.v, DispersionSpec{}, no_source(), 0.25, {0.35},
                                     TransportOptions{0.1, 0.5}),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      advance(TransportState{Field(s.grid, FieldKind::concentration), 0.0}, s.v,
              dispersion_tensor(s.v, DispersionSpec{}), no_source(), s.grid, 0.25, 0.9),
      std::invalid_argument);
}
