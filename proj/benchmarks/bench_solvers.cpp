#include <benchmark/benchmark.h>

#include <random>

#include "aquinv/flow.hpp"
#include "aquinv/ilues.hpp"
#include "aquinv/random_field.hpp"
#include "aquinv/rng.hpp"
#include "aquinv/transport.hpp"

using namespace aquinv;

namespace {

Field random_conductivity(const Grid& grid, const KleBasis& basis, std::uint64_t seed) {
  auto rng = make_rng(seed);
  std::normal_distribution<double> gauss;
  Eigen::VectorXd xi =
      Eigen::VectorXd::NullaryExpr(basis.n_kl(), [&](Eigen::Index) { return gauss(rng); });
  Field log_k = synthesize(basis, xi, 2.0);
  return Field(grid, FieldKind::conductivity, log_k.values.array().exp());
}

const Grid& bench_grid() {
  static Grid grid(21, 41, 10.0, 20.0);
  return grid;
}

const KleBasis& bench_basis() {
  static KleBasis basis = decompose(bench_grid(), assemble_covariance(bench_grid(), CovarianceSpec{}), 0.95);
  return basis;
}

}  // namespace

static void CovarianceAssembly(benchmark::State& state) {
  Grid grid(static_cast<int>(state.range(0)), 2 * static_cast<int>(state.range(0)), 10.0, 20.0);
  for (auto _ : state) {
    Eigen::MatrixXd cov = assemble_covariance(grid, CovarianceSpec{});
    benchmark::DoNotOptimize(cov.data());
  }
}
BENCHMARK(CovarianceAssembly)->Arg(11)->Arg(21)->Arg(31);

static void FlowSolve(benchmark::State& state) {
  const Grid& grid = bench_grid();
  Field k = random_conductivity(grid, bench_basis(), 7);
  for (auto _ : state) {
    Field head = solve_head(grid, k, FlowBC{});
    benchmark::DoNotOptimize(head.values.data());
  }
}
BENCHMARK(FlowSolve);

static void TransportRun(benchmark::State& state) {
  const Grid& grid = bench_grid();
  Field k = random_conductivity(grid, bench_basis(), 7);
  Field head = solve_head(grid, k, FlowBC{});
  VelocityField v = darcy_velocity(grid, k, head, 0.25, FlowBC{});
  DispersionField d = dispersion_tensor(v, DispersionSpec{});
  TransportStepper stepper(grid, v, d, 0.25, 0.1);
  SourceSpec source(4.5, 4.1, (Eigen::VectorXd(5) << 6.6, 1.1, 1.9, 6.6, 3.0).finished(),
                    default_segment_boundaries());
  std::vector<double> times{2, 4, 6, 8, 10, 12, 14};
  for (auto _ : state) {
    auto fields = simulate_with_stepper(stepper, grid, source, times);
    benchmark::DoNotOptimize(fields.back().values.data());
  }
}
BENCHMARK(TransportRun);

static void EnsembleUpdate(benchmark::State& state) {
  const int n_l = static_cast<int>(state.range(0)), n_m = 686, n_d = 168;
  auto rng = make_rng(3);
  std::normal_distribution<double> gauss;
  Eigen::MatrixXd m(n_l, n_m), preds(n_l, n_d);
  for (int i = 0; i < n_l; ++i) {
    for (int j = 0; j < n_m; ++j) m(i, j) = gauss(rng);
    for (int j = 0; j < n_d; ++j) preds(i, j) = gauss(rng);
  }
  Eigen::VectorXd d = Eigen::VectorXd::Zero(n_d);
  Eigen::VectorXd cd = Eigen::VectorXd::Constant(n_d, 0.25);
  for (auto _ : state) {
    Eigen::MatrixXd updated = es_update(m, preds, d, cd, rng);
    benchmark::DoNotOptimize(updated.data());
  }
}
BENCHMARK(EnsembleUpdate)->Arg(20)->Arg(100)->Arg(600);
