#include "aquinv/random_field.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <fstream>
#include <json.hpp>

#include "aquinv/errors.hpp"
#include "aquinv/io/tensor_file.hpp"

namespace aquinv {

void CovarianceSpec::validate() const {
  if (!(variance > 0.0)) throw std::invalid_argument("CovarianceSpec: variance must be positive");
  if (!(corr_len_x > 0.0) || !(corr_len_y > 0.0))
    throw std::invalid_argument("CovarianceSpec: correlation lengths must be positive");
}

Eigen::VectorXd KleBasis::truncated_variance() const {
  return (eigenvectors.array().square().matrix() * eigenvalues);
}

Eigen::MatrixXd assemble_covariance(const Grid& grid, const CovarianceSpec& spec) {
  spec.validate();
  const int n = grid.n_cells();
  Eigen::VectorXd cx(n), cy(n);
  for (int r = 0; r < grid.height_cells; ++r)
    for (int c = 0; c < grid.width_cells; ++c) {
      const int a = grid.cell_index(r, c);
      cx[a] = grid.cell_x(c);
      cy[a] = grid.cell_y(r);
    }
  Eigen::MatrixXd cov(n, n);
  for (int a = 0; a < n; ++a) {
    cov(a, a) = spec.variance;
    for (int b = a + 1; b < n; ++b) {
      const double ux = (cx[a] - cx[b]) / spec.corr_len_x;
      const double uy = (cy[a] - cy[b]) / spec.corr_len_y;
      const double v = spec.variance * std::exp(-std::sqrt(ux * ux + uy * uy));
      cov(a, b) = v;
      cov(b, a) = v;
    }
  }
  return cov;
}

KleBasis decompose(const Grid& grid, const Eigen::MatrixXd& cov, double target_energy) {
  if (!(target_energy > 0.0) || target_energy > 1.0)
    throw std::invalid_argument("decompose: target_energy must lie in (0, 1]");
  if (cov.rows() != cov.cols() || cov.rows() != grid.n_cells())
    throw std::invalid_argument("decompose: covariance shape does not match grid");

  const double trace = cov.trace();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success)
    throw numeric_error("decompose: eigensolver failed (n=" + std::to_string(cov.rows()) +
                        ", trace=" + std::to_string(trace) + ")");

  // Eigen returns ascending order; flip to descending.
  const int n = static_cast<int>(cov.rows());
  Eigen::VectorXd values = solver.eigenvalues().reverse();
  const double clip_floor = -1e-10 * trace;
  for (int i = 0; i < n; ++i) {
    if (values[i] < clip_floor)
      throw numeric_error("decompose: eigenvalue " + std::to_string(values[i]) +
                          " below clip floor; covariance not PSD (trace=" + std::to_string(trace) + ")");
    if (values[i] < 0.0) values[i] = 0.0;
  }

  int n_kl = n;
  double cumulative = 0.0;
  for (int i = 0; i < n; ++i) {
    cumulative += values[i];
    if (cumulative >= target_energy * trace) {
      n_kl = i + 1;
      break;
    }
  }

  KleBasis basis;
  basis.grid = grid;
  basis.eigenvalues = values.head(n_kl);
  basis.eigenvectors.resize(n, n_kl);
  for (int i = 0; i < n_kl; ++i) basis.eigenvectors.col(i) = solver.eigenvectors().col(n - 1 - i);
  basis.covariance_trace = trace;
  basis.energy_fraction = basis.eigenvalues.sum() / trace;
  return basis;
}

Field synthesize(const KleBasis& basis, const Eigen::VectorXd& xi, double mean) {
  if (xi.size() != basis.n_kl())
    throw std::invalid_argument("synthesize: xi length " + std::to_string(xi.size()) +
                                " != n_kl " + std::to_string(basis.n_kl()));
  Eigen::VectorXd g = basis.eigenvectors * (basis.eigenvalues.cwiseSqrt().cwiseProduct(xi));
  Field field(basis.grid, FieldKind::log_conductivity);
  for (int r = 0; r < basis.grid.height_cells; ++r)
    for (int c = 0; c < basis.grid.width_cells; ++c)
      field(r, c) = mean + g[basis.grid.cell_index(r, c)];
  return field;
}

void save_basis(const std::filesystem::path& dir, const KleBasis& basis, const CovarianceSpec& spec) {
  std::filesystem::create_directories(dir);
  io::write_tensor(dir / "kle_eigenvalues.aqtn",
                   {static_cast<std::uint64_t>(basis.n_kl())}, basis.eigenvalues.data());
  // Column-major (n_cells x n_kl) memory reads as row-major (n_kl, n_cells):
  // each stored row is one eigenvector.
  io::write_tensor(dir / "kle_eigenvectors.aqtn",
                   {static_cast<std::uint64_t>(basis.n_kl()),
                    static_cast<std::uint64_t>(basis.eigenvectors.rows())},
                   basis.eigenvectors.data());

  nlohmann::json j;
  j["grid"] = {{"height_cells", basis.grid.height_cells},
               {"width_cells", basis.grid.width_cells},
               {"domain_height", basis.grid.domain_height},
               {"domain_width", basis.grid.domain_width}};
  j["covariance"] = {{"variance", spec.variance},
                     {"corr_len_x", spec.corr_len_x},
                     {"corr_len_y", spec.corr_len_y},
                     {"mean", spec.mean}};
  j["n_kl"] = basis.n_kl();
  j["energy_fraction"] = basis.energy_fraction;
  j["covariance_trace"] = basis.covariance_trace;
  std::ofstream out(dir / "kle.json");
  if (!out) throw io_error("cannot write " + (dir / "kle.json").string());
  out << j.dump(2) << "\n";
}

KleBasis load_basis(const std::filesystem::path& dir, CovarianceSpec* spec_out) {
  std::ifstream in(dir / "kle.json");
  if (!in) throw io_error("cannot read " + (dir / "kle.json").string());
  nlohmann::json j;
  in >> j;

  KleBasis basis;
  basis.grid = Grid(j["grid"]["height_cells"], j["grid"]["width_cells"],
                    j["grid"]["domain_height"], j["grid"]["domain_width"]);
  basis.energy_fraction = j["energy_fraction"];
  basis.covariance_trace = j["covariance_trace"];
  if (spec_out) {
    spec_out->variance = j["covariance"]["variance"];
    spec_out->corr_len_x = j["covariance"]["corr_len_x"];
    spec_out->corr_len_y = j["covariance"]["corr_len_y"];
    spec_out->mean = j["covariance"]["mean"];
  }

  std::vector<std::uint64_t> dims;
  auto values = io::read_tensor_f64(dir / "kle_eigenvalues.aqtn", &dims);
  basis.eigenvalues = Eigen::Map<Eigen::VectorXd>(values.data(), values.size());

  auto vecs = io::read_tensor_f64(dir / "kle_eigenvectors.aqtn", &dims);
  if (dims.size() != 2 || dims[1] != static_cast<std::uint64_t>(basis.grid.n_cells()))
    throw io_error("eigenvector tensor shape mismatch in " + dir.string());
  const int n_kl = static_cast<int>(dims[0]);
  basis.eigenvectors =
      Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
          vecs.data(), n_kl, basis.grid.n_cells())
          .transpose();
  if (n_kl != static_cast<int>(basis.eigenvalues.size()))
    throw io_error("eigenvalue/eigenvector count mismatch in " + dir.string());
  return basis;
}

}  // namespace aquinv
