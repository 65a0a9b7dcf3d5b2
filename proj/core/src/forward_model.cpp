#include "aquinv/forward_model.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "aquinv/errors.hpp"
#include "aquinv/rng.hpp"

namespace aquinv {

ObservationDesign default_observation_design(const Grid& grid, const std::vector<double>& times) {
  ObservationDesign design;
  design.times = times;
  const int nx = 7, ny = 3;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i)
      design.wells.emplace_back(grid.domain_width * (i + 1) / (nx + 1),
                                grid.domain_height * (j + 1) / (ny + 1));
  return design;
}

ForwardOutputs run_forward(const ParameterVector& params, const KleBasis* basis,
                           const ForwardModelConfig& config) {
  Field log_k(config.grid, FieldKind::log_conductivity);
  if (config.fixed_log_k) {
    if (params.n_kl() != 0)
      throw std::invalid_argument("run_forward: KLE coefficients given in fixed-conductivity mode");
    log_k = Field(config.grid, FieldKind::log_conductivity, *config.fixed_log_k);
  } else {
    if (!basis) throw std::invalid_argument("run_forward: KLE basis required");
    log_k = synthesize(*basis, params.xi, config.log_k_mean);
  }
  Field k(config.grid, FieldKind::conductivity, log_k.values.array().exp());

  try {
    ForwardOutputs out;
    out.head = solve_head(config.grid, k, config.bc);
    VelocityField v = darcy_velocity(config.grid, k, out.head, config.porosity, config.bc);
    out.concentrations = simulate_transport(config.grid, v, config.dispersion, params.source,
                                            config.porosity, config.snapshot_times, config.transport);
    out.observations = observe(out, config.design);
    return out;
  } catch (const numeric_error& e) {
    char hash[20];
    std::snprintf(hash, sizeof(hash), "%016llx",
                  static_cast<unsigned long long>(parameter_hash(pack(params))));
    throw numeric_error(std::string(e.what()) + " [params " + hash + "]");
  }
}

Eigen::VectorXd observe(const ForwardOutputs& outputs, const ObservationDesign& design) {
  if (outputs.concentrations.size() != design.times.size())
    throw std::invalid_argument("observe: snapshot count does not match observation times");
  const Grid& grid = outputs.head.grid;
  Eigen::VectorXd obs(design.n_obs());
  int k = 0;
  for (const auto& [wx, wy] : design.wells) {
    const CellIndex cell = locate_cell(grid, wx, wy);  // throws if outside the domain
    for (const Field& c : outputs.concentrations) obs[k++] = c(cell.row, cell.col);
    obs[k++] = outputs.head(cell.row, cell.col);
  }
  return obs;
}

std::pair<Eigen::VectorXd, NoiseModel> make_noise(const Eigen::VectorXd& truth,
                                                  const ObservationDesign& design, double level,
                                                  std::uint64_t seed) {
  if (!(level > 0.0)) throw std::invalid_argument("make_noise: noise level must be positive");
  if (truth.size() != design.n_obs())
    throw std::invalid_argument("make_noise: truth length does not match design");

  const int per_well = static_cast<int>(design.times.size()) + 1;
  double max_conc = 0.0;
  for (int i = 0; i < truth.size(); ++i)
    if (i % per_well != per_well - 1) max_conc = std::max(max_conc, std::abs(truth[i]));
  const double eps = level * 0.01 * (max_conc > 0.0 ? max_conc : 1.0);

  NoiseModel noise;
  noise.level = level;
  noise.sigma = (level * truth.cwiseAbs()).cwiseMax(eps);

  auto rng = make_rng(seed, 0xB0B5);
  std::normal_distribution<double> gauss;
  Eigen::VectorXd d(truth.size());
  for (int i = 0; i < truth.size(); ++i) d[i] = truth[i] + noise.sigma[i] * gauss(rng);
  return {d, noise};
}

Eigen::MatrixXd perturb_observations(const Eigen::VectorXd& d,
                                     const Eigen::VectorXd& diag_inflated, int count,
                                     std::uint64_t seed) {
  if ((diag_inflated.array() < 0.0).any())
    throw std::invalid_argument("perturb_observations: covariance diagonal must be non-negative");
  Eigen::VectorXd sd = diag_inflated.cwiseSqrt();
  auto rng = make_rng(seed, 0xD0D0);
  std::normal_distribution<double> gauss;
  Eigen::MatrixXd out(d.size(), count);
  for (int j = 0; j < count; ++j)
    for (int i = 0; i < d.size(); ++i) out(i, j) = d[i] + sd[i] * gauss(rng);
  return out;
}

std::uint64_t parameter_hash(const Eigen::VectorXd& packed) {
  const auto* bytes = reinterpret_cast<const unsigned char*>(packed.data());
  const std::size_t len = static_cast<std::size_t>(packed.size()) * sizeof(double);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace aquinv
