#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "aquinv/flow.hpp"
#include "aquinv/grid.hpp"
#include "aquinv/random_field.hpp"
#include "aquinv/transport.hpp"

namespace aquinv {

// Measurement network: concentrations at every listed time plus one head
// value per well, ordered well-major (well 0: c(t_1..t_nt), h; well 1: ...).
struct ObservationDesign {
  std::vector<std::pair<double, double>> wells;
  std::vector<double> times;

  int n_obs() const { return static_cast<int>(wells.size() * (times.size() + 1)); }
};

// 3 x 7 lattice spanning the domain interior; 21 wells.
ObservationDesign default_observation_design(const Grid& grid, const std::vector<double>& times);

struct ForwardOutputs {
  Field head;
  std::vector<Field> concentrations;
  Eigen::VectorXd observations;
};

struct NoiseModel {
  double level = 0.05;
  Eigen::VectorXd sigma;  // per-datum standard deviations, C_D = diag(sigma^2)
};

struct ForwardModelConfig {
  Grid grid;
  FlowBC bc;
  double porosity = 0.25;
  DispersionSpec dispersion;
  double log_k_mean = 2.0;
  TransportOptions transport;
  std::vector<double> snapshot_times = {2, 4, 6, 8, 10, 12, 14};
  ObservationDesign design;
  // When set, the log-conductivity field is known and the KLE part of the
  // parameter vector must be empty.
  std::optional<Eigen::MatrixXd> fixed_log_k;
};

// K = exp(synthesize(xi)) -> steady flow -> transport -> observations.
// basis may be null only in fixed-conductivity mode.
ForwardOutputs run_forward(const ParameterVector& params, const KleBasis* basis,
                           const ForwardModelConfig& config);

Eigen::VectorXd observe(const ForwardOutputs& outputs, const ObservationDesign& design);

// Relative Gaussian noise with a floor: sigma_i = max(level*|truth_i|, eps),
// eps = level * 1% of the largest concentration observation.
std::pair<Eigen::VectorXd, NoiseModel> make_noise(const Eigen::VectorXd& truth,
                                                  const ObservationDesign& design, double level,
                                                  std::uint64_t seed);

// Column j = d + sqrt(diag_inflated) .* z_j, z standard normal.
Eigen::MatrixXd perturb_observations(const Eigen::VectorXd& d,
                                     const Eigen::VectorXd& diag_inflated, int count,
                                     std::uint64_t seed);

// FNV-1a hash of the packed parameter bytes; used to tag solver failures.
std::uint64_t parameter_hash(const Eigen::VectorXd& packed);

}  // namespace aquinv
