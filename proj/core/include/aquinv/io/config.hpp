#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "aquinv/flow.hpp"
#include "aquinv/forward_model.hpp"
#include "aquinv/grid.hpp"
#include "aquinv/ilues.hpp"
#include "aquinv/net/train.hpp"
#include "aquinv/random_field.hpp"
#include "aquinv/transport.hpp"

namespace aquinv::io {

// Reference ("true") parameters used to synthesize observations.
struct ReferenceSpec {
  double x = 4.5234;
  double y = 4.0618;
  Eigen::VectorXd strengths = (Eigen::VectorXd(5) << 6.5989, 1.0502, 1.8535, 6.5638, 2.9540).finished();
  bool xi_zeros = true;          // otherwise drawn from N(0,1) with xi_seed
  std::uint64_t xi_seed = 0;
};

// Whole-experiment configuration; defaults reproduce the case-study setup.
// Loading validates types and rejects unknown keys.
struct ExperimentConfig {
  Grid grid{41, 81, 10.0, 20.0};
  CovarianceSpec covariance;
  double energy_target = 0.95;
  bool fixed_conductivity = false;
  double fixed_log_k = 2.0;

  SourceBounds prior;
  int n_release = 5;
  double segment_length = 2.0;

  FlowBC bc;
  FlowSolverOptions flow_options;
  double porosity = 0.25;
  DispersionSpec dispersion;
  TransportOptions transport{0.05, 0.5};
  std::vector<double> snapshot_times = {2, 4, 6, 8, 10, 12, 14};

  std::vector<std::pair<double, double>> wells;  // empty selects the default lattice
  double noise_level = 0.05;

  std::string network_preset = "paper";  // paper | desk
  net::NetworkSpec network;              // resolved preset with overrides applied
  net::TrainConfig train;
  IluesConfig ilues;
  ReferenceSpec reference;

  std::filesystem::path kle_cache = "kle_cache";

  std::vector<double> segment_boundaries() const;
  ObservationDesign observation_design() const;
  ForwardModelConfig forward_config() const;
  PriorSpec prior_spec(int n_kl) const;
  SourceSpec reference_source() const;
  Eigen::VectorXd reference_xi(int n_kl) const;

  void validate() const;
};

ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig default_config();

// Canonical JSON form; identical configs hash identically.
std::string config_json(const ExperimentConfig& config);
std::uint64_t config_hash(const ExperimentConfig& config);

// Builds the KLE basis for the config (or loads it from the cache directory,
// keyed by grid/covariance/energy). Not used in fixed-conductivity mode.
std::shared_ptr<const KleBasis> ensure_basis(const ExperimentConfig& config);

}  // namespace aquinv::io
