#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <vector>

#include "aquinv/forward_model.hpp"
#include "aquinv/io/config.hpp"
#include "aquinv/net/data.hpp"

namespace aquinv::io {

// Dataset directory layout: manifest.json, params.aqtn (records x n_params),
// fields_####.aqtn ((1+n_t) x H x W stacks, head first), obs.csv.
struct DatasetPaths {
  std::filesystem::path dir;

  std::filesystem::path manifest() const { return dir / "manifest.json"; }
  std::filesystem::path params() const { return dir / "params.aqtn"; }
  std::filesystem::path fields(int index) const;
  std::filesystem::path obs() const { return dir / "obs.csv"; }
};

void write_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix(const std::filesystem::path& path);

void write_field_stack(const std::filesystem::path& path, const Field& head,
                       const std::vector<Field>& concentrations);
std::pair<Field, std::vector<Field>> read_field_stack(const std::filesystem::path& path,
                                                      const Grid& grid);

// Column headers naming well/time/quantity for observation tables.
std::vector<std::string> observation_headers(const ObservationDesign& design);

// Rebuilds training records for a simulated dataset: parameters from
// params.aqtn, fields from the stacks, conductivity re-synthesized from the
// KLE coefficients (or taken from the fixed-conductivity config).
std::vector<net::SimulationRecord> load_records(const ExperimentConfig& config,
                                                const KleBasis* basis,
                                                const std::filesystem::path& dir,
                                                int limit = -1);

}  // namespace aquinv::io
