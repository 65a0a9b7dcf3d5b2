#pragma once

#include <cstdint>
#include <vector>

#include "aquinv/grid.hpp"
#include "aquinv/net/tensor.hpp"

namespace aquinv::net {

// One forward-model run rasterized for training: conductivity (log), the n_t
// source images, and the n_t concentration snapshots plus the head field.
struct SimulationRecord {
  Field log_k;
  std::vector<Field> sources;
  Field head;
  std::vector<Field> concentrations;
  CellIndex source_cell;
  int n_release = 5;  // segments with an active source (images beyond are zero)
};

// Input-channel scalings. Conductivity is standardized in log space, source
// images scale by the largest prior strength, the concentration input channel
// by a dataset-wide maximum. Targets stay in physical units; the output
// activations (sigmoid head, softplus concentration) match their ranges.
struct NormalizationSpec {
  double log_k_mean = 2.0;
  double log_k_std = 0.707106781186547524;
  double strength_scale = 8.0;
  double conc_scale = 1.0;
};

NormalizationSpec compute_normalization(const std::vector<SimulationRecord>& records,
                                        double log_k_mean, double log_k_std,
                                        double strength_scale);

// Autoregressive pair (run i, step j): (K, S_j, c_{j-1}) -> (h, c_j), c_0 = 0.
struct ArPair {
  int run = 0;
  int step = 0;  // 0-based
};

std::vector<ArPair> reorganize_autoregressive(int n_runs, int n_t);

// FNV-1a over the record payloads; identifies the training data in manifests.
std::uint64_t dataset_hash(const std::vector<SimulationRecord>& records);

template <typename T>
void fill_ar_pair(const SimulationRecord& rec, int step, const NormalizationSpec& norm,
                  Tensor4<T>& x, Tensor4<T>& y, int slot) {
  const Grid& g = rec.log_k.grid;
  for (int r = 0; r < g.height_cells; ++r)
    for (int c = 0; c < g.width_cells; ++c) {
      x(slot, 0, r, c) = static_cast<T>((rec.log_k(r, c) - norm.log_k_mean) / norm.log_k_std);
      x(slot, 1, r, c) = static_cast<T>(rec.sources[step](r, c) / norm.strength_scale);
      x(slot, 2, r, c) =
          step == 0 ? T(0) : static_cast<T>(rec.concentrations[step - 1](r, c) / norm.conc_scale);
      y(slot, 0, r, c) = static_cast<T>(rec.head(r, c));
      y(slot, 1, r, c) = static_cast<T>(rec.concentrations[step](r, c));
    }
}

template <typename T>
void fill_plain_sample(const SimulationRecord& rec, const NormalizationSpec& norm, Tensor4<T>& x,
                       Tensor4<T>& y, int slot) {
  const Grid& g = rec.log_k.grid;
  const int n_t = static_cast<int>(rec.concentrations.size());
  for (int r = 0; r < g.height_cells; ++r)
    for (int c = 0; c < g.width_cells; ++c) {
      x(slot, 0, r, c) = static_cast<T>((rec.log_k(r, c) - norm.log_k_mean) / norm.log_k_std);
      for (int j = 0; j < rec.n_release; ++j)
        x(slot, 1 + j, r, c) = static_cast<T>(rec.sources[j](r, c) / norm.strength_scale);
      y(slot, 0, r, c) = static_cast<T>(rec.head(r, c));
      for (int j = 0; j < n_t; ++j)
        y(slot, 1 + j, r, c) = static_cast<T>(rec.concentrations[j](r, c));
    }
}

}  // namespace aquinv::net
