#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "aquinv/net/data.hpp"
#include "aquinv/net/network.hpp"

namespace aquinv::net {

enum class SurrogateMode { plain, autoregressive, autoregressive_weighted };

std::string mode_name(SurrogateMode mode);
SurrogateMode parse_mode(const std::string& name);

struct TrainConfig {
  int batch_size_ar = 200;
  int batch_size_plain = 30;
  int epochs = 200;
  double learning_rate = 0.005;
  double weight_decay = 5e-5;
  double loss_weight = 5.0;  // w_c; only the weighted mode applies it
  double scheduler_factor = 0.1;
  int scheduler_patience = 10;
  double scheduler_threshold = 1e-3;
  double scheduler_min_lr_ratio = 1e-3;  // lr floor as a fraction of the initial rate
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochStat {
  int epoch = 0;
  double loss = 0.0;
  double lr = 0.0;
};

struct Surrogate {
  NetworkSpec spec;
  SurrogateMode mode = SurrogateMode::autoregressive;
  NormalizationSpec norm;
  int n_t = 7;
  int n_release = 5;
  std::shared_ptr<EncoderDecoder<float>> net;
  std::vector<EpochStat> history;
  std::uint64_t data_hash = 0;
};

// Trains the requested variant. The spec's channel counts are derived from
// the mode (plain: 1+n_release in / 1+n_t out; autoregressive: 3 in / 2 out).
// norm_hint carries the prior-derived input scalings (log-K mean/std, max
// strength); the concentration input scale is measured from the dataset.
Surrogate train_surrogate(const std::vector<SimulationRecord>& dataset, NetworkSpec spec,
                          const TrainConfig& config, SurrogateMode mode,
                          const NormalizationSpec& norm_hint = {});

struct SurrogatePrediction {
  Field head;
  std::vector<Field> concentrations;
};

// Physical-unit prediction. Autoregressive surrogates roll the concentration
// forward through n_t steps and report the per-step head average; the plain
// variant is a single pass.
SurrogatePrediction predict(const Surrogate& surrogate, const Field& log_k,
                            const std::vector<Field>& source_images);

void save_surrogate(const std::filesystem::path& dir, const Surrogate& surrogate);
Surrogate load_surrogate(const std::filesystem::path& dir);

}  // namespace aquinv::net
