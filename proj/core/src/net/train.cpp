#include "aquinv/net/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "aquinv/errors.hpp"
#include "aquinv/net/loss.hpp"
#include "aquinv/net/optim.hpp"
#include "aquinv/rng.hpp"

namespace aquinv::net {

std::string mode_name(SurrogateMode mode) {
  switch (mode) {
    case SurrogateMode::plain: return "net";
    case SurrogateMode::autoregressive: return "ar-net";
    case SurrogateMode::autoregressive_weighted: return "ar-net-wl";
  }
  return "?";
}

SurrogateMode parse_mode(const std::string& name) {
  if (name == "net") return SurrogateMode::plain;
  if (name == "ar-net") return SurrogateMode::autoregressive;
  if (name == "ar-net-wl") return SurrogateMode::autoregressive_weighted;
  throw config_error("unknown surrogate mode '" + name + "' (net|ar-net|ar-net-wl)");
}

void TrainConfig::validate() const {
  if (batch_size_ar <= 0 || batch_size_plain <= 0 || epochs <= 0)
    throw config_error("TrainConfig: counts must be positive");
  if (!(learning_rate > 0.0)) throw config_error("TrainConfig: learning rate must be positive");
  if (weight_decay < 0.0 || loss_weight < 0.0)
    throw config_error("TrainConfig: decay and loss weight must be non-negative");
}

NormalizationSpec compute_normalization(const std::vector<SimulationRecord>& records,
                                        double log_k_mean, double log_k_std,
                                        double strength_scale) {
  NormalizationSpec norm;
  norm.log_k_mean = log_k_mean;
  norm.log_k_std = log_k_std;
  norm.strength_scale = strength_scale;
  double max_c = 0.0;
  for (const auto& rec : records)
    for (const auto& c : rec.concentrations) max_c = std::max(max_c, c.values.maxCoeff());
  norm.conc_scale = max_c > 0.0 ? max_c : 1.0;
  return norm;
}

std::vector<ArPair> reorganize_autoregressive(int n_runs, int n_t) {
  std::vector<ArPair> pairs;
  pairs.reserve(static_cast<size_t>(n_runs) * n_t);
  for (int i = 0; i < n_runs; ++i)
    for (int j = 0; j < n_t; ++j) pairs.push_back({i, j});
  return pairs;
}

std::uint64_t dataset_hash(const std::vector<SimulationRecord>& records) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&](const Eigen::MatrixXd& m) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(m.data());
    for (size_t i = 0; i < m.size() * sizeof(double); ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ull;
    }
  };
  for (const auto& rec : records) {
    mix(rec.log_k.values);
    for (const auto& s : rec.sources) mix(s.values);
    mix(rec.head.values);
    for (const auto& c : rec.concentrations) mix(c.values);
  }
  return h;
}

namespace {

void check_grid_compatible(const Grid& g) {
  if ((g.height_cells - 1) % 4 != 0 || (g.width_cells - 1) % 4 != 0)
    throw config_error("surrogate: grid " + std::to_string(g.height_cells) + "x" +
                       std::to_string(g.width_cells) +
                       " incompatible with the two-level halving (need H-1, W-1 divisible by 4)");
}

}  // namespace

Surrogate train_surrogate(const std::vector<SimulationRecord>& dataset, NetworkSpec spec,
                          const TrainConfig& config, SurrogateMode mode,
                          const NormalizationSpec& norm_hint) {
  config.validate();
  if (dataset.empty()) throw std::invalid_argument("train_surrogate: empty dataset");
  const Grid& grid = dataset.front().log_k.grid;
  check_grid_compatible(grid);

  const int n_t = static_cast<int>(dataset.front().concentrations.size());
  const int n_release = dataset.front().n_release;
  const bool plain = mode == SurrogateMode::plain;
  spec.in_channels = plain ? 1 + n_release : 3;
  spec.out_channels = plain ? 1 + n_t : 2;

  Surrogate s;
  s.spec = spec;
  s.mode = mode;
  s.n_t = n_t;
  s.n_release = n_release;
  s.norm = compute_normalization(dataset, norm_hint.log_k_mean, norm_hint.log_k_std,
                                 norm_hint.strength_scale);
  s.data_hash = dataset_hash(dataset);
  s.net = std::make_shared<EncoderDecoder<float>>(spec, config.seed);

  const int h = grid.height_cells, w = grid.width_cells;
  const double w_c = mode == SurrogateMode::autoregressive_weighted ? config.loss_weight : 0.0;

  // Materialize the training samples once.
  std::vector<ArPair> pairs;
  int n_samples;
  if (plain) {
    n_samples = static_cast<int>(dataset.size());
  } else {
    pairs = reorganize_autoregressive(static_cast<int>(dataset.size()), n_t);
    n_samples = static_cast<int>(pairs.size());
  }
  Tensor4<float> all_x(n_samples, spec.in_channels, h, w);
  Tensor4<float> all_y(n_samples, spec.out_channels, h, w);
  std::vector<std::optional<SourceWeight>> all_weights(n_samples);
  for (int i = 0; i < n_samples; ++i) {
    if (plain) {
      fill_plain_sample(dataset[i], s.norm, all_x, all_y, i);
      SourceWeight sw;
      sw.cell = dataset[i].source_cell;
      for (int j = 0; j < n_release; ++j) sw.channels.push_back(1 + j);
      all_weights[i] = sw;
    } else {
      fill_ar_pair(dataset[pairs[i].run], pairs[i].step, s.norm, all_x, all_y, i);
      if (pairs[i].step < n_release)
        all_weights[i] = SourceWeight{dataset[pairs[i].run].source_cell, {1}};
    }
  }

  auto params = s.net->params();
  Adam<float> adam(params);
  PlateauScheduler scheduler(config.learning_rate, config.scheduler_factor,
                             config.scheduler_patience, config.scheduler_threshold,
                             config.learning_rate * config.scheduler_min_lr_ratio);
  const int batch_size = plain ? config.batch_size_plain : config.batch_size_ar;
  const size_t plane = static_cast<size_t>(h) * w;

  std::vector<int> order(n_samples);
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    auto rng = make_rng(config.seed, 0xE70C, epoch);
    std::shuffle(order.begin(), order.end(), rng);

    double epoch_loss = 0.0;
    long seen = 0;
    for (int start = 0; start < n_samples; start += batch_size) {
      const int m = std::min(batch_size, n_samples - start);
      if (m < 2) continue;  // batch normalization needs at least two samples

      Tensor4<float> xb(m, spec.in_channels, h, w), yb(m, spec.out_channels, h, w);
      std::vector<std::optional<SourceWeight>> weights(m);
      for (int i = 0; i < m; ++i) {
        const int src = order[start + i];
        std::copy(all_x.sample(src), all_x.sample(src) + spec.in_channels * plane, xb.sample(i));
        std::copy(all_y.sample(src), all_y.sample(src) + spec.out_channels * plane, yb.sample(i));
        weights[i] = all_weights[src];
      }

      s.net->zero_grad();
      Tensor4<float> pred = s.net->forward(xb, /*training=*/true);
      LossResult<float> loss =
          weighted_l1_loss(pred, yb, weights, w_c, config.weight_decay, params);
      if (!std::isfinite(loss.value))
        throw numeric_error("train_surrogate: loss diverged at epoch " + std::to_string(epoch) +
                            " (mode " + mode_name(mode) + ", lr " +
                            std::to_string(scheduler.lr()) + ")");
      s.net->backward(loss.grad);
      adam.step(params, scheduler.lr(), config.weight_decay);

      epoch_loss += loss.value * m;
      seen += m;
    }
    epoch_loss /= std::max<long>(seen, 1);
    s.history.push_back({epoch, epoch_loss, scheduler.lr()});
    scheduler.observe(epoch_loss);
  }
  return s;
}

SurrogatePrediction predict(const Surrogate& s, const Field& log_k,
                            const std::vector<Field>& source_images) {
  const Grid& grid = log_k.grid;
  const int h = grid.height_cells, w = grid.width_cells;
  if (static_cast<int>(source_images.size()) < s.n_t)
    throw std::invalid_argument("predict: need a source image per time step");

  SurrogatePrediction out;
  out.head = Field(grid, FieldKind::head);
  if (s.mode == SurrogateMode::plain) {
    Tensor4<float> x(1, s.spec.in_channels, h, w);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        x(0, 0, r, c) = static_cast<float>((log_k(r, c) - s.norm.log_k_mean) / s.norm.log_k_std);
        for (int j = 0; j < s.n_release; ++j)
          x(0, 1 + j, r, c) = static_cast<float>(source_images[j](r, c) / s.norm.strength_scale);
      }
    Tensor4<float> y = s.net->forward(x, /*training=*/false);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) out.head(r, c) = y(0, 0, r, c);
    for (int j = 0; j < s.n_t; ++j) {
      Field cf(grid, FieldKind::concentration);
      for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) cf(r, c) = y(0, 1 + j, r, c);
      out.concentrations.push_back(std::move(cf));
    }
    return out;
  }

  // autoregressive rollout; the reported head is the average over steps
  Tensor4<float> x(1, 3, h, w);
  Eigen::MatrixXd prev = Eigen::MatrixXd::Zero(h, w);  // normalized c_{j-1}
  Eigen::MatrixXd head_acc = Eigen::MatrixXd::Zero(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      x(0, 0, r, c) = static_cast<float>((log_k(r, c) - s.norm.log_k_mean) / s.norm.log_k_std);

  for (int j = 0; j < s.n_t; ++j) {
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        x(0, 1, r, c) = static_cast<float>(source_images[j](r, c) / s.norm.strength_scale);
        x(0, 2, r, c) = static_cast<float>(prev(r, c));
      }
    Tensor4<float> y = s.net->forward(x, /*training=*/false);
    Field cf(grid, FieldKind::concentration);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        head_acc(r, c) += y(0, 0, r, c);
        prev(r, c) = y(0, 1, r, c) / s.norm.conc_scale;  // normalized input for the next step
        cf(r, c) = y(0, 1, r, c);
      }
    out.concentrations.push_back(std::move(cf));
  }
  out.head.values = head_acc / s.n_t;
  return out;
}

}  // namespace aquinv::net
