#pragma once

#include <optional>
#include <vector>

#include "aquinv/grid.hpp"
#include "aquinv/net/layers.hpp"
#include "aquinv/net/tensor.hpp"

namespace aquinv::net {

// Extra-weighted region of one sample: the source pixel and its in-domain
// 8-neighborhood on the listed output channels.
struct SourceWeight {
  CellIndex cell;
  std::vector<int> channels;
};

template <typename T>
struct LossResult {
  double value = 0.0;
  Tensor4<T> grad;  // d loss / d prediction
};

// Mean absolute error over all pixels, plus w_c times the (identically
// normalized) absolute error over each sample's weighted source region, plus
// the L2 weight-decay penalty (omega_d/2) theta^T theta. The L1 subgradient
// at zero is zero. Weight-decay gradients are applied by the optimizer step,
// not through the returned tensor.
template <typename T>
LossResult<T> weighted_l1_loss(const Tensor4<T>& pred, const Tensor4<T>& target,
                               const std::vector<std::optional<SourceWeight>>& source_weights,
                               double w_c, double weight_decay,
                               const std::vector<ParamRef<T>>& params) {
  if (!pred.same_shape(target)) throw std::invalid_argument("weighted_l1_loss: shape mismatch");
  if (!source_weights.empty() && static_cast<int>(source_weights.size()) != pred.n)
    throw std::invalid_argument("weighted_l1_loss: weight list does not match batch");

  LossResult<T> result;
  result.grad = Tensor4<T>(pred.n, pred.c, pred.h, pred.w);
  const double norm = static_cast<double>(pred.size());

  double abs_sum = 0.0;
  for (size_t i = 0; i < pred.data.size(); ++i) {
    const double diff = static_cast<double>(pred.data[i]) - target.data[i];
    abs_sum += std::abs(diff);
    result.grad.data[i] = static_cast<T>((diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0)) / norm);
  }

  double weighted_sum = 0.0;
  if (w_c != 0.0 && !source_weights.empty()) {
    for (int in = 0; in < pred.n; ++in) {
      if (!source_weights[in]) continue;
      const auto& sw = *source_weights[in];
      for (int ch : sw.channels)
        for (int dr = -1; dr <= 1; ++dr)
          for (int dc = -1; dc <= 1; ++dc) {
            const int r = sw.cell.row + dr, c = sw.cell.col + dc;
            if (r < 0 || r >= pred.h || c < 0 || c >= pred.w) continue;  // clipped at boundaries
            const double diff =
                static_cast<double>(pred(in, ch, r, c)) - target(in, ch, r, c);
            weighted_sum += std::abs(diff);
            result.grad(in, ch, r, c) +=
                static_cast<T>(w_c * (diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0)) / norm);
          }
    }
  }

  double decay = 0.0;
  for (const auto& p : params)
    for (size_t i = 0; i < p.size; ++i) decay += static_cast<double>(p.value[i]) * p.value[i];

  result.value = abs_sum / norm + w_c * weighted_sum / norm + 0.5 * weight_decay * decay;
  return result;
}

}  // namespace aquinv::net
