#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "aquinv/net/layers.hpp"

namespace aquinv::net {

// Adam with bias correction. Weight decay enters as an extra gradient term
// (decay * theta) at step time.
template <typename T>
class Adam {
 public:
  explicit Adam(const std::vector<ParamRef<T>>& params, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {
    size_t total = 0;
    for (const auto& p : params) total += p.size;
    m_.assign(total, 0.0);
    v_.assign(total, 0.0);
  }

  void step(const std::vector<ParamRef<T>>& params, double lr, double weight_decay = 0.0) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    size_t off = 0;
    for (const auto& p : params) {
      for (size_t i = 0; i < p.size; ++i) {
        const double g = static_cast<double>(p.grad[i]) + weight_decay * p.value[i];
        m_[off + i] = beta1_ * m_[off + i] + (1.0 - beta1_) * g;
        v_[off + i] = beta2_ * v_[off + i] + (1.0 - beta2_) * g * g;
        const double mhat = m_[off + i] / bc1;
        const double vhat = v_[off + i] / bc2;
        p.value[i] -= static_cast<T>(lr * mhat / (std::sqrt(vhat) + eps_));
      }
      off += p.size;
    }
  }

  long steps() const { return t_; }

 private:
  double beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<double> m_, v_;
};

// Drops the learning rate by `factor` when the tracked loss fails to improve
// on the best seen value by `threshold` (relative) for `patience` epochs.
class PlateauScheduler {
 public:
  PlateauScheduler(double initial_lr, double factor = 0.1, int patience = 10,
                   double threshold = 1e-3, double min_lr = 0.0)
      : lr_(initial_lr), factor_(factor), patience_(patience), threshold_(threshold),
        min_lr_(min_lr) {}

  double lr() const { return lr_; }
  int drops() const { return drops_; }

  // Returns true when the rate was just dropped.
  bool observe(double loss) {
    if (loss < best_ * (1.0 - threshold_)) {
      best_ = loss;
      bad_epochs_ = 0;
      return false;
    }
    if (++bad_epochs_ >= patience_ && lr_ > min_lr_) {
      lr_ = std::max(lr_ * factor_, min_lr_);
      ++drops_;
      bad_epochs_ = 0;
      return true;
    }
    return false;
  }

 private:
  double lr_, factor_;
  int patience_;
  double threshold_;
  double min_lr_ = 0.0;
  double best_ = std::numeric_limits<double>::infinity();
  int bad_epochs_ = 0;
  int drops_ = 0;
};

}  // namespace aquinv::net
