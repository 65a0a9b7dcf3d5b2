#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <vector>

#include "aquinv/errors.hpp"
#include "aquinv/net/tensor.hpp"

namespace aquinv::net {

template <typename T>
using MatMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename T>
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

template <typename T>
struct ParamRef {
  T* value = nullptr;
  T* grad = nullptr;
  size_t size = 0;
};

template <typename T>
struct BufferRef {
  T* value = nullptr;
  size_t size = 0;
};

inline int conv_out_size(int in, int kernel, int stride, int pad) {
  return (in + 2 * pad - kernel) / stride + 1;
}
inline int conv_transpose_out_size(int in, int kernel, int stride, int pad) {
  return stride * (in - 1) + kernel - 2 * pad;
}

// Patch matrix for one sample: (c*kh*kw) x (ho*wo). `src` points at a
// (c, hi, wi) block; geometry is that of a convolution producing (ho, wo).
template <typename T>
void im2col(const T* src, int c, int hi, int wi, int kh, int kw, int stride, int pad, int ho,
            int wo, T* cols) {
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < kh; ++i)
      for (int j = 0; j < kw; ++j) {
        T* row = cols + ((static_cast<size_t>(ch) * kh + i) * kw + j) * ho * wo;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride + i - pad;
          T* dst = row + static_cast<size_t>(oy) * wo;
          if (iy < 0 || iy >= hi) {
            std::fill(dst, dst + wo, T(0));
            continue;
          }
          const T* src_row = src + (static_cast<size_t>(ch) * hi + iy) * wi;
          if (stride == 1) {
            // valid ox range: 0 <= ox + j - pad < wi
            const int lo = std::max(0, pad - j), hi_ox = std::min(wo, wi + pad - j);
            if (lo > 0) std::fill(dst, dst + lo, T(0));
            if (hi_ox > lo) std::copy(src_row + lo + j - pad, src_row + hi_ox + j - pad, dst + lo);
            if (hi_ox < wo) std::fill(dst + std::max(lo, hi_ox), dst + wo, T(0));
          } else {
            for (int ox = 0; ox < wo; ++ox) {
              const int ix = ox * stride + j - pad;
              dst[ox] = (ix >= 0 && ix < wi) ? src_row[ix] : T(0);
            }
          }
        }
      }
}

// Adjoint of im2col: scatter-adds patch columns back into the (c, hi, wi) block.
template <typename T>
void col2im(const T* cols, int c, int hi, int wi, int kh, int kw, int stride, int pad, int ho,
            int wo, T* dst) {
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < kh; ++i)
      for (int j = 0; j < kw; ++j) {
        const T* row = cols + ((static_cast<size_t>(ch) * kh + i) * kw + j) * ho * wo;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride + i - pad;
          if (iy < 0 || iy >= hi) continue;
          const T* src_row = row + static_cast<size_t>(oy) * wo;
          T* dst_row = dst + (static_cast<size_t>(ch) * hi + iy) * wi;
          if (stride == 1) {
            const int lo = std::max(0, pad - j), hi_ox = std::min(wo, wi + pad - j);
            const int shift = j - pad;
            for (int ox = lo; ox < hi_ox; ++ox) dst_row[ox + shift] += src_row[ox];
          } else {
            for (int ox = 0; ox < wo; ++ox) {
              const int ix = ox * stride + j - pad;
              if (ix >= 0 && ix < wi) dst_row[ix] += src_row[ox];
            }
          }
        }
      }
}

template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor4<T> forward(const Tensor4<T>& x, bool training) = 0;
  virtual Tensor4<T> backward(const Tensor4<T>& grad_out) = 0;
  virtual void collect_params(std::vector<ParamRef<T>>&) {}
  virtual void collect_buffers(std::vector<BufferRef<T>>&) {}
};

// Cross-correlation without bias over zero-padded input.
// Weight layout: (out_channels, in_channels, kh, kw).
template <typename T>
class Conv2d : public Layer<T> {
 public:
  Conv2d(int in_ch, int out_ch, int kernel, int stride, int pad)
      : in_ch_(in_ch), out_ch_(out_ch), k_(kernel), s_(stride), p_(pad) {
    weight_.assign(static_cast<size_t>(out_ch) * in_ch * kernel * kernel, T(0));
    grad_.assign(weight_.size(), T(0));
  }

  void init_kaiming(std::mt19937_64& rng) {
    const double std_dev = std::sqrt(2.0 / (static_cast<double>(in_ch_) * k_ * k_));
    std::normal_distribution<double> gauss(0.0, std_dev);
    for (auto& v : weight_) v = static_cast<T>(gauss(rng));
  }

  Tensor4<T> forward(const Tensor4<T>& x, bool) override {
    if (x.c != in_ch_) throw std::invalid_argument("Conv2d: channel mismatch");
    const int ho = conv_out_size(x.h, k_, s_, p_), wo = conv_out_size(x.w, k_, s_, p_);
    if (ho <= 0 || wo <= 0) throw std::invalid_argument("Conv2d: output size not positive");
    input_ = x;
    Tensor4<T> y(x.n, out_ch_, ho, wo);
    ConstMatMap<T> wmat(weight_.data(), out_ch_, in_ch_ * k_ * k_);
    const bool pointwise = k_ == 1 && s_ == 1 && p_ == 0;
    if (!pointwise) cols_.resize(static_cast<size_t>(in_ch_) * k_ * k_ * ho * wo);
    for (int in = 0; in < x.n; ++in) {
      MatMap<T> out(y.sample(in), out_ch_, ho * wo);
      if (pointwise) {
        ConstMatMap<T> xm(x.sample(in), in_ch_, ho * wo);
        out.noalias() = wmat * xm;
      } else {
        im2col(x.sample(in), in_ch_, x.h, x.w, k_, k_, s_, p_, ho, wo, cols_.data());
        ConstMatMap<T> cols(cols_.data(), in_ch_ * k_ * k_, ho * wo);
        out.noalias() = wmat * cols;
      }
    }
    return y;
  }

  Tensor4<T> backward(const Tensor4<T>& gout) override {
    const Tensor4<T>& x = input_;
    const int ho = gout.h, wo = gout.w;
    Tensor4<T> gx(x.n, x.c, x.h, x.w);
    ConstMatMap<T> wmat(weight_.data(), out_ch_, in_ch_ * k_ * k_);
    MatMap<T> gwmat(grad_.data(), out_ch_, in_ch_ * k_ * k_);
    const bool pointwise = k_ == 1 && s_ == 1 && p_ == 0;
    if (!pointwise) {
      cols_.resize(static_cast<size_t>(in_ch_) * k_ * k_ * ho * wo);
      gcols_.resize(cols_.size());
    }
    for (int in = 0; in < x.n; ++in) {
      ConstMatMap<T> go(gout.sample(in), out_ch_, ho * wo);
      if (pointwise) {
        ConstMatMap<T> xm(x.sample(in), in_ch_, ho * wo);
        gwmat.noalias() += go * xm.transpose();
        MatMap<T> gxm(gx.sample(in), in_ch_, ho * wo);
        gxm.noalias() = wmat.transpose() * go;
      } else {
        im2col(x.sample(in), in_ch_, x.h, x.w, k_, k_, s_, p_, ho, wo, cols_.data());
        ConstMatMap<T> cols(cols_.data(), in_ch_ * k_ * k_, ho * wo);
        gwmat.noalias() += go * cols.transpose();
        MatMap<T> gcols(gcols_.data(), in_ch_ * k_ * k_, ho * wo);
        gcols.noalias() = wmat.transpose() * go;
        col2im(gcols_.data(), in_ch_, x.h, x.w, k_, k_, s_, p_, ho, wo, gx.sample(in));
      }
    }
    return gx;
  }

  void collect_params(std::vector<ParamRef<T>>& out) override {
    out.push_back({weight_.data(), grad_.data(), weight_.size()});
  }

  std::vector<T>& weight() { return weight_; }
  int out_channels() const { return out_ch_; }

 private:
  int in_ch_, out_ch_, k_, s_, p_;
  std::vector<T> weight_, grad_;
  std::vector<T> cols_, gcols_;
  Tensor4<T> input_;
};

// Transposed convolution (the adjoint map of Conv2d with the same geometry).
// Weight layout: (in_channels, out_channels, kh, kw).
template <typename T>
class ConvTranspose2d : public Layer<T> {
 public:
  ConvTranspose2d(int in_ch, int out_ch, int kernel, int stride, int pad)
      : in_ch_(in_ch), out_ch_(out_ch), k_(kernel), s_(stride), p_(pad) {
    weight_.assign(static_cast<size_t>(in_ch) * out_ch * kernel * kernel, T(0));
    grad_.assign(weight_.size(), T(0));
  }

  void init_kaiming(std::mt19937_64& rng) {
    const double std_dev = std::sqrt(2.0 / (static_cast<double>(in_ch_) * k_ * k_));
    std::normal_distribution<double> gauss(0.0, std_dev);
    for (auto& v : weight_) v = static_cast<T>(gauss(rng));
  }

  Tensor4<T> forward(const Tensor4<T>& x, bool) override {
    if (x.c != in_ch_) throw std::invalid_argument("ConvTranspose2d: channel mismatch");
    const int ho = conv_transpose_out_size(x.h, k_, s_, p_);
    const int wo = conv_transpose_out_size(x.w, k_, s_, p_);
    if (ho <= 0 || wo <= 0) throw std::invalid_argument("ConvTranspose2d: output size not positive");
    input_ = x;
    Tensor4<T> y(x.n, out_ch_, ho, wo);
    cols_.resize(static_cast<size_t>(out_ch_) * k_ * k_ * x.h * x.w);
    ConstMatMap<T> wmat(weight_.data(), in_ch_, out_ch_ * k_ * k_);
    for (int in = 0; in < x.n; ++in) {
      ConstMatMap<T> xm(x.sample(in), in_ch_, x.h * x.w);
      MatMap<T> cols(cols_.data(), out_ch_ * k_ * k_, x.h * x.w);
      cols.noalias() = wmat.transpose() * xm;
      col2im(cols_.data(), out_ch_, ho, wo, k_, k_, s_, p_, x.h, x.w, y.sample(in));
    }
    return y;
  }

  Tensor4<T> backward(const Tensor4<T>& gout) override {
    const Tensor4<T>& x = input_;
    Tensor4<T> gx(x.n, x.c, x.h, x.w);
    cols_.resize(static_cast<size_t>(out_ch_) * k_ * k_ * x.h * x.w);
    ConstMatMap<T> wmat(weight_.data(), in_ch_, out_ch_ * k_ * k_);
    MatMap<T> gwmat(grad_.data(), in_ch_, out_ch_ * k_ * k_);
    for (int in = 0; in < x.n; ++in) {
      im2col(gout.sample(in), out_ch_, gout.h, gout.w, k_, k_, s_, p_, x.h, x.w, cols_.data());
      ConstMatMap<T> cols(cols_.data(), out_ch_ * k_ * k_, x.h * x.w);
      MatMap<T> gxm(gx.sample(in), in_ch_, x.h * x.w);
      gxm.noalias() = wmat * cols;
      ConstMatMap<T> xm(x.sample(in), in_ch_, x.h * x.w);
      gwmat.noalias() += xm * cols.transpose();
    }
    return gx;
  }

  void collect_params(std::vector<ParamRef<T>>& out) override {
    out.push_back({weight_.data(), grad_.data(), weight_.size()});
  }

  std::vector<T>& weight() { return weight_; }

 private:
  int in_ch_, out_ch_, k_, s_, p_;
  std::vector<T> weight_, grad_;
  std::vector<T> cols_;
  Tensor4<T> input_;
};

// Per-channel batch normalization with learned scale/shift and running
// statistics (momentum 0.1, eps 1e-5). Training mode needs batch >= 2.
template <typename T>
class BatchNorm2d : public Layer<T> {
 public:
  explicit BatchNorm2d(int channels, double momentum = 0.1, double eps = 1e-5)
      : c_(channels), momentum_(momentum), eps_(eps) {
    gamma_.assign(channels, T(1));
    beta_.assign(channels, T(0));
    ggamma_.assign(channels, T(0));
    gbeta_.assign(channels, T(0));
    running_mean_.assign(channels, T(0));
    running_var_.assign(channels, T(1));
  }

  Tensor4<T> forward(const Tensor4<T>& x, bool training) override {
    if (x.c != c_) throw std::invalid_argument("BatchNorm2d: channel mismatch");
    if (training && x.n < 2)
      throw std::invalid_argument("BatchNorm2d: training mode requires batch >= 2");
    training_ = training;
    const size_t m = static_cast<size_t>(x.n) * x.h * x.w;
    xhat_ = Tensor4<T>(x.n, x.c, x.h, x.w);
    inv_std_.assign(c_, T(0));
    Tensor4<T> y(x.n, x.c, x.h, x.w);

    const int hw = x.h * x.w;
    using ArrayMap = Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>>;
    using ConstArrayMap = Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>;
    for (int ch = 0; ch < c_; ++ch) {
      double mean, var;
      if (training) {
        double sum = 0.0, sq = 0.0;
        for (int in = 0; in < x.n; ++in) {
          ConstArrayMap p(x.sample(in) + static_cast<size_t>(ch) * hw, hw);
          sum += p.template cast<double>().sum();
          sq += p.template cast<double>().square().sum();
        }
        mean = sum / m;
        var = std::max(sq / m - mean * mean, 0.0);
        running_mean_[ch] = static_cast<T>((1.0 - momentum_) * running_mean_[ch] + momentum_ * mean);
        const double unbiased = m > 1 ? var * m / (m - 1.0) : var;
        running_var_[ch] = static_cast<T>((1.0 - momentum_) * running_var_[ch] + momentum_ * unbiased);
      } else {
        mean = running_mean_[ch];
        var = running_var_[ch];
      }
      const T istd = static_cast<T>(1.0 / std::sqrt(var + eps_));
      inv_std_[ch] = istd;
      for (int in = 0; in < x.n; ++in) {
        ConstArrayMap p(x.sample(in) + static_cast<size_t>(ch) * hw, hw);
        ArrayMap xh(xhat_.sample(in) + static_cast<size_t>(ch) * hw, hw);
        ArrayMap yo(y.sample(in) + static_cast<size_t>(ch) * hw, hw);
        xh = (p - static_cast<T>(mean)) * istd;
        yo = gamma_[ch] * xh + beta_[ch];
      }
    }
    return y;
  }

  Tensor4<T> backward(const Tensor4<T>& gout) override {
    const int n = gout.n, hw = gout.h * gout.w;
    const double m = static_cast<double>(n) * hw;
    Tensor4<T> gx(n, c_, gout.h, gout.w);
    using ArrayMap = Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>>;
    using ConstArrayMap = Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>;
    for (int ch = 0; ch < c_; ++ch) {
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (int in = 0; in < n; ++in) {
        ConstArrayMap dy(gout.sample(in) + static_cast<size_t>(ch) * hw, hw);
        ConstArrayMap xh(xhat_.sample(in) + static_cast<size_t>(ch) * hw, hw);
        sum_dy += dy.template cast<double>().sum();
        sum_dy_xhat += (dy.template cast<double>() * xh.template cast<double>()).sum();
      }
      gbeta_[ch] += static_cast<T>(sum_dy);
      ggamma_[ch] += static_cast<T>(sum_dy_xhat);
      const T g_istd = static_cast<T>(gamma_[ch] * inv_std_[ch]);
      const T mean_dy = static_cast<T>(sum_dy / m), mean_dyx = static_cast<T>(sum_dy_xhat / m);
      for (int in = 0; in < n; ++in) {
        ConstArrayMap dy(gout.sample(in) + static_cast<size_t>(ch) * hw, hw);
        ConstArrayMap xh(xhat_.sample(in) + static_cast<size_t>(ch) * hw, hw);
        ArrayMap dx(gx.sample(in) + static_cast<size_t>(ch) * hw, hw);
        if (training_)
          dx = g_istd * (dy - mean_dy - xh * mean_dyx);
        else
          dx = g_istd * dy;
      }
    }
    return gx;
  }

  void collect_params(std::vector<ParamRef<T>>& out) override {
    out.push_back({gamma_.data(), ggamma_.data(), gamma_.size()});
    out.push_back({beta_.data(), gbeta_.data(), beta_.size()});
  }
  void collect_buffers(std::vector<BufferRef<T>>& out) override {
    out.push_back({running_mean_.data(), running_mean_.size()});
    out.push_back({running_var_.data(), running_var_.size()});
  }

 private:
  int c_;
  double momentum_, eps_;
  bool training_ = true;
  std::vector<T> gamma_, beta_, ggamma_, gbeta_;
  std::vector<T> running_mean_, running_var_;
  std::vector<T> inv_std_;
  Tensor4<T> xhat_;
};

template <typename T>
class ReLU : public Layer<T> {
 public:
  Tensor4<T> forward(const Tensor4<T>& x, bool) override {
    mask_.resize(x.size());
    Tensor4<T> y = x;
    for (size_t i = 0; i < y.data.size(); ++i) {
      const bool pos = y.data[i] > T(0);
      mask_[i] = pos;
      y.data[i] = pos ? y.data[i] : T(0);
    }
    return y;
  }

  Tensor4<T> backward(const Tensor4<T>& gout) override {
    Tensor4<T> gx = gout;
    for (size_t i = 0; i < gx.data.size(); ++i) gx.data[i] = mask_[i] ? gx.data[i] : T(0);
    return gx;
  }

 private:
  std::vector<std::uint8_t> mask_;
};

// Head channels through a sigmoid, the remaining channels through
// softplus(x) = log(1 + exp(beta x)) / beta.
template <typename T>
class OutputActivation : public Layer<T> {
 public:
  OutputActivation(int head_channels, double beta) : head_(head_channels), beta_(beta) {}

  Tensor4<T> forward(const Tensor4<T>& x, bool) override {
    Tensor4<T> y(x.n, x.c, x.h, x.w);
    deriv_ = Tensor4<T>(x.n, x.c, x.h, x.w);
    const int hw = x.h * x.w;
    for (int in = 0; in < x.n; ++in)
      for (int ch = 0; ch < x.c; ++ch) {
        const T* p = x.sample(in) + static_cast<size_t>(ch) * hw;
        T* yo = y.sample(in) + static_cast<size_t>(ch) * hw;
        T* dv = deriv_.sample(in) + static_cast<size_t>(ch) * hw;
        if (ch < head_) {
          for (int i = 0; i < hw; ++i) {
            const double s = 1.0 / (1.0 + std::exp(-static_cast<double>(p[i])));
            yo[i] = static_cast<T>(s);
            dv[i] = static_cast<T>(s * (1.0 - s));
          }
        } else {
          for (int i = 0; i < hw; ++i) {
            const double bx = beta_ * p[i];
            const double sp = bx > 30.0 ? static_cast<double>(p[i]) : std::log1p(std::exp(bx)) / beta_;
            yo[i] = static_cast<T>(sp);
            dv[i] = static_cast<T>(1.0 / (1.0 + std::exp(-bx)));
          }
        }
      }
    return y;
  }

  Tensor4<T> backward(const Tensor4<T>& gout) override {
    Tensor4<T> gx = gout;
    for (size_t i = 0; i < gx.data.size(); ++i) gx.data[i] *= deriv_.data[i];
    return gx;
  }

 private:
  int head_;
  double beta_;
  Tensor4<T> deriv_;
};

// Densely connected block: L iterations of BN -> ReLU -> Conv(k3 s1 p1)
// producing `growth` maps, each concatenated onto the running feature stack.
template <typename T>
class DenseBlock : public Layer<T> {
 public:
  DenseBlock(int in_ch, int n_layers, int growth) : in_ch_(in_ch), growth_(growth) {
    for (int l = 0; l < n_layers; ++l) {
      const int ch = in_ch + l * growth;
      bns_.push_back(std::make_unique<BatchNorm2d<T>>(ch));
      relus_.push_back(std::make_unique<ReLU<T>>());
      convs_.push_back(std::make_unique<Conv2d<T>>(ch, growth, 3, 1, 1));
    }
  }

  void init_kaiming(std::mt19937_64& rng) {
    for (auto& conv : convs_) conv->init_kaiming(rng);
  }

  int out_channels() const { return in_ch_ + static_cast<int>(convs_.size()) * growth_; }

  Tensor4<T> forward(const Tensor4<T>& x, bool training) override {
    Tensor4<T> z = x;
    for (size_t l = 0; l < convs_.size(); ++l) {
      Tensor4<T> fresh =
          convs_[l]->forward(relus_[l]->forward(bns_[l]->forward(z, training), training), training);
      z = concat_channels(z, fresh);
    }
    return z;
  }

  Tensor4<T> backward(const Tensor4<T>& gout) override {
    Tensor4<T> g = gout;
    for (size_t l = convs_.size(); l-- > 0;) {
      const int ch = in_ch_ + static_cast<int>(l) * growth_;
      Tensor4<T> g_fresh = slice_channels(g, ch, growth_);
      Tensor4<T> g_prev = slice_channels(g, 0, ch);
      Tensor4<T> g_through =
          bns_[l]->backward(relus_[l]->backward(convs_[l]->backward(g_fresh)));
      for (size_t i = 0; i < g_prev.data.size(); ++i) g_prev.data[i] += g_through.data[i];
      g = std::move(g_prev);
    }
    return g;
  }

  void collect_params(std::vector<ParamRef<T>>& out) override {
    for (size_t l = 0; l < convs_.size(); ++l) {
      bns_[l]->collect_params(out);
      convs_[l]->collect_params(out);
    }
  }
  void collect_buffers(std::vector<BufferRef<T>>& out) override {
    for (auto& bn : bns_) bn->collect_buffers(out);
  }

 private:
  int in_ch_, growth_;
  std::vector<std::unique_ptr<BatchNorm2d<T>>> bns_;
  std::vector<std::unique_ptr<ReLU<T>>> relus_;
  std::vector<std::unique_ptr<Conv2d<T>>> convs_;
};

// A plain chain of layers.
template <typename T>
class Sequential : public Layer<T> {
 public:
  void add(std::unique_ptr<Layer<T>> layer) { layers_.push_back(std::move(layer)); }

  Tensor4<T> forward(const Tensor4<T>& x, bool training) override {
    Tensor4<T> z = x;
    for (auto& layer : layers_) z = layer->forward(z, training);
    return z;
  }
  Tensor4<T> backward(const Tensor4<T>& gout) override {
    Tensor4<T> g = gout;
    for (size_t i = layers_.size(); i-- > 0;) g = layers_[i]->backward(g);
    return g;
  }
  void collect_params(std::vector<ParamRef<T>>& out) override {
    for (auto& layer : layers_) layer->collect_params(out);
  }
  void collect_buffers(std::vector<BufferRef<T>>& out) override {
    for (auto& layer : layers_) layer->collect_buffers(out);
  }

 private:
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

}  // namespace aquinv::net
