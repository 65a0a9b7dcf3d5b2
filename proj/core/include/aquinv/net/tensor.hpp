#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace aquinv::net {

// Rank-4 tensor (batch, channels, height, width), contiguous row-major.
template <typename T>
struct Tensor4 {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<T> data;

  Tensor4() = default;
  Tensor4(int n_, int c_, int h_, int w_) : n(n_), c(c_), h(h_), w(w_) {
    if (n_ <= 0 || c_ <= 0 || h_ <= 0 || w_ <= 0)
      throw std::invalid_argument("Tensor4: dimensions must be positive");
    data.assign(static_cast<size_t>(n_) * c_ * h_ * w_, T(0));
  }

  std::array<int, 4> shape() const { return {n, c, h, w}; }
  size_t size() const { return data.size(); }
  int plane() const { return h * w; }

  T& operator()(int in, int ic, int iy, int ix) {
    return data[((static_cast<size_t>(in) * c + ic) * h + iy) * w + ix];
  }
  T operator()(int in, int ic, int iy, int ix) const {
    return data[((static_cast<size_t>(in) * c + ic) * h + iy) * w + ix];
  }

  T* sample(int in) { return data.data() + static_cast<size_t>(in) * c * h * w; }
  const T* sample(int in) const { return data.data() + static_cast<size_t>(in) * c * h * w; }

  void set_zero() { std::fill(data.begin(), data.end(), T(0)); }

  bool same_shape(const Tensor4& other) const {
    return n == other.n && c == other.c && h == other.h && w == other.w;
  }
};

template <typename T>
Tensor4<T> concat_channels(const Tensor4<T>& a, const Tensor4<T>& b) {
  if (a.n != b.n || a.h != b.h || a.w != b.w)
    throw std::invalid_argument("concat_channels: incompatible shapes");
  Tensor4<T> out(a.n, a.c + b.c, a.h, a.w);
  const size_t plane_a = static_cast<size_t>(a.c) * a.h * a.w;
  const size_t plane_b = static_cast<size_t>(b.c) * b.h * b.w;
  for (int in = 0; in < a.n; ++in) {
    std::copy(a.sample(in), a.sample(in) + plane_a, out.sample(in));
    std::copy(b.sample(in), b.sample(in) + plane_b, out.sample(in) + plane_a);
  }
  return out;
}

template <typename T>
Tensor4<T> slice_channels(const Tensor4<T>& x, int begin, int count) {
  if (begin < 0 || begin + count > x.c) throw std::invalid_argument("slice_channels: out of range");
  Tensor4<T> out(x.n, count, x.h, x.w);
  const size_t per = static_cast<size_t>(x.h) * x.w;
  for (int in = 0; in < x.n; ++in)
    std::copy(x.sample(in) + begin * per, x.sample(in) + (begin + count) * per, out.sample(in));
  return out;
}

inline std::string shape_string(const std::array<int, 4>& s) {
  return std::to_string(s[0]) + "x" + std::to_string(s[1]) + "x" + std::to_string(s[2]) + "x" +
         std::to_string(s[3]);
}

}  // namespace aquinv::net
