#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "aquinv/net/layers.hpp"
#include "aquinv/rng.hpp"

namespace aquinv::net {

// Dense convolutional encoder-decoder: an input convolution, three dense
// blocks separated by one encoding layer (downsample) and two decoding
// layers (upsample), with sigmoid/softplus output activations.
struct NetworkSpec {
  int in_channels = 3;
  int out_channels = 2;
  int initial_features = 48;
  std::array<int, 3> block_layers = {5, 10, 5};
  int growth_rate = 40;
  int head_channels = 1;     // leading output channels through sigmoid
  double softplus_beta = 5.0;

  void validate() const {
    if (in_channels <= 0 || out_channels <= 0 || initial_features <= 0 || growth_rate <= 0)
      throw std::invalid_argument("NetworkSpec: counts must be positive");
    if (initial_features % 2 != 0)
      throw std::invalid_argument("NetworkSpec: initial feature count must be even");
    if (head_channels < 0 || head_channels > out_channels)
      throw std::invalid_argument("NetworkSpec: head channel count out of range");
  }
};

inline NetworkSpec paper_network_spec(int in_channels = 3, int out_channels = 2) {
  NetworkSpec spec;
  spec.in_channels = in_channels;
  spec.out_channels = out_channels;
  return spec;
}

inline NetworkSpec desk_network_spec(int in_channels = 3, int out_channels = 2) {
  NetworkSpec spec;
  spec.in_channels = in_channels;
  spec.out_channels = out_channels;
  spec.initial_features = 24;
  spec.block_layers = {3, 5, 3};
  spec.growth_rate = 16;
  return spec;
}

struct StageShape {
  std::string name;
  std::array<int, 4> shape;
};

template <typename T>
class EncoderDecoder {
 public:
  EncoderDecoder(const NetworkSpec& spec, std::uint64_t init_seed) : spec_(spec) {
    spec.validate();
    auto rng = make_rng(init_seed, 0xC0DE);

    auto conv_in = std::make_unique<Conv2d<T>>(spec.in_channels, spec.initial_features, 7, 2, 3);
    conv_in->init_kaiming(rng);
    stages_.emplace_back("convolution", std::move(conv_in));

    int ch = spec.initial_features;
    auto dense1 = std::make_unique<DenseBlock<T>>(ch, spec.block_layers[0], spec.growth_rate);
    dense1->init_kaiming(rng);
    ch = dense1->out_channels();
    stages_.emplace_back("dense_block_1", std::move(dense1));

    stages_.emplace_back("encoding_layer", transition(ch, ch / 2, /*down=*/true, 3, 2, 1, rng));
    ch /= 2;

    auto dense2 = std::make_unique<DenseBlock<T>>(ch, spec.block_layers[1], spec.growth_rate);
    dense2->init_kaiming(rng);
    ch = dense2->out_channels();
    stages_.emplace_back("dense_block_2", std::move(dense2));

    stages_.emplace_back("decoding_layer_1", transition(ch, ch / 2, /*down=*/false, 3, 2, 1, rng));
    ch /= 2;

    auto dense3 = std::make_unique<DenseBlock<T>>(ch, spec.block_layers[2], spec.growth_rate);
    dense3->init_kaiming(rng);
    ch = dense3->out_channels();
    stages_.emplace_back("dense_block_3", std::move(dense3));

    stages_.emplace_back("decoding_layer_2",
                         transition(ch, spec.out_channels, /*down=*/false, 5, 2, 2, rng));

    stages_.emplace_back("output_activation", std::make_unique<OutputActivation<T>>(
                                                  spec.head_channels, spec.softplus_beta));
  }

  Tensor4<T> forward(const Tensor4<T>& x, bool training) {
    last_shapes_.clear();
    last_shapes_.push_back({"input", x.shape()});
    Tensor4<T> z = x;
    for (auto& [name, layer] : stages_) {
      z = layer->forward(z, training);
      if (name != "output_activation") last_shapes_.push_back({name, z.shape()});
    }
    return z;
  }

  Tensor4<T> backward(const Tensor4<T>& grad_out) {
    Tensor4<T> g = grad_out;
    for (size_t i = stages_.size(); i-- > 0;) g = stages_[i].second->backward(g);
    return g;
  }

  std::vector<ParamRef<T>> params() {
    std::vector<ParamRef<T>> out;
    for (auto& [name, layer] : stages_) layer->collect_params(out);
    return out;
  }
  std::vector<BufferRef<T>> buffers() {
    std::vector<BufferRef<T>> out;
    for (auto& [name, layer] : stages_) layer->collect_buffers(out);
    return out;
  }

  void zero_grad() {
    for (auto& p : params()) std::fill(p.grad, p.grad + p.size, T(0));
  }

  size_t parameter_count() {
    size_t n = 0;
    for (auto& p : params()) n += p.size;
    return n;
  }

  // Stage output shapes recorded by the last forward pass.
  const std::vector<StageShape>& stage_shapes() const { return last_shapes_; }
  const NetworkSpec& spec() const { return spec_; }

 private:
  // Transition layer: BN-ReLU-Conv(1x1) halving channels, then BN-ReLU and a
  // strided convolution (encoder) or transposed convolution (decoder).
  static std::unique_ptr<Sequential<T>> transition(int in_ch, int out_ch, bool down, int k, int s,
                                                   int p, std::mt19937_64& rng) {
    auto seq = std::make_unique<Sequential<T>>();
    const int mid = in_ch / 2;
    seq->add(std::make_unique<BatchNorm2d<T>>(in_ch));
    seq->add(std::make_unique<ReLU<T>>());
    auto conv1 = std::make_unique<Conv2d<T>>(in_ch, mid, 1, 1, 0);
    conv1->init_kaiming(rng);
    seq->add(std::move(conv1));
    seq->add(std::make_unique<BatchNorm2d<T>>(mid));
    seq->add(std::make_unique<ReLU<T>>());
    if (down) {
      auto conv2 = std::make_unique<Conv2d<T>>(mid, out_ch, k, s, p);
      conv2->init_kaiming(rng);
      seq->add(std::move(conv2));
    } else {
      auto conv2 = std::make_unique<ConvTranspose2d<T>>(mid, out_ch, k, s, p);
      conv2->init_kaiming(rng);
      seq->add(std::move(conv2));
    }
    return seq;
  }

  NetworkSpec spec_;
  std::vector<std::pair<std::string, std::unique_ptr<Layer<T>>>> stages_;
  std::vector<StageShape> last_shapes_;
};

}  // namespace aquinv::net
