#pragma once

// The embedding function shared by both training stages: an MLP with
// leaky-ReLU (slope 0.1) between layers and no activation after the last.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "fsmb/errors.hpp"
#include "fsmb/rng.hpp"
#include "fsmb/tensor.hpp"

namespace fsmb {

struct EncoderDescriptor {
  std::uint32_t input_dim = 0;
  std::vector<std::uint32_t> hidden_dims;
  std::uint32_t embed_dim = 0;

  std::vector<std::uint32_t> dims() const {
    std::vector<std::uint32_t> d;
    d.push_back(input_dim);
    d.insert(d.end(), hidden_dims.begin(), hidden_dims.end());
    d.push_back(embed_dim);
    return d;
  }

  void validate() const {
    if (input_dim < 1) throw ConfigError("encoder: input_dim must be >= 1");
    if (embed_dim < 2) throw ConfigError("encoder: embed_dim must be >= 2");
    for (auto h : hidden_dims)
      if (h < 1) throw ConfigError("encoder: hidden dims must be >= 1");
  }
};

template <class S>
struct EncoderT {
  std::vector<std::uint32_t> dims;  // input, hidden..., embed
  S leaky_slope = S(0.1);
  std::vector<TensorT<S>> weights;  // layer i: [dims[i+1] x dims[i]]
  std::vector<TensorT<S>> biases;   // layer i: [dims[i+1]]

  std::uint32_t input_dim() const { return dims.front(); }
  std::uint32_t embed_dim() const { return dims.back(); }
  std::size_t num_layers() const { return weights.size(); }

  TensorT<S> forward(const TensorT<S>& batch) const {
    if (batch.rank() != 2 || batch.cols() != input_dim()) {
      throw DimensionError("encoder: batch " + shape_str(batch.shape()) + " does not match input_dim " +
                           std::to_string(input_dim()));
    }
    TensorT<S> x = batch;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      x = linear(x, weights[i], biases[i]);
      if (i + 1 < weights.size()) x = leaky_relu(x, leaky_slope);
    }
    return x;
  }

  std::vector<TensorT<S>*> parameters() {
    std::vector<TensorT<S>*> ps;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      ps.push_back(&weights[i]);
      ps.push_back(&biases[i]);
    }
    return ps;
  }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto& w : weights) n += w.size();
    for (const auto& b : biases) n += b.size();
    return n;
  }

  EncoderT clone() const {
    EncoderT copy;
    copy.dims = dims;
    copy.leaky_slope = leaky_slope;
    for (const auto& w : weights) {
      copy.weights.push_back(
          TensorT<S>::from_values(w.shape(), w.values()).set_requires_grad(w.requires_grad()));
    }
    for (const auto& b : biases) {
      copy.biases.push_back(
          TensorT<S>::from_values(b.shape(), b.values()).set_requires_grad(b.requires_grad()));
    }
    return copy;
  }

  template <class T>
  EncoderT<T> cast() const {
    EncoderT<T> out;
    out.dims = dims;
    out.leaky_slope = static_cast<T>(leaky_slope);
    for (const auto& w : weights) {
      std::vector<T> v(w.values().begin(), w.values().end());
      out.weights.push_back(
          TensorT<T>::from_values(w.shape(), std::move(v)).set_requires_grad(w.requires_grad()));
    }
    for (const auto& b : biases) {
      std::vector<T> v(b.values().begin(), b.values().end());
      out.biases.push_back(
          TensorT<T>::from_values(b.shape(), std::move(v)).set_requires_grad(b.requires_grad()));
    }
    return out;
  }
};

// Weights ~ uniform(-s, s) with s = sqrt(6 / (fan_in + fan_out)); biases zero.
// Fully determined by (seed, "encoder-init").
template <class S>
EncoderT<S> init_encoder(const EncoderDescriptor& desc, std::uint64_t seed) {
  desc.validate();
  Rng rng = Rng::stream(seed, "encoder-init");
  EncoderT<S> enc;
  enc.dims = desc.dims();
  for (std::size_t i = 0; i + 1 < enc.dims.size(); ++i) {
    const std::size_t fan_in = enc.dims[i];
    const std::size_t fan_out = enc.dims[i + 1];
    const double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::vector<S> w(fan_out * fan_in);
    for (auto& x : w) x = static_cast<S>((2.0 * rng.next_double() - 1.0) * s);
    enc.weights.push_back(
        TensorT<S>::from_values({fan_out, fan_in}, std::move(w)).set_requires_grad(true));
    enc.biases.push_back(TensorT<S>::zeros({fan_out}).set_requires_grad(true));
  }
  return enc;
}

using Encoder = EncoderT<float>;

}  // namespace fsmb
