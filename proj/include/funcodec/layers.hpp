#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "funcodec/rng.hpp"
#include "funcodec/tensor.hpp"

namespace funcodec::model {

enum class Activation { Elu, Identity, LeakyRelu };

void activate(std::span<float> values, Activation act);

struct Padding {
  size_t time_lo = 0;
  size_t time_hi = 0;
  size_t freq_lo = 0;
  size_t freq_hi = 0;
};

struct Kernel2d {
  size_t time = 1;
  size_t freq = 1;
};

// Grouped 2-D convolution over (channels, time, freq). Weights are laid out
// [out][in / groups][kernel_t][kernel_f]; biases start at zero.
class Conv2d {
 public:
  Conv2d(size_t in_channels, size_t out_channels, Kernel2d kernel, Kernel2d stride, Padding pad,
         size_t groups, Rng& rng);

  Tensor3 forward(const Tensor3& x) const;

  size_t out_time(size_t t) const;
  size_t out_freq(size_t f) const;

  size_t in_channels() const { return in_; }
  size_t out_channels() const { return out_; }
  size_t groups() const { return groups_; }
  Kernel2d kernel() const { return kernel_; }
  Kernel2d stride() const { return stride_; }
  Padding padding() const { return pad_; }
  size_t parameter_count() const { return weights_.size() + bias_.size(); }

  std::span<float> weights() { return weights_; }
  std::span<float> bias() { return bias_; }

 private:
  size_t in_, out_, groups_;
  Kernel2d kernel_, stride_;
  Padding pad_;
  std::vector<float> weights_;
  std::vector<float> bias_;
};

// Grouped transposed convolution producing exactly (in_t * stride_t,
// in_f * stride_f) outputs: the full result is cropped by (kernel - stride) / 2
// at the low end. Weights are [in][out / groups][kernel_t][kernel_f].
class ConvTranspose2d {
 public:
  ConvTranspose2d(size_t in_channels, size_t out_channels, Kernel2d kernel, Kernel2d stride,
                  size_t groups, Rng& rng);

  Tensor3 forward(const Tensor3& x) const;

  size_t in_channels() const { return in_; }
  size_t out_channels() const { return out_; }
  size_t groups() const { return groups_; }
  Kernel2d kernel() const { return kernel_; }
  Kernel2d stride() const { return stride_; }
  size_t parameter_count() const { return weights_.size() + bias_.size(); }

 private:
  size_t in_, out_, groups_;
  Kernel2d kernel_, stride_;
  std::vector<float> weights_;
  std::vector<float> bias_;
};

// Single-layer unidirectional LSTM (gate order i, f, g, o), zero initial state.
class Lstm {
 public:
  Lstm(size_t input_size, size_t hidden_size, Rng& rng);

  Matrix forward(const Matrix& x) const;

  size_t input_size() const { return input_; }
  size_t hidden_size() const { return hidden_; }
  size_t parameter_count() const { return w_ih_.size() + w_hh_.size() + bias_.size(); }

 private:
  size_t input_, hidden_;
  std::vector<float> w_ih_;  // 4H x input
  std::vector<float> w_hh_;  // 4H x H
  std::vector<float> bias_;  // 4H
};

class Linear {
 public:
  Linear(size_t in_features, size_t out_features, Rng& rng);

  Matrix forward(const Matrix& x) const;

  size_t in_features() const { return in_; }
  size_t out_features() const { return out_; }
  size_t parameter_count() const { return weights_.size() + bias_.size(); }

 private:
  size_t in_, out_;
  std::vector<float> weights_;  // out x in
  std::vector<float> bias_;
};

}  // namespace funcodec::model
