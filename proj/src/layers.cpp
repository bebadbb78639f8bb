#include "funcodec/layers.hpp"

#include <cmath>
#include <string>

#include "funcodec/error.hpp"

namespace funcodec::model {

void activate(std::span<float> values, Activation act) {
  switch (act) {
    case Activation::Identity:
      return;
    case Activation::Elu:
      for (float& v : values) v = v > 0.0f ? v : std::expm1(v);
      return;
    case Activation::LeakyRelu:
      for (float& v : values) v = v > 0.0f ? v : 0.2f * v;
      return;
  }
}

namespace {

// Uniform with variance 1 / fan_in.
void init_uniform(std::vector<float>& w, double fan_in, Rng& rng) {
  const double bound = std::sqrt(3.0 / fan_in);
  for (float& v : w) v = static_cast<float>(rng.uniform(-bound, bound));
}

void check_groups(size_t in, size_t out, size_t groups, const char* layer) {
  if (groups == 0 || in % groups != 0 || out % groups != 0) {
    throw ConfigError(std::string(layer) + ": groups " + std::to_string(groups) + " must divide " +
                      std::to_string(in) + " input and " + std::to_string(out) + " output channels");
  }
}

}  // namespace

Conv2d::Conv2d(size_t in_channels, size_t out_channels, Kernel2d kernel, Kernel2d stride, Padding pad,
               size_t groups, Rng& rng)
    : in_(in_channels), out_(out_channels), groups_(groups), kernel_(kernel), stride_(stride), pad_(pad) {
  check_groups(in_, out_, groups_, "conv2d");
  if (kernel.time == 0 || kernel.freq == 0 || stride.time == 0 || stride.freq == 0) {
    throw ConfigError("conv2d: kernel and stride must be positive");
  }
  weights_.resize(out_ * (in_ / groups_) * kernel_.time * kernel_.freq);
  bias_.assign(out_, 0.0f);
  init_uniform(weights_, static_cast<double>((in_ / groups_) * kernel_.time * kernel_.freq), rng);
}

size_t Conv2d::out_time(size_t t) const {
  const size_t padded = t + pad_.time_lo + pad_.time_hi;
  return padded < kernel_.time ? 0 : (padded - kernel_.time) / stride_.time + 1;
}

size_t Conv2d::out_freq(size_t f) const {
  const size_t padded = f + pad_.freq_lo + pad_.freq_hi;
  return padded < kernel_.freq ? 0 : (padded - kernel_.freq) / stride_.freq + 1;
}

Tensor3 Conv2d::forward(const Tensor3& x) const {
  if (x.channels != in_) {
    throw InvalidInput("conv2d: expected " + std::to_string(in_) + " channels, got " + std::to_string(x.channels));
  }
  const size_t to = out_time(x.time);
  const size_t fo = out_freq(x.freq);
  if (to == 0 || fo == 0) throw InvalidInput("conv2d: input smaller than kernel");
  Tensor3 y(out_, to, fo);

  const size_t in_per_group = in_ / groups_;
  const size_t out_per_group = out_ / groups_;
  const auto pt = static_cast<long long>(pad_.time_lo);
  const auto pf = static_cast<long long>(pad_.freq_lo);
  const auto ti = static_cast<long long>(x.time);
  const auto fi = static_cast<long long>(x.freq);

  for (size_t oc = 0; oc < out_; ++oc) {
    float* out_plane = y.plane(oc);
    std::fill(out_plane, out_plane + to * fo, bias_[oc]);
    const size_t group = oc / out_per_group;
    for (size_t icg = 0; icg < in_per_group; ++icg) {
      const size_t ic = group * in_per_group + icg;
      const float* in_plane = x.plane(ic);
      const float* w = weights_.data() + ((oc * in_per_group + icg) * kernel_.time) * kernel_.freq;
      for (size_t kt = 0; kt < kernel_.time; ++kt) {
        for (size_t kf = 0; kf < kernel_.freq; ++kf) {
          const float wv = w[kt * kernel_.freq + kf];
          // Valid output frequency range for this tap.
          const long long offset_f = static_cast<long long>(kf) - pf;
          const long long sf = static_cast<long long>(stride_.freq);
          long long f_begin = 0;
          if (offset_f < 0) f_begin = (-offset_f + sf - 1) / sf;
          long long f_end = fi - offset_f <= 0 ? 0 : (fi - offset_f + sf - 1) / sf;
          f_end = std::min<long long>(f_end, static_cast<long long>(fo));
          if (f_begin >= f_end) continue;
          for (size_t ot = 0; ot < to; ++ot) {
            const long long it = static_cast<long long>(ot * stride_.time + kt) - pt;
            if (it < 0 || it >= ti) continue;
            const float* in_row = in_plane + it * fi;
            float* out_row = out_plane + ot * fo;
            if (sf == 1) {
              for (long long of = f_begin; of < f_end; ++of) out_row[of] += wv * in_row[of + offset_f];
            } else {
              for (long long of = f_begin; of < f_end; ++of) out_row[of] += wv * in_row[of * sf + offset_f];
            }
          }
        }
      }
    }
  }
  return y;
}

ConvTranspose2d::ConvTranspose2d(size_t in_channels, size_t out_channels, Kernel2d kernel, Kernel2d stride,
                                 size_t groups, Rng& rng)
    : in_(in_channels), out_(out_channels), groups_(groups), kernel_(kernel), stride_(stride) {
  check_groups(in_, out_, groups_, "conv_transpose2d");
  if (kernel.time < stride.time || kernel.freq < stride.freq || stride.time == 0 || stride.freq == 0) {
    throw ConfigError("conv_transpose2d: kernel must be at least the stride");
  }
  weights_.resize(in_ * (out_ / groups_) * kernel_.time * kernel_.freq);
  bias_.assign(out_, 0.0f);
  const double fan_in = static_cast<double>((in_ / groups_) * kernel_.time * kernel_.freq) /
                        static_cast<double>(stride_.time * stride_.freq);
  init_uniform(weights_, fan_in, rng);
}

Tensor3 ConvTranspose2d::forward(const Tensor3& x) const {
  if (x.channels != in_) {
    throw InvalidInput("conv_transpose2d: expected " + std::to_string(in_) + " channels, got " +
                       std::to_string(x.channels));
  }
  const size_t to = x.time * stride_.time;
  const size_t fo = x.freq * stride_.freq;
  Tensor3 y(out_, to, fo);
  for (size_t oc = 0; oc < out_; ++oc) std::fill(y.plane(oc), y.plane(oc) + to * fo, bias_[oc]);

  const size_t in_per_group = in_ / groups_;
  const size_t out_per_group = out_ / groups_;
  const auto crop_t = static_cast<long long>((kernel_.time - stride_.time) / 2);
  const auto crop_f = static_cast<long long>((kernel_.freq - stride_.freq) / 2);

  for (size_t ic = 0; ic < in_; ++ic) {
    const size_t group = ic / in_per_group;
    const float* in_plane = x.plane(ic);
    for (size_t ocg = 0; ocg < out_per_group; ++ocg) {
      const size_t oc = group * out_per_group + ocg;
      float* out_plane = y.plane(oc);
      const float* w = weights_.data() + ((ic * out_per_group + ocg) * kernel_.time) * kernel_.freq;
      for (size_t it = 0; it < x.time; ++it) {
        for (size_t kt = 0; kt < kernel_.time; ++kt) {
          const long long ot = static_cast<long long>(it * stride_.time + kt) - crop_t;
          if (ot < 0 || ot >= static_cast<long long>(to)) continue;
          const float* in_row = in_plane + it * x.freq;
          float* out_row = out_plane + ot * static_cast<long long>(fo);
          for (size_t kf = 0; kf < kernel_.freq; ++kf) {
            const float wv = w[kt * kernel_.freq + kf];
            for (size_t i_f = 0; i_f < x.freq; ++i_f) {
              const long long of = static_cast<long long>(i_f * stride_.freq + kf) - crop_f;
              if (of < 0 || of >= static_cast<long long>(fo)) continue;
              out_row[of] += wv * in_row[i_f];
            }
          }
        }
      }
    }
  }
  return y;
}

Lstm::Lstm(size_t input_size, size_t hidden_size, Rng& rng) : input_(input_size), hidden_(hidden_size) {
  if (input_ == 0 || hidden_ == 0) throw ConfigError("lstm: sizes must be positive");
  w_ih_.resize(4 * hidden_ * input_);
  w_hh_.resize(4 * hidden_ * hidden_);
  bias_.assign(4 * hidden_, 0.0f);
  init_uniform(w_ih_, static_cast<double>(input_), rng);
  init_uniform(w_hh_, static_cast<double>(hidden_), rng);
}

Matrix Lstm::forward(const Matrix& x) const {
  if (x.cols != input_) throw InvalidInput("lstm: input width mismatch");
  Matrix out(x.rows, hidden_);
  std::vector<float> h(hidden_, 0.0f);
  std::vector<float> c(hidden_, 0.0f);
  std::vector<float> gates(4 * hidden_);
  auto sigmoid = [](float v) { return 1.0f / (1.0f + std::exp(-v)); };
  for (size_t t = 0; t < x.rows; ++t) {
    const auto xt = x.row(t);
    for (size_t g = 0; g < 4 * hidden_; ++g) {
      float acc = bias_[g];
      const float* wi = w_ih_.data() + g * input_;
      for (size_t i = 0; i < input_; ++i) acc += wi[i] * xt[i];
      const float* wh = w_hh_.data() + g * hidden_;
      for (size_t i = 0; i < hidden_; ++i) acc += wh[i] * h[i];
      gates[g] = acc;
    }
    for (size_t i = 0; i < hidden_; ++i) {
      const float in_gate = sigmoid(gates[i]);
      const float forget = sigmoid(gates[hidden_ + i]);
      const float cell = std::tanh(gates[2 * hidden_ + i]);
      const float out_gate = sigmoid(gates[3 * hidden_ + i]);
      c[i] = forget * c[i] + in_gate * cell;
      h[i] = out_gate * std::tanh(c[i]);
    }
    std::copy(h.begin(), h.end(), out.row(t).begin());
  }
  return out;
}

Linear::Linear(size_t in_features, size_t out_features, Rng& rng) : in_(in_features), out_(out_features) {
  if (in_ == 0 || out_ == 0) throw ConfigError("linear: sizes must be positive");
  weights_.resize(out_ * in_);
  bias_.assign(out_, 0.0f);
  init_uniform(weights_, static_cast<double>(in_), rng);
}

Matrix Linear::forward(const Matrix& x) const {
  if (x.cols != in_) throw InvalidInput("linear: input width mismatch");
  Matrix y(x.rows, out_);
  for (size_t r = 0; r < x.rows; ++r) {
    const auto xr = x.row(r);
    for (size_t o = 0; o < out_; ++o) {
      float acc = bias_[o];
      const float* w = weights_.data() + o * in_;
      for (size_t i = 0; i < in_; ++i) acc += w[i] * xr[i];
      y(r, o) = acc;
    }
  }
  return y;
}

}  // namespace funcodec::model
