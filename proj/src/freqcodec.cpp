#include "funcodec/freqcodec.hpp"

#include <sstream>

#include "funcodec/error.hpp"

namespace funcodec::model {

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv2d: return "conv2d";
    case LayerKind::ConvTranspose2d: return "conv_transpose2d";
    case LayerKind::Recurrent: return "lstm";
    case LayerKind::Linear: return "linear";
    case LayerKind::Reshape: return "reshape";
  }
  return "unknown";
}

std::string shape_string(const Shape& s) {
  std::ostringstream os;
  os << '(';
  for (size_t i = 0; i < s.size(); ++i) os << (i ? ", " : "") << s[i];
  os << ')';
  return os.str();
}

namespace {

LayerSpec conv(std::string name, const Shape& in, size_t out_ch, Kernel2d k, Kernel2d s, Padding p, size_t groups,
               bool act) {
  LayerSpec spec;
  spec.name = std::move(name);
  spec.kind = LayerKind::Conv2d;
  spec.in_channels = in[0];
  spec.out_channels = out_ch;
  spec.kernel = k;
  spec.stride = s;
  spec.padding = p;
  spec.groups = groups;
  spec.activated = act;
  spec.input = in;
  const size_t t = (in[1] + p.time_lo + p.time_hi - k.time) / s.time + 1;
  const size_t f = (in[2] + p.freq_lo + p.freq_hi - k.freq) / s.freq + 1;
  spec.output = {out_ch, t, f};
  return spec;
}

LayerSpec conv_transpose(std::string name, const Shape& in, size_t out_ch, Kernel2d k, Kernel2d s, size_t groups) {
  LayerSpec spec;
  spec.name = std::move(name);
  spec.kind = LayerKind::ConvTranspose2d;
  spec.in_channels = in[0];
  spec.out_channels = out_ch;
  spec.kernel = k;
  spec.stride = s;
  spec.groups = groups;
  spec.activated = true;
  spec.input = in;
  spec.output = {out_ch, in[1] * s.time, in[2] * s.freq};
  return spec;
}

LayerSpec sequence(std::string name, LayerKind kind, const Shape& in, Shape out) {
  LayerSpec spec;
  spec.name = std::move(name);
  spec.kind = kind;
  spec.input = in;
  spec.output = std::move(out);
  spec.in_channels = in.back();
  spec.out_channels = spec.output.back();
  return spec;
}

}  // namespace

std::vector<LayerSpec> build_encoder(const ModelConfig& cfg, size_t frames) {
  cfg.validate();
  if (frames == 0 || frames % cfg.time_stride() != 0) {
    throw InvalidInput("encoder: " + std::to_string(frames) + " frames is not a multiple of the time stride " +
                       std::to_string(cfg.time_stride()));
  }
  std::vector<LayerSpec> layers;
  // Frequency padding (3, 2) turns 257 bins into 256.
  layers.push_back(conv("PreConv2D", {cfg.input_channels(), frames, cfg.freq_bins()}, cfg.channels, {7, 7}, {1, 1},
                        {3, 3, 3, 2}, 1, true));
  for (size_t b = 0; b < cfg.blocks(); ++b) {
    const size_t cb = cfg.block_channels(b);
    const size_t s = cfg.strides[b];
    const std::string prefix = "EncBlock" + std::to_string(b + 1) + ".";
    const Shape in = layers.back().output;
    layers.push_back(conv(prefix + "Conv2D_1", in, cb / 2, {3, 3}, {1, 1}, {1, 1, 1, 1},
                          cfg.groups_enc.resolve(cb, cb / 2), true));
    layers.push_back(conv(prefix + "Conv2D_2", layers.back().output, cb, {1, 1}, {1, 1}, {},
                          cfg.groups_enc.resolve(cb / 2, cb), true));
    layers.push_back(conv(prefix + "Conv2D_ds", layers.back().output, 2 * cb, {2 * s, 8}, {s, 4},
                          {s / 2, s - s / 2, 2, 2}, cfg.groups_enc.resolve(cb, 2 * cb), true));
  }
  const Shape last = layers.back().output;
  const size_t width = last[0] * last[2];
  layers.push_back(sequence("Reshape", LayerKind::Reshape, last, {last[1], width}));
  layers.push_back(sequence("LSTM", LayerKind::Recurrent, layers.back().output, {last[1], width}));
  layers.push_back(sequence("OutLinear", LayerKind::Linear, layers.back().output, {last[1], cfg.code_dim}));
  return layers;
}

std::vector<LayerSpec> build_decoder(const ModelConfig& cfg, size_t latent_frames) {
  cfg.validate();
  if (latent_frames == 0) throw InvalidInput("decoder: no latent frames");
  const size_t top = cfg.block_channels(cfg.blocks());
  const size_t top_freq = cfg.latent_width() / top;
  std::vector<LayerSpec> layers;
  layers.push_back(sequence("InLinear", LayerKind::Linear, {latent_frames, cfg.code_dim},
                            {latent_frames, cfg.latent_width()}));
  layers.push_back(sequence("LSTM", LayerKind::Recurrent, layers.back().output, layers.back().output));
  layers.push_back(sequence("Reshape", LayerKind::Reshape, layers.back().output, {top, latent_frames, top_freq}));
  for (size_t b = cfg.blocks(); b-- > 0;) {
    const size_t cb = cfg.block_channels(b);
    const size_t s = cfg.strides[b];
    const std::string prefix = "DecBlock" + std::to_string(b + 1) + ".";
    layers.push_back(conv_transpose(prefix + "ConvT_us", layers.back().output, cb, {2 * s, 8}, {s, 4},
                                    cfg.groups_dec.resolve(2 * cb, cb)));
    layers.push_back(conv(prefix + "Conv2D_1", layers.back().output, cb / 2, {3, 3}, {1, 1}, {1, 1, 1, 1},
                          cfg.groups_dec.resolve(cb, cb / 2), true));
    layers.push_back(conv(prefix + "Conv2D_2", layers.back().output, cb, {1, 1}, {1, 1}, {},
                          cfg.groups_dec.resolve(cb / 2, cb), true));
  }
  // Frequency padding (4, 3) turns 256 bins back into 257.
  layers.push_back(conv("PostConv2D", layers.back().output, cfg.input_channels(), {7, 7}, {1, 1}, {3, 3, 4, 3}, 1,
                        false));
  return layers;
}

Tensor3 to_tensor(const dsp::FeatureMap& features) {
  Tensor3 t(features.channels, features.frames, features.bins);
  for (size_t i = 0; i < features.values.size(); ++i) t.data[i] = static_cast<float>(features.values[i]);
  return t;
}

namespace {

Conv2d make_conv(const LayerSpec& s, Rng& rng) {
  return Conv2d(s.in_channels, s.out_channels, s.kernel, s.stride, s.padding, s.groups, rng);
}

// Distinct weight streams for encoder and decoder under one model seed.
constexpr uint64_t kEncoderStream = 0x9E3779B97F4A7C15ull;
constexpr uint64_t kDecoderStream = 0xC2B2AE3D27D4EB4Full;

}  // namespace

Encoder::Encoder(const ModelConfig& cfg) : cfg_(cfg) {
  const auto specs = build_encoder(cfg_, cfg_.time_stride());
  Rng rng(cfg_.seed ^ kEncoderStream);
  size_t i = 0;
  pre_.push_back(make_conv(specs[i++], rng));
  for (size_t b = 0; b < cfg_.blocks(); ++b) {
    Conv2d c1 = make_conv(specs[i++], rng);
    Conv2d c2 = make_conv(specs[i++], rng);
    Conv2d ds = make_conv(specs[i++], rng);
    blocks_.push_back({std::move(c1), std::move(c2), std::move(ds)});
  }
  ++i;  // reshape
  lstm_.emplace(specs[i].in_channels, specs[i].out_channels, rng);
  ++i;
  out_.emplace(specs[i].in_channels, specs[i].out_channels, rng);
}

Tensor3 Encoder::run_conv(const Tensor3& x) const {
  auto step = [this](const Conv2d& layer, const Tensor3& in) {
    Tensor3 y = layer.forward(in);
    activate(y.data, cfg_.activation);
    return y;
  };
  Tensor3 h = step(pre_.front(), x);
  for (const auto& block : blocks_) {
    h = step(block.conv1, h);
    h = step(block.conv2, h);
    h = step(block.down, h);
  }
  return h;
}

Tensor3 Encoder::forward_conv(const dsp::FeatureMap& features) const {
  if (features.mode != cfg_.mode || features.channels != cfg_.input_channels()) {
    throw InvalidInput("encoder: feature mode " + dsp::to_string(features.mode) + " does not match model mode " +
                       dsp::to_string(cfg_.mode));
  }
  if (features.bins != cfg_.freq_bins()) {
    throw InvalidInput("encoder: expected " + std::to_string(cfg_.freq_bins()) + " bins, got " +
                       std::to_string(features.bins));
  }
  if (features.frames == 0 || features.frames % cfg_.time_stride() != 0) {
    throw InvalidInput("encoder: " + std::to_string(features.frames) +
                       " frames is not a positive multiple of the time stride " + std::to_string(cfg_.time_stride()));
  }
  return run_conv(to_tensor(features));
}

Matrix Encoder::forward(const dsp::FeatureMap& features) const {
  const Tensor3 h = forward_conv(features);
  Matrix seq(h.time, h.channels * h.freq);
  for (size_t c = 0; c < h.channels; ++c) {
    for (size_t t = 0; t < h.time; ++t) {
      for (size_t f = 0; f < h.freq; ++f) seq(t, c * h.freq + f) = h.at(c, t, f);
    }
  }
  return out_->forward(lstm_->forward(seq));
}

Decoder::Decoder(const ModelConfig& cfg) : cfg_(cfg) {
  const auto specs = build_decoder(cfg_, 1);
  Rng rng(cfg_.seed ^ kDecoderStream);
  size_t i = 0;
  in_.emplace(specs[i].in_channels, specs[i].out_channels, rng);
  ++i;
  lstm_.emplace(specs[i].in_channels, specs[i].out_channels, rng);
  i += 2;  // reshape
  for (size_t b = 0; b < cfg_.blocks(); ++b) {
    const auto& us = specs[i++];
    ConvTranspose2d up(us.in_channels, us.out_channels, us.kernel, us.stride, us.groups, rng);
    Conv2d c1 = make_conv(specs[i++], rng);
    Conv2d c2 = make_conv(specs[i++], rng);
    blocks_.push_back({std::move(up), std::move(c1), std::move(c2)});
  }
  post_.push_back(make_conv(specs[i], rng));
}

dsp::FeatureMap Decoder::forward(const Matrix& latents) const {
  if (latents.cols != cfg_.code_dim || latents.rows == 0) {
    throw InvalidInput("decoder: expected T x " + std::to_string(cfg_.code_dim) + " latents");
  }
  const Matrix seq = lstm_->forward(in_->forward(latents));
  const size_t top = cfg_.block_channels(cfg_.blocks());
  const size_t top_freq = cfg_.latent_width() / top;
  Tensor3 h(top, seq.rows, top_freq);
  for (size_t c = 0; c < top; ++c) {
    for (size_t t = 0; t < seq.rows; ++t) {
      for (size_t f = 0; f < top_freq; ++f) h.at(c, t, f) = seq(t, c * top_freq + f);
    }
  }
  auto step = [this](Tensor3 y) {
    activate(y.data, cfg_.activation);
    return y;
  };
  for (const auto& block : blocks_) {
    h = step(block.up.forward(h));
    h = step(block.conv1.forward(h));
    h = step(block.conv2.forward(h));
  }
  const Tensor3 out = post_.front().forward(h);

  dsp::FeatureMap features;
  features.mode = cfg_.mode;
  features.channels = out.channels;
  features.frames = out.time;
  features.bins = out.freq;
  features.window_size = cfg_.stft_window;
  features.hop_size = cfg_.stft_hop;
  features.values.assign(out.data.begin(), out.data.end());
  return features;
}

}  // namespace funcodec::model
