#pragma once

#include <optional>
#include <string>
#include <vector>

#include "funcodec/dsp.hpp"
#include "funcodec/layers.hpp"
#include "funcodec/model_config.hpp"
#include "funcodec/tensor.hpp"

namespace funcodec::model {

enum class LayerKind { Conv2d, ConvTranspose2d, Recurrent, Linear, Reshape };

std::string to_string(LayerKind kind);

// Activation shape: (C, T, F) for feature maps, (T, W) for sequences.
using Shape = std::vector<size_t>;

std::string shape_string(const Shape& s);

// One row of the architecture table: what a layer consumes and produces.
struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::Conv2d;
  size_t in_channels = 0;
  size_t out_channels = 0;
  Kernel2d kernel{};
  Kernel2d stride{};
  Padding padding{};
  size_t groups = 1;
  bool activated = false;
  Shape input;
  Shape output;
};

// Encoder layers traced over `frames` STFT frames:
//   PreConv2D (7,7)/(1,1): (ch, T, 257) -> (C, T, 256)
//   EncBlock b: Conv2D_1 3x3 C_b -> C_b/2, Conv2D_2 1x1 -> C_b,
//               Conv2D_ds (2 S_b, 8)/(S_b, 4) -> (2 C_b, T_b / S_b, F_b / 4)
//   Reshape -> (T_B, 2^B C F_B), LSTM, OutLinear -> (T_B, D)
std::vector<LayerSpec> build_encoder(const ModelConfig& cfg, size_t frames);

// Mirror of the encoder traced over `latent_frames` code frames:
//   InLinear D -> W, LSTM, Reshape, DecBlocks with transposed Conv2D_us
//   (2 S_b, 8)/(S_b, 4), PostConv2D (7,7) -> (ch, T, 257)
std::vector<LayerSpec> build_decoder(const ModelConfig& cfg, size_t latent_frames);

Tensor3 to_tensor(const dsp::FeatureMap& features);

// Frozen, seeded FreqCodec encoder. forward() is const and thread-safe.
class Encoder {
 public:
  explicit Encoder(const ModelConfig& cfg);

  // (ch, T, F) features -> T / prod(S_b) x D latents.
  Matrix forward(const dsp::FeatureMap& features) const;
  // Output of the last EncBlock, before reshape/LSTM/OutLinear.
  Tensor3 forward_conv(const dsp::FeatureMap& features) const;

  const ModelConfig& config() const { return cfg_; }

 private:
  struct Block {
    Conv2d conv1;
    Conv2d conv2;
    Conv2d down;
  };

  Tensor3 run_conv(const Tensor3& x) const;

  ModelConfig cfg_;
  std::vector<Conv2d> pre_;  // single element; vector avoids a default ctor
  std::vector<Block> blocks_;
  std::optional<Lstm> lstm_;
  std::optional<Linear> out_;
};

class Decoder {
 public:
  explicit Decoder(const ModelConfig& cfg);

  // T_B x D latents -> (ch, T_B * prod(S_b), 257) features in cfg.mode.
  dsp::FeatureMap forward(const Matrix& latents) const;

  const ModelConfig& config() const { return cfg_; }

 private:
  struct Block {
    ConvTranspose2d up;
    Conv2d conv1;
    Conv2d conv2;
  };

  ModelConfig cfg_;
  std::optional<Linear> in_;
  std::optional<Lstm> lstm_;
  std::vector<Block> blocks_;  // applied in order: deepest block first
  std::vector<Conv2d> post_;
};

}  // namespace funcodec::model
