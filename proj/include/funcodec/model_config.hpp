#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "funcodec/dsp.hpp"
#include "funcodec/layers.hpp"
#include "json.hpp"

namespace funcodec::model {

// Group count rule for the block convolutions, relative to each layer's
// input channels: 1, C_in, C_in/8, C_in/4, or a fixed number.
struct GroupSpec {
  enum class Rule { One, Cin, CinOver8, CinOver4, Fixed };

  Rule rule = Rule::One;
  size_t value = 1;  // used by Rule::Fixed

  // Rule-based counts are reduced to the largest divisor of both channel
  // counts; a fixed count must divide them or ConfigError is thrown.
  size_t resolve(size_t in_channels, size_t out_channels) const;

  std::string to_string() const;
  static GroupSpec parse(const std::string& text);

  friend bool operator==(const GroupSpec&, const GroupSpec&) = default;
};

// Training/inference segment length in seconds (clips are 3.2 s).
inline constexpr size_t kSegmentTenthsOfSecond = 32;

struct ModelConfig {
  std::string name = "custom";
  dsp::DomainMode mode = dsp::DomainMode::MagPhase;
  size_t channels = 32;                       // C
  std::vector<size_t> strides = {1, 1, 2, 2};  // S_b, one per EncBlock
  GroupSpec groups_enc;
  GroupSpec groups_dec;
  size_t code_dim = 128;       // D
  size_t n_quantizers = 16;    // N
  size_t codebook_size = 1024; // K
  int sample_rate = 16000;
  size_t stft_window = 512;
  size_t stft_hop = 160;
  Activation activation = Activation::Elu;
  uint64_t seed = 0;

  size_t blocks() const { return strides.size(); }
  size_t time_stride() const;      // product of S_b
  size_t waveform_stride() const;  // hop * product of S_b
  size_t freq_bins() const { return stft_window / 2 + 1; }
  size_t input_channels() const { return dsp::domain_channels(mode); }
  // Channels entering block b: C * 2^b.
  size_t block_channels(size_t b) const { return channels << b; }
  size_t conv_freq() const { return freq_bins() - 1; }
  // Width of the flattened sequence fed to the recurrent layer.
  size_t latent_width() const;
  size_t segment_samples() const;
  size_t segment_frames() const { return segment_samples() / stft_hop; }
  size_t latent_frames_per_segment() const { return segment_frames() / time_stride(); }

  // Throws ConfigError describing the first violated constraint.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// base / 2x / 4x (strides 320 / 640 / 1280) and the grouped variants m2..m7.
ModelConfig preset(const std::string& name);
std::vector<std::string> preset_names();

nlohmann::json to_json(const ModelConfig& cfg);
ModelConfig config_from_json(const nlohmann::json& j);
ModelConfig load_config(const std::filesystem::path& path);

}  // namespace funcodec::model
