#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "funcodec/audio.hpp"
#include "funcodec/bitstream.hpp"
#include "funcodec/freqcodec.hpp"
#include "funcodec/quantizer.hpp"

namespace funcodec {

// RMS level every input is normalised to before encoding.
inline constexpr double kTargetRms = 0.1;
// Decoded log-magnitudes are clamped here before exponentiation.
inline constexpr double kMaxLogMagnitude = 12.0;

// Splits x into segment_samples chunks; the final chunk is zero-padded.
std::vector<AudioBuffer> split_segments(const AudioBuffer& x, size_t segment_samples);

// STFT frames the encoder sees for one segment: the centred STFT minus its
// trailing frame, so the count is a multiple of the time stride.
dsp::FeatureMap segment_features(const model::ModelConfig& cfg, const AudioBuffer& segment);

// Latents of a whole (already normalised) signal, segment by segment.
Matrix extract_latents(const model::Encoder& encoder, const AudioBuffer& normalized);

struct EncodedAudio {
  bitstream::CodecHeader header;
  quantizer::TokenMatrix tokens;
  std::vector<uint8_t> bytes;
};

// Frozen encoder + decoder + fitted quantizer stack. All methods are const and
// safe to call concurrently.
class Codec {
 public:
  Codec(model::ModelConfig cfg, quantizer::QuantizerStack stack);

  // RMS-normalise, segment, encode, quantise with the first n_q stages, pack.
  EncodedAudio encode(const AudioBuffer& audio, size_t n_q) const;

  // Unpack, dequantise the first n_q rows (all stored rows by default),
  // decode, invert the domain transform, overlap-add and undo the gain.
  AudioBuffer decode(std::span<const uint8_t> bytes, std::optional<size_t> n_q = std::nullopt) const;

  const model::ModelConfig& config() const { return cfg_; }
  const model::Encoder& encoder() const { return encoder_; }
  const model::Decoder& decoder() const { return decoder_; }
  const quantizer::QuantizerStack& stack() const { return stack_; }

 private:
  model::ModelConfig cfg_;
  model::Encoder encoder_;
  model::Decoder decoder_;
  quantizer::QuantizerStack stack_;
};

struct CodebookFitSettings {
  size_t steps = 0;
  uint64_t seed = 0;
  bool quantizer_dropout = false;
  size_t workers = 1;
};

// Learns the quantizer stack from frozen-encoder latents. Each corpus entry is
// one mini-batch of audio files.
quantizer::FitReport fit_codebooks(const model::ModelConfig& cfg, std::span<const std::vector<AudioBuffer>> corpus,
                                   const CodebookFitSettings& settings);

}  // namespace funcodec
