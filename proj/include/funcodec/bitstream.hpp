#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "funcodec/dsp.hpp"
#include "funcodec/quantizer.hpp"

namespace funcodec::bitstream {

inline constexpr uint16_t kVersion = 1;
inline constexpr size_t kHeaderBytes = 34;
inline constexpr uint32_t kMaxCodebookBits = 24;

// Fixed-size .fcs header; see docs/fcs_format.md for the byte layout.
struct CodecHeader {
  uint16_t version = kVersion;
  dsp::DomainMode mode = dsp::DomainMode::MagPhase;
  uint32_t sample_rate = 16000;
  uint32_t stride = 0;          // waveform samples per token frame
  uint16_t n_q = 0;             // quantizer rows stored
  uint32_t codebook_size = 0;   // K, a power of two
  uint32_t frames = 0;          // T
  uint32_t num_samples = 0;     // original signal length
  float gain = 1.0f;            // RMS normalisation gain to undo on decode

  friend bool operator==(const CodecHeader&, const CodecHeader&) = default;
};

struct DecodedStream {
  CodecHeader header;
  quantizer::TokenMatrix tokens;
};

uint32_t bits_per_token(uint32_t codebook_size);
uint64_t payload_bits(uint64_t frames, uint64_t n_q, uint32_t codebook_size);
uint64_t payload_bytes(uint64_t frames, uint64_t n_q, uint32_t codebook_size);

// Header followed by log2(K)-bit tokens, frame-major (frame outer, quantizer
// inner), most significant bit first, zero-padded to a byte boundary.
std::vector<uint8_t> pack(const CodecHeader& header, const quantizer::TokenMatrix& tokens);

// Throws BadMagicError, VersionError, TruncatedError or MalformedError.
DecodedStream unpack(std::span<const uint8_t> bytes);

// Tokens per second on a 16 kHz basis: (16000 / stride_at_16k) * n_q.
double compute_tkr(int sample_rate, size_t stride, size_t n_q);

double bits_per_second(double tkr, size_t codebook_size);

}  // namespace funcodec::bitstream
