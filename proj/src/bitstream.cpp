#include "funcodec/bitstream.hpp"

#include <cmath>
#include <cstring>
#include <string>

#include "byteio.hpp"
#include "funcodec/error.hpp"

namespace funcodec::bitstream {

namespace {

constexpr char kMagic[4] = {'F', 'C', 'S', '1'};

bool power_of_two(uint64_t v) { return v >= 2 && (v & (v - 1)) == 0; }

uint8_t mode_tag(dsp::DomainMode m) {
  switch (m) {
    case dsp::DomainMode::MagAngle: return 0;
    case dsp::DomainMode::MagPhase: return 1;
    case dsp::DomainMode::Time: return 2;
  }
  return 0xFF;
}

void check_codebook_size(uint64_t k) {
  if (!power_of_two(k) || k > (uint64_t{1} << kMaxCodebookBits)) {
    throw InvalidInput("codebook size " + std::to_string(k) + " is not a power of two in [2, 2^24]");
  }
}

}  // namespace

uint32_t bits_per_token(uint32_t codebook_size) {
  check_codebook_size(codebook_size);
  uint32_t bits = 0;
  while ((uint32_t{1} << bits) < codebook_size) ++bits;
  return bits;
}

uint64_t payload_bits(uint64_t frames, uint64_t n_q, uint32_t codebook_size) {
  return frames * n_q * bits_per_token(codebook_size);
}

uint64_t payload_bytes(uint64_t frames, uint64_t n_q, uint32_t codebook_size) {
  return (payload_bits(frames, n_q, codebook_size) + 7) / 8;
}

std::vector<uint8_t> pack(const CodecHeader& header, const quantizer::TokenMatrix& tokens) {
  check_codebook_size(header.codebook_size);
  if (header.n_q == 0) throw InvalidInput("pack: n_q must be at least 1");
  if (tokens.n_q != header.n_q || tokens.frames != header.frames ||
      tokens.indices.size() != tokens.n_q * tokens.frames) {
    throw InvalidInput("pack: token matrix shape disagrees with header");
  }
  if (header.version != kVersion) throw InvalidInput("pack: unsupported version");
  if (header.sample_rate == 0 || header.stride == 0) throw InvalidInput("pack: sample rate and stride must be positive");

  const uint32_t bits = bits_per_token(header.codebook_size);
  detail::ByteWriter w;
  w.bytes({reinterpret_cast<const uint8_t*>(kMagic), 4});
  w.u16(header.version);
  w.u8(mode_tag(header.mode));
  w.u8(0);
  w.u32(header.sample_rate);
  w.u32(header.stride);
  w.u16(header.n_q);
  w.u32(header.codebook_size);
  w.u32(header.frames);
  w.u32(header.num_samples);
  w.f32(header.gain);

  auto& out = w.buffer();
  out.reserve(out.size() + payload_bytes(header.frames, header.n_q, header.codebook_size));
  uint64_t acc = 0;
  uint32_t filled = 0;
  for (size_t t = 0; t < tokens.frames; ++t) {
    for (size_t q = 0; q < tokens.n_q; ++q) {
      const int32_t v = tokens.at(q, t);
      if (v < 0 || static_cast<uint32_t>(v) >= header.codebook_size) {
        throw InvalidInput("pack: token " + std::to_string(v) + " at (" + std::to_string(q) + ", " +
                           std::to_string(t) + ") is outside [0, " + std::to_string(header.codebook_size) + ")");
      }
      acc = (acc << bits) | static_cast<uint64_t>(v);
      filled += bits;
      while (filled >= 8) {
        filled -= 8;
        out.push_back(static_cast<uint8_t>(acc >> filled));
      }
      acc &= (uint64_t{1} << filled) - 1;
    }
  }
  if (filled > 0) out.push_back(static_cast<uint8_t>(acc << (8 - filled)));
  return w.take();
}

DecodedStream unpack(std::span<const uint8_t> bytes) {
  detail::ByteReader r(bytes);
  const auto magic = r.bytes(4, "magic");
  if (std::memcmp(magic.data(), kMagic, 4) != 0) throw BadMagicError("not an FCS1 stream (bad magic)");

  DecodedStream out;
  CodecHeader& h = out.header;
  h.version = r.u16("version");
  if (h.version != kVersion) {
    throw VersionError("FCS1 version " + std::to_string(h.version) + " is not supported (expected " +
                       std::to_string(kVersion) + ")");
  }
  const uint8_t tag = r.u8("mode");
  const uint8_t reserved = r.u8("reserved");
  h.sample_rate = r.u32("sample rate");
  h.stride = r.u32("stride");
  h.n_q = r.u16("n_q");
  h.codebook_size = r.u32("codebook size");
  h.frames = r.u32("frame count");
  h.num_samples = r.u32("sample count");
  h.gain = r.f32("gain");

  if (tag > 2) throw MalformedError("FCS1: unknown domain mode tag " + std::to_string(tag));
  h.mode = tag == 0 ? dsp::DomainMode::MagAngle : tag == 1 ? dsp::DomainMode::MagPhase : dsp::DomainMode::Time;
  if (reserved != 0) throw MalformedError("FCS1: reserved header byte is not zero");
  if (h.sample_rate == 0 || h.stride == 0) throw MalformedError("FCS1: zero sample rate or stride");
  if (h.n_q == 0) throw MalformedError("FCS1: n_q is zero");
  if (!power_of_two(h.codebook_size) || h.codebook_size > (uint32_t{1} << kMaxCodebookBits)) {
    throw MalformedError("FCS1: codebook size " + std::to_string(h.codebook_size) + " is not a supported power of two");
  }
  if (!std::isfinite(h.gain) || !(h.gain > 0.0f)) throw MalformedError("FCS1: gain must be finite and positive");

  const uint32_t bits = bits_per_token(h.codebook_size);
  const uint64_t needed = payload_bytes(h.frames, h.n_q, h.codebook_size);
  if (needed > r.remaining()) {
    throw TruncatedError("FCS1: payload needs " + std::to_string(needed) + " bytes, " +
                         std::to_string(r.remaining()) + " present");
  }
  if (needed < r.remaining()) throw MalformedError("FCS1: trailing bytes after payload");
  const auto payload = r.bytes(needed, "payload");

  out.tokens = quantizer::TokenMatrix(h.n_q, h.frames);
  uint64_t acc = 0;
  uint32_t filled = 0;
  size_t pos = 0;
  const uint64_t mask = (uint64_t{1} << bits) - 1;
  for (size_t t = 0; t < h.frames; ++t) {
    for (size_t q = 0; q < h.n_q; ++q) {
      while (filled < bits) {
        acc = (acc << 8) | payload[pos++];
        filled += 8;
      }
      filled -= bits;
      out.tokens.at(q, t) = static_cast<int32_t>((acc >> filled) & mask);
      acc &= (uint64_t{1} << filled) - 1;
    }
  }
  if (acc != 0) throw MalformedError("FCS1: non-zero padding bits");
  return out;
}

double compute_tkr(int sample_rate, size_t stride, size_t n_q) {
  if (sample_rate <= 0) throw InvalidInput("compute_tkr: sample rate must be positive");
  if (stride == 0) throw InvalidInput("compute_tkr: stride must be positive");
  const double stride_at_16k = static_cast<double>(stride) * 16000.0 / sample_rate;
  return 16000.0 / stride_at_16k * static_cast<double>(n_q);
}

double bits_per_second(double tkr, size_t codebook_size) {
  if (!power_of_two(codebook_size)) throw InvalidInput("bits_per_second: codebook size must be a power of two");
  return tkr * std::log2(static_cast<double>(codebook_size));
}

}  // namespace funcodec::bitstream
