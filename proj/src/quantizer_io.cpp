// FCQ1 layout, all fields little-endian:
//   "FCQ1" | u32 K | u32 D | u32 N | f32 decay
//   N x K x D f32 code vectors (stage-major, row-major)
//   per stage: K f32 cluster sizes, then K x D f32 embedding sums

#include <cmath>
#include <cstring>

#include "byteio.hpp"
#include "funcodec/error.hpp"
#include "funcodec/quantizer.hpp"

namespace funcodec::quantizer {

namespace {
constexpr char kMagic[4] = {'F', 'C', 'Q', '1'};
}

std::vector<uint8_t> serialize_stack(const QuantizerStack& stack) {
  if (!stack.initialized()) throw StateError("serialize_stack: stack is not initialized");
  const auto& first = stack.stage(0);
  for (const auto& cb : stack.stages()) {
    if (cb.size() != first.size() || cb.decay() != first.decay()) {
      throw InvalidInput("serialize_stack: all stages must share K and decay");
    }
  }

  detail::ByteWriter w;
  w.bytes({reinterpret_cast<const uint8_t*>(kMagic), 4});
  w.u32(static_cast<uint32_t>(first.size()));
  w.u32(static_cast<uint32_t>(first.dim()));
  w.u32(static_cast<uint32_t>(stack.size()));
  w.f32(first.decay());
  for (const auto& cb : stack.stages()) {
    for (float v : cb.vectors().data) w.f32(v);
  }
  for (const auto& cb : stack.stages()) {
    for (float v : cb.cluster_size()) w.f32(v);
    for (float v : cb.embed_sum().data) w.f32(v);
  }
  return w.take();
}

QuantizerStack deserialize_stack(std::span<const uint8_t> bytes) {
  detail::ByteReader r(bytes);
  const auto magic = r.bytes(4, "magic");
  if (std::memcmp(magic.data(), kMagic, 4) != 0) throw BadMagicError("not an FCQ1 codebook file");
  const uint32_t k = r.u32("K");
  const uint32_t d = r.u32("D");
  const uint32_t n = r.u32("N");
  const float decay = r.f32("decay");
  if (k < 2 || d < 1 || n < 1) throw MalformedError("FCQ1: invalid K/D/N");
  if (!(decay > 0.0f && decay < 1.0f)) throw MalformedError("FCQ1: decay outside (0, 1)");

  // 4 bytes x N x (K*D vectors + K sizes + K*D sums); checked before allocating.
  const uint64_t floats = static_cast<uint64_t>(n) * (2ull * k * d + k);
  if (floats > r.remaining() / 4) throw TruncatedError("FCQ1: payload shorter than declared shape");
  if (floats * 4 != r.remaining()) throw MalformedError("FCQ1: trailing bytes after payload");

  std::vector<Matrix> vectors;
  for (uint32_t q = 0; q < n; ++q) {
    Matrix m(k, d);
    for (float& v : m.data) v = r.f32("vectors");
    vectors.push_back(std::move(m));
  }
  std::vector<Codebook> stages;
  for (uint32_t q = 0; q < n; ++q) {
    std::vector<float> sizes(k);
    for (float& v : sizes) v = r.f32("cluster sizes");
    Matrix sums(k, d);
    for (float& v : sums.data) v = r.f32("embedding sums");
    auto cb = Codebook::from_state(std::move(sizes), std::move(sums), decay);
    if (!(cb.vectors() == vectors[q])) {
      throw MalformedError("FCQ1: stage " + std::to_string(q) + " vectors disagree with EMA state");
    }
    stages.push_back(std::move(cb));
  }
  return QuantizerStack(std::move(stages));
}

}  // namespace funcodec::quantizer
