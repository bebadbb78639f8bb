#include "funcodec/codec.hpp"

#include <algorithm>
#include <cmath>

#include "funcodec/batch.hpp"
#include "funcodec/error.hpp"

namespace funcodec {

std::vector<AudioBuffer> split_segments(const AudioBuffer& x, size_t segment_samples) {
  if (x.empty()) throw InvalidInput("split_segments: empty signal");
  if (segment_samples == 0) throw InvalidInput("split_segments: zero segment length");
  const size_t count = (x.size() + segment_samples - 1) / segment_samples;
  std::vector<AudioBuffer> out;
  out.reserve(count);
  for (size_t s = 0; s < count; ++s) {
    AudioBuffer seg{std::vector<double>(segment_samples, 0.0), x.sample_rate};
    const size_t begin = s * segment_samples;
    const size_t end = std::min(x.size(), begin + segment_samples);
    std::copy(x.samples.begin() + static_cast<long>(begin), x.samples.begin() + static_cast<long>(end),
              seg.samples.begin());
    out.push_back(std::move(seg));
  }
  return out;
}

dsp::FeatureMap segment_features(const model::ModelConfig& cfg, const AudioBuffer& segment) {
  auto spec = dsp::stft(segment, cfg.stft_window, cfg.stft_hop);
  const size_t keep = segment.size() / cfg.stft_hop;
  spec.frames = std::min(spec.frames, keep);
  spec.values.resize(spec.frames * spec.bins);
  return dsp::domain_transform(spec, cfg.mode);
}

Matrix extract_latents(const model::Encoder& encoder, const AudioBuffer& normalized) {
  const auto& cfg = encoder.config();
  if (normalized.sample_rate != cfg.sample_rate) {
    throw InvalidInput("expected " + std::to_string(cfg.sample_rate) + " Hz audio, got " +
                       std::to_string(normalized.sample_rate) + " Hz (resampling is not supported)");
  }
  Matrix out;
  out.cols = cfg.code_dim;
  for (const auto& seg : split_segments(normalized, cfg.segment_samples())) {
    const Matrix latents = encoder.forward(segment_features(cfg, seg));
    out.data.insert(out.data.end(), latents.data.begin(), latents.data.end());
    out.rows += latents.rows;
  }
  return out;
}

Codec::Codec(model::ModelConfig cfg, quantizer::QuantizerStack stack)
    : cfg_(std::move(cfg)), encoder_(cfg_), decoder_(cfg_), stack_(std::move(stack)) {
  if (!stack_.initialized()) throw StateError("codec: quantizer stack is not initialized");
  if (stack_.size() != cfg_.n_quantizers || stack_.dim() != cfg_.code_dim) {
    throw MismatchError("codec: codebooks are " + std::to_string(stack_.size()) + " x dim " +
                        std::to_string(stack_.dim()) + ", config expects " + std::to_string(cfg_.n_quantizers) +
                        " x dim " + std::to_string(cfg_.code_dim));
  }
  for (const auto& cb : stack_.stages()) {
    if (cb.size() != cfg_.codebook_size) {
      throw MismatchError("codec: codebook size " + std::to_string(cb.size()) + " differs from config " +
                          std::to_string(cfg_.codebook_size));
    }
  }
}

EncodedAudio Codec::encode(const AudioBuffer& audio, size_t n_q) const {
  if (audio.empty()) throw InvalidInput("encode: empty audio");
  if (audio.sample_rate != cfg_.sample_rate) {
    throw InvalidInput("encode: expected " + std::to_string(cfg_.sample_rate) + " Hz audio, got " +
                       std::to_string(audio.sample_rate) + " Hz (resampling is not supported)");
  }
  if (n_q < 1 || n_q > stack_.size()) {
    throw InvalidInput("encode: n_q " + std::to_string(n_q) + " outside [1, " + std::to_string(stack_.size()) + "]");
  }
  if (audio.size() > UINT32_MAX) throw InvalidInput("encode: signal too long for the stream header");

  const auto normalized = rms_normalize(audio, kTargetRms);
  const Matrix latents = extract_latents(encoder_, normalized.audio);
  auto rvq = quantizer::rvq_encode(stack_, latents, n_q);

  EncodedAudio out;
  out.header.mode = cfg_.mode;
  out.header.sample_rate = static_cast<uint32_t>(cfg_.sample_rate);
  out.header.stride = static_cast<uint32_t>(cfg_.waveform_stride());
  out.header.n_q = static_cast<uint16_t>(n_q);
  out.header.codebook_size = static_cast<uint32_t>(cfg_.codebook_size);
  out.header.frames = static_cast<uint32_t>(latents.rows);
  out.header.num_samples = static_cast<uint32_t>(audio.size());
  out.header.gain = static_cast<float>(normalized.gain);
  out.tokens = std::move(rvq.tokens);
  out.bytes = bitstream::pack(out.header, out.tokens);
  return out;
}

AudioBuffer Codec::decode(std::span<const uint8_t> bytes, std::optional<size_t> n_q) const {
  const auto stream = bitstream::unpack(bytes);
  const auto& h = stream.header;
  auto mismatch = [](const std::string& what, uint64_t got, uint64_t want) {
    throw MismatchError("decode: stream " + what + " " + std::to_string(got) + " does not match config " +
                        std::to_string(want));
  };
  if (h.mode != cfg_.mode) {
    throw MismatchError("decode: stream mode " + dsp::to_string(h.mode) + " does not match config " +
                        dsp::to_string(cfg_.mode));
  }
  if (h.sample_rate != static_cast<uint32_t>(cfg_.sample_rate)) mismatch("sample rate", h.sample_rate, cfg_.sample_rate);
  if (h.stride != cfg_.waveform_stride()) mismatch("stride", h.stride, cfg_.waveform_stride());
  if (h.codebook_size != cfg_.codebook_size) mismatch("codebook size", h.codebook_size, cfg_.codebook_size);
  if (h.n_q > stack_.size()) mismatch("n_q", h.n_q, stack_.size());
  const size_t use = n_q.value_or(h.n_q);
  if (use < 1 || use > h.n_q) {
    throw MismatchError("decode: requested n_q " + std::to_string(use) + " but the stream carries " +
                        std::to_string(h.n_q));
  }
  if (h.num_samples == 0) throw MismatchError("decode: stream declares zero samples");
  const size_t seg_samples = cfg_.segment_samples();
  const size_t segments = (h.num_samples + seg_samples - 1) / seg_samples;
  const size_t per_segment = cfg_.latent_frames_per_segment();
  if (h.frames != segments * per_segment) mismatch("frame count", h.frames, segments * per_segment);

  AudioBuffer out{std::vector<double>(), cfg_.sample_rate};
  out.samples.reserve(segments * seg_samples);
  for (size_t s = 0; s < segments; ++s) {
    quantizer::TokenMatrix slice(use, per_segment);
    for (size_t q = 0; q < use; ++q) {
      for (size_t t = 0; t < per_segment; ++t) slice.at(q, t) = stream.tokens.at(q, s * per_segment + t);
    }
    auto features = decoder_.forward(quantizer::rvq_decode(stack_, slice));
    for (size_t i = 0; i < features.frames * features.bins; ++i) {
      features.values[i] = std::min(features.values[i], kMaxLogMagnitude);
    }
    const auto segment = dsp::istft(dsp::domain_invert(features), seg_samples, cfg_.sample_rate);
    out.samples.insert(out.samples.end(), segment.samples.begin(), segment.samples.end());
  }
  out.samples.resize(h.num_samples);
  for (double& v : out.samples) v *= h.gain;
  return out;
}

quantizer::FitReport fit_codebooks(const model::ModelConfig& cfg, std::span<const std::vector<AudioBuffer>> corpus,
                                   const CodebookFitSettings& settings) {
  cfg.validate();
  if (corpus.empty()) throw InvalidInput("fit_codebooks: empty corpus");
  const model::Encoder encoder(cfg);

  std::vector<Matrix> batches;
  for (const auto& files : corpus) {
    if (files.empty()) throw InvalidInput("fit_codebooks: empty mini-batch");
    std::vector<Matrix> per_file(files.size());
    parallel_for(files.size(), settings.workers, [&](size_t i) {
      per_file[i] = extract_latents(encoder, rms_normalize(files[i], kTargetRms).audio);
    });
    Matrix batch;
    batch.cols = cfg.code_dim;
    for (const auto& m : per_file) {
      batch.data.insert(batch.data.end(), m.data.begin(), m.data.end());
      batch.rows += m.rows;
    }
    batches.push_back(std::move(batch));
  }

  quantizer::FitOptions options;
  options.n_quantizers = cfg.n_quantizers;
  options.codebook_size = cfg.codebook_size;
  options.steps = settings.steps;
  options.quantizer_dropout = settings.quantizer_dropout;
  Rng rng(settings.seed);
  return quantizer::fit_stack(batches, options, rng);
}

}  // namespace funcodec
