#pragma once

#include <span>
#include <vector>

namespace funcodec {

inline constexpr int kCodecSampleRate = 16000;

// Mono waveform, amplitudes nominally in [-1, 1].
struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate = kCodecSampleRate;

  size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
};

struct NormalizedAudio {
  AudioBuffer audio;
  // original == gain * audio.samples
  double gain = 1.0;
};

// Below this RMS a buffer is treated as silence and left untouched.
inline constexpr double kSilenceRms = 1e-8;

double rms(std::span<const double> samples);

// Scales x to target_rms. Throws InvalidInput on an empty buffer or a
// non-positive target.
NormalizedAudio rms_normalize(const AudioBuffer& x, double target_rms);

}  // namespace funcodec
