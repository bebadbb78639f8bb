#include "funcodec/audio.hpp"

#include <cmath>

#include "funcodec/error.hpp"

namespace funcodec {

double rms(std::span<const double> samples) {
  if (samples.empty()) return 0.0;
  double acc = 0.0;
  for (double s : samples) acc += s * s;
  return std::sqrt(acc / static_cast<double>(samples.size()));
}

NormalizedAudio rms_normalize(const AudioBuffer& x, double target_rms) {
  if (x.empty()) throw InvalidInput("rms_normalize: empty buffer");
  if (!(target_rms > 0.0)) throw InvalidInput("rms_normalize: target RMS must be positive");

  const double level = rms(x.samples);
  if (!std::isfinite(level)) throw NumericError("rms_normalize: non-finite samples");
  if (level < kSilenceRms) return {x, 1.0};

  const double gain = level / target_rms;
  NormalizedAudio out{AudioBuffer{std::vector<double>(x.size()), x.sample_rate}, gain};
  for (size_t i = 0; i < x.size(); ++i) out.audio.samples[i] = x.samples[i] / gain;
  return out;
}

}  // namespace funcodec
