#include "funcodec/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "funcodec/error.hpp"
#include "funcodec/fft.hpp"

namespace funcodec::dsp {

size_t stft_frame_count(size_t length, size_t hop) { return length / hop + 1; }

std::vector<double> hann_window(size_t n) {
  std::vector<double> w(n);
  for (size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * static_cast<double>(i) / static_cast<double>(n));
  }
  return w;
}

namespace {

void check_framing(size_t window_size, size_t hop_size) {
  if (window_size < 2 || window_size % 2 != 0) {
    throw InvalidInput("stft: window size must be even and at least 2");
  }
  if (hop_size == 0 || hop_size > window_size) {
    throw InvalidInput("stft: hop size must be in (0, window]");
  }
}

// Reflect index into [0, n) without repeating the edge sample.
size_t reflect(long long i, size_t n) {
  const long long last = static_cast<long long>(n) - 1;
  if (i < 0) i = -i;
  if (i > last) i = 2 * last - i;
  return static_cast<size_t>(i);
}

}  // namespace

ComplexSpectrogram stft(const AudioBuffer& x, size_t window_size, size_t hop_size) {
  check_framing(window_size, hop_size);
  const size_t pad = window_size / 2;
  if (x.size() <= pad) {
    throw InvalidInput("stft: signal of " + std::to_string(x.size()) +
                       " samples is too short to reflect-pad a window of " +
                       std::to_string(window_size));
  }

  ComplexSpectrogram spec;
  spec.window_size = window_size;
  spec.hop_size = hop_size;
  spec.bins = window_size / 2 + 1;
  spec.frames = stft_frame_count(x.size(), hop_size);
  spec.values.resize(spec.frames * spec.bins);

  const auto window = hann_window(window_size);
  std::vector<double> frame(window_size);
  for (size_t t = 0; t < spec.frames; ++t) {
    const long long start = static_cast<long long>(t * hop_size) - static_cast<long long>(pad);
    for (size_t n = 0; n < window_size; ++n) {
      frame[n] = x.samples[reflect(start + static_cast<long long>(n), x.size())] * window[n];
    }
    const auto bins = rfft(frame);
    std::copy(bins.begin(), bins.end(), spec.values.begin() + static_cast<long>(t * spec.bins));
  }
  return spec;
}

AudioBuffer istft(const ComplexSpectrogram& spec, size_t length, int sample_rate) {
  check_framing(spec.window_size, spec.hop_size);
  if (spec.bins != spec.window_size / 2 + 1) throw InvalidInput("istft: bin count does not match window");
  if (spec.values.size() != spec.frames * spec.bins) throw InvalidInput("istft: malformed spectrogram");
  if (spec.frames == 0) throw InvalidInput("istft: no frames");

  const size_t win = spec.window_size;
  const size_t pad = win / 2;
  const size_t span = (spec.frames - 1) * spec.hop_size + pad;
  if (length > span) {
    throw InvalidInput("istft: requested " + std::to_string(length) + " samples but frames cover " +
                       std::to_string(span));
  }

  const auto window = hann_window(win);
  std::vector<double> acc(length, 0.0);
  std::vector<double> norm(length, 0.0);
  for (size_t t = 0; t < spec.frames; ++t) {
    const auto frame = irfft({spec.values.data() + t * spec.bins, spec.bins}, win);
    const long long start = static_cast<long long>(t * spec.hop_size) - static_cast<long long>(pad);
    for (size_t n = 0; n < win; ++n) {
      const long long pos = start + static_cast<long long>(n);
      if (pos < 0 || pos >= static_cast<long long>(length)) continue;
      acc[static_cast<size_t>(pos)] += frame[n] * window[n];
      norm[static_cast<size_t>(pos)] += window[n] * window[n];
    }
  }

  AudioBuffer out{std::vector<double>(length), sample_rate};
  for (size_t i = 0; i < length; ++i) {
    if (norm[i] < 1e-11) {
      throw NumericError("istft: window normalisation vanishes at sample " + std::to_string(i));
    }
    out.samples[i] = acc[i] / norm[i];
  }
  return out;
}

std::string to_string(DomainMode mode) {
  switch (mode) {
    case DomainMode::MagAngle: return "mag_angle";
    case DomainMode::MagPhase: return "mag_phase";
    case DomainMode::Time: return "time";
  }
  return "unknown";
}

DomainMode domain_mode_from_string(const std::string& name) {
  if (name == "mag_angle") return DomainMode::MagAngle;
  if (name == "mag_phase") return DomainMode::MagPhase;
  if (name == "time") return DomainMode::Time;
  throw ConfigError("unknown domain mode '" + name + "'");
}

size_t domain_channels(DomainMode mode) {
  switch (mode) {
    case DomainMode::MagAngle: return 2;
    case DomainMode::MagPhase: return 3;
    case DomainMode::Time: return 1;
  }
  return 0;
}

FeatureMap domain_transform(const ComplexSpectrogram& spec, DomainMode mode) {
  if (mode == DomainMode::Time) {
    throw InvalidInput("domain_transform: only frequency-domain modes are supported");
  }
  FeatureMap out;
  out.mode = mode;
  out.channels = domain_channels(mode);
  out.frames = spec.frames;
  out.bins = spec.bins;
  out.window_size = spec.window_size;
  out.hop_size = spec.hop_size;
  out.values.resize(out.channels * out.frames * out.bins);

  for (size_t t = 0; t < spec.frames; ++t) {
    for (size_t f = 0; f < spec.bins; ++f) {
      const auto x = spec.at(t, f);
      const double mag = std::abs(x);
      out.at(0, t, f) = std::log(std::max(mag, kLogFloor));
      if (mode == DomainMode::MagAngle) {
        double angle = std::atan2(x.imag(), x.real());
        if (angle <= -M_PI) angle = M_PI;  // keep the range (-pi, pi]
        out.at(1, t, f) = angle;
      } else if (mag > 0.0) {
        out.at(1, t, f) = x.real() / mag;
        out.at(2, t, f) = x.imag() / mag;
      } else {
        out.at(1, t, f) = 1.0;
        out.at(2, t, f) = 0.0;
      }
    }
  }
  return out;
}

ComplexSpectrogram domain_invert(const FeatureMap& features) {
  if (features.mode == DomainMode::Time) {
    throw InvalidInput("domain_invert: only frequency-domain modes are supported");
  }
  if (features.channels != domain_channels(features.mode) ||
      features.values.size() != features.channels * features.frames * features.bins) {
    throw InvalidInput("domain_invert: channel layout does not match mode");
  }
  ComplexSpectrogram spec;
  spec.frames = features.frames;
  spec.bins = features.bins;
  spec.window_size = features.window_size;
  spec.hop_size = features.hop_size;
  spec.values.resize(spec.frames * spec.bins);

  for (size_t t = 0; t < spec.frames; ++t) {
    for (size_t f = 0; f < spec.bins; ++f) {
      const double mag = std::exp(features.at(0, t, f));
      double c = 1.0;
      double s = 0.0;
      if (features.mode == DomainMode::MagAngle) {
        const double angle = features.at(1, t, f);
        c = std::cos(angle);
        s = std::sin(angle);
      } else {
        const double c1 = features.at(1, t, f);
        const double c2 = features.at(2, t, f);
        const double norm = std::hypot(c1, c2);
        if (norm > 0.0) {
          c = c1 / norm;
          s = c2 / norm;
        }
      }
      spec.at(t, f) = {mag * c, mag * s};
    }
  }
  return spec;
}

SpectralBank make_spectral_bank(int scale_index) {
  if (scale_index < kMinScale || scale_index > kMaxScale) {
    throw InvalidInput("spectral bank scale " + std::to_string(scale_index) + " outside [5, 11]");
  }
  SpectralBank bank;
  bank.scale_index = scale_index;
  bank.window = size_t{1} << scale_index;
  bank.hop = bank.window / 4;
  const size_t bins = bank.window / 2 + 1;
  bank.mel_bins = bins >= 128 ? 80 : bins / 2;
  return bank;
}

std::vector<int> default_loss_scales() {
  std::vector<int> scales;
  for (int i = kMinScale; i <= kMaxScale; ++i) scales.push_back(i);
  return scales;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

namespace {

std::vector<double> mel_edges(size_t mel_bins, int sample_rate) {
  const double top = hz_to_mel(sample_rate / 2.0);
  std::vector<double> edges(mel_bins + 2);
  for (size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(top * static_cast<double>(i) / static_cast<double>(mel_bins + 1));
  }
  return edges;
}

}  // namespace

std::vector<double> mel_center_frequencies(size_t mel_bins, int sample_rate) {
  const auto edges = mel_edges(mel_bins, sample_rate);
  return {edges.begin() + 1, edges.end() - 1};
}

RealGrid mel_filterbank(size_t window, size_t mel_bins, int sample_rate) {
  const size_t bins = window / 2 + 1;
  if (mel_bins == 0 || mel_bins > bins) {
    throw ConfigError("mel filterbank: " + std::to_string(mel_bins) + " bands for " +
                      std::to_string(bins) + " frequency bins");
  }
  if (sample_rate <= 0) throw ConfigError("mel filterbank: sample rate must be positive");

  const auto edges = mel_edges(mel_bins, sample_rate);
  const double bin_hz = static_cast<double>(sample_rate) / static_cast<double>(window);

  RealGrid fb{mel_bins, bins, std::vector<double>(mel_bins * bins, 0.0)};
  for (size_t m = 0; m < mel_bins; ++m) {
    const double lo = edges[m];
    const double centre = edges[m + 1];
    const double hi = edges[m + 2];
    double total = 0.0;
    for (size_t k = 0; k < bins; ++k) {
      const double hz = static_cast<double>(k) * bin_hz;
      double w = 0.0;
      if (hz > lo && hz <= centre) {
        w = (hz - lo) / (centre - lo);
      } else if (hz > centre && hz < hi) {
        w = (hi - hz) / (hi - centre);
      }
      fb(m, k) = w;
      total += w;
    }
    if (total <= 0.0) {
      const auto nearest = static_cast<size_t>(std::lround(centre / bin_hz));
      fb(m, std::min(nearest, bins - 1)) = 1.0;
    }
  }
  return fb;
}

std::vector<double> apply_mel(const RealGrid& filterbank, std::span<const double> power) {
  std::vector<double> out(filterbank.rows);
  for (size_t m = 0; m < filterbank.rows; ++m) {
    double acc = 0.0;
    for (size_t k = 0; k < filterbank.cols; ++k) acc += filterbank(m, k) * power[k];
    out[m] = std::log(acc + kLogFloor);
  }
  return out;
}

namespace {

RealGrid power_grid(const AudioBuffer& x, const SpectralBank& bank) {
  if (bank.window == 0 || bank.hop == 0 || bank.hop * 4 != bank.window) {
    throw InvalidInput("spectral bank: hop must be a quarter of the window");
  }
  const auto spec = stft(x, bank.window, bank.hop);
  RealGrid grid{spec.frames, spec.bins, std::vector<double>(spec.values.size())};
  for (size_t i = 0; i < spec.values.size(); ++i) grid.values[i] = std::norm(spec.values[i]);
  return grid;
}

}  // namespace

RealGrid log_power_spectrum(const AudioBuffer& x, const SpectralBank& bank) {
  auto grid = power_grid(x, bank);
  for (double& v : grid.values) v = std::log(v + kLogFloor);
  return grid;
}

RealGrid mel_spectrum(const AudioBuffer& x, const SpectralBank& bank) {
  const auto fb = mel_filterbank(bank.window, bank.mel_bins, x.sample_rate);
  const auto power = power_grid(x, bank);
  RealGrid out{power.rows, bank.mel_bins, std::vector<double>(power.rows * bank.mel_bins)};
  for (size_t t = 0; t < power.rows; ++t) {
    const auto mel = apply_mel(fb, {power.values.data() + t * power.cols, power.cols});
    std::copy(mel.begin(), mel.end(), out.values.begin() + static_cast<long>(t * out.cols));
  }
  return out;
}

}  // namespace funcodec::dsp
