#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "funcodec/audio.hpp"

namespace funcodec::dsp {

// Magnitude floor applied before every log.
inline constexpr double kLogFloor = 1e-5;

// STFT frame grid: frames x bins, frame-major. bins == window_size / 2 + 1.
struct ComplexSpectrogram {
  size_t frames = 0;
  size_t bins = 0;
  size_t window_size = 0;
  size_t hop_size = 0;
  std::vector<std::complex<double>> values;

  std::complex<double>& at(size_t t, size_t f) { return values[t * bins + f]; }
  const std::complex<double>& at(size_t t, size_t f) const { return values[t * bins + f]; }
};

// Number of frames for a centre-padded STFT: floor(length / hop) + 1.
size_t stft_frame_count(size_t length, size_t hop);

// Periodic Hann window.
std::vector<double> hann_window(size_t n);

// Centre-padded (window/2 reflected samples per side) STFT with a Hann window.
// Requires an even window, 0 < hop <= window and more than window/2 samples.
ComplexSpectrogram stft(const AudioBuffer& x, size_t window_size, size_t hop_size);

// Weighted overlap-add inverse of stft, normalised by the summed squared window.
// Returns the first `length` samples.
AudioBuffer istft(const ComplexSpectrogram& spec, size_t length,
                  int sample_rate = kCodecSampleRate);

enum class DomainMode { MagAngle, MagPhase, Time };

std::string to_string(DomainMode mode);
DomainMode domain_mode_from_string(const std::string& name);
size_t domain_channels(DomainMode mode);

// channels x frames x bins real features.
//   MagAngle: (log|X|, angle)
//   MagPhase: (log|X|, X_r/|X|, X_i/|X|)
struct FeatureMap {
  DomainMode mode = DomainMode::MagPhase;
  size_t channels = 0;
  size_t frames = 0;
  size_t bins = 0;
  size_t window_size = 0;
  size_t hop_size = 0;
  std::vector<double> values;

  double& at(size_t c, size_t t, size_t f) { return values[(c * frames + t) * bins + f]; }
  double at(size_t c, size_t t, size_t f) const { return values[(c * frames + t) * bins + f]; }
};

FeatureMap domain_transform(const ComplexSpectrogram& spec, DomainMode mode);

// Inverse of domain_transform. MagPhase (c1, c2) pairs are renormalised to unit
// length; a (0, 0) pair maps to phase 0.
ComplexSpectrogram domain_invert(const FeatureMap& features);

// Row-major real grid (frames x bins for spectra, filters x bins for banks).
struct RealGrid {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<double> values;

  double& operator()(size_t r, size_t c) { return values[r * cols + c]; }
  double operator()(size_t r, size_t c) const { return values[r * cols + c]; }
};

// One resolution of the multi-scale spectral loss: window 2^i, hop 2^i / 4.
struct SpectralBank {
  int scale_index = 0;
  size_t window = 0;
  size_t hop = 0;
  size_t mel_bins = 0;
};

inline constexpr int kMinScale = 5;
inline constexpr int kMaxScale = 11;

// Bank for scale index i in [5, 11]: 80 Mel bands when the spectrum has at
// least 128 bins, otherwise half the bin count.
SpectralBank make_spectral_bank(int scale_index);

// The full scale set {5, ..., 11}.
std::vector<int> default_loss_scales();

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// HTK triangular filters spanning 0 Hz to Nyquist, shape mel_bins x (window/2+1).
// A filter too narrow to cover any FFT bin gets unit weight at the bin nearest
// its centre, so no row sums to zero.
RealGrid mel_filterbank(size_t window, size_t mel_bins, int sample_rate);

// Centre frequency (Hz) of every Mel filter.
std::vector<double> mel_center_frequencies(size_t mel_bins, int sample_rate);

// log(|STFT|^2 + eps) on the bank's window/hop.
RealGrid log_power_spectrum(const AudioBuffer& x, const SpectralBank& bank);

// log(Mel(|STFT|^2) + eps).
RealGrid mel_spectrum(const AudioBuffer& x, const SpectralBank& bank);

// Applies the filterbank to one power spectrum and log-compresses.
std::vector<double> apply_mel(const RealGrid& filterbank, std::span<const double> power);

}  // namespace funcodec::dsp
