#pragma once

#include <complex>
#include <span>
#include <vector>

namespace funcodec::dsp {

// In-place complex DFT. Radix-2 for power-of-two sizes, direct O(n^2)
// evaluation otherwise. The inverse is unscaled.
void fft(std::vector<std::complex<double>>& data, bool inverse = false);

// One-sided spectrum of a real frame: n/2 + 1 bins.
std::vector<std::complex<double>> rfft(std::span<const double> frame);

// Inverse of rfft for an n-sample frame (scaled by 1/n).
std::vector<double> irfft(std::span<const std::complex<double>> bins, size_t n);

bool is_power_of_two(size_t n);

}  // namespace funcodec::dsp
