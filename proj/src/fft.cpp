#include "funcodec/fft.hpp"

#include <cmath>
#include <utility>

namespace funcodec::dsp {

bool is_power_of_two(size_t n) { return n != 0 && (n & (n - 1)) == 0; }

namespace {

void radix2(std::vector<std::complex<double>>& a, bool inverse) {
  const size_t n = a.size();
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  const double sign = inverse ? 1.0 : -1.0;
  for (size_t len = 2; len <= n; len <<= 1) {
    const size_t half = len / 2;
    for (size_t k = 0; k < half; ++k) {
      // Exact twiddles per k avoid drift from repeated multiplication.
      const double angle = sign * 2.0 * M_PI * static_cast<double>(k) / static_cast<double>(len);
      const std::complex<double> w(std::cos(angle), std::sin(angle));
      for (size_t i = k; i < n; i += len) {
        const auto u = a[i];
        const auto v = a[i + half] * w;
        a[i] = u + v;
        a[i + half] = u - v;
      }
    }
  }
}

void direct(std::vector<std::complex<double>>& a, bool inverse) {
  const size_t n = a.size();
  const double sign = inverse ? 1.0 : -1.0;
  std::vector<std::complex<double>> out(n);
  for (size_t k = 0; k < n; ++k) {
    std::complex<double> acc = 0.0;
    for (size_t t = 0; t < n; ++t) {
      const double angle = sign * 2.0 * M_PI * static_cast<double>((k * t) % n) / static_cast<double>(n);
      acc += a[t] * std::complex<double>(std::cos(angle), std::sin(angle));
    }
    out[k] = acc;
  }
  a = std::move(out);
}

}  // namespace

void fft(std::vector<std::complex<double>>& data, bool inverse) {
  if (data.size() <= 1) return;
  if (is_power_of_two(data.size())) {
    radix2(data, inverse);
  } else {
    direct(data, inverse);
  }
}

std::vector<std::complex<double>> rfft(std::span<const double> frame) {
  std::vector<std::complex<double>> buf(frame.begin(), frame.end());
  fft(buf, false);
  buf.resize(frame.size() / 2 + 1);
  return buf;
}

std::vector<double> irfft(std::span<const std::complex<double>> bins, size_t n) {
  std::vector<std::complex<double>> buf(n);
  const size_t half = n / 2;
  for (size_t k = 0; k <= half && k < bins.size(); ++k) buf[k] = bins[k];
  // Hermitian completion; DC and Nyquist imaginary parts are dropped.
  buf[0] = {buf[0].real(), 0.0};
  if (n % 2 == 0) buf[half] = {buf[half].real(), 0.0};
  for (size_t k = 1; k < (n + 1) / 2; ++k) buf[n - k] = std::conj(buf[k]);
  fft(buf, true);
  std::vector<double> out(n);
  const double scale = 1.0 / static_cast<double>(n);
  for (size_t i = 0; i < n; ++i) out[i] = buf[i].real() * scale;
  return out;
}

}  // namespace funcodec::dsp
