#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace funcodec {

// Row-major float matrix. Rows are frames, columns are feature dimensions.
struct Matrix {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<float> data;

  Matrix() = default;
  Matrix(size_t r, size_t c, float fill = 0.0f) : rows(r), cols(c), data(r * c, fill) {}

  float& operator()(size_t r, size_t c) { return data[r * cols + c]; }
  float operator()(size_t r, size_t c) const { return data[r * cols + c]; }

  std::span<float> row(size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const float> row(size_t r) const { return {data.data() + r * cols, cols}; }

  bool empty() const { return rows == 0 || cols == 0; }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

// channels x time x frequency activations.
struct Tensor3 {
  size_t channels = 0;
  size_t time = 0;
  size_t freq = 0;
  std::vector<float> data;

  Tensor3() = default;
  Tensor3(size_t c, size_t t, size_t f, float fill = 0.0f)
      : channels(c), time(t), freq(f), data(c * t * f, fill) {}

  float& at(size_t c, size_t t, size_t f) { return data[(c * time + t) * freq + f]; }
  float at(size_t c, size_t t, size_t f) const { return data[(c * time + t) * freq + f]; }

  float* plane(size_t c) { return data.data() + c * time * freq; }
  const float* plane(size_t c) const { return data.data() + c * time * freq; }
};

}  // namespace funcodec
