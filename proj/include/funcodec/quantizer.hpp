#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "funcodec/rng.hpp"
#include "funcodec/tensor.hpp"

namespace funcodec::quantizer {

inline constexpr float kDefaultDecay = 0.99f;
// Laplace floor on EMA cluster sizes.
inline constexpr float kEmaEpsilon = 1e-5f;
inline constexpr size_t kDefaultCodebookSize = 1024;
// A code activated fewer times than this in a mini-batch is reassigned.
inline constexpr int64_t kDeadCodeThreshold = 2;

struct CodeMatch {
  int32_t index = -1;
  double distance = 0.0;  // squared Euclidean
};

struct KMeansOptions {
  size_t max_iterations = 50;
  double tolerance = 1e-4;
  // Candidates per greedy k-means++ seeding step; 0 picks 2 + floor(ln K).
  size_t local_trials = 0;
};

// Per-code activation counts for one mini-batch plus lifetime totals.
struct ActivationStats {
  std::vector<int64_t> batch_counts;
  std::vector<int64_t> lifetime_counts;

  explicit ActivationStats(size_t codebook_size = 0)
      : batch_counts(codebook_size, 0), lifetime_counts(codebook_size, 0) {}

  // Replaces the batch counts with those of `assignments` and adds them to
  // the lifetime totals.
  void record(std::span<const int32_t> assignments);
  size_t dead_codes() const;
  size_t used_codes() const;
};

// K x D codebook learned by exponential moving average.
// Invariant: vectors[k] == embed_sum[k] / max(cluster_size[k], eps).
class Codebook {
 public:
  Codebook(size_t codebook_size, size_t dim, float decay = kDefaultDecay);

  // Restores a codebook from EMA state; vectors are recomputed.
  static Codebook from_state(std::vector<float> cluster_size, Matrix embed_sum, float decay);

  size_t size() const { return vectors_.rows; }
  size_t dim() const { return vectors_.cols; }
  float decay() const { return decay_; }
  bool initialized() const { return initialized_; }

  const Matrix& vectors() const { return vectors_; }
  const std::vector<float>& cluster_size() const { return cluster_size_; }
  const Matrix& embed_sum() const { return embed_sum_; }
  std::span<const float> code(size_t k) const { return vectors_.row(k); }

  // Nearest code under squared Euclidean distance; ties go to the lowest index.
  CodeMatch nearest(std::span<const float> v) const;
  std::vector<int32_t> assign(const Matrix& batch) const;

  // cluster_size <- decay * cluster_size + (1 - decay) * count
  // embed_sum    <- decay * embed_sum    + (1 - decay) * sum
  void ema_update(const Matrix& batch, std::span<const int32_t> assignments);

  // Replaces code k and resets its EMA state to (count 1, vector).
  void reset_code(size_t k, std::span<const float> vector);

  friend Codebook kmeans_init(const Matrix& batch, size_t codebook_size, Rng& rng,
                              const KMeansOptions& options, float decay);

 private:
  void refresh_vectors();

  Matrix vectors_;
  std::vector<float> cluster_size_;
  Matrix embed_sum_;
  float decay_;
  bool initialized_ = false;
};

// k-means over the rows of `batch` (greedy k-means++ seeding + Lloyd
// iterations). EMA state is seeded with the final cluster sizes and sums.
// Throws InvalidInput when batch.rows < codebook_size.
Codebook kmeans_init(const Matrix& batch, size_t codebook_size, Rng& rng,
                     const KMeansOptions& options = {}, float decay = kDefaultDecay);

// Reassigns every code whose batch activation count is below the threshold to
// a batch vector drawn with probability proportional to its squared
// quantisation error. Returns the number of codes replaced.
size_t reassign_dead_codes(Codebook& codebook, const ActivationStats& stats, const Matrix& batch,
                           Rng& rng);

// n_q x T code indices; row q belongs to quantizer q.
struct TokenMatrix {
  size_t n_q = 0;
  size_t frames = 0;
  std::vector<int32_t> indices;

  TokenMatrix() = default;
  TokenMatrix(size_t quantizers, size_t t) : n_q(quantizers), frames(t), indices(quantizers * t, 0) {}

  int32_t& at(size_t q, size_t t) { return indices[q * frames + t]; }
  int32_t at(size_t q, size_t t) const { return indices[q * frames + t]; }

  // First m rows.
  TokenMatrix prefix(size_t m) const;

  friend bool operator==(const TokenMatrix&, const TokenMatrix&) = default;
};

// Residual cascade of codebooks sharing a dimension.
class QuantizerStack {
 public:
  QuantizerStack() = default;
  explicit QuantizerStack(std::vector<Codebook> stages);

  size_t size() const { return stages_.size(); }
  size_t dim() const { return stages_.empty() ? 0 : stages_.front().dim(); }
  bool initialized() const;

  const Codebook& stage(size_t i) const { return stages_[i]; }
  Codebook& stage(size_t i) { return stages_[i]; }
  const std::vector<Codebook>& stages() const { return stages_; }

 private:
  std::vector<Codebook> stages_;
};

struct RvqResult {
  TokenMatrix tokens;
  Matrix quantized;
  Matrix residual;  // input - quantized
  // Mean squared residual after each active stage.
  std::vector<double> stage_mse;
};

// Quantizes each row of `input` with the first n_active stages; stage n
// consumes input minus the sum of stages 1..n-1.
RvqResult rvq_encode(const QuantizerStack& stack, const Matrix& input, size_t n_active);

// Sum over rows of `tokens` of the selected code vectors.
Matrix rvq_decode(const QuantizerStack& stack, const TokenMatrix& tokens);

// Active-quantizer count for one training batch: uniform over {1, ..., N}.
size_t sample_quantizer_dropout(size_t n_quantizers, Rng& rng);

enum class SemanticMode { Concat, Add, Residual };

struct CombineResult {
  Matrix output;
  TokenMatrix tokens;
};

// Concat:   [RVQ(acoustic), semantic]
// Add:      RVQ(acoustic) + semantic
// Residual: RVQ(acoustic - semantic) + semantic
// `semantic` must already be frame-aligned (and width-matched for Add/Residual).
CombineResult semantic_combine(SemanticMode mode, const Matrix& acoustic, const Matrix& semantic,
                               const QuantizerStack& stack, size_t n_active);

struct FitOptions {
  size_t n_quantizers = 8;
  size_t codebook_size = kDefaultCodebookSize;
  // EMA/reassignment updates after the k-means initialisation on batch 0.
  size_t steps = 0;
  float decay = kDefaultDecay;
  KMeansOptions kmeans;
  // Update only a uniformly sampled prefix of stages per step.
  bool quantizer_dropout = false;
};

struct FitReport {
  QuantizerStack stack;
  // Fraction of codes used per stage when encoding every batch with the final stack.
  std::vector<double> utilization;
  std::vector<size_t> used_codes;
  // Mean squared residual after each stage on the same pass.
  std::vector<double> residual_mse;
  std::vector<size_t> reassigned;
};

// Learns a stack from feature batches: k-means on the first batch (stage by
// stage, on the running residual), then `steps` rounds of assignment, EMA
// update and dead-code reassignment cycling through the batches.
FitReport fit_stack(std::span<const Matrix> batches, const FitOptions& options, Rng& rng);

// FCQ1 codebook container (little-endian).
std::vector<uint8_t> serialize_stack(const QuantizerStack& stack);
QuantizerStack deserialize_stack(std::span<const uint8_t> bytes);

}  // namespace funcodec::quantizer
