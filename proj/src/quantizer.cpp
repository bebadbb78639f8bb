#include "funcodec/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "funcodec/error.hpp"

namespace funcodec::quantizer {

namespace {

double squared_distance(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  for (size_t d = 0; d < a.size(); ++d) {
    const double diff = static_cast<double>(a[d]) - static_cast<double>(b[d]);
    acc += diff * diff;
  }
  return acc;
}

// Index drawn with probability proportional to weights; uniform when all
// weights vanish.
size_t sample_weighted(std::span<const double> weights, Rng& rng) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0)) return static_cast<size_t>(rng.uniform_int(weights.size()));
  const double target = rng.uniform() * total;
  double acc = 0.0;
  for (size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (target < acc) return i;
  }
  // Rounding can leave target just above the final partial sum.
  for (size_t i = weights.size(); i-- > 0;) {
    if (weights[i] > 0.0) return i;
  }
  return weights.size() - 1;
}

}  // namespace

void ActivationStats::record(std::span<const int32_t> assignments) {
  std::fill(batch_counts.begin(), batch_counts.end(), 0);
  for (int32_t a : assignments) {
    if (a < 0 || static_cast<size_t>(a) >= batch_counts.size()) {
      throw InvalidInput("activation stats: code index " + std::to_string(a) + " out of range");
    }
    ++batch_counts[static_cast<size_t>(a)];
  }
  for (size_t k = 0; k < batch_counts.size(); ++k) lifetime_counts[k] += batch_counts[k];
}

size_t ActivationStats::dead_codes() const {
  return static_cast<size_t>(std::count_if(batch_counts.begin(), batch_counts.end(),
                                           [](int64_t c) { return c < kDeadCodeThreshold; }));
}

size_t ActivationStats::used_codes() const {
  return static_cast<size_t>(
      std::count_if(batch_counts.begin(), batch_counts.end(), [](int64_t c) { return c > 0; }));
}

Codebook::Codebook(size_t codebook_size, size_t dim, float decay)
    : vectors_(codebook_size, dim),
      cluster_size_(codebook_size, 0.0f),
      embed_sum_(codebook_size, dim),
      decay_(decay) {
  if (codebook_size < 2) throw InvalidInput("codebook needs at least 2 codes");
  if (dim < 1) throw InvalidInput("codebook dimension must be positive");
  if (!(decay > 0.0f && decay < 1.0f)) throw InvalidInput("codebook decay must lie in (0, 1)");
}

Codebook Codebook::from_state(std::vector<float> cluster_size, Matrix embed_sum, float decay) {
  if (cluster_size.size() != embed_sum.rows) {
    throw InvalidInput("codebook state: cluster sizes and sums disagree on K");
  }
  Codebook cb(embed_sum.rows, embed_sum.cols, decay);
  cb.cluster_size_ = std::move(cluster_size);
  cb.embed_sum_ = std::move(embed_sum);
  cb.refresh_vectors();
  cb.initialized_ = true;
  return cb;
}

void Codebook::refresh_vectors() {
  for (size_t k = 0; k < size(); ++k) {
    const float denom = std::max(cluster_size_[k], kEmaEpsilon);
    for (size_t d = 0; d < dim(); ++d) vectors_(k, d) = embed_sum_(k, d) / denom;
  }
}

CodeMatch Codebook::nearest(std::span<const float> v) const {
  if (!initialized_) throw StateError("nearest: codebook is not initialized");
  if (v.size() != dim()) throw InvalidInput("nearest: vector dimension does not match codebook");
  CodeMatch best{0, std::numeric_limits<double>::infinity()};
  for (size_t k = 0; k < size(); ++k) {
    const double dist = squared_distance(v, vectors_.row(k));
    if (dist < best.distance) best = {static_cast<int32_t>(k), dist};
  }
  return best;
}

std::vector<int32_t> Codebook::assign(const Matrix& batch) const {
  std::vector<int32_t> out(batch.rows);
  for (size_t r = 0; r < batch.rows; ++r) out[r] = nearest(batch.row(r)).index;
  return out;
}

void Codebook::ema_update(const Matrix& batch, std::span<const int32_t> assignments) {
  if (!initialized_) throw StateError("ema_update: codebook is not initialized");
  if (batch.cols != dim()) throw InvalidInput("ema_update: batch dimension does not match codebook");
  if (assignments.size() != batch.rows) throw InvalidInput("ema_update: one assignment per row required");

  std::vector<double> counts(size(), 0.0);
  std::vector<double> sums(size() * dim(), 0.0);
  for (size_t r = 0; r < batch.rows; ++r) {
    const int32_t a = assignments[r];
    if (a < 0 || static_cast<size_t>(a) >= size()) throw InvalidInput("ema_update: assignment out of range");
    const auto k = static_cast<size_t>(a);
    counts[k] += 1.0;
    const auto row = batch.row(r);
    for (size_t d = 0; d < dim(); ++d) sums[k * dim() + d] += row[d];
  }

  const double keep = decay_;
  const double blend = 1.0 - keep;
  for (size_t k = 0; k < size(); ++k) {
    cluster_size_[k] = static_cast<float>(keep * cluster_size_[k] + blend * counts[k]);
    for (size_t d = 0; d < dim(); ++d) {
      embed_sum_(k, d) = static_cast<float>(keep * embed_sum_(k, d) + blend * sums[k * dim() + d]);
    }
  }
  refresh_vectors();
}

void Codebook::reset_code(size_t k, std::span<const float> vector) {
  if (k >= size() || vector.size() != dim()) throw InvalidInput("reset_code: bad index or dimension");
  cluster_size_[k] = 1.0f;
  std::copy(vector.begin(), vector.end(), embed_sum_.row(k).begin());
  std::copy(vector.begin(), vector.end(), vectors_.row(k).begin());
}

Codebook kmeans_init(const Matrix& batch, size_t codebook_size, Rng& rng, const KMeansOptions& options,
                     float decay) {
  Codebook cb(codebook_size, batch.cols, decay);
  const size_t m = batch.rows;
  const size_t k_total = codebook_size;
  const size_t dim = batch.cols;
  if (m < k_total) {
    throw InvalidInput("kmeans_init: " + std::to_string(m) + " samples cannot seed " +
                       std::to_string(k_total) + " codes");
  }

  // Greedy k-means++: each new centre is the best of several D^2-weighted
  // candidates by total potential.
  const size_t trials =
      options.local_trials > 0
          ? options.local_trials
          : 2 + static_cast<size_t>(std::log(static_cast<double>(k_total)));
  Matrix centres(k_total, dim);
  std::vector<double> closest(m);
  {
    const auto first = static_cast<size_t>(rng.uniform_int(m));
    std::copy_n(batch.row(first).begin(), dim, centres.row(0).begin());
    for (size_t i = 0; i < m; ++i) closest[i] = squared_distance(batch.row(i), centres.row(0));
  }
  std::vector<double> candidate_closest(m);
  std::vector<double> best_closest(m);
  for (size_t c = 1; c < k_total; ++c) {
    double best_potential = std::numeric_limits<double>::infinity();
    size_t best_index = 0;
    for (size_t trial = 0; trial < trials; ++trial) {
      const size_t cand = sample_weighted(closest, rng);
      double potential = 0.0;
      for (size_t i = 0; i < m; ++i) {
        candidate_closest[i] = std::min(closest[i], squared_distance(batch.row(i), batch.row(cand)));
        potential += candidate_closest[i];
      }
      if (potential < best_potential) {
        best_potential = potential;
        best_index = cand;
        best_closest.swap(candidate_closest);
      }
    }
    std::copy_n(batch.row(best_index).begin(), dim, centres.row(c).begin());
    closest.swap(best_closest);
  }

  // Lloyd iterations. Stop when the total squared centre shift drops below
  // tolerance times the mean per-dimension variance of the batch.
  double variance = 0.0;
  for (size_t d = 0; d < dim; ++d) {
    double mean = 0.0;
    for (size_t i = 0; i < m; ++i) mean += batch(i, d);
    mean /= static_cast<double>(m);
    double var = 0.0;
    for (size_t i = 0; i < m; ++i) var += (batch(i, d) - mean) * (batch(i, d) - mean);
    variance += var / static_cast<double>(m);
  }
  const double stop_shift = options.tolerance * variance / static_cast<double>(dim);

  auto nearest_centre = [&](std::span<const float> v) {
    size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (size_t c = 0; c < k_total; ++c) {
      const double dist = squared_distance(v, centres.row(c));
      if (dist < best_d) {
        best_d = dist;
        best = c;
      }
    }
    return best;
  };

  std::vector<size_t> labels(m);
  std::vector<double> counts(k_total);
  std::vector<double> sums(k_total * dim);
  for (size_t iter = 0; iter < options.max_iterations; ++iter) {
    std::fill(counts.begin(), counts.end(), 0.0);
    std::fill(sums.begin(), sums.end(), 0.0);
    for (size_t i = 0; i < m; ++i) {
      labels[i] = nearest_centre(batch.row(i));
      counts[labels[i]] += 1.0;
      for (size_t d = 0; d < dim; ++d) sums[labels[i] * dim + d] += batch(i, d);
    }
    double shift = 0.0;
    for (size_t c = 0; c < k_total; ++c) {
      if (counts[c] == 0.0) continue;  // empty cluster keeps its centre
      for (size_t d = 0; d < dim; ++d) {
        const auto updated = static_cast<float>(sums[c * dim + d] / counts[c]);
        const double delta = updated - centres(c, d);
        shift += delta * delta;
        centres(c, d) = updated;
      }
    }
    if (shift <= stop_shift) break;
  }

  std::fill(counts.begin(), counts.end(), 0.0);
  for (size_t i = 0; i < m; ++i) counts[nearest_centre(batch.row(i))] += 1.0;
  for (size_t c = 0; c < k_total; ++c) {
    cb.cluster_size_[c] = static_cast<float>(counts[c]);
    const float scale = std::max(cb.cluster_size_[c], kEmaEpsilon);
    for (size_t d = 0; d < dim; ++d) cb.embed_sum_(c, d) = centres(c, d) * scale;
  }
  cb.refresh_vectors();
  cb.initialized_ = true;
  return cb;
}

size_t reassign_dead_codes(Codebook& codebook, const ActivationStats& stats, const Matrix& batch, Rng& rng) {
  if (stats.batch_counts.size() != codebook.size()) {
    throw InvalidInput("reassign_dead_codes: stats sized for a different codebook");
  }
  std::vector<size_t> dead;
  for (size_t k = 0; k < codebook.size(); ++k) {
    if (stats.batch_counts[k] < kDeadCodeThreshold) dead.push_back(k);
  }
  if (dead.empty()) return 0;
  if (batch.rows == 0) throw InvalidInput("reassign_dead_codes: empty batch");

  std::vector<double> weights(batch.rows);
  for (size_t r = 0; r < batch.rows; ++r) weights[r] = codebook.nearest(batch.row(r)).distance;

  // Without replacement while the batch lasts, then with replacement.
  std::vector<double> remaining = weights;
  std::vector<bool> taken(batch.rows, false);
  size_t left = batch.rows;
  for (size_t k : dead) {
    if (left == 0) {
      remaining = weights;
      std::fill(taken.begin(), taken.end(), false);
      left = batch.rows;
    }
    size_t pick;
    if (std::accumulate(remaining.begin(), remaining.end(), 0.0) > 0.0) {
      pick = sample_weighted(remaining, rng);
    } else {
      // No quantisation error left among open rows; choose uniformly.
      std::vector<size_t> open;
      for (size_t r = 0; r < batch.rows; ++r) {
        if (!taken[r]) open.push_back(r);
      }
      pick = open[static_cast<size_t>(rng.uniform_int(open.size()))];
    }
    taken[pick] = true;
    remaining[pick] = 0.0;
    --left;
    codebook.reset_code(k, batch.row(pick));
  }
  return dead.size();
}

TokenMatrix TokenMatrix::prefix(size_t m) const {
  if (m > n_q) throw InvalidInput("token prefix longer than the matrix");
  TokenMatrix out(m, frames);
  std::copy_n(indices.begin(), m * frames, out.indices.begin());
  return out;
}

QuantizerStack::QuantizerStack(std::vector<Codebook> stages) : stages_(std::move(stages)) {
  if (stages_.empty()) throw InvalidInput("quantizer stack needs at least one codebook");
  for (const auto& cb : stages_) {
    if (cb.dim() != stages_.front().dim()) throw InvalidInput("quantizer stack: codebook dimensions differ");
  }
}

bool QuantizerStack::initialized() const {
  return !stages_.empty() &&
         std::all_of(stages_.begin(), stages_.end(), [](const Codebook& cb) { return cb.initialized(); });
}

RvqResult rvq_encode(const QuantizerStack& stack, const Matrix& input, size_t n_active) {
  if (n_active < 1 || n_active > stack.size()) {
    throw InvalidInput("rvq_encode: n_active " + std::to_string(n_active) + " outside [1, " +
                       std::to_string(stack.size()) + "]");
  }
  for (size_t q = 0; q < n_active; ++q) {
    if (!stack.stage(q).initialized()) throw StateError("rvq_encode: stage " + std::to_string(q) + " is not initialized");
  }
  if (input.cols != stack.dim()) throw InvalidInput("rvq_encode: input width does not match codebooks");

  const size_t dim = input.cols;
  RvqResult out{TokenMatrix(n_active, input.rows), Matrix(input.rows, dim), Matrix(input.rows, dim),
                std::vector<double>(n_active, 0.0)};
  std::vector<float> residual(dim);
  for (size_t t = 0; t < input.rows; ++t) {
    const auto v = input.row(t);
    auto q = out.quantized.row(t);
    std::copy(v.begin(), v.end(), residual.begin());
    for (size_t stage = 0; stage < n_active; ++stage) {
      const auto match = stack.stage(stage).nearest(residual);
      out.tokens.at(stage, t) = match.index;
      const auto code = stack.stage(stage).code(static_cast<size_t>(match.index));
      double err = 0.0;
      for (size_t d = 0; d < dim; ++d) {
        q[d] += code[d];
        residual[d] = v[d] - q[d];
        err += static_cast<double>(residual[d]) * residual[d];
      }
      out.stage_mse[stage] += err;
    }
    std::copy(residual.begin(), residual.end(), out.residual.row(t).begin());
  }
  const double elements = static_cast<double>(input.rows * dim);
  if (elements > 0) {
    for (double& e : out.stage_mse) e /= elements;
  }
  return out;
}

Matrix rvq_decode(const QuantizerStack& stack, const TokenMatrix& tokens) {
  if (tokens.n_q > stack.size()) throw InvalidInput("rvq_decode: more token rows than quantizers");
  if (tokens.indices.size() != tokens.n_q * tokens.frames) throw InvalidInput("rvq_decode: malformed token matrix");
  Matrix out(tokens.frames, stack.dim());
  for (size_t q = 0; q < tokens.n_q; ++q) {
    const auto& cb = stack.stage(q);
    if (!cb.initialized()) throw StateError("rvq_decode: stage " + std::to_string(q) + " is not initialized");
    for (size_t t = 0; t < tokens.frames; ++t) {
      const int32_t index = tokens.at(q, t);
      if (index < 0 || static_cast<size_t>(index) >= cb.size()) {
        throw InvalidInput("rvq_decode: token " + std::to_string(index) + " out of range for quantizer " +
                           std::to_string(q));
      }
      const auto code = cb.code(static_cast<size_t>(index));
      auto row = out.row(t);
      for (size_t d = 0; d < row.size(); ++d) row[d] += code[d];
    }
  }
  return out;
}

size_t sample_quantizer_dropout(size_t n_quantizers, Rng& rng) {
  if (n_quantizers < 1) throw InvalidInput("quantizer dropout needs at least one quantizer");
  return 1 + static_cast<size_t>(rng.uniform_int(n_quantizers));
}

CombineResult semantic_combine(SemanticMode mode, const Matrix& acoustic, const Matrix& semantic,
                               const QuantizerStack& stack, size_t n_active) {
  if (acoustic.rows != semantic.rows) {
    throw InvalidInput("semantic_combine: acoustic and semantic frame counts differ");
  }
  if (mode != SemanticMode::Concat && acoustic.cols != semantic.cols) {
    throw InvalidInput("semantic_combine: semantic width must match acoustic width");
  }

  if (mode == SemanticMode::Concat) {
    auto rvq = rvq_encode(stack, acoustic, n_active);
    const size_t width = acoustic.cols + semantic.cols;
    Matrix out(acoustic.rows, width);
    for (size_t t = 0; t < acoustic.rows; ++t) {
      auto row = out.row(t);
      const auto q = rvq.quantized.row(t);
      const auto s = semantic.row(t);
      std::copy(q.begin(), q.end(), row.begin());
      std::copy(s.begin(), s.end(), row.begin() + static_cast<long>(q.size()));
    }
    return {std::move(out), std::move(rvq.tokens)};
  }

  const Matrix* operand = &acoustic;
  Matrix difference;
  if (mode == SemanticMode::Residual) {
    difference = acoustic;
    for (size_t i = 0; i < difference.data.size(); ++i) difference.data[i] -= semantic.data[i];
    operand = &difference;
  }
  auto rvq = rvq_encode(stack, *operand, n_active);
  for (size_t i = 0; i < rvq.quantized.data.size(); ++i) rvq.quantized.data[i] += semantic.data[i];
  return {std::move(rvq.quantized), std::move(rvq.tokens)};
}

namespace {

// Running residual input - sum(codes) after adding stage codes for `assignments`.
void subtract_codes(const Codebook& cb, std::span<const int32_t> assignments, const Matrix& input,
                    Matrix& code_sum, Matrix& residual) {
  for (size_t r = 0; r < input.rows; ++r) {
    const auto code = cb.code(static_cast<size_t>(assignments[r]));
    for (size_t d = 0; d < input.cols; ++d) {
      code_sum(r, d) += code[d];
      residual(r, d) = input(r, d) - code_sum(r, d);
    }
  }
}

}  // namespace

FitReport fit_stack(std::span<const Matrix> batches, const FitOptions& options, Rng& rng) {
  if (batches.empty()) throw InvalidInput("fit_stack: no feature batches");
  if (options.n_quantizers < 1) throw InvalidInput("fit_stack: need at least one quantizer");
  const size_t dim = batches.front().cols;
  for (const auto& b : batches) {
    if (b.cols != dim || b.rows == 0) throw InvalidInput("fit_stack: batches must be non-empty with equal width");
  }

  std::vector<Codebook> stages;
  {
    const Matrix& first = batches.front();
    Matrix code_sum(first.rows, dim);
    Matrix residual = first;
    for (size_t q = 0; q < options.n_quantizers; ++q) {
      stages.push_back(kmeans_init(residual, options.codebook_size, rng, options.kmeans, options.decay));
      const auto assignments = stages.back().assign(residual);
      subtract_codes(stages.back(), assignments, first, code_sum, residual);
    }
  }
  FitReport report;
  report.stack = QuantizerStack(std::move(stages));
  report.reassigned.assign(options.n_quantizers, 0);

  std::vector<ActivationStats> stats(options.n_quantizers, ActivationStats(options.codebook_size));
  for (size_t step = 0; step < options.steps; ++step) {
    const Matrix& batch = batches[(step + 1) % batches.size()];
    const size_t n_active =
        options.quantizer_dropout ? sample_quantizer_dropout(options.n_quantizers, rng) : options.n_quantizers;
    Matrix code_sum(batch.rows, dim);
    Matrix stage_input = batch;
    Matrix next(batch.rows, dim);
    for (size_t q = 0; q < n_active; ++q) {
      Codebook& cb = report.stack.stage(q);
      const auto assignments = cb.assign(stage_input);
      subtract_codes(cb, assignments, batch, code_sum, next);
      stats[q].record(assignments);
      cb.ema_update(stage_input, assignments);
      report.reassigned[q] += reassign_dead_codes(cb, stats[q], stage_input, rng);
      std::swap(stage_input, next);
    }
  }

  // Final evaluation pass over every batch.
  std::vector<std::vector<bool>> used(options.n_quantizers, std::vector<bool>(options.codebook_size, false));
  report.residual_mse.assign(options.n_quantizers, 0.0);
  double rows = 0.0;
  for (const auto& batch : batches) {
    const auto rvq = rvq_encode(report.stack, batch, options.n_quantizers);
    for (size_t q = 0; q < options.n_quantizers; ++q) {
      for (size_t t = 0; t < batch.rows; ++t) used[q][static_cast<size_t>(rvq.tokens.at(q, t))] = true;
      report.residual_mse[q] += rvq.stage_mse[q] * static_cast<double>(batch.rows);
    }
    rows += static_cast<double>(batch.rows);
  }
  for (size_t q = 0; q < options.n_quantizers; ++q) {
    report.residual_mse[q] /= rows;
    const auto n_used = static_cast<size_t>(std::count(used[q].begin(), used[q].end(), true));
    report.used_codes.push_back(n_used);
    report.utilization.push_back(static_cast<double>(n_used) / static_cast<double>(options.codebook_size));
  }
  return report;
}

}  // namespace funcodec::quantizer
