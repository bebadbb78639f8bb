#pragma once

#include <span>
#include <string>
#include <vector>

#include "funcodec/audio.hpp"
#include "funcodec/quantizer.hpp"
#include "json.hpp"

namespace funcodec::losses {

// Spectral L2 terms are root-mean-square differences (a norm, not squared).
inline constexpr bool kSpectralL2Squared = false;
// Commit terms are mean squared errors.
inline constexpr bool kCommitSquared = true;

struct LossWeights {
  double time = 1.0;
  double spectral = 1.0;
  double adversarial = 1.0 / 9.0;
  double feature = 100.0 / 9.0;
  double commit = 1.0;
};

// Mean absolute sample difference.
double time_l1(const AudioBuffer& x, const AudioBuffer& y);

struct ScaleTerms {
  int scale = 0;
  size_t window = 0;
  double power_l1 = 0.0;
  double power_l2 = 0.0;
  double mel_l1 = 0.0;
  double mel_l2 = 0.0;

  double sum() const { return power_l1 + power_l2 + mel_l1 + mel_l2; }
};

struct SpectralLoss {
  double value = 0.0;
  std::vector<ScaleTerms> per_scale;
};

// Average over scales i of L1 + L2 distances between log-power spectra and
// between log-Mel spectra, window 2^i and hop 2^i/4.
SpectralLoss multiscale_spectral(const AudioBuffer& x, const AudioBuffer& y,
                                 std::span<const int> scales);
SpectralLoss multiscale_spectral(const AudioBuffer& x, const AudioBuffer& y);

// Features of one discriminator layer: frames x width.
struct LayerFeatures {
  size_t frames = 0;
  size_t width = 0;
  std::vector<double> values;
};

struct ScaleOutput {
  std::vector<double> scores;          // D_{k,t}, length T_k
  std::vector<LayerFeatures> layers;   // D^{(l)}_{k,t}
};

// One pass of a multi-discriminator over a single signal.
struct DiscriminatorOutput {
  std::vector<ScaleOutput> discriminators;
};

// (1/K) sum_k (1/T_k) sum_t max(0, 1 - D_{k,t}); the batch overload averages.
double adv_hinge(const DiscriminatorOutput& fake);
double adv_hinge(std::span<const DiscriminatorOutput> fake_batch);

// Mean over discriminators and layers of the per-element mean |real - fake|.
double feature_match(const DiscriminatorOutput& real, const DiscriminatorOutput& fake);
double feature_match(std::span<const DiscriminatorOutput> real_batch,
                     std::span<const DiscriminatorOutput> fake_batch);

// Whole-stack error plus the mean of per-stage errors, each stage measured on
// the residual it receives.
double commit_loss(const Matrix& input, const quantizer::QuantizerStack& stack, size_t n_active);
double commit_loss(const Matrix& input, const quantizer::QuantizerStack& stack);

struct LossComponents {
  double time = 0.0;
  double spectral = 0.0;
  double adversarial = 0.0;
  double feature = 0.0;
  double commit = 0.0;
  std::vector<ScaleTerms> per_scale;
};

struct LossReport {
  LossComponents components;
  LossWeights weights;
  double total = 0.0;
};

// Weighted sum of the components. Throws NumericError naming the first
// non-finite term.
LossReport total_loss(const LossComponents& components, const LossWeights& weights = {});

// The discriminator is updated only when its loss exceeds the codec's.
bool discriminator_update_gate(double discriminator_loss, double codec_loss);

nlohmann::json to_json(const LossReport& report);

}  // namespace funcodec::losses
