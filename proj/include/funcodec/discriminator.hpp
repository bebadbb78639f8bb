#pragma once

#include <cstdint>
#include <vector>

#include "funcodec/audio.hpp"
#include "funcodec/layers.hpp"
#include "funcodec/losses.hpp"

namespace funcodec::model {

struct DiscriminatorConfig {
  std::vector<size_t> windows = {128, 256, 512};
  size_t channels = 8;
  uint64_t seed = 0;
};

// Small frozen multi-resolution STFT discriminator. Each scale turns the
// (real, imag) spectrogram into three hidden conv layers (the feature maps)
// and a one-channel score map averaged over frequency.
class MultiScaleStftDiscriminator {
 public:
  explicit MultiScaleStftDiscriminator(const DiscriminatorConfig& cfg = {});

  losses::DiscriminatorOutput forward(const AudioBuffer& x) const;

  size_t layer_count() const { return kHiddenLayers; }

 private:
  static constexpr size_t kHiddenLayers = 3;

  struct Scale {
    size_t window;
    std::vector<Conv2d> hidden;
    std::vector<Conv2d> head;
  };

  std::vector<Scale> scales_;
};

losses::DiscriminatorOutput mstftd_forward(const AudioBuffer& x, const DiscriminatorConfig& cfg = {});

}  // namespace funcodec::model
