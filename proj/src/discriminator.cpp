#include "funcodec/discriminator.hpp"

#include "funcodec/dsp.hpp"
#include "funcodec/error.hpp"

namespace funcodec::model {

MultiScaleStftDiscriminator::MultiScaleStftDiscriminator(const DiscriminatorConfig& cfg) {
  if (cfg.windows.empty()) throw InvalidInput("discriminator: no scales");
  if (cfg.channels == 0) throw ConfigError("discriminator: channels must be positive");
  Rng rng(cfg.seed);
  const Padding same{1, 1, 4, 4};
  for (size_t window : cfg.windows) {
    Scale s{window, {}, {}};
    s.hidden.emplace_back(2, cfg.channels, Kernel2d{3, 9}, Kernel2d{1, 1}, same, 1, rng);
    s.hidden.emplace_back(cfg.channels, cfg.channels, Kernel2d{3, 9}, Kernel2d{1, 2}, same, 1, rng);
    s.hidden.emplace_back(cfg.channels, cfg.channels, Kernel2d{3, 9}, Kernel2d{1, 2}, same, 1, rng);
    s.head.emplace_back(cfg.channels, 1, Kernel2d{3, 3}, Kernel2d{1, 1}, Padding{1, 1, 1, 1}, 1, rng);
    scales_.push_back(std::move(s));
  }
}

losses::DiscriminatorOutput MultiScaleStftDiscriminator::forward(const AudioBuffer& x) const {
  losses::DiscriminatorOutput out;
  for (const auto& scale : scales_) {
    const auto spec = dsp::stft(x, scale.window, scale.window / 4);
    Tensor3 h(2, spec.frames, spec.bins);
    for (size_t t = 0; t < spec.frames; ++t) {
      for (size_t f = 0; f < spec.bins; ++f) {
        h.at(0, t, f) = static_cast<float>(spec.at(t, f).real());
        h.at(1, t, f) = static_cast<float>(spec.at(t, f).imag());
      }
    }

    losses::ScaleOutput result;
    for (const auto& layer : scale.hidden) {
      h = layer.forward(h);
      activate(h.data, Activation::LeakyRelu);
      losses::LayerFeatures feat{h.time, h.channels * h.freq, std::vector<double>(h.data.size())};
      for (size_t c = 0; c < h.channels; ++c) {
        for (size_t t = 0; t < h.time; ++t) {
          for (size_t f = 0; f < h.freq; ++f) feat.values[t * feat.width + c * h.freq + f] = h.at(c, t, f);
        }
      }
      result.layers.push_back(std::move(feat));
    }
    const Tensor3 score = scale.head.front().forward(h);
    result.scores.resize(score.time);
    for (size_t t = 0; t < score.time; ++t) {
      double acc = 0.0;
      for (size_t f = 0; f < score.freq; ++f) acc += score.at(0, t, f);
      result.scores[t] = acc / static_cast<double>(score.freq);
    }
    out.discriminators.push_back(std::move(result));
  }
  return out;
}

losses::DiscriminatorOutput mstftd_forward(const AudioBuffer& x, const DiscriminatorConfig& cfg) {
  return MultiScaleStftDiscriminator(cfg).forward(x);
}

}  // namespace funcodec::model
