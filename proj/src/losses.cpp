#include "funcodec/losses.hpp"

#include <algorithm>
#include <cmath>

#include "funcodec/dsp.hpp"
#include "funcodec/error.hpp"

namespace funcodec::losses {

double time_l1(const AudioBuffer& x, const AudioBuffer& y) {
  if (x.size() != y.size()) throw InvalidInput("time_l1: signals differ in length");
  if (x.empty()) throw InvalidInput("time_l1: empty signals");
  double acc = 0.0;
  for (size_t i = 0; i < x.size(); ++i) acc += std::abs(x.samples[i] - y.samples[i]);
  return acc / static_cast<double>(x.size());
}

namespace {

struct Distances {
  double l1 = 0.0;
  double l2 = 0.0;
};

Distances grid_distances(const dsp::RealGrid& a, const dsp::RealGrid& b) {
  double abs_sum = 0.0;
  double sq_sum = 0.0;
  for (size_t i = 0; i < a.values.size(); ++i) {
    const double d = a.values[i] - b.values[i];
    abs_sum += std::abs(d);
    sq_sum += d * d;
  }
  const auto n = static_cast<double>(a.values.size());
  const double mse = sq_sum / n;
  return {abs_sum / n, kSpectralL2Squared ? mse : std::sqrt(mse)};
}

}  // namespace

SpectralLoss multiscale_spectral(const AudioBuffer& x, const AudioBuffer& y, std::span<const int> scales) {
  if (scales.empty()) throw InvalidInput("multiscale_spectral: empty scale set");
  if (x.size() != y.size()) throw InvalidInput("multiscale_spectral: signals differ in length");
  if (x.sample_rate != y.sample_rate) throw InvalidInput("multiscale_spectral: sample rates differ");
  const int largest = *std::max_element(scales.begin(), scales.end());
  const size_t needed = size_t{1} << std::clamp(largest, 0, 30);
  if (x.size() < needed) {
    throw InvalidInput("multiscale_spectral: " + std::to_string(x.size()) +
                       " samples is shorter than the largest window " + std::to_string(needed));
  }

  SpectralLoss out;
  for (int i : scales) {
    const auto bank = dsp::make_spectral_bank(i);
    const auto power = grid_distances(dsp::log_power_spectrum(x, bank), dsp::log_power_spectrum(y, bank));
    const auto mel = grid_distances(dsp::mel_spectrum(x, bank), dsp::mel_spectrum(y, bank));
    ScaleTerms terms{i, bank.window, power.l1, power.l2, mel.l1, mel.l2};
    out.value += terms.sum();
    out.per_scale.push_back(terms);
  }
  out.value /= static_cast<double>(scales.size());
  return out;
}

SpectralLoss multiscale_spectral(const AudioBuffer& x, const AudioBuffer& y) {
  const auto scales = dsp::default_loss_scales();
  return multiscale_spectral(x, y, scales);
}

double adv_hinge(const DiscriminatorOutput& fake) {
  if (fake.discriminators.empty()) throw InvalidInput("adv_hinge: no discriminator outputs");
  double acc = 0.0;
  for (const auto& d : fake.discriminators) {
    if (d.scores.empty()) throw InvalidInput("adv_hinge: discriminator with no timesteps");
    double sum = 0.0;
    for (double s : d.scores) sum += std::max(0.0, 1.0 - s);
    acc += sum / static_cast<double>(d.scores.size());
  }
  return acc / static_cast<double>(fake.discriminators.size());
}

double adv_hinge(std::span<const DiscriminatorOutput> fake_batch) {
  if (fake_batch.empty()) throw InvalidInput("adv_hinge: empty batch");
  double acc = 0.0;
  for (const auto& f : fake_batch) acc += adv_hinge(f);
  return acc / static_cast<double>(fake_batch.size());
}

double feature_match(const DiscriminatorOutput& real, const DiscriminatorOutput& fake) {
  if (real.discriminators.empty()) throw InvalidInput("feature_match: no discriminator outputs");
  if (real.discriminators.size() != fake.discriminators.size()) {
    throw InvalidInput("feature_match: discriminator counts differ");
  }
  double acc = 0.0;
  size_t terms = 0;
  for (size_t k = 0; k < real.discriminators.size(); ++k) {
    const auto& rl = real.discriminators[k].layers;
    const auto& fl = fake.discriminators[k].layers;
    if (rl.size() != fl.size()) throw InvalidInput("feature_match: layer counts differ");
    for (size_t l = 0; l < rl.size(); ++l) {
      const auto& a = rl[l];
      const auto& b = fl[l];
      if (a.frames != b.frames || a.width != b.width || a.values.size() != b.values.size() ||
          a.values.size() != a.frames * a.width || a.values.empty()) {
        throw InvalidInput("feature_match: layer shapes differ");
      }
      double sum = 0.0;
      for (size_t i = 0; i < a.values.size(); ++i) sum += std::abs(a.values[i] - b.values[i]);
      acc += sum / static_cast<double>(a.values.size());
      ++terms;
    }
  }
  if (terms == 0) throw InvalidInput("feature_match: no layer features");
  return acc / static_cast<double>(terms);
}

double feature_match(std::span<const DiscriminatorOutput> real_batch,
                     std::span<const DiscriminatorOutput> fake_batch) {
  if (real_batch.empty() || real_batch.size() != fake_batch.size()) {
    throw InvalidInput("feature_match: batches must be non-empty and equally sized");
  }
  double acc = 0.0;
  for (size_t i = 0; i < real_batch.size(); ++i) acc += feature_match(real_batch[i], fake_batch[i]);
  return acc / static_cast<double>(real_batch.size());
}

double commit_loss(const Matrix& input, const quantizer::QuantizerStack& stack, size_t n_active) {
  const auto rvq = quantizer::rvq_encode(stack, input, n_active);
  // Stage i's error against its input residual is the residual it leaves
  // behind, so the stage errors are exactly the running stage MSEs.
  auto reduce = [](double mse) { return kCommitSquared ? mse : std::sqrt(mse); };
  const double whole = reduce(rvq.stage_mse.back());
  double stages = 0.0;
  for (double e : rvq.stage_mse) stages += reduce(e);
  return whole + stages / static_cast<double>(n_active);
}

double commit_loss(const Matrix& input, const quantizer::QuantizerStack& stack) {
  return commit_loss(input, stack, stack.size());
}

LossReport total_loss(const LossComponents& c, const LossWeights& w) {
  const std::pair<const char*, double> named[] = {
      {"l_t", c.time}, {"l_f", c.spectral}, {"l_adv", c.adversarial}, {"l_feat", c.feature}, {"l_cm", c.commit}};
  for (const auto& [name, value] : named) {
    if (!std::isfinite(value)) throw NumericError(std::string("total_loss: term ") + name + " is not finite");
  }
  LossReport report{c, w, 0.0};
  report.total = w.time * c.time + w.spectral * c.spectral + w.adversarial * c.adversarial +
                 w.feature * c.feature + w.commit * c.commit;
  return report;
}

bool discriminator_update_gate(double discriminator_loss, double codec_loss) {
  return discriminator_loss > codec_loss;
}

nlohmann::json to_json(const LossReport& report) {
  nlohmann::json per_scale = nlohmann::json::array();
  for (const auto& s : report.components.per_scale) {
    per_scale.push_back({{"scale", s.scale},
                         {"window", s.window},
                         {"power_l1", s.power_l1},
                         {"power_l2", s.power_l2},
                         {"mel_l1", s.mel_l1},
                         {"mel_l2", s.mel_l2},
                         {"value", s.sum()}});
  }
  return {{"l_t", report.components.time},       {"l_f", report.components.spectral},
          {"l_adv", report.components.adversarial}, {"l_feat", report.components.feature},
          {"l_cm", report.components.commit},    {"total", report.total},
          {"per_scale", per_scale}};
}

}  // namespace funcodec::losses
