#include <cmath>

#include "doctest.h"
#include "funcodec/discriminator.hpp"
#include "funcodec/dsp.hpp"
#include "funcodec/error.hpp"
#include "funcodec/losses.hpp"
#include "oracles.hpp"

using namespace funcodec;
using namespace funcodec::losses;

namespace {

DiscriminatorOutput constant_scores(double value, std::vector<size_t> lengths) {
  DiscriminatorOutput out;
  for (size_t n : lengths) {
    ScaleOutput s;
    s.scores.assign(n, value);
    out.discriminators.push_back(std::move(s));
  }
  return out;
}

LayerFeatures layer(size_t frames, size_t width, double fill) {
  return {frames, width, std::vector<double>(frames * width, fill)};
}

// mean |a - b| and sqrt(mean (a - b)^2) over two log grids.
std::pair<double, double> distances(const dsp::RealGrid& a, const dsp::RealGrid& b) {
  double l1 = 0.0, l2 = 0.0;
  for (size_t i = 0; i < a.values.size(); ++i) {
    l1 += std::abs(a.values[i] - b.values[i]);
    l2 += std::pow(a.values[i] - b.values[i], 2);
  }
  const double n = double(a.values.size());
  return {l1 / n, std::sqrt(l2 / n)};
}

}  // namespace

TEST_CASE("time l1") {
  AudioBuffer a{{1.0, -2.0, 0.5}, 16000};
  AudioBuffer b{{0.0, 0.0, 0.5}, 16000};
  CHECK(time_l1(a, b) == doctest::Approx(1.0));
  CHECK(time_l1(a, a) == 0.0);
  CHECK_THROWS_AS(time_l1(a, AudioBuffer{{1.0}, 16000}), InvalidInput);
}

TEST_CASE("spectral loss is zero on identical input and symmetric") {
  const auto x = oracle::noise(4096, 0.1, 1);
  const auto same = multiscale_spectral(x, x);
  CHECK(same.value == 0.0);
  CHECK(same.per_scale.size() == 7);
  for (const auto& s : same.per_scale) CHECK(s.sum() == 0.0);

  const auto y = oracle::noise(4096, 0.1, 2);
  const auto xy = multiscale_spectral(x, y);
  const auto yx = multiscale_spectral(y, x);
  CHECK(xy.value == yx.value);
  CHECK(xy.value > 0.0);
  CHECK_THROWS_AS(multiscale_spectral(oracle::noise(2000, 0.1, 1), oracle::noise(2000, 0.1, 2)), InvalidInput);
}

TEST_CASE("spectral loss terms match direct evaluation") {
  const auto x = oracle::noise(2048, 0.2, 3);
  const auto y = oracle::noise(2048, 0.05, 4);
  const std::vector<int> scales{6, 9};
  const auto loss = multiscale_spectral(x, y, scales);
  double total = 0.0;
  for (size_t i = 0; i < scales.size(); ++i) {
    const auto bank = dsp::make_spectral_bank(scales[i]);
    const auto [p1, p2] = distances(dsp::log_power_spectrum(x, bank), dsp::log_power_spectrum(y, bank));
    const auto [m1, m2] = distances(dsp::mel_spectrum(x, bank), dsp::mel_spectrum(y, bank));
    const auto& t = loss.per_scale[i];
    CHECK(t.window == bank.window);
    CHECK(t.power_l1 == doctest::Approx(p1));
    CHECK(t.power_l2 == doctest::Approx(p2));
    CHECK(t.mel_l1 == doctest::Approx(m1));
    CHECK(t.mel_l2 == doctest::Approx(m2));
    total += p1 + p2 + m1 + m2;
  }
  CHECK(loss.value == doctest::Approx(total / 2.0));
}

TEST_CASE("hinge examples") {
  CHECK(adv_hinge(constant_scores(1.0, {5, 3})) == 0.0);
  CHECK(adv_hinge(constant_scores(0.0, {5, 3})) == 1.0);
  CHECK(adv_hinge(constant_scores(2.0, {4})) == 0.0);
  CHECK(adv_hinge(constant_scores(-1.0, {4})) == 2.0);
  // mean over time per discriminator, then over discriminators
  DiscriminatorOutput mixed;
  mixed.discriminators.push_back({{0.0, 1.0}, {}});
  mixed.discriminators.push_back({{0.5, 0.5, 0.5, 0.5}, {}});
  CHECK(adv_hinge(mixed) == doctest::Approx((0.5 + 0.5) / 2.0));
  const std::vector<DiscriminatorOutput> batch{constant_scores(1.0, {2}), constant_scores(0.0, {2})};
  CHECK(adv_hinge(batch) == doctest::Approx(0.5));
  CHECK_THROWS_AS(adv_hinge(DiscriminatorOutput{}), InvalidInput);
}

TEST_CASE("feature matching") {
  DiscriminatorOutput real, fake;
  real.discriminators.resize(2);
  fake.discriminators.resize(2);
  real.discriminators[0].layers = {layer(2, 3, 1.0), layer(4, 1, 0.0)};
  fake.discriminators[0].layers = {layer(2, 3, 0.0), layer(4, 1, 2.0)};
  real.discriminators[1].layers = {layer(1, 1, 5.0)};
  fake.discriminators[1].layers = {layer(1, 1, 5.0)};
  CHECK(feature_match(real, real) == 0.0);
  CHECK(feature_match(real, fake) == doctest::Approx((1.0 + 2.0 + 0.0) / 3.0));
  fake.discriminators[1].layers[0].frames = 2;
  CHECK_THROWS_AS(feature_match(real, fake), InvalidInput);
}

TEST_CASE("discriminator features are zero-distance on identical audio") {
  const model::MultiScaleStftDiscriminator d;
  const auto x = oracle::noise(4000, 0.1, 5);
  const auto a = d.forward(x);
  const auto b = d.forward(x);
  REQUIRE(a.discriminators.size() == 3);
  for (const auto& s : a.discriminators) {
    CHECK(s.layers.size() == d.layer_count());
    CHECK_FALSE(s.scores.empty());
    for (const auto& l : s.layers) CHECK(l.values.size() == l.frames * l.width);
  }
  CHECK(feature_match(a, b) == 0.0);
  CHECK(feature_match(a, d.forward(oracle::noise(4000, 0.1, 6))) > 0.0);
}

TEST_CASE("commit loss") {
  Rng rng(3);
  Matrix data(500, 4);
  for (float& v : data.data) v = float(rng.normal());
  quantizer::FitOptions o;
  o.n_quantizers = 3;
  o.codebook_size = 16;
  const std::vector<Matrix> batches{data};
  const auto stack = quantizer::fit_stack(batches, o, rng).stack;
  const auto rvq = quantizer::rvq_encode(stack, data, 3);
  // Direct: whole-stack error plus the mean of stage errors against each stage's input.
  Matrix residual = data;
  double stage_sum = 0.0;
  for (size_t s = 0; s < 3; ++s) {
    double err = 0.0;
    for (size_t t = 0; t < data.rows; ++t) {
      const auto code = stack.stage(s).code(size_t(rvq.tokens.at(s, t)));
      for (size_t j = 0; j < 4; ++j) {
        residual(t, j) -= code[j];
        err += double(residual(t, j)) * residual(t, j);
      }
    }
    stage_sum += err / double(data.data.size());
  }
  double whole = 0.0;
  for (size_t i = 0; i < data.data.size(); ++i) whole += std::pow(double(data.data[i]) - rvq.quantized.data[i], 2);
  whole /= double(data.data.size());
  CHECK(commit_loss(data, stack) == doctest::Approx(whole + stage_sum / 3.0).epsilon(1e-5));

  // Input equal to a code vector of every stage sum costs nothing.
  Matrix exact(1, 4);
  for (size_t j = 0; j < 4; ++j) {
    exact(0, j) = stack.stage(0).code(0)[j] + stack.stage(1).code(0)[j] + stack.stage(2).code(0)[j];
  }
  CHECK(commit_loss(exact, stack) <= commit_loss(data, stack));
}

TEST_CASE("weighted total") {
  const LossWeights w;
  CHECK(w.adversarial == doctest::Approx(1.0 / 9.0));
  CHECK(w.feature == doctest::Approx(100.0 / 9.0));
  LossComponents ones{1.0, 1.0, 1.0, 1.0, 1.0, {}};
  const double weight_sum = w.time + w.spectral + w.adversarial + w.feature + w.commit;
  CHECK(total_loss(ones).total == doctest::Approx(weight_sum));
  CHECK(total_loss(ones).total == doctest::Approx(128.0 / 9.0));
  LossComponents c{0.5, 2.0, 0.9, 0.09, 3.0, {}};
  CHECK(total_loss(c).total == doctest::Approx(0.5 + 2.0 + 0.1 + 1.0 + 3.0));
  CHECK(total_loss(LossComponents{}).total == 0.0);
  c.feature = std::nan("");
  try {
    total_loss(c);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("l_feat") != std::string::npos);
  }
  c.feature = 0.0;
  c.spectral = INFINITY;
  CHECK_THROWS_WITH_AS(total_loss(c), doctest::Contains("l_f"), NumericError);
}

TEST_CASE("discriminator gate is strict") {
  CHECK_FALSE(discriminator_update_gate(1.0, 1.0));
  CHECK(discriminator_update_gate(1.0 + 1e-12, 1.0));
  CHECK_FALSE(discriminator_update_gate(0.5, 1.0));
}

TEST_CASE("loss report json") {
  LossComponents c{0.25, 1.5, 0.0, 0.0, 0.0, {}};
  const auto j = to_json(total_loss(c));
  for (const char* key : {"l_t", "l_f", "l_adv", "l_feat", "l_cm", "total", "per_scale"}) CHECK(j.contains(key));
  CHECK(j["total"].get<double>() == doctest::Approx(1.75));
}
