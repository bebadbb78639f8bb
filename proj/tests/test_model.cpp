#include <cmath>
#include <numeric>

#include "doctest.h"
#include "funcodec/complexity.hpp"
#include "funcodec/dsp.hpp"
#include "funcodec/error.hpp"
#include "funcodec/freqcodec.hpp"
#include "funcodec/layers.hpp"
#include "funcodec/model_config.hpp"
#include "oracles.hpp"

using namespace funcodec;
using namespace funcodec::model;

namespace {

Tensor3 random_tensor(size_t c, size_t t, size_t f, uint64_t seed) {
  Rng rng(seed);
  Tensor3 x(c, t, f);
  for (float& v : x.data) v = float(rng.normal());
  return x;
}

// Direct grouped convolution with zero padding; weights [out][in/g][kt][kf].
Tensor3 naive_conv(const Tensor3& x, std::span<const float> w, std::span<const float> b, size_t out, Kernel2d k,
                   Kernel2d s, Padding p, size_t groups) {
  const size_t in_g = x.channels / groups, out_g = out / groups;
  const size_t ot = (x.time + p.time_lo + p.time_hi - k.time) / s.time + 1;
  const size_t of = (x.freq + p.freq_lo + p.freq_hi - k.freq) / s.freq + 1;
  Tensor3 y(out, ot, of);
  for (size_t o = 0; o < out; ++o) {
    const size_t g = o / out_g;
    for (size_t t = 0; t < ot; ++t) {
      for (size_t f = 0; f < of; ++f) {
        double acc = b[o];
        for (size_t ci = 0; ci < in_g; ++ci) {
          for (size_t a = 0; a < k.time; ++a) {
            for (size_t c = 0; c < k.freq; ++c) {
              const long ti = long(t * s.time + a) - long(p.time_lo);
              const long fi = long(f * s.freq + c) - long(p.freq_lo);
              if (ti < 0 || fi < 0 || ti >= long(x.time) || fi >= long(x.freq)) continue;
              acc += double(w[((o * in_g + ci) * k.time + a) * k.freq + c]) *
                     x.at(g * in_g + ci, size_t(ti), size_t(fi));
            }
          }
        }
        y.at(o, t, f) = float(acc);
      }
    }
  }
  return y;
}

Shape shape3(size_t c, size_t t, size_t f) { return {c, t, f}; }

const LayerSpec& find(const std::vector<LayerSpec>& layers, const std::string& name) {
  for (const auto& l : layers) {
    if (l.name == name) return l;
  }
  FAIL("missing layer " << name);
  return layers.front();
}

ModelConfig small_config() {
  auto cfg = preset("2x");
  cfg.channels = 4;
  cfg.code_dim = 16;
  cfg.n_quantizers = 2;
  cfg.codebook_size = 16;
  return cfg;
}

}  // namespace

TEST_CASE("conv2d matches direct evaluation") {
  struct Case {
    size_t in, out, groups;
    Kernel2d k, s;
    Padding p;
  };
  const Case cases[] = {
      {3, 4, 1, {7, 7}, {1, 1}, {3, 3, 3, 2}},
      {8, 4, 4, {3, 3}, {1, 1}, {1, 1, 1, 1}},
      {4, 8, 2, {4, 8}, {2, 4}, {1, 1, 2, 2}},
      {6, 6, 6, {1, 1}, {1, 1}, {0, 0, 0, 0}},
  };
  uint64_t seed = 1;
  for (const auto& c : cases) {
    Rng rng(seed++);
    Conv2d conv(c.in, c.out, c.k, c.s, c.p, c.groups, rng);
    for (float& b : conv.bias()) b = float(rng.normal());
    const auto x = random_tensor(c.in, 9, 16, seed);
    const auto y = conv.forward(x);
    const auto want = naive_conv(x, conv.weights(), conv.bias(), c.out, c.k, c.s, c.p, c.groups);
    REQUIRE(y.channels == want.channels);
    REQUIRE(y.time == want.time);
    REQUIRE(y.freq == want.freq);
    CHECK(y.time == conv.out_time(9));
    CHECK(y.freq == conv.out_freq(16));
    for (size_t i = 0; i < y.data.size(); ++i) CHECK(y.data[i] == doctest::Approx(want.data[i]).epsilon(1e-4));
    CHECK(conv.parameter_count() == c.k.time * c.k.freq * (c.in / c.groups) * c.out + c.out);
  }
  Rng rng(0);
  CHECK_THROWS_AS(Conv2d(6, 4, {1, 1}, {1, 1}, {}, 4, rng), ConfigError);
}

TEST_CASE("weight init variance is 1/fan_in") {
  Rng rng(4);
  Conv2d conv(16, 32, {3, 3}, {1, 1}, {}, 1, rng);
  double sum = 0.0, sq = 0.0;
  for (float w : conv.weights()) sum += w, sq += double(w) * w;
  const double n = double(conv.weights().size());
  CHECK(sum / n == doctest::Approx(0.0).epsilon(0.01).scale(1.0));
  CHECK(sq / n == doctest::Approx(1.0 / (16 * 9)).epsilon(0.08));
  for (float b : conv.bias()) CHECK(b == 0.0f);
}

TEST_CASE("transposed conv restores the strided shape and is linear") {
  Rng rng(2);
  ConvTranspose2d up(8, 4, {4, 8}, {2, 4}, 2, rng);
  const auto x = random_tensor(8, 5, 6, 3);
  const auto y = up.forward(x);
  CHECK(y.channels == 4);
  CHECK(y.time == 10);
  CHECK(y.freq == 24);
  auto x2 = x;
  for (float& v : x2.data) v *= 2.0f;
  const auto y2 = up.forward(x2);
  for (size_t i = 0; i < y.data.size(); ++i) CHECK(y2.data[i] == doctest::Approx(2.0 * y.data[i]).epsilon(1e-5));
  CHECK(up.parameter_count() == 8 * (4 / 2) * 4 * 8 + 4);
}

TEST_CASE("lstm and linear shapes") {
  Rng rng(1);
  Lstm lstm(6, 5, rng);
  Matrix x(7, 6, 0.3f);
  const auto h = lstm.forward(x);
  CHECK(h.rows == 7);
  CHECK(h.cols == 5);
  for (float v : h.data) CHECK(std::abs(v) < 1.0f);
  CHECK(lstm.parameter_count() == 4 * 5 * (6 + 5) + 4 * 5);
  Linear lin(6, 3, rng);
  CHECK(lin.forward(x).cols == 3);
  CHECK(lin.parameter_count() == 6 * 3 + 3);
}

TEST_CASE("activations") {
  std::vector<float> v{-1.0f, 0.0f, 2.0f};
  auto e = v;
  activate(e, Activation::Elu);
  CHECK(e[0] == doctest::Approx(std::exp(-1.0) - 1.0));
  CHECK(e[2] == 2.0f);
  auto id = v;
  activate(id, Activation::Identity);
  CHECK(id == v);
}

TEST_CASE("group rules") {
  const GroupSpec one{}, cin{GroupSpec::Rule::Cin, 1}, c8{GroupSpec::Rule::CinOver8, 1},
      c4{GroupSpec::Rule::CinOver4, 1}, fixed{GroupSpec::Rule::Fixed, 4};
  CHECK(one.resolve(64, 32) == 1);
  CHECK(cin.resolve(64, 128) == 64);
  CHECK(cin.resolve(64, 32) == 32);  // reduced to a common divisor
  CHECK(c8.resolve(64, 32) == 8);
  CHECK(c4.resolve(64, 32) == 16);
  CHECK(c8.resolve(4, 8) == 1);
  CHECK(fixed.resolve(8, 12) == 4);
  CHECK_THROWS_AS(fixed.resolve(6, 12), ConfigError);
  for (const auto& g : {one, cin, c8, c4, fixed}) CHECK(GroupSpec::parse(g.to_string()) == g);
  CHECK_THROWS_AS(GroupSpec::parse("half"), ConfigError);
  CHECK_THROWS_AS(GroupSpec::parse("0"), ConfigError);
}

TEST_CASE("presets and config validation") {
  const auto names = preset_names();
  for (const char* n : {"base", "2x", "4x", "m2", "m3", "m4", "m5", "m6", "m7"}) {
    CHECK(std::find(names.begin(), names.end(), n) != names.end());
    CHECK_NOTHROW(preset(n).validate());
  }
  CHECK(preset("base").waveform_stride() == 320);
  CHECK(preset("2x").waveform_stride() == 640);
  CHECK(preset("4x").waveform_stride() == 1280);
  CHECK(preset("m2").mode == dsp::DomainMode::MagAngle);
  CHECK(preset("m3").mode == dsp::DomainMode::MagPhase);
  CHECK(preset("m4").groups_dec.rule == GroupSpec::Rule::Cin);
  CHECK(preset("m6").groups_enc.rule == GroupSpec::Rule::Cin);
  CHECK_THROWS_AS(preset("m9"), ConfigError);

  auto cfg = preset("2x");
  CHECK(cfg.segment_samples() == 51200);
  CHECK(cfg.segment_frames() == 320);
  CHECK(cfg.latent_frames_per_segment() == 80);
  cfg.mode = dsp::DomainMode::Time;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = preset("2x");
  cfg.strides = {1, 1, 3, 2};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = preset("2x");
  cfg.codebook_size = 1000;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = preset("2x");
  cfg.groups_dec = {GroupSpec::Rule::Fixed, 3};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("config json round trip") {
  auto cfg = preset("m7");
  cfg.seed = 42;
  cfg.code_dim = 64;
  CHECK(config_from_json(to_json(cfg)) == cfg);
  const auto j = nlohmann::json{{"preset", "4x"}, {"n_quantizers", 4}};
  const auto c = config_from_json(j);
  CHECK(c.strides == preset("4x").strides);
  CHECK(c.n_quantizers == 4);
}

TEST_CASE("encoder shape trace for C=32, B=4") {
  auto cfg = preset("2x");
  REQUIRE(cfg.channels == 32);
  REQUIRE(cfg.blocks() == 4);
  const size_t T = 320;
  const auto enc = build_encoder(cfg, T);
  CHECK(enc.front().input == shape3(3, T, 257));
  CHECK(find(enc, "PreConv2D").output == shape3(32, T, 256));
  size_t c = 32, t = T, f = 256;
  for (size_t b = 0; b < 4; ++b) {
    const std::string p = "EncBlock" + std::to_string(b + 1) + ".";
    const size_t s = cfg.strides[b];
    CHECK(find(enc, p + "Conv2D_1").output == shape3(c / 2, t, f));
    CHECK(find(enc, p + "Conv2D_2").output == shape3(c, t, f));
    const auto& ds = find(enc, p + "Conv2D_ds");
    CHECK(ds.kernel.time == 2 * s);
    CHECK(ds.kernel.freq == 8);
    CHECK(ds.stride.time == s);
    CHECK(ds.stride.freq == 4);
    CHECK(ds.output == shape3(2 * c, t / s, f / 4));
    c *= 2, t /= s, f /= 4;
  }
  CHECK(c == 16 * 32);
  CHECK(f == 1);
  CHECK(find(enc, "Reshape").output == Shape{80, 512});
  CHECK(find(enc, "LSTM").output == Shape{80, 512});
  CHECK(enc.back().output == Shape{80, cfg.code_dim});

  const auto dec = build_decoder(cfg, 80);
  CHECK(dec.front().input == Shape{80, cfg.code_dim});
  CHECK(dec.back().output == shape3(3, T, 257));
  // every layer feeds the next
  for (const auto* layers : {&enc, &dec}) {
    for (size_t i = 1; i < layers->size(); ++i) CHECK((*layers)[i].input == (*layers)[i - 1].output);
  }
}

TEST_CASE("encoder and decoder forward shapes follow the trace") {
  const auto cfg = small_config();
  const Encoder enc(cfg);
  const Decoder dec(cfg);
  dsp::FeatureMap fm{cfg.mode, 3, 32, 257, 512, 160, {}};
  Rng rng(3);
  fm.values.resize(3 * 32 * 257);
  for (double& v : fm.values) v = rng.normal();
  const auto z = enc.forward(fm);
  CHECK(z.rows == 32 / cfg.time_stride());
  CHECK(z.cols == cfg.code_dim);
  for (float v : z.data) CHECK(std::isfinite(v));
  const auto conv = enc.forward_conv(fm);
  const auto trace = build_encoder(cfg, 32);
  const auto& last_conv = find(trace, "EncBlock4.Conv2D_ds");
  CHECK(shape3(conv.channels, conv.time, conv.freq) == last_conv.output);
  const auto back = dec.forward(z);
  CHECK(back.channels == 3);
  CHECK(back.frames == 32);
  CHECK(back.bins == 257);
  CHECK(back.mode == cfg.mode);

  // seeded and deterministic
  CHECK(Encoder(cfg).forward(fm) == z);
  auto other = cfg;
  other.seed = 1;
  CHECK_FALSE(Encoder(other).forward(fm) == z);

  fm.frames = 30;
  fm.values.resize(3 * 30 * 257);
  CHECK_THROWS_AS(enc.forward(fm), InvalidInput);
  dsp::FeatureMap wrong{dsp::DomainMode::MagAngle, 2, 32, 257, 512, 160, std::vector<double>(2 * 32 * 257)};
  CHECK_THROWS_AS(enc.forward(wrong), InvalidInput);
}

TEST_CASE("complexity report sums and hand counts") {
  const auto r = count_complexity(preset("m3"));
  size_t params = 0, enc = 0;
  double macs = 0.0;
  for (const auto& l : r.layers) {
    params += l.parameters;
    macs += l.macs_per_second;
    if (l.part == "encoder") enc += l.parameters;
  }
  CHECK(params == r.parameters);
  CHECK(enc == r.encoder_parameters);
  CHECK(r.encoder_parameters + r.decoder_parameters == r.parameters);
  CHECK(macs == doctest::Approx(r.macs_per_second));
  // PreConv2D: 7*7*3*32 weights + 32 biases, one MAC per weight per output element.
  const auto& pre = r.layers.front();
  CHECK(pre.name == "PreConv2D");
  CHECK(pre.parameters == 7 * 7 * 3 * 32 + 32);
  CHECK(pre.macs_per_second == doctest::Approx(7.0 * 7 * 3 * 32 * 256 * 100));
  // Encoder LSTM at 25 frames per second with H = 512.
  for (const auto& l : r.layers) {
    if (l.part == "encoder" && l.kind == LayerKind::Recurrent) {
      CHECK(l.parameters == 4 * 512 * (512 + 512) + 4 * 512);
      CHECK(l.macs_per_second == doctest::Approx(4.0 * 512 * 1024 * 25));
    }
  }
  CHECK(to_json(r).dump() == to_json(count_complexity(preset("m3"))).dump());
  CHECK(to_json(r, true)["flops_per_second"].get<double>() == doctest::Approx(2.0 * r.macs_per_second));
}

TEST_CASE("grouped presets are ordered by parameter count") {
  auto params = [](const char* n) { return count_complexity(preset(n)).parameters; };
  CHECK(params("m6") < params("m7"));
  CHECK(params("m7") < params("m4"));
  CHECK(params("m4") < params("m5"));
  CHECK(params("m5") < params("m3"));
  CHECK(params("m2") <= params("m3"));
}
