#include <cmath>
#include <fstream>

#include "codec_fixtures.hpp"
#include "doctest.h"
#include "funcodec/batch.hpp"
#include "funcodec/error.hpp"

using namespace funcodec;

TEST_CASE("segments are zero padded to the clip length") {
  AudioBuffer x{std::vector<double>(70000, 1.0), 16000};
  const auto segs = split_segments(x, 51200);
  REQUIRE(segs.size() == 2);
  CHECK(segs[0].size() == 51200);
  CHECK(segs[1].size() == 51200);
  CHECK(segs[1].samples[70000 - 51200 - 1] == 1.0);
  CHECK(segs[1].samples[70000 - 51200] == 0.0);
  CHECK(split_segments(AudioBuffer{std::vector<double>(51200, 0.0), 16000}, 51200).size() == 1);
  CHECK_THROWS_AS(split_segments(AudioBuffer{}, 51200), InvalidInput);
}

TEST_CASE("segment features drop the trailing STFT frame") {
  const auto cfg = fixture::small_config();
  const auto f = segment_features(cfg, fixture::speechlike(51200, 1));
  CHECK(f.frames == 320);
  CHECK(f.bins == 257);
  CHECK(f.channels == 3);
}

TEST_CASE("full-size stride-640 clip gives 80 frames at 400 tokens per second") {
  const auto cfg = model::preset("2x");
  const Codec codec(cfg, fixture::random_stack(cfg, 1));
  const auto enc = codec.encode(fixture::speechlike(51200, 2), 16);
  CHECK(enc.header.frames == 80);
  CHECK(enc.header.n_q == 16);
  CHECK(bitstream::compute_tkr(16000, enc.header.stride, enc.header.n_q) == 400.0);
  CHECK(enc.bytes.size() == bitstream::kHeaderBytes + 80 * 16 * 10 / 8);
}

TEST_CASE("codec round trip on a small model") {
  const auto cfg = fixture::small_config();
  const Codec codec(cfg, fixture::random_stack(cfg, 2));
  for (size_t n : {size_t{1000}, size_t{51200}, size_t{60001}}) {
    const auto x = fixture::speechlike(n, n);
    const auto enc = codec.encode(x, 4);
    CHECK(enc.header.num_samples == n);
    CHECK(enc.header.frames == ((n + 51199) / 51200) * 80);
    const auto y = codec.decode(enc.bytes);
    REQUIRE(y.size() == n);
    CHECK(y.sample_rate == 16000);
    for (double v : y.samples) REQUIRE(std::isfinite(v));
    // Prefix decoding uses only the first rows.
    const auto y2 = codec.decode(enc.bytes, 2);
    CHECK(y2.size() == n);
    CHECK(codec.encode(x, 4).bytes == enc.bytes);
  }
}

TEST_CASE("silence encodes with unit gain") {
  const auto cfg = fixture::small_config();
  const Codec codec(cfg, fixture::random_stack(cfg, 3));
  const auto enc = codec.encode(AudioBuffer{std::vector<double>(8000, 0.0), 16000}, 2);
  CHECK(enc.header.gain == 1.0f);
  const auto y = codec.decode(enc.bytes);
  CHECK(y.size() == 8000);
  for (double v : y.samples) CHECK(std::isfinite(v));
}

TEST_CASE("gain is undone on decode") {
  const auto cfg = fixture::small_config();
  const Codec codec(cfg, fixture::random_stack(cfg, 4));
  auto x = fixture::speechlike(20000, 5);
  auto loud = x;
  for (double& v : loud.samples) v *= 3.0;
  const auto a = codec.encode(x, 4);
  const auto b = codec.encode(loud, 4);
  CHECK(b.header.gain == doctest::Approx(3.0 * a.header.gain).epsilon(1e-6));
  CHECK(a.tokens == b.tokens);
  const auto ya = codec.decode(a.bytes);
  const auto yb = codec.decode(b.bytes);
  for (size_t i = 0; i < ya.size(); i += 97) CHECK(yb.samples[i] == doctest::Approx(3.0 * ya.samples[i]).epsilon(1e-5));
}

TEST_CASE("codec input and header validation") {
  const auto cfg = fixture::small_config();
  const Codec codec(cfg, fixture::random_stack(cfg, 5));
  CHECK_THROWS_AS(codec.encode(AudioBuffer{std::vector<double>(1000, 0.1), 8000}, 1), InvalidInput);
  CHECK_THROWS_AS(codec.encode(AudioBuffer{}, 1), InvalidInput);
  CHECK_THROWS_AS(codec.encode(fixture::speechlike(1000, 1), 0), InvalidInput);
  CHECK_THROWS_AS(codec.encode(fixture::speechlike(1000, 1), 5), InvalidInput);

  const auto enc = codec.encode(fixture::speechlike(1000, 1), 2);
  CHECK_THROWS_AS(codec.decode(enc.bytes, 3), MismatchError);

  auto other = cfg;
  other.strides = {1, 1, 1, 2};
  const Codec base(other, fixture::random_stack(other, 5));
  CHECK_THROWS_AS(base.decode(enc.bytes), MismatchError);
  auto angle = cfg;
  angle.mode = dsp::DomainMode::MagAngle;
  CHECK_THROWS_AS(Codec(angle, fixture::random_stack(angle, 5)).decode(enc.bytes), MismatchError);
  auto bigger = cfg;
  bigger.codebook_size = 64;
  CHECK_THROWS_AS(Codec(bigger, fixture::random_stack(bigger, 5)).decode(enc.bytes), MismatchError);

  auto h = enc.header;
  h.frames = 160;
  const auto wrong_frames = bitstream::pack(h, quantizer::TokenMatrix(2, 160));
  CHECK_THROWS_AS(codec.decode(wrong_frames), MismatchError);
  h = enc.header;
  h.n_q = 5;
  CHECK_THROWS_AS(codec.decode(bitstream::pack(h, quantizer::TokenMatrix(5, 80))), MismatchError);

  auto wide = cfg;
  wide.code_dim = 8;
  CHECK_THROWS_AS(Codec(wide, fixture::random_stack(cfg, 1)), MismatchError);
  CHECK_THROWS_AS(Codec(cfg, quantizer::QuantizerStack({quantizer::Codebook(32, 16)})), StateError);
}

TEST_CASE("tampered payloads decode or fail cleanly") {
  const auto cfg = fixture::small_config();
  const Codec codec(cfg, fixture::random_stack(cfg, 6));
  const auto enc = codec.encode(fixture::speechlike(4000, 2), 4);
  Rng rng(1);
  for (int i = 0; i < 40; ++i) {
    auto b = enc.bytes;
    b[rng.uniform_int(b.size())] ^= uint8_t(1 + rng.uniform_int(255));
    try {
      const auto y = codec.decode(b);
      CHECK(y.size() > 0);
    } catch (const Error&) {
    }
  }
}

TEST_CASE("codebook fitting from audio") {
  const auto cfg = fixture::small_config();
  std::vector<std::vector<AudioBuffer>> corpus(2);
  for (size_t i = 0; i < 4; ++i) corpus[i / 2].push_back(fixture::speechlike(30000, i));
  const auto a = fit_codebooks(cfg, corpus, {.steps = 3, .seed = 1});
  const auto b = fit_codebooks(cfg, corpus, {.steps = 3, .seed = 1, .workers = 3});
  CHECK(quantizer::serialize_stack(a.stack) == quantizer::serialize_stack(b.stack));
  CHECK(a.stack.size() == cfg.n_quantizers);
  CHECK(a.stack.dim() == cfg.code_dim);
  for (size_t i = 1; i < a.residual_mse.size(); ++i) CHECK(a.residual_mse[i] <= a.residual_mse[i - 1]);
  CHECK_NOTHROW(Codec(cfg, a.stack));
  CHECK_THROWS_AS(fit_codebooks(cfg, std::span<const std::vector<AudioBuffer>>{}, {}), InvalidInput);
}

TEST_CASE("parallel_for covers every index and propagates errors") {
  std::vector<int> hits(100, 0);
  parallel_for(100, 4, [&](size_t i) { hits[i]++; });
  for (int h : hits) CHECK(h == 1);
  CHECK_THROWS_AS(parallel_for(10, 3, [](size_t i) { if (i == 7) throw InvalidInput("boom"); }), InvalidInput);
}

TEST_CASE("input collection") {
  const auto dir = fixture::scratch_dir("collect");
  std::filesystem::create_directories(dir / "sub");
  for (const char* n : {"b.wav", "a.wav", "c.txt", "sub/d.wav"}) std::ofstream(dir / n) << "x";
  const auto files = collect_inputs({dir}, ".wav");
  REQUIRE(files.size() == 2);
  CHECK(files[0].filename() == "a.wav");
  CHECK(files[1].filename() == "b.wav");
  CHECK(collect_inputs({dir / "a.wav", dir}, ".wav").size() == 2);
  CHECK(collect_inputs({dir, dir / "sub"}, ".wav").size() == 3);
  std::ofstream(dir / "sub" / "a.wav") << "x";
  CHECK_THROWS_AS(collect_inputs({dir, dir / "sub"}, ".wav"), ConfigError);
  CHECK_THROWS_AS(collect_inputs({dir / "missing.wav"}, ".wav"), ConfigError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("batch encode and decode are worker-count independent") {
  const auto cfg = fixture::small_config();
  const Codec codec(cfg, fixture::random_stack(cfg, 7));
  const auto dir = fixture::scratch_dir("batch");
  std::vector<std::filesystem::path> inputs;
  for (size_t i = 0; i < 5; ++i) {
    inputs.push_back(dir / ("clip" + std::to_string(i) + ".wav"));
    write_wav(inputs.back(), fixture::speechlike(3000 + 2500 * i, i));
  }
  write_wav(dir / "wrong_rate.wav", AudioBuffer{std::vector<double>(4000, 0.1), 8000});
  inputs.push_back(dir / "wrong_rate.wav");

  const auto r1 = encode_files(codec, inputs, dir / "one", 3, 1);
  const auto r4 = encode_files(codec, inputs, dir / "four", 3, 4);
  CHECK(r1.failures() == 1);
  CHECK(r1.exit_code() == 1);
  CHECK(r1.files.back().error.has_value());
  CHECK(r1.to_json()["files"].size() == inputs.size());
  for (size_t i = 0; i < 5; ++i) {
    CHECK(read_bytes(r1.files[i].output) == read_bytes(r4.files[i].output));
  }
  std::filesystem::remove(dir / "one" / "wrong_rate.fcs");
  const auto d1 = decode_files(codec, collect_inputs({dir / "one"}, ".fcs"), dir / "dec1", std::nullopt, 1);
  const auto d4 = decode_files(codec, collect_inputs({dir / "one"}, ".fcs"), dir / "dec4", std::nullopt, 4);
  CHECK(d1.exit_code() == 0);
  for (size_t i = 0; i < 5; ++i) {
    CHECK(read_bytes(d1.files[i].output) == read_bytes(d4.files[i].output));
    CHECK(read_wav(d1.files[i].output).size() == 3000 + 2500 * i);
  }
  std::filesystem::remove_all(dir);
}
