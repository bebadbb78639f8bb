#include <cstdlib>
#include <fstream>
#include <sstream>

#include "codec_fixtures.hpp"
#include "doctest.h"
#include "funcodec/batch.hpp"
#include "funcodec/bitstream.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace funcodec;

namespace {

struct Run {
  int code = -1;
  std::string out;
  nlohmann::json json() const { return nlohmann::json::parse(out); }
};

Run run(const std::string& args, const fs::path& dir) {
  const auto out = dir / "stdout.json";
  const std::string cmd = "FUNCODEC_LOG=quiet \"" FUNCODEC_CLI "\" " + args + " > \"" + out.string() + "\" 2> \"" +
                          (dir / "stderr.txt").string() + "\"";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(out);
  std::stringstream ss;
  ss << in.rdbuf();
  r.out = ss.str();
  return r;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

struct Workspace {
  fs::path dir = fixture::scratch_dir("cli");
  fs::path cfg = dir / "small.json";
  fs::path wavs = dir / "wavs";

  Workspace() {
    std::ofstream(cfg) << to_json(fixture::small_config()).dump();
    fs::create_directories(wavs);
    for (size_t i = 0; i < 4; ++i) {
      write_wav(wavs / ("utt" + std::to_string(i) + ".wav"), fixture::speechlike(9000 + 4000 * i, i));
    }
  }
  ~Workspace() { fs::remove_all(dir); }

  std::string model() const { return " --config " + q(cfg); }
};

}  // namespace

TEST_CASE("fit, encode, inspect, decode") {
  Workspace ws;
  const auto cb = ws.dir / "cb.fcq";
  auto fit = run("fit-codebooks " + q(ws.wavs) + ws.model() + " --out " + q(cb) + " --steps 2 --batch-files 2 --seed 3",
                 ws.dir);
  REQUIRE(fit.code == 0);
  const auto fj = fit.json();
  CHECK(fj["utilization"].size() == 4);
  CHECK(fj["batches"] == 2);
  const auto rm = fj["residual_mse"].get<std::vector<double>>();
  for (size_t i = 1; i < rm.size(); ++i) CHECK(rm[i] <= rm[i - 1]);
  const auto blob = read_bytes(cb);
  REQUIRE(run("fit-codebooks " + q(ws.wavs) + ws.model() + " --out " + q(ws.dir / "cb2.fcq") +
                  " --steps 2 --batch-files 2 --seed 3",
              ws.dir)
              .code == 0);
  CHECK(read_bytes(ws.dir / "cb2.fcq") == blob);

  const std::string common = ws.model() + " --codebooks " + q(cb);
  auto e1 = run("encode " + q(ws.wavs) + common + " --out " + q(ws.dir / "e1") + " --nq 3", ws.dir);
  auto e4 = run("encode " + q(ws.wavs) + common + " --out " + q(ws.dir / "e4") + " --nq 3 --workers 4", ws.dir);
  REQUIRE(e1.code == 0);
  REQUIRE(e4.code == 0);
  const auto ej = e1.json();
  CHECK(ej["tkr"].get<double>() == 75.0);
  CHECK(ej["bps"].get<double>() == 375.0);
  CHECK(ej["files"].size() == 4);
  for (size_t i = 0; i < 4; ++i) {
    const auto name = "utt" + std::to_string(i) + ".fcs";
    CHECK(read_bytes(ws.dir / "e1" / name) == read_bytes(ws.dir / "e4" / name));
  }

  auto ins = run("inspect " + q(ws.dir / "e1" / "utt2.fcs"), ws.dir);
  REQUIRE(ins.code == 0);
  const auto h = ins.json()["files"][0];
  CHECK(h["n_q"] == 3);
  CHECK(h["codebook_size"] == 32);
  CHECK(h["stride"] == 640);
  CHECK(h["num_samples"] == 17000);
  CHECK(h["mode"] == "mag_phase");
  CHECK(h["tkr"].get<double>() == bitstream::compute_tkr(16000, 640, 3));
  REQUIRE(h["histograms"].size() == 3);
  for (const auto& row : h["histograms"]) {
    size_t sum = 0;
    for (const auto& c : row) sum += c.get<size_t>();
    CHECK(sum == h["frames"].get<size_t>());
  }

  auto d = run("decode " + q(ws.dir / "e1") + common + " --out " + q(ws.dir / "dec") + " --nq 2", ws.dir);
  REQUIRE(d.code == 0);
  for (size_t i = 0; i < 4; ++i) {
    CHECK(read_wav(ws.dir / "dec" / ("utt" + std::to_string(i) + ".wav")).size() == 9000 + 4000 * i);
  }
  CHECK(run("decode " + q(ws.dir / "e1") + common + " --out " + q(ws.dir / "dec") + " --nq 4", ws.dir).code == 1);
}

TEST_CASE("exit codes") {
  Workspace ws;
  const auto cb = ws.dir / "cb.fcq";
  REQUIRE(run("fit-codebooks " + q(ws.wavs) + ws.model() + " --out " + q(cb), ws.dir).code == 0);
  const std::string common = ws.model() + " --codebooks " + q(cb);
  CHECK(run("encode " + q(ws.dir / "nope") + common + " --out " + q(ws.dir / "o"), ws.dir).code == 2);
  CHECK(run("encode " + q(ws.wavs) + ws.model() + " --codebooks " + q(ws.dir / "none.fcq") + " --out " +
                q(ws.dir / "o"),
            ws.dir)
            .code == 2);
  CHECK(run("encode " + q(ws.wavs) + " --preset 2x --codebooks " + q(cb) + " --out " + q(ws.dir / "o"), ws.dir)
            .code == 2);
  CHECK(run("encode " + q(ws.wavs) + common + " --out " + q(ws.dir / "o") + " --nq 9", ws.dir).code == 2);
  CHECK(run("analyze --preset m9", ws.dir).code == 2);
  CHECK(run("frobnicate", ws.dir).code == 2);
  CHECK_FALSE(fs::exists(ws.dir / "o"));

  write_wav(ws.wavs / "narrowband.wav", AudioBuffer{std::vector<double>(8000, 0.1), 8000});
  auto partial = run("encode " + q(ws.wavs) + common + " --out " + q(ws.dir / "o"), ws.dir);
  CHECK(partial.code == 1);
  const auto j = partial.json();
  CHECK(j["failures"] == 1);
  size_t errors = 0;
  for (const auto& f : j["files"]) errors += f.contains("error");
  CHECK(errors == 1);

  std::ofstream(ws.dir / "junk.fcs") << "garbage";
  CHECK(run("inspect " + q(ws.dir / "junk.fcs"), ws.dir).code == 1);
}

TEST_CASE("analyze") {
  Workspace ws;
  const auto m6 = run("analyze --preset m6", ws.dir);
  const auto m4 = run("analyze --preset m4 --flops-x2", ws.dir);
  REQUIRE(m6.code == 0);
  REQUIRE(m4.code == 0);
  CHECK(m6.json()["parameters"].get<size_t>() < m4.json()["parameters"].get<size_t>());
  CHECK(m4.json().contains("flops_per_second"));
  CHECK(run("analyze --preset m6", ws.dir).out == m6.out);
}

TEST_CASE("eval-losses") {
  Workspace ws;
  const auto ref = fixture::speechlike(4096, 1);
  auto half = ref;
  for (double& v : half.samples) v *= 0.5;
  write_wav(ws.dir / "ref.wav", ref);
  write_wav(ws.dir / "half.wav", half);
  const auto same = run("eval-losses " + q(ws.dir / "ref.wav") + " " + q(ws.dir / "ref.wav"), ws.dir);
  REQUIRE(same.code == 0);
  for (const char* k : {"l_t", "l_f", "l_adv", "l_feat", "l_cm", "total"}) CHECK(same.json()[k] == 0.0);

  const auto a = run("eval-losses " + q(ws.dir / "ref.wav") + " " + q(ws.dir / "half.wav"), ws.dir);
  const auto b = run("eval-losses " + q(ws.dir / "half.wav") + " " + q(ws.dir / "ref.wav"), ws.dir);
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
  // The stored 16-bit samples are what the loss sees.
  const auto r = read_wav(ws.dir / "ref.wav");
  const auto hh = read_wav(ws.dir / "half.wav");
  double lt = 0.0;
  for (size_t i = 0; i < r.size(); ++i) lt += std::abs(r.samples[i] - hh.samples[i]);
  CHECK(a.json()["l_t"].get<double>() == doctest::Approx(lt / double(r.size())));
  CHECK(a.json()["per_scale"].size() == 7);

  write_wav(ws.dir / "short.wav", fixture::speechlike(3000, 1));
  CHECK(run("eval-losses " + q(ws.dir / "ref.wav") + " " + q(ws.dir / "short.wav"), ws.dir).code == 1);
  CHECK(run("eval-losses " + q(ws.dir / "ref.wav"), ws.dir).code == 2);
}
