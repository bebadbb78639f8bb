#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "funcodec/batch.hpp"
#include "funcodec/bitstream.hpp"
#include "funcodec/codec.hpp"
#include "funcodec/complexity.hpp"
#include "funcodec/error.hpp"
#include "funcodec/losses.hpp"
#include "funcodec/model_config.hpp"
#include "funcodec/wav.hpp"

namespace fs = std::filesystem;
using namespace funcodec;

namespace {

constexpr int kExitPartial = 1;
constexpr int kExitConfig = 2;

// FUNCODEC_LOG: quiet | info (default) | debug
enum class Level { Quiet, Info, Debug };

Level log_level() {
  const char* env = std::getenv("FUNCODEC_LOG");
  if (!env) return Level::Info;
  const std::string v = env;
  if (v == "quiet" || v == "0") return Level::Quiet;
  if (v == "debug" || v == "2") return Level::Debug;
  return Level::Info;
}

void log(Level at, const std::string& msg) {
  static const Level level = log_level();
  if (at <= level && level != Level::Quiet) std::cerr << "funcodec: " << msg << '\n';
}

struct Options {
  std::vector<std::string> inputs;
  std::string config_path;
  std::string preset = "2x";
  std::string codebooks;
  std::optional<size_t> n_q;
  std::string out;
  std::optional<uint64_t> seed;
  size_t workers = 1;
  size_t steps = 0;
  size_t batch_files = 4;
  bool quantizer_dropout = false;
  bool flops_x2 = false;
};

model::ModelConfig resolve_config(const Options& o) {
  auto cfg = o.config_path.empty() ? model::preset(o.preset) : model::load_config(o.config_path);
  if (o.seed) cfg.seed = *o.seed;
  cfg.validate();
  return cfg;
}

Codec load_codec(const Options& o) {
  auto cfg = resolve_config(o);
  if (o.codebooks.empty()) throw ConfigError("--codebooks is required");
  if (!fs::is_regular_file(o.codebooks)) throw ConfigError("codebook file not found: " + o.codebooks);
  std::optional<quantizer::QuantizerStack> stack;
  try {
    stack = quantizer::deserialize_stack(read_bytes(o.codebooks));
  } catch (const FormatError& e) {
    throw ConfigError("bad codebook file " + o.codebooks + ": " + e.what());
  }
  log(Level::Debug, "loaded " + std::to_string(stack->size()) + " codebooks from " + o.codebooks);
  return Codec(std::move(cfg), std::move(*stack));
}

void emit(const nlohmann::json& j) { std::cout << j.dump(2) << '\n'; }

std::vector<fs::path> as_paths(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

int cmd_encode(const Options& o) {
  const auto codec = load_codec(o);
  const size_t n_q = o.n_q.value_or(codec.config().n_quantizers);
  if (n_q < 1 || n_q > codec.config().n_quantizers) {
    throw ConfigError("--nq must be in [1, " + std::to_string(codec.config().n_quantizers) + "]");
  }
  const auto inputs = collect_inputs(as_paths(o.inputs), ".wav");
  log(Level::Info, "encoding " + std::to_string(inputs.size()) + " file(s) with " + std::to_string(o.workers) +
                       " worker(s)");
  const auto report = encode_files(codec, inputs, o.out, n_q, o.workers);
  auto j = report.to_json();
  j["tkr"] = bitstream::compute_tkr(codec.config().sample_rate, codec.config().waveform_stride(), n_q);
  j["bps"] = bitstream::bits_per_second(j["tkr"].get<double>(), codec.config().codebook_size);
  emit(j);
  return report.exit_code();
}

int cmd_decode(const Options& o) {
  const auto codec = load_codec(o);
  if (o.n_q && (*o.n_q < 1 || *o.n_q > codec.config().n_quantizers)) {
    throw ConfigError("--nq must be in [1, " + std::to_string(codec.config().n_quantizers) + "]");
  }
  const auto inputs = collect_inputs(as_paths(o.inputs), ".fcs");
  log(Level::Info, "decoding " + std::to_string(inputs.size()) + " file(s)");
  const auto report = decode_files(codec, inputs, o.out, o.n_q, o.workers);
  emit(report.to_json());
  return report.exit_code();
}

nlohmann::json inspect_stream(const fs::path& path) {
  const auto stream = bitstream::unpack(read_bytes(path));
  const auto& h = stream.header;
  const double tkr = bitstream::compute_tkr(static_cast<int>(h.sample_rate), h.stride, h.n_q);
  nlohmann::json j;
  j["version"] = h.version;
  j["mode"] = dsp::to_string(h.mode);
  j["sample_rate"] = h.sample_rate;
  j["stride"] = h.stride;
  j["n_q"] = h.n_q;
  j["codebook_size"] = h.codebook_size;
  j["frames"] = h.frames;
  j["num_samples"] = h.num_samples;
  j["gain"] = h.gain;
  j["tkr"] = tkr;
  j["bps"] = bitstream::bits_per_second(tkr, h.codebook_size);
  auto& hist = j["histograms"] = nlohmann::json::array();
  for (size_t q = 0; q < h.n_q; ++q) {
    std::vector<uint32_t> counts(h.codebook_size, 0);
    for (size_t t = 0; t < h.frames; ++t) ++counts[stream.tokens.at(q, t)];
    hist.push_back(std::move(counts));
  }
  return j;
}

int cmd_inspect(const Options& o) {
  const auto inputs = collect_inputs(as_paths(o.inputs), ".fcs");
  nlohmann::json j;
  j["command"] = "inspect";
  auto& files = j["files"] = nlohmann::json::array();
  int code = 0;
  for (const auto& p : inputs) {
    nlohmann::json e;
    try {
      e = inspect_stream(p);
    } catch (const Error& err) {
      e["error"] = err.what();
      code = kExitPartial;
    }
    e["input"] = p.string();
    files.push_back(std::move(e));
  }
  emit(j);
  return code;
}

int cmd_analyze(const Options& o) {
  emit(model::to_json(model::count_complexity(resolve_config(o)), o.flops_x2));
  return 0;
}

int cmd_fit(const Options& o) {
  if (o.out.empty()) throw ConfigError("--out is required");
  if (o.batch_files == 0) throw ConfigError("--batch-files must be positive");
  const auto cfg = resolve_config(o);
  const auto inputs = collect_inputs(as_paths(o.inputs), ".wav");
  if (inputs.empty()) throw InvalidInput("fit-codebooks: no training files");

  std::vector<AudioBuffer> audio(inputs.size());
  parallel_for(inputs.size(), o.workers, [&](size_t i) { audio[i] = read_wav(inputs[i]); });
  std::vector<std::vector<AudioBuffer>> corpus;
  for (size_t i = 0; i < audio.size(); i += o.batch_files) {
    const size_t end = std::min(audio.size(), i + o.batch_files);
    corpus.emplace_back(audio.begin() + static_cast<long>(i), audio.begin() + static_cast<long>(end));
  }
  log(Level::Info, "fitting " + std::to_string(cfg.n_quantizers) + " codebooks on " + std::to_string(corpus.size()) +
                       " batch(es)");
  const auto report = fit_codebooks(cfg, corpus, {.steps = o.steps,
                                                  .seed = o.seed.value_or(cfg.seed),
                                                  .quantizer_dropout = o.quantizer_dropout,
                                                  .workers = o.workers});
  write_bytes(o.out, quantizer::serialize_stack(report.stack));
  emit({{"command", "fit-codebooks"},
        {"output", o.out},
        {"files", inputs.size()},
        {"batches", corpus.size()},
        {"utilization", report.utilization},
        {"used_codes", report.used_codes},
        {"residual_mse", report.residual_mse},
        {"reassigned", report.reassigned}});
  return 0;
}

int cmd_eval(const Options& o) {
  if (o.inputs.size() != 2) throw ConfigError("eval-losses takes exactly two WAV files: ref deg");
  for (const auto& p : o.inputs) {
    if (!fs::is_regular_file(p)) throw ConfigError("input not found: " + p);
  }
  const auto ref = read_wav(o.inputs[0]);
  const auto deg = read_wav(o.inputs[1]);
  if (ref.sample_rate != kCodecSampleRate || deg.sample_rate != kCodecSampleRate) {
    throw InvalidInput("eval-losses: both files must be 16 kHz");
  }
  if (ref.size() != deg.size()) throw InvalidInput("eval-losses: files differ in length");
  losses::LossComponents c;
  c.time = losses::time_l1(ref, deg);
  auto spectral = losses::multiscale_spectral(ref, deg);
  c.spectral = spectral.value;
  c.per_scale = std::move(spectral.per_scale);
  auto j = losses::to_json(losses::total_loss(c));
  j["command"] = "eval-losses";
  emit(j);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FreqCodec neural speech codec"};
  app.require_subcommand(1);
  Options o;

  auto add_model = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "Model config JSON")->check(CLI::ExistingFile);
    sub->add_option("--preset", o.preset, "Model preset")
        ->check(CLI::IsMember(model::preset_names()))
        ->excludes(sub->get_option("--config"));
    sub->add_option("--seed", o.seed, "Model seed override");
  };

  auto* enc = app.add_subcommand("encode", "WAV files -> .fcs token streams");
  enc->add_option("inputs", o.inputs, "WAV files or directories")->required();
  add_model(enc);
  enc->add_option("--codebooks", o.codebooks, "FCQ1 codebook file")->required();
  enc->add_option("--nq", o.n_q, "Quantizer rows to emit");
  enc->add_option("--out", o.out, "Output directory")->required();
  enc->add_option("--workers", o.workers, "Worker threads")->check(CLI::PositiveNumber);

  auto* dec = app.add_subcommand("decode", ".fcs token streams -> WAV files");
  dec->add_option("inputs", o.inputs, ".fcs files or directories")->required();
  add_model(dec);
  dec->add_option("--codebooks", o.codebooks, "FCQ1 codebook file")->required();
  dec->add_option("--nq", o.n_q, "Decode only the first n rows");
  dec->add_option("--out", o.out, "Output directory")->required();
  dec->add_option("--workers", o.workers, "Worker threads")->check(CLI::PositiveNumber);

  auto* ins = app.add_subcommand("inspect", "Print stream header, rates and token histograms");
  ins->add_option("inputs", o.inputs, ".fcs files or directories")->required();

  auto* ana = app.add_subcommand("analyze", "Parameter and MAC counts of a model config");
  add_model(ana);
  ana->add_flag("--flops-x2", o.flops_x2, "Report 2 FLOPs per MAC");

  auto* fit = app.add_subcommand("fit-codebooks", "Learn RVQ codebooks from frozen-encoder latents");
  fit->add_option("inputs", o.inputs, "Training WAV files or directories")->required();
  add_model(fit);
  fit->add_option("--out", o.out, "Output FCQ1 file")->required();
  fit->add_option("--steps", o.steps, "EMA update steps after k-means init");
  fit->add_option("--batch-files", o.batch_files, "Files per mini-batch");
  fit->add_flag("--quantizer-dropout", o.quantizer_dropout, "Update a random prefix of stages per step");
  fit->add_option("--workers", o.workers, "Worker threads")->check(CLI::PositiveNumber);

  auto* ev = app.add_subcommand("eval-losses", "Reconstruction losses between two WAV files");
  ev->add_option("inputs", o.inputs, "ref.wav deg.wav")->required()->expected(2);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*enc) return cmd_encode(o);
    if (*dec) return cmd_decode(o);
    if (*ins) return cmd_inspect(o);
    if (*ana) return cmd_analyze(o);
    if (*fit) return cmd_fit(o);
    if (*ev) return cmd_eval(o);
  } catch (const ConfigError& e) {
    log(Level::Info, std::string("configuration error: ") + e.what());
    return kExitConfig;
  } catch (const MismatchError& e) {
    log(Level::Info, std::string("configuration error: ") + e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    log(Level::Info, std::string("error: ") + e.what());
    return kExitPartial;
  }
  return kExitConfig;
}
