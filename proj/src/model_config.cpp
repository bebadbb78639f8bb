#include "funcodec/model_config.hpp"

#include <fstream>
#include <numeric>

#include "funcodec/error.hpp"

namespace funcodec::model {

size_t GroupSpec::resolve(size_t in_channels, size_t out_channels) const {
  size_t wanted = 1;
  switch (rule) {
    case Rule::One: return 1;
    case Rule::Cin: wanted = in_channels; break;
    case Rule::CinOver8: wanted = in_channels / 8; break;
    case Rule::CinOver4: wanted = in_channels / 4; break;
    case Rule::Fixed:
      if (value == 0 || in_channels % value != 0 || out_channels % value != 0) {
        throw ConfigError("groups " + std::to_string(value) + " do not divide " + std::to_string(in_channels) +
                          " -> " + std::to_string(out_channels) + " channels");
      }
      return value;
  }
  wanted = std::max<size_t>(wanted, 1);
  return std::gcd(wanted, std::gcd(in_channels, out_channels));
}

std::string GroupSpec::to_string() const {
  switch (rule) {
    case Rule::One: return "1";
    case Rule::Cin: return "c_in";
    case Rule::CinOver8: return "c_in/8";
    case Rule::CinOver4: return "c_in/4";
    case Rule::Fixed: return std::to_string(value);
  }
  return "1";
}

GroupSpec GroupSpec::parse(const std::string& text) {
  if (text == "1") return {};
  if (text == "c_in") return {Rule::Cin, 1};
  if (text == "c_in/8") return {Rule::CinOver8, 1};
  if (text == "c_in/4") return {Rule::CinOver4, 1};
  try {
    size_t used = 0;
    const auto v = std::stoull(text, &used);
    if (used == text.size() && v > 0) return {Rule::Fixed, static_cast<size_t>(v)};
  } catch (const std::exception&) {
  }
  throw ConfigError("unknown group rule '" + text + "' (expected 1, c_in, c_in/8, c_in/4 or a positive integer)");
}

size_t ModelConfig::time_stride() const {
  size_t p = 1;
  for (size_t s : strides) p *= s;
  return p;
}

size_t ModelConfig::waveform_stride() const { return stft_hop * time_stride(); }

size_t ModelConfig::latent_width() const {
  size_t f = conv_freq();
  for (size_t b = 0; b < blocks(); ++b) f /= 4;
  return block_channels(blocks()) * f;
}

size_t ModelConfig::segment_samples() const {
  return static_cast<size_t>(sample_rate) * kSegmentTenthsOfSecond / 10;
}

void ModelConfig::validate() const {
  auto fail = [this](const std::string& why) { throw ConfigError("model config '" + name + "': " + why); };
  if (mode == dsp::DomainMode::Time) fail("time-domain models are not supported");
  if (sample_rate != 16000) fail("only 16 kHz models are supported");
  if (channels < 2 || channels % 2 != 0) fail("base channels must be even and at least 2");
  if (strides.empty()) fail("at least one EncBlock is required");
  for (size_t s : strides) {
    if (s == 0) fail("block strides must be positive");
  }
  if (stft_window < 2 || stft_window % 2 != 0) fail("STFT window must be even");
  if (stft_hop == 0 || stft_hop > stft_window) fail("STFT hop must be in (0, window]");
  size_t f = conv_freq();
  for (size_t b = 0; b < blocks(); ++b) {
    if (f % 4 != 0 || f == 0) fail("frequency axis " + std::to_string(conv_freq()) + " is not divisible by 4^B");
    f /= 4;
  }
  if (code_dim == 0) fail("code dimension must be positive");
  if (n_quantizers == 0) fail("need at least one quantizer");
  if (codebook_size < 2 || (codebook_size & (codebook_size - 1)) != 0) fail("codebook size must be a power of two");
  if (segment_samples() % stft_hop != 0 || segment_frames() % time_stride() != 0) {
    fail("segment length is not a multiple of the waveform stride " + std::to_string(waveform_stride()));
  }
  // Block convolutions: C_b -> C_b/2 -> C_b -> 2 C_b.
  for (size_t b = 0; b < blocks(); ++b) {
    const size_t cb = block_channels(b);
    for (const GroupSpec* g : {&groups_enc, &groups_dec}) {
      g->resolve(cb, cb / 2);
      g->resolve(cb / 2, cb);
      g->resolve(cb, 2 * cb);
      g->resolve(2 * cb, cb);
    }
  }
}

namespace {

ModelConfig base_config(const std::string& name, std::vector<size_t> strides, size_t n_quantizers) {
  ModelConfig cfg;
  cfg.name = name;
  cfg.strides = std::move(strides);
  cfg.n_quantizers = n_quantizers;
  return cfg;
}

ModelConfig grouped(const std::string& name, dsp::DomainMode mode, GroupSpec enc, GroupSpec dec) {
  auto cfg = base_config(name, {1, 1, 2, 2}, 16);
  cfg.mode = mode;
  cfg.groups_enc = enc;
  cfg.groups_dec = dec;
  return cfg;
}

}  // namespace

std::vector<std::string> preset_names() { return {"base", "2x", "4x", "m2", "m3", "m4", "m5", "m6", "m7"}; }

ModelConfig preset(const std::string& name) {
  using R = GroupSpec::Rule;
  const GroupSpec one{};
  const GroupSpec cin{R::Cin, 1};
  const GroupSpec cin8{R::CinOver8, 1};
  const GroupSpec cin4{R::CinOver4, 1};
  // Token rate 400 at each stride: 50 x 8, 25 x 16, 12.5 x 32.
  if (name == "base") return base_config(name, {1, 1, 1, 2}, 8);
  if (name == "2x") return base_config(name, {1, 1, 2, 2}, 16);
  if (name == "4x") return base_config(name, {1, 2, 2, 2}, 32);
  if (name == "m2") return grouped(name, dsp::DomainMode::MagAngle, one, one);
  if (name == "m3") return grouped(name, dsp::DomainMode::MagPhase, one, one);
  if (name == "m4") return grouped(name, dsp::DomainMode::MagPhase, one, cin);
  if (name == "m5") return grouped(name, dsp::DomainMode::MagPhase, one, cin8);
  if (name == "m6") return grouped(name, dsp::DomainMode::MagPhase, cin, cin);
  if (name == "m7") return grouped(name, dsp::DomainMode::MagPhase, cin4, cin4);
  throw ConfigError("unknown preset '" + name + "'");
}

namespace {

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::Elu: return "elu";
    case Activation::Identity: return "identity";
    case Activation::LeakyRelu: return "leaky_relu";
  }
  return "elu";
}

Activation activation_from(const std::string& s) {
  if (s == "elu") return Activation::Elu;
  if (s == "identity") return Activation::Identity;
  if (s == "leaky_relu") return Activation::LeakyRelu;
  throw ConfigError("unknown activation '" + s + "'");
}

}  // namespace

nlohmann::json to_json(const ModelConfig& cfg) {
  return {{"name", cfg.name},
          {"mode", dsp::to_string(cfg.mode)},
          {"channels", cfg.channels},
          {"strides", cfg.strides},
          {"groups_enc", cfg.groups_enc.to_string()},
          {"groups_dec", cfg.groups_dec.to_string()},
          {"code_dim", cfg.code_dim},
          {"n_quantizers", cfg.n_quantizers},
          {"codebook_size", cfg.codebook_size},
          {"sample_rate", cfg.sample_rate},
          {"stft_window", cfg.stft_window},
          {"stft_hop", cfg.stft_hop},
          {"activation", activation_name(cfg.activation)},
          {"seed", cfg.seed}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("model config must be a JSON object");
  // A "preset" key starts from that preset; remaining keys override it.
  ModelConfig cfg = j.contains("preset") ? preset(j.at("preset").get<std::string>()) : ModelConfig{};
  try {
    if (j.contains("name")) cfg.name = j.at("name").get<std::string>();
    if (j.contains("mode")) cfg.mode = dsp::domain_mode_from_string(j.at("mode").get<std::string>());
    if (j.contains("channels")) cfg.channels = j.at("channels").get<size_t>();
    if (j.contains("strides")) cfg.strides = j.at("strides").get<std::vector<size_t>>();
    auto groups = [](const nlohmann::json& v) {
      return v.is_number_unsigned() ? GroupSpec{GroupSpec::Rule::Fixed, v.get<size_t>()}
                                    : GroupSpec::parse(v.get<std::string>());
    };
    if (j.contains("groups_enc")) cfg.groups_enc = groups(j.at("groups_enc"));
    if (j.contains("groups_dec")) cfg.groups_dec = groups(j.at("groups_dec"));
    if (cfg.groups_enc == GroupSpec{GroupSpec::Rule::Fixed, 1}) cfg.groups_enc = {};
    if (cfg.groups_dec == GroupSpec{GroupSpec::Rule::Fixed, 1}) cfg.groups_dec = {};
    if (j.contains("code_dim")) cfg.code_dim = j.at("code_dim").get<size_t>();
    if (j.contains("n_quantizers")) cfg.n_quantizers = j.at("n_quantizers").get<size_t>();
    if (j.contains("codebook_size")) cfg.codebook_size = j.at("codebook_size").get<size_t>();
    if (j.contains("sample_rate")) cfg.sample_rate = j.at("sample_rate").get<int>();
    if (j.contains("stft_window")) cfg.stft_window = j.at("stft_window").get<size_t>();
    if (j.contains("stft_hop")) cfg.stft_hop = j.at("stft_hop").get<size_t>();
    if (j.contains("activation")) cfg.activation = activation_from(j.at("activation").get<std::string>());
    if (j.contains("seed")) cfg.seed = j.at("seed").get<uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

ModelConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open model config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("model config " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace funcodec::model
