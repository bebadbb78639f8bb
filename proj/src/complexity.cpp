#include "funcodec/complexity.hpp"

namespace funcodec::model {

namespace {

size_t product(const Shape& s) {
  size_t p = 1;
  for (size_t v : s) p *= v;
  return p;
}

}  // namespace

LayerComplexity layer_complexity(const LayerSpec& spec, double seconds_traced) {
  LayerComplexity row;
  row.name = spec.name;
  row.kind = spec.kind;
  double macs = 0.0;
  switch (spec.kind) {
    case LayerKind::Conv2d:
    case LayerKind::ConvTranspose2d: {
      const size_t taps = spec.kernel.time * spec.kernel.freq;
      row.parameters = taps * (spec.in_channels / spec.groups) * spec.out_channels + spec.out_channels;
      if (spec.kind == LayerKind::Conv2d) {
        macs = static_cast<double>(product(spec.output)) * static_cast<double>(taps * (spec.in_channels / spec.groups));
      } else {
        macs = static_cast<double>(product(spec.input)) * static_cast<double>(taps * (spec.out_channels / spec.groups));
      }
      break;
    }
    case LayerKind::Recurrent: {
      const size_t h = spec.out_channels;
      const size_t per_frame = 4 * h * (spec.in_channels + h);
      row.parameters = per_frame + 4 * h;
      macs = static_cast<double>(spec.input[0]) * static_cast<double>(per_frame);
      break;
    }
    case LayerKind::Linear: {
      const size_t per_frame = spec.in_channels * spec.out_channels;
      row.parameters = per_frame + spec.out_channels;
      macs = static_cast<double>(spec.input[0]) * static_cast<double>(per_frame);
      break;
    }
    case LayerKind::Reshape:
      break;
  }
  row.macs_per_second = macs / seconds_traced;
  return row;
}

ComplexityReport count_complexity(const ModelConfig& cfg) {
  cfg.validate();
  // Trace one 3.2 s segment; MACs scale linearly with frames.
  const size_t frames = cfg.segment_frames();
  const double seconds = static_cast<double>(cfg.segment_samples()) / cfg.sample_rate;

  ComplexityReport report;
  report.config_name = cfg.name;
  auto add = [&](const std::vector<LayerSpec>& specs, const char* part, size_t& subtotal) {
    for (const auto& spec : specs) {
      auto row = layer_complexity(spec, seconds);
      row.part = part;
      subtotal += row.parameters;
      report.parameters += row.parameters;
      report.macs_per_second += row.macs_per_second;
      report.layers.push_back(std::move(row));
    }
  };
  add(build_encoder(cfg, frames), "encoder", report.encoder_parameters);
  add(build_decoder(cfg, frames / cfg.time_stride()), "decoder", report.decoder_parameters);
  return report;
}

nlohmann::json to_json(const ComplexityReport& report, bool flops_x2) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& l : report.layers) {
    nlohmann::json row = {{"name", l.name},
                          {"part", l.part},
                          {"kind", to_string(l.kind)},
                          {"parameters", l.parameters},
                          {"macs_per_second", l.macs_per_second}};
    if (flops_x2) row["flops_per_second"] = 2.0 * l.macs_per_second;
    rows.push_back(std::move(row));
  }
  nlohmann::json out = {{"config", report.config_name},
                        {"parameters", report.parameters},
                        {"encoder_parameters", report.encoder_parameters},
                        {"decoder_parameters", report.decoder_parameters},
                        {"macs_per_second", report.macs_per_second},
                        {"layers", rows}};
  if (flops_x2) out["flops_per_second"] = 2.0 * report.macs_per_second;
  return out;
}

}  // namespace funcodec::model
