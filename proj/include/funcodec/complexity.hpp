#pragma once

#include <string>
#include <vector>

#include "funcodec/freqcodec.hpp"
#include "json.hpp"

namespace funcodec::model {

struct LayerComplexity {
  std::string name;
  std::string part;  // "encoder" or "decoder"
  LayerKind kind = LayerKind::Conv2d;
  size_t parameters = 0;
  double macs_per_second = 0.0;
};

struct ComplexityReport {
  std::string config_name;
  size_t parameters = 0;
  size_t encoder_parameters = 0;
  size_t decoder_parameters = 0;
  // Multiply-accumulates to code and decode one second of 16 kHz audio.
  double macs_per_second = 0.0;
  std::vector<LayerComplexity> layers;
};

// Analytical counts from the layer table:
//   conv:      k_t k_f (C_in / g) C_out + C_out params, k_t k_f C_in / g MACs per output
//   transpose: same weights, k_t k_f C_out / g MACs per input element
//   LSTM:      4H (in + H) + 4H params, 4H (in + H) MACs per frame
//   linear:    in * out + out params, in * out MACs per frame
ComplexityReport count_complexity(const ModelConfig& cfg);

// Counts for a single layer traced over one second.
LayerComplexity layer_complexity(const LayerSpec& spec, double seconds_traced);

// flops_x2 reports 2 FLOPs per MAC alongside the MAC figures.
nlohmann::json to_json(const ComplexityReport& report, bool flops_x2 = false);

}  // namespace funcodec::model
