#pragma once

#include "slimq/kernel.hpp"
#include "slimq/packfmt.hpp"
#include "slimq/pipeline.hpp"

#include <json.hpp>

#include <map>
#include <string>
#include <vector>

namespace slimq::cli {

/// Histogram of group widths keyed by width ("1".."4").
nlohmann::ordered_json bit_histogram(const std::vector<int>& bits);

/// Histogram of gamma values keyed by their 4-decimal rendering.
nlohmann::ordered_json gamma_histogram(const std::vector<double>& gammas);

nlohmann::ordered_json config_json(const PipelineConfig& cfg);

/// Full quantize report; timing lives under "timing" so it can be ignored when diffing.
nlohmann::ordered_json quantize_report(const PipelineConfig& cfg, const QuantizationResult& result,
                                       const SizeReport& size);

nlohmann::ordered_json bench_report(const BenchReport& rep);

}  // namespace slimq::cli
