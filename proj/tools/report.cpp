#include "report.hpp"

#include <cstdio>

namespace slimq::cli {

using nlohmann::ordered_json;

ordered_json bit_histogram(const std::vector<int>& bits) {
  std::map<int, int> counts;
  for (int b : bits) ++counts[b];
  ordered_json out = ordered_json::object();
  for (auto [b, c] : counts) out[std::to_string(b)] = c;
  return out;
}

ordered_json gamma_histogram(const std::vector<double>& gammas) {
  std::map<std::string, int> counts;
  char buf[32];
  for (double g : gammas) {
    std::snprintf(buf, sizeof buf, "%.4f", g);
    ++counts[buf];
  }
  ordered_json out = ordered_json::object();
  for (const auto& [k, c] : counts) out[k] = c;
  return out;
}

ordered_json config_json(const PipelineConfig& cfg) {
  return {
      {"bits", cfg.bits},
      {"group_size", cfg.group_size},
      {"percdamp", cfg.percdamp},
      {"sba", cfg.sba_enabled},
      {"sqc", cfg.sqc_enabled},
      {"compensation", cfg.compensation_enabled},
      {"binarize_1bit", cfg.binarize_1bit},
      {"inner_columnwise", cfg.inner_columnwise},
      {"salience_denominator",
       cfg.denominator == SalienceDenominator::InverseDiagonal ? "inverse_diagonal" : "cholesky_diagonal"},
      {"gamma_lambda", cfg.sqc.lambda},
      {"gamma_steps", cfg.sqc.steps},
      {"per_row_gamma", cfg.sqc.per_row_gamma},
      {"kl_temperature", cfg.kl.temperature},
      {"kl_epsilon", cfg.kl.epsilon},
      {"kl_max_tokens", cfg.max_kl_tokens},
  };
}

ordered_json quantize_report(const PipelineConfig& cfg, const QuantizationResult& result, const SizeReport& size) {
  ordered_json rep;
  rep["config"] = config_json(cfg);
  rep["shape"] = {{"rows", result.rows}, {"cols", result.cols}, {"groups", result.blocks.size()}};
  rep["plan"] = {
      {"bits", result.plan.bits},
      {"p_star", result.plan.p_star},
      {"evaluations", result.plan.evaluations},
      {"kl_curve", result.plan.kl_curve},
      {"histogram", bit_histogram(result.plan.bits)},
  };
  rep["gamma"] = {{"values", result.gammas}, {"histogram", gamma_histogram(result.gammas)}};
  rep["mask_density"] = result.mask_density;
  rep["metrics"] = {
      {"proxy_loss", result.proxy_loss},
      {"recon_mse", result.recon_mse},
      {"recon_kl", result.recon_kl},
      {"bits_per_weight", size.bits_per_weight},
      {"padded_bits_per_weight", size.padded_bits_per_weight},
      {"padding_bits", size.padding_bits},
      {"metadata_bits", size.metadata_bits},
  };
  rep["timing"] = {
      {"hessian_ms", result.timing.hessian_ms},
      {"allocation_ms", result.timing.allocation_ms},
      {"quantization_ms", result.timing.quantization_ms},
      {"metrics_ms", result.timing.metrics_ms},
  };
  return rep;
}

ordered_json bench_report(const BenchReport& rep) {
  return {
      {"repeats", rep.repeats},
      {"packed_ms", rep.packed_ms},
      {"dense_ms", rep.dense_ms},
      {"packed_median_ms", rep.packed_median_ms},
      {"dense_median_ms", rep.dense_median_ms},
      {"packed_bytes", rep.packed_bytes},
      {"dense_bytes", rep.dense_bytes},
  };
}

}  // namespace slimq::cli
