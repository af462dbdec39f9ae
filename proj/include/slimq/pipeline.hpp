#pragma once

// End-to-end layer quantization:
//   Hessian proxy -> salience -> bit allocation -> per-group mask + calibrated
//   quantizer -> error compensation onto the not-yet-quantized columns.

#include "slimq/quant_core.hpp"
#include "slimq/salience.hpp"
#include "slimq/sba.hpp"
#include "slimq/sqc.hpp"
#include "slimq/tensor_store.hpp"

#include <vector>

namespace slimq {

struct PipelineConfig {
  Eigen::Index group_size = 128;
  int bits = 2;
  double percdamp = 0.01;
  bool sba_enabled = true;
  bool sqc_enabled = true;
  bool compensation_enabled = true;
  bool binarize_1bit = false;
  // GPTQ column loop inside each group, with the group's parameters fixed up front.
  bool inner_columnwise = false;
  SalienceDenominator denominator = SalienceDenominator::InverseDiagonal;
  KlConfig kl;
  SqcConfig sqc;
  std::size_t max_kl_tokens = 4096;
  unsigned threads = 0;

  void validate() const;
};

struct StageTimings {
  double hessian_ms = 0.0;
  double allocation_ms = 0.0;
  double quantization_ms = 0.0;
  double metrics_ms = 0.0;
};

struct QuantizationResult {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  Eigen::Index group_size = 0;
  bool binarize_1bit = false;
  BitPlan plan;
  std::vector<QuantizedBlock> blocks;
  std::vector<double> gammas;        // per group; 1.0 when calibration is off
  std::vector<double> mask_density;  // fraction of salient elements per group
  double proxy_loss = 0.0;
  double recon_mse = 0.0;
  double recon_kl = 0.0;
  StageTimings timing;

  /// Full n x m reconstruction from the blocks.
  Matrix dequantized() const;
};

/// tr((w_hat - w)(H + lambda I)(w_hat - w)^T).
double proxy_loss(const Matrix& w, const Matrix& w_hat, const HessianState& hs);

/// Mean squared element error.
double reconstruction_mse(const Matrix& w, const Matrix& w_hat);

QuantizationResult quantize_layer(const Matrix& w, const CalibrationSet& calib, const PipelineConfig& cfg);

}  // namespace slimq
