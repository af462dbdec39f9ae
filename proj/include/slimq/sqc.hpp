#pragma once

// Salience-weighted quantizer calibration. A scalar gamma stretches or shrinks
// the min-max range of every row in a block; the gamma minimizing the sum of
// the salient and non-salient squared errors is kept.

#include "slimq/quant_core.hpp"
#include "slimq/salience.hpp"

#include <vector>

namespace slimq {

struct SqcConfig {
  double lambda = 0.1;     // grid spans [1 - lambda, 1 + lambda]
  int steps = 50;          // 2 * steps evenly spaced candidates, endpoints included
  bool include_unity = true;
  bool per_row_gamma = false;

  void validate() const;
};

/// Candidates in evaluation order: by |gamma - 1|, then ascending gamma.
std::vector<double> gamma_grid(const SqcConfig& cfg);

struct CalibratedBlock {
  QuantizedBlock block;
  double gamma = 1.0;              // shared gamma (row 0's when per_row_gamma)
  std::vector<double> row_gammas;  // filled only with per_row_gamma
  double salient_loss = 0.0;
  double unsalient_loss = 0.0;
  std::size_t evaluations = 0;

  double loss() const { return salient_loss + unsalient_loss; }
};

/// Squared error split by mask for the block quantized at a given gamma.
struct SplitLoss {
  double salient = 0.0;
  double unsalient = 0.0;
  double total() const { return salient + unsalient; }
};

QuantizedBlock quantize_with_gamma(const Matrix& block, int bits, double gamma);
SplitLoss split_loss(const Matrix& block, const QuantizedBlock& qb, const Mask& mask);

CalibratedBlock calibrate_group(const Matrix& block, int bits, const Mask& mask,
                                const SqcConfig& cfg = {});

}  // namespace slimq
