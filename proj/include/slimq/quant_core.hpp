#pragma once

// Group-wise uniform affine quantizer and sign binarizer.
//
// A block is an n x beta slice of a weight matrix (rows are output channels).
// Every row carries its own scale and zero point:
//   code = clamp(round(w / scale) + zero, 0, 2^N - 1)
//   w'   = (code - zero) * scale
// round() is round-half-to-even. Binarized blocks instead store sign codes
// (1 -> +1, 0 -> -1) with a per-row magnitude alpha in `scale`.

#include "slimq/matrix.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace slimq {

inline constexpr int kMinBits = 1;
inline constexpr int kMaxBits = 4;

constexpr std::uint32_t max_code(int bits) { return (1u << bits) - 1u; }

struct GroupQuantParams {
  int bit_width = 2;
  std::vector<float> scale;         // one per row, > 0 (>= 0 for binarized rows)
  std::vector<std::uint32_t> zero;  // one per row, in [0, 2^N - 1]
  bool binary = false;              // sign binarizer: dequant = (2c - 1) * scale

  bool operator==(const GroupQuantParams&) const = default;
};

struct QuantizedBlock {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  std::vector<std::uint8_t> codes;  // row-major rows x cols
  GroupQuantParams params;

  std::uint8_t code(Eigen::Index r, Eigen::Index c) const {
    return codes[static_cast<std::size_t>(r * cols + c)];
  }
  bool operator==(const QuantizedBlock&) const = default;
};

/// Code for a single value under one row's parameters.
std::uint8_t quantize_value(double w, float scale, std::uint32_t zero, int bits, bool binary = false);
double dequantize_value(std::uint8_t code, float scale, std::uint32_t zero, bool binary = false);

/// Per-row scale/zero for one row. gamma scales the (zero-inclusive) min-max
/// range; gamma = 1 is the plain min-max quantizer.
void derive_row_params(const double* row, Eigen::Index len, int bits, double gamma,
                       float& scale, std::uint32_t& zero);

/// Min-max parameters for every row of `block` (gamma = 1).
GroupQuantParams derive_params(const Matrix& block, int bits);

/// Quantizes with `params` when given, else with derive_params(block, bits).
QuantizedBlock quantize_uniform(const Matrix& block, int bits,
                                const std::optional<GroupQuantParams>& params = std::nullopt);

Matrix dequantize(const QuantizedBlock& qb);

struct Binarized {
  Matrix signs;  // entries +1 / -1; sign(0) = +1
  double alpha = 0.0;
};

/// Sign binarizer with a single alpha = mean |w| over the whole block.
Binarized binarize(const Matrix& block);

/// 1-bit block using the binarizer row by row (alpha per row).
QuantizedBlock binarize_rows(const Matrix& block);

/// Sum of squared element differences.
double block_mse(const Matrix& a, const Matrix& b);

/// quantize then dequantize; bits == 1 && binary selects the binarizer.
Matrix fake_quantize(const Matrix& block, int bits, bool binary = false);

}  // namespace slimq
