#pragma once

#include "slimq/matrix.hpp"
#include "slimq/packfmt.hpp"

#include <cstdint>
#include <vector>

namespace slimq {

/// y = x * w_hat^T straight from the packed streams. Each group is decoded
/// into an n x beta float scratch block, then accumulated in float32 in
/// ascending column order for every output.
MatrixF packed_matmul(const PackedModel& pm, const MatrixF& x, unsigned threads = 1);

/// Unpack, dequantize and multiply with double accumulation. Slow ground truth.
MatrixF dense_reference(const PackedModel& pm, const MatrixF& x);

struct BenchReport {
  std::size_t repeats = 0;
  std::vector<double> packed_ms;
  std::vector<double> dense_ms;
  double packed_median_ms = 0.0;
  double dense_median_ms = 0.0;
  std::uint64_t packed_bytes = 0;  // streams + metadata + activations in/out
  std::uint64_t dense_bytes = 0;   // 4*n*m float weights + activations in/out
};

BenchReport bench(const PackedModel& pm, const MatrixF& x, std::size_t repeats, unsigned threads = 1);

}  // namespace slimq
