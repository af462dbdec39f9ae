#pragma once

// SLMT container: little-endian header
//   "SLMT" | u16 version (=1) | u8 ndim | u8 reserved (=0) | u64 extent * ndim
// followed by the row-major float32 payload.

#include "slimq/matrix.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace slimq {

inline constexpr std::uint16_t kTensorVersion = 1;

struct DenseTensor {
  std::vector<std::uint64_t> dims;
  std::vector<float> data;

  std::uint64_t element_count() const;
  /// Throws ShapeMismatch / NonFiniteValue when the invariants do not hold.
  void validate() const;

  bool operator==(const DenseTensor&) const = default;
};

/// A batch of t x m token activation matrices sharing the channel extent m.
struct CalibrationSet {
  std::vector<Matrix> samples;

  std::size_t channels() const;
  std::size_t token_count() const;
  /// All tokens stacked into one T x m matrix, in sample order.
  Matrix stacked() const;
};

std::vector<std::uint8_t> encode_tensor(const DenseTensor& t);
DenseTensor decode_tensor(std::span<const std::uint8_t> bytes);

DenseTensor read_tensor(const std::filesystem::path& path);
void write_tensor(const DenseTensor& t, const std::filesystem::path& path);

DenseTensor tensor_from_matrix(const Matrix& m);
/// Requires a 2-D tensor.
Matrix matrix_from_tensor(const DenseTensor& t);

/// A 2-D tensor is a single t x m sample; a 3-D [s, t, m] tensor holds s samples.
CalibrationSet calibration_from_tensor(const DenseTensor& t);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace slimq
