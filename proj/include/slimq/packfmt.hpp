#pragma once

// SLMQ mixed-precision container.
//
// Header (little-endian, 24 bytes):
//   "SLMQ" | u16 version (=1) | u16 flags | u32 n | u32 m | u32 group_size |
//   u8 target_bits | 3 reserved bytes
// then five sections, each prefixed by its u64 byte length:
//   bit_codes  2 bits per group (width - 1), LSB-first
//   offsets    k + 1 u64 cumulative bit offsets into weights_stream
//   scales     k * n float32, group-major then row
//   zeros      per group: n zero points at the group width, padded to 32 bits
//   weights    per group, per column: n codes at the group width, padded to 32 bits

#include "slimq/pipeline.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace slimq {

inline constexpr std::uint16_t kPackedVersion = 1;
inline constexpr std::uint16_t kFlagBinarized1Bit = 1u << 0;

struct PackedModel {
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::uint32_t group_size = 0;
  std::uint8_t target_bits = 0;
  std::uint16_t flags = 0;
  std::vector<std::uint8_t> bit_codes;
  std::vector<std::uint64_t> offsets;
  std::vector<float> scales;
  std::vector<std::uint8_t> zeros_stream;
  std::vector<std::uint8_t> weights_stream;

  std::size_t groups() const { return group_size ? cols / group_size : 0; }
  int group_bits(std::size_t g) const { return ((bit_codes[g / 4] >> (2 * (g % 4))) & 3) + 1; }
  bool binarized() const { return (flags & kFlagBinarized1Bit) != 0; }
  /// Bit offset of group g's zero column in zeros_stream.
  std::uint64_t zero_offset(std::size_t g) const;

  bool operator==(const PackedModel&) const = default;
};

/// Padded bit length of one group in the weight stream.
std::uint64_t group_stream_bits(std::uint32_t rows, std::uint32_t group_size, int bits);

PackedModel pack(const QuantizationResult& result);
/// Codes, parameters and plan; metrics are left at zero.
QuantizationResult unpack(const PackedModel& pm);

/// Structural checks shared by decode and unpack: CorruptOffsets, CodeOutOfRange, ...
void validate(const PackedModel& pm);

std::vector<std::uint8_t> encode_packed(const PackedModel& pm);
PackedModel decode_packed(std::span<const std::uint8_t> bytes);

void save_packed(const PackedModel& pm, const std::filesystem::path& path);
PackedModel load_packed(const std::filesystem::path& path);

struct SizeReport {
  std::uint64_t payload_bits = 0;    // sum of n * beta * bits[g], no padding
  std::uint64_t padding_bits = 0;    // column padding inside weights_stream
  std::uint64_t metadata_bits = 0;   // bit codes, offsets, scales, zeros
  std::uint64_t total_bits = 0;      // weights_stream + metadata
  double bits_per_weight = 0.0;          // payload_bits / (n * m)
  double padded_bits_per_weight = 0.0;   // weights_stream bits / (n * m)
};

SizeReport packed_size_report(const PackedModel& pm);

}  // namespace slimq
