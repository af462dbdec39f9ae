#pragma once

// LSB-first bit streams: value bit 0 goes to the lowest free bit of the
// current byte; bytes are appended in ascending address order.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace slimq {

inline constexpr std::uint64_t kWordBits = 32;

constexpr std::uint64_t pad_to_word(std::uint64_t bits) {
  return (bits + kWordBits - 1) / kWordBits * kWordBits;
}

class BitWriter {
 public:
  explicit BitWriter(std::vector<std::uint8_t>& out) : out_(out), bit_(out.size() * 8) {}

  void put(std::uint32_t value, int width) {
    for (int b = 0; b < width; ++b, ++bit_) {
      if (bit_ % 8 == 0) out_.push_back(0);
      if ((value >> b) & 1u) out_.back() |= static_cast<std::uint8_t>(1u << (bit_ % 8));
    }
  }
  /// Zero-fills up to the next 32-bit boundary.
  void align_word() {
    while (bit_ % kWordBits != 0) put(0, 1);
  }
  std::uint64_t bit_position() const { return bit_; }

 private:
  std::vector<std::uint8_t>& out_;
  std::uint64_t bit_;
};

class BitReader {
 public:
  BitReader(std::span<const std::uint8_t> bytes, std::uint64_t bit_offset = 0)
      : bytes_(bytes), bit_(bit_offset) {}

  std::uint32_t get(int width) {
    std::uint32_t v = 0;
    for (int b = 0; b < width; ++b, ++bit_)
      v |= static_cast<std::uint32_t>((bytes_[bit_ / 8] >> (bit_ % 8)) & 1u) << b;
    return v;
  }
  void seek(std::uint64_t bit) { bit_ = bit; }
  std::uint64_t bit_position() const { return bit_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::uint64_t bit_;
};

}  // namespace slimq
