#include "slimq/packfmt.hpp"

#include "slimq/bitstream.hpp"
#include "slimq/byte_io.hpp"
#include "slimq/error.hpp"

#include <cstring>
#include <string>

namespace slimq {

namespace {

constexpr std::size_t kHeaderBytes = 24;

std::uint64_t zero_stream_bits(std::uint32_t rows, int bits) {
  return pad_to_word(static_cast<std::uint64_t>(rows) * static_cast<std::uint64_t>(bits));
}

}  // namespace

std::uint64_t group_stream_bits(std::uint32_t rows, std::uint32_t group_size, int bits) {
  return static_cast<std::uint64_t>(group_size) * pad_to_word(static_cast<std::uint64_t>(rows) * bits);
}

std::uint64_t PackedModel::zero_offset(std::size_t g) const {
  std::uint64_t bit = 0;
  for (std::size_t h = 0; h < g; ++h) bit += zero_stream_bits(rows, group_bits(h));
  return bit;
}

PackedModel pack(const QuantizationResult& result) {
  const auto n = result.rows, m = result.cols, beta = result.group_size;
  if (beta <= 0 || m % beta != 0) throw Error(ErrorCode::InconsistentPlan, "group size does not divide columns");
  const auto k = static_cast<std::size_t>(m / beta);
  if (result.blocks.size() != k || result.plan.bits.size() != k)
    throw Error(ErrorCode::InconsistentPlan, "block / plan count does not match m / group_size");
  if (n > UINT32_MAX || m > UINT32_MAX) throw Error(ErrorCode::InconsistentPlan, "dimensions exceed 32 bits");

  PackedModel pm;
  pm.rows = static_cast<std::uint32_t>(n);
  pm.cols = static_cast<std::uint32_t>(m);
  pm.group_size = static_cast<std::uint32_t>(beta);
  pm.target_bits = static_cast<std::uint8_t>(result.plan.target_bits);
  pm.flags = result.binarize_1bit ? kFlagBinarized1Bit : 0;

  pm.bit_codes.assign((k + 3) / 4, 0);
  pm.offsets.assign(k + 1, 0);
  pm.scales.reserve(k * static_cast<std::size_t>(n));
  BitWriter zeros(pm.zeros_stream);
  BitWriter weights(pm.weights_stream);

  for (std::size_t g = 0; g < k; ++g) {
    const QuantizedBlock& qb = result.blocks[g];
    const int bits = qb.params.bit_width;
    if (bits != result.plan.bits[g])
      throw Error(ErrorCode::InconsistentPlan, "group " + std::to_string(g) + " width differs from plan");
    if (bits < kMinBits || bits > kMaxBits)
      throw Error(ErrorCode::InconsistentPlan, "group width outside [1,4]");
    if (qb.rows != n || qb.cols != beta)
      throw Error(ErrorCode::InconsistentPlan, "group " + std::to_string(g) + " has wrong shape");
    if (qb.params.binary != (bits == 1 && result.binarize_1bit))
      throw Error(ErrorCode::InconsistentPlan, "binarizer flag does not match group " + std::to_string(g));

    pm.bit_codes[g / 4] |= static_cast<std::uint8_t>((bits - 1) << (2 * (g % 4)));
    for (Eigen::Index i = 0; i < n; ++i) pm.scales.push_back(qb.params.scale[i]);

    for (Eigen::Index i = 0; i < n; ++i) zeros.put(qb.params.zero[i], bits);
    zeros.align_word();

    for (Eigen::Index j = 0; j < beta; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) weights.put(qb.code(i, j), bits);
      weights.align_word();
    }
    pm.offsets[g + 1] = weights.bit_position();
  }
  return pm;
}

void validate(const PackedModel& pm) {
  if (pm.group_size == 0 && pm.cols != 0) throw Error(ErrorCode::CorruptOffsets, "zero group size");
  if (pm.group_size != 0 && pm.cols % pm.group_size != 0)
    throw Error(ErrorCode::CorruptOffsets, "group size does not divide columns");
  const std::size_t k = pm.groups();
  if (pm.bit_codes.size() != (k + 3) / 4) throw Error(ErrorCode::CorruptOffsets, "bit code array has wrong length");
  if (pm.offsets.size() != k + 1) throw Error(ErrorCode::CorruptOffsets, "offset table has wrong length");
  if (pm.scales.size() != k * pm.rows) throw Error(ErrorCode::CorruptOffsets, "scale array has wrong length");

  const int target = pm.target_bits;
  std::uint64_t zero_bits = 0;
  for (std::size_t g = 0; g < k; ++g) {
    const int bits = pm.group_bits(g);
    if (target >= 2 && (bits < target - 1 || bits > target + 1))
      throw Error(ErrorCode::CodeOutOfRange, "group " + std::to_string(g) + " width outside N-1..N+1");
    if (pm.offsets[g + 1] < pm.offsets[g] ||
        pm.offsets[g + 1] - pm.offsets[g] != group_stream_bits(pm.rows, pm.group_size, bits))
      throw Error(ErrorCode::CorruptOffsets, "offset table inconsistent at group " + std::to_string(g));
    zero_bits += zero_stream_bits(pm.rows, bits);
  }
  if (pm.offsets[0] != 0) throw Error(ErrorCode::CorruptOffsets, "first offset must be 0");
  if (pm.offsets[k] != static_cast<std::uint64_t>(pm.weights_stream.size()) * 8)
    throw Error(ErrorCode::CorruptOffsets, "offsets do not cover the weight stream");
  if (zero_bits != static_cast<std::uint64_t>(pm.zeros_stream.size()) * 8)
    throw Error(ErrorCode::CorruptOffsets, "zero stream has wrong length");
  const std::size_t used_code_bits = 2 * k;
  if (used_code_bits % 8 != 0 && (pm.bit_codes.back() >> (used_code_bits % 8)) != 0)
    throw Error(ErrorCode::CodeOutOfRange, "non-zero padding in bit codes");
}

QuantizationResult unpack(const PackedModel& pm) {
  validate(pm);
  const std::size_t k = pm.groups();
  const auto n = static_cast<Eigen::Index>(pm.rows);
  const auto beta = static_cast<Eigen::Index>(pm.group_size);

  QuantizationResult r;
  r.rows = n;
  r.cols = pm.cols;
  r.group_size = beta;
  r.binarize_1bit = pm.binarized();
  r.plan.target_bits = pm.target_bits;

  BitReader zeros(pm.zeros_stream);
  BitReader weights(pm.weights_stream);
  for (std::size_t g = 0; g < k; ++g) {
    const int bits = pm.group_bits(g);
    r.plan.bits.push_back(bits);
    QuantizedBlock qb;
    qb.rows = n;
    qb.cols = beta;
    qb.params.bit_width = bits;
    qb.params.binary = bits == 1 && pm.binarized();
    qb.params.scale.assign(pm.scales.begin() + static_cast<std::ptrdiff_t>(g * pm.rows),
                           pm.scales.begin() + static_cast<std::ptrdiff_t>((g + 1) * pm.rows));
    const std::uint64_t zero_end = zeros.bit_position() + zero_stream_bits(pm.rows, bits);
    for (Eigen::Index i = 0; i < n; ++i) qb.params.zero.push_back(zeros.get(bits));
    while (zeros.bit_position() < zero_end)
      if (zeros.get(1) != 0) throw Error(ErrorCode::CodeOutOfRange, "non-zero padding in zero stream");
    if (qb.params.binary)
      for (auto z : qb.params.zero)
        if (z != 0) throw Error(ErrorCode::CodeOutOfRange, "binarized group with non-zero zero point");

    qb.codes.resize(static_cast<std::size_t>(n * beta));
    weights.seek(pm.offsets[g]);
    const std::uint64_t column_bits = pad_to_word(static_cast<std::uint64_t>(n) * bits);
    for (Eigen::Index j = 0; j < beta; ++j) {
      const std::uint64_t column_end = weights.bit_position() + column_bits;
      for (Eigen::Index i = 0; i < n; ++i)
        qb.codes[static_cast<std::size_t>(i * beta + j)] = static_cast<std::uint8_t>(weights.get(bits));
      while (weights.bit_position() < column_end)
        if (weights.get(1) != 0) throw Error(ErrorCode::CodeOutOfRange, "non-zero padding in weight stream");
    }
    r.blocks.push_back(std::move(qb));
  }
  for (int b : r.plan.bits) r.plan.p_star += b == r.plan.target_bits + 1 ? 1 : 0;
  return r;
}

std::vector<std::uint8_t> encode_packed(const PackedModel& pm) {
  validate(pm);
  ByteWriter w;
  w.raw("SLMQ", 4);
  w.u16(kPackedVersion);
  w.u16(pm.flags);
  w.u32(pm.rows);
  w.u32(pm.cols);
  w.u32(pm.group_size);
  w.u8(pm.target_bits);
  w.u8(0);
  w.u8(0);
  w.u8(0);

  w.u64(pm.bit_codes.size());
  w.raw(pm.bit_codes.data(), pm.bit_codes.size());
  w.u64(pm.offsets.size() * 8);
  for (auto o : pm.offsets) w.u64(o);
  w.u64(pm.scales.size() * 4);
  for (auto s : pm.scales) w.f32(s);
  w.u64(pm.zeros_stream.size());
  w.raw(pm.zeros_stream.data(), pm.zeros_stream.size());
  w.u64(pm.weights_stream.size());
  w.raw(pm.weights_stream.data(), pm.weights_stream.size());
  return w.take();
}

PackedModel decode_packed(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "SLMQ", 4) != 0)
    throw Error(ErrorCode::BadMagic, "expected SLMQ magic");
  if (bytes.size() < kHeaderBytes) throw Error(ErrorCode::TruncatedPayload, "short SLMQ header");
  ByteReader r(bytes);
  r.skip(4);
  const auto version = r.u16();
  if (version != kPackedVersion)
    throw Error(ErrorCode::UnsupportedVersion, "SLMQ version " + std::to_string(version));
  PackedModel pm;
  pm.flags = r.u16();
  pm.rows = r.u32();
  pm.cols = r.u32();
  pm.group_size = r.u32();
  pm.target_bits = r.u8();
  r.skip(3);

  auto section = [&r] {
    const std::uint64_t len = r.u64();
    if (len > r.remaining()) throw Error(ErrorCode::TruncatedPayload, "section longer than file");
    return r.take(static_cast<std::size_t>(len));
  };
  const auto codes = section();
  pm.bit_codes.assign(codes.begin(), codes.end());

  const auto offsets = section();
  if (offsets.size() % 8 != 0) throw Error(ErrorCode::CorruptOffsets, "offset section not a multiple of 8");
  ByteReader ro(offsets);
  pm.offsets.resize(offsets.size() / 8);
  for (auto& o : pm.offsets) o = ro.u64();

  const auto scales = section();
  if (scales.size() % 4 != 0) throw Error(ErrorCode::TruncatedPayload, "scale section not a multiple of 4");
  ByteReader rs(scales);
  pm.scales.resize(scales.size() / 4);
  for (auto& s : pm.scales) s = rs.f32();

  const auto zeros = section();
  pm.zeros_stream.assign(zeros.begin(), zeros.end());
  const auto weights = section();
  pm.weights_stream.assign(weights.begin(), weights.end());
  if (r.remaining() != 0) throw Error(ErrorCode::PayloadSizeMismatch, "trailing bytes after SLMQ sections");

  validate(pm);
  return pm;
}

void save_packed(const PackedModel& pm, const std::filesystem::path& path) {
  write_file_bytes(path, encode_packed(pm));
}

PackedModel load_packed(const std::filesystem::path& path) { return decode_packed(read_file_bytes(path)); }

SizeReport packed_size_report(const PackedModel& pm) {
  validate(pm);
  SizeReport rep;
  for (std::size_t g = 0; g < pm.groups(); ++g)
    rep.payload_bits += static_cast<std::uint64_t>(pm.rows) * pm.group_size * pm.group_bits(g);
  const std::uint64_t stream_bits = static_cast<std::uint64_t>(pm.weights_stream.size()) * 8;
  rep.padding_bits = stream_bits - rep.payload_bits;
  rep.metadata_bits = 8 * (pm.bit_codes.size() + pm.offsets.size() * 8 + pm.scales.size() * 4 +
                           pm.zeros_stream.size());
  rep.total_bits = stream_bits + rep.metadata_bits;
  const double weights = static_cast<double>(pm.rows) * pm.cols;
  if (weights > 0) {
    rep.bits_per_weight = static_cast<double>(rep.payload_bits) / weights;
    rep.padded_bits_per_weight = static_cast<double>(stream_bits) / weights;
  }
  return rep;
}

}  // namespace slimq
