#include <doctest.h>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "slimq/error.hpp"
#include "slimq/packfmt.hpp"

#include <cstring>
#include <functional>

using namespace slimq;

namespace {

// Word-at-a-time packing: values accumulate into 32-bit words, low bits first.
std::vector<std::uint8_t> pack_words(const std::vector<std::uint32_t>& values, int bits) {
  std::vector<std::uint32_t> words;
  std::uint64_t acc = 0;
  int filled = 0;
  for (auto v : values) {
    acc |= static_cast<std::uint64_t>(v) << filled;
    filled += bits;
    if (filled >= 32) {
      words.push_back(static_cast<std::uint32_t>(acc));
      acc >>= 32;
      filled -= 32;
    }
  }
  if (filled > 0) words.push_back(static_cast<std::uint32_t>(acc));
  std::vector<std::uint8_t> out;
  for (auto w : words)
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(w >> (8 * b)));
  return out;
}

std::vector<std::uint8_t> expected_weights(const QuantizationResult& r) {
  std::vector<std::uint8_t> out;
  for (const auto& qb : r.blocks)
    for (Eigen::Index j = 0; j < qb.cols; ++j) {
      std::vector<std::uint32_t> col;
      for (Eigen::Index i = 0; i < qb.rows; ++i) col.push_back(qb.code(i, j));
      const auto bytes = pack_words(col, qb.params.bit_width);
      out.insert(out.end(), bytes.begin(), bytes.end());
    }
  return out;
}

std::vector<std::uint8_t> expected_zeros(const QuantizationResult& r) {
  std::vector<std::uint8_t> out;
  for (const auto& qb : r.blocks) {
    const auto bytes = pack_words(qb.params.zero, qb.params.bit_width);
    out.insert(out.end(), bytes.begin(), bytes.end());
  }
  return out;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::InvalidArgument;
}

QuantizationResult with_plan(const std::vector<int>& bits, Eigen::Index n, Eigen::Index beta) {
  QuantizationResult r;
  r.rows = n;
  r.group_size = beta;
  r.cols = beta * static_cast<Eigen::Index>(bits.size());
  r.plan.bits = bits;
  r.plan.target_bits = 2;
  for (int b : bits) {
    QuantizedBlock qb;
    qb.rows = n;
    qb.cols = beta;
    qb.params.bit_width = b;
    qb.params.scale.assign(static_cast<std::size_t>(n), 1.0f);
    qb.params.zero.assign(static_cast<std::size_t>(n), 0);
    qb.codes.assign(static_cast<std::size_t>(n * beta), 0);
    r.blocks.push_back(qb);
  }
  return r;
}

// Byte position of the offsets table entries in an encoded file.
std::size_t offsets_position(const std::vector<std::uint8_t>& bytes) {
  std::uint64_t code_len = 0;
  std::memcpy(&code_len, bytes.data() + 24, 8);
  return 24 + 8 + static_cast<std::size_t>(code_len) + 8;
}

}  // namespace

TEST_CASE("bit codes are packed two bits per group, low bits first") {
  const PackedModel pm = pack(with_plan({3, 2, 1, 2}, 4, 4));
  REQUIRE(pm.bit_codes.size() == 1);
  CHECK(pm.bit_codes[0] == 0x46);
  for (std::size_t g = 0; g < 4; ++g) CHECK(pm.group_bits(g) == std::vector<int>{3, 2, 1, 2}[g]);
}

TEST_CASE("one 2-bit column packs to a single padded word") {
  QuantizationResult r = with_plan({2}, 4, 1);
  r.blocks[0].codes = {0, 1, 2, 3};
  const PackedModel pm = pack(r);
  CHECK(pm.weights_stream == std::vector<std::uint8_t>{0xE4, 0x00, 0x00, 0x00});
  CHECK(pm.offsets == std::vector<std::uint64_t>{0, 32});
  CHECK(pm.zeros_stream.size() == 4);
}

TEST_CASE("streams match word-at-a-time packing") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(seed);
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng() % 40);
    const QuantizationResult r = fixture::random_result(rng, n, 1 + static_cast<Eigen::Index>(rng() % 6), 1 + rng() % 7, 2 + static_cast<int>(seed % 2));
    const PackedModel pm = pack(r);
    REQUIRE(pm.weights_stream == expected_weights(r));
    REQUIRE(pm.zeros_stream == expected_zeros(r));
    for (std::size_t g = 0; g < pm.groups(); ++g) {
      const auto bits = static_cast<std::uint64_t>(r.plan.bits[g]);
      REQUIRE(pm.offsets[g + 1] - pm.offsets[g] == pm.group_size * ((n * bits + 31) / 32 * 32));
    }
  }
}

TEST_CASE("offsets equal n * beta * bits when columns fill whole words") {
  std::mt19937_64 rng(1);
  const QuantizationResult r = fixture::random_result(rng, 32, 8, 6, 3);
  const PackedModel pm = pack(r);
  for (std::size_t g = 0; g < 6; ++g)
    CHECK(pm.offsets[g + 1] - pm.offsets[g] == 32u * 8u * static_cast<unsigned>(r.plan.bits[g]));
  CHECK(packed_size_report(pm).padding_bits == 0);
}

TEST_CASE("pack and unpack round-trip exactly") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    std::mt19937_64 rng(seed);
    const bool bin = seed % 3 == 0;
    const QuantizationResult r = fixture::random_result(rng, 1 + static_cast<Eigen::Index>(rng() % 20), 1 + static_cast<Eigen::Index>(rng() % 9), rng() % 9, 2 + static_cast<int>(seed % 2), bin);
    const PackedModel pm = pack(r);
    const auto bytes = encode_packed(pm);
    const PackedModel back = decode_packed(bytes);
    REQUIRE(back == pm);
    REQUIRE(encode_packed(back) == bytes);
    const QuantizationResult u = unpack(back);
    REQUIRE(u.plan.bits == r.plan.bits);
    REQUIRE(u.plan.p_star == r.plan.p_star);
    REQUIRE(u.blocks.size() == r.blocks.size());
    for (std::size_t g = 0; g < r.blocks.size(); ++g) {
      REQUIRE(u.blocks[g].codes == r.blocks[g].codes);
      REQUIRE(u.blocks[g].params.scale == r.blocks[g].params.scale);
      REQUIRE(u.blocks[g].params.zero == r.blocks[g].params.zero);
      REQUIRE(u.blocks[g].params.binary == r.blocks[g].params.binary);
      REQUIRE(dequantize(u.blocks[g]) == dequantize(r.blocks[g]));
    }
  }
}

TEST_CASE("files round-trip through disk") {
  oracle::TempDir dir;
  std::mt19937_64 rng(4);
  const PackedModel pm = pack(fixture::random_result(rng, 5, 4, 4, 2));
  save_packed(pm, dir / "m.slmq");
  CHECK(load_packed(dir / "m.slmq") == pm);
}

TEST_CASE("empty model is header plus empty sections") {
  QuantizationResult r;
  r.rows = 4;
  r.cols = 0;
  r.group_size = 128;
  r.plan.target_bits = 2;
  const PackedModel pm = pack(r);
  const auto bytes = encode_packed(pm);
  CHECK(bytes.size() == 24 + 5 * 8 + 8);
  const QuantizationResult u = unpack(decode_packed(bytes));
  CHECK(u.plan.bits.empty());
  CHECK(u.blocks.empty());
}

TEST_CASE("header layout") {
  std::mt19937_64 rng(2);
  const PackedModel pm = pack(fixture::random_result(rng, 3, 2, 4, 3, true));
  const auto b = encode_packed(pm);
  CHECK(std::memcmp(b.data(), "SLMQ", 4) == 0);
  CHECK(b[4] == 1);
  CHECK(b[5] == 0);
  CHECK(b[6] == 1);  // binarizer flag
  CHECK(b[8] == 3);
  CHECK(b[12] == 8);
  CHECK(b[16] == 2);
  CHECK(b[20] == 3);
  CHECK(b[21] == 0);
  CHECK(b[22] == 0);
  CHECK(b[23] == 0);
}

TEST_CASE("corrupted files are rejected") {
  std::mt19937_64 rng(3);
  const auto good = encode_packed(pack(fixture::random_result(rng, 6, 4, 5, 2)));

  auto bytes = good;
  bytes[0] = 'X';
  CHECK(code_of([&] { decode_packed(bytes); }) == ErrorCode::BadMagic);

  bytes = good;
  bytes[4] = 2;
  CHECK(code_of([&] { decode_packed(bytes); }) == ErrorCode::UnsupportedVersion);

  bytes = good;
  bytes.resize(bytes.size() - 3);
  CHECK(code_of([&] { decode_packed(bytes); }) == ErrorCode::TruncatedPayload);

  bytes = good;
  bytes.push_back(0);
  CHECK(code_of([&] { decode_packed(bytes); }) == ErrorCode::PayloadSizeMismatch);

  for (std::size_t entry = 1; entry <= 5; ++entry) {
    bytes = good;
    bytes[offsets_position(bytes) + 8 * entry] ^= 0x20;
    CHECK(code_of([&] { decode_packed(bytes); }) == ErrorCode::CorruptOffsets);
  }
}

TEST_CASE("non-zero padding and out-of-range widths are rejected") {
  QuantizationResult r = with_plan({2}, 4, 1);
  PackedModel pm = pack(r);
  pm.weights_stream[3] = 0x80;
  CHECK(code_of([&] { unpack(pm); }) == ErrorCode::CodeOutOfRange);

  pm = pack(r);
  pm.zeros_stream[2] = 1;
  CHECK(code_of([&] { unpack(pm); }) == ErrorCode::CodeOutOfRange);

  pm = pack(with_plan({2, 2}, 4, 1));
  pm.bit_codes[0] = 0x03 | 0x04;  // width 4 against target 2
  CHECK(code_of([&] { unpack(pm); }) == ErrorCode::CodeOutOfRange);
}

TEST_CASE("pack rejects inconsistent plans") {
  QuantizationResult r = with_plan({1, 3}, 2, 2);
  r.plan.bits[0] = 2;
  CHECK(code_of([&] { pack(r); }) == ErrorCode::InconsistentPlan);
  r = with_plan({2, 2}, 2, 2);
  r.blocks.pop_back();
  CHECK(code_of([&] { pack(r); }) == ErrorCode::InconsistentPlan);
  r = with_plan({2}, 2, 2);
  r.cols = 3;
  CHECK(code_of([&] { pack(r); }) == ErrorCode::InconsistentPlan);
}

TEST_CASE("distinct inputs give distinct bytes") {
  std::mt19937_64 rng(8);
  const QuantizationResult r = fixture::random_result(rng, 7, 5, 4, 2);
  const auto base = encode_packed(pack(r));
  for (int trial = 0; trial < 100; ++trial) {
    QuantizationResult s = r;
    auto& qb = s.blocks[rng() % s.blocks.size()];
    const std::uint32_t qmax = (1u << qb.params.bit_width) - 1;
    switch (trial % 3) {
      case 0: {
        auto& c = qb.codes[rng() % qb.codes.size()];
        c = static_cast<std::uint8_t>((c + 1) % (qmax + 1));
        break;
      }
      case 1: {
        auto& z = qb.params.zero[rng() % qb.params.zero.size()];
        z = (z + 1) % (qmax + 1);
        break;
      }
      default:
        qb.params.scale[rng() % qb.params.scale.size()] *= 1.5f;
    }
    REQUIRE(encode_packed(pack(s)) != base);
  }
}

TEST_CASE("size report") {
  SUBCASE("uniform 2-bit") {
    std::mt19937_64 rng(0);
    QuantizationResult r = with_plan({2, 2, 2, 2}, 5, 8);
    const SizeReport rep = packed_size_report(pack(r));
    CHECK(rep.bits_per_weight == 2.0);
    CHECK(rep.padding_bits == 4 * 8 * (32 - 10));
  }
  SUBCASE("balanced plan") {
    const SizeReport rep = packed_size_report(pack(with_plan({1, 2, 3, 2, 3, 1}, 9, 4)));
    CHECK(rep.bits_per_weight == 2.0);
    CHECK(rep.padded_bits_per_weight > 2.0);
  }
  SUBCASE("random plans") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      std::mt19937_64 rng(seed);
      const auto n = 1 + static_cast<Eigen::Index>(rng() % 30), beta = 1 + static_cast<Eigen::Index>(rng() % 10);
      const std::size_t k = 1 + rng() % 10;
      const QuantizationResult r = fixture::random_result(rng, n, beta, k, 2 + static_cast<int>(seed % 2));
      const PackedModel pm = pack(r);
      const SizeReport rep = packed_size_report(pm);
      double payload = 0.0;
      for (int b : r.plan.bits) payload += b * double(beta) * double(n);
      REQUIRE(rep.bits_per_weight == payload / (double(n) * double(r.cols)));
      REQUIRE(rep.bits_per_weight == r.plan.target_bits);
      REQUIRE(rep.total_bits == 8 * (pm.weights_stream.size() + pm.bit_codes.size() + 8 * pm.offsets.size() +
                                     4 * pm.scales.size() + pm.zeros_stream.size()));
    }
  }
}
