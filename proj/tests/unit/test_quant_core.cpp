#include <doctest.h>

#include "oracles.hpp"
#include "slimq/error.hpp"
#include "slimq/quant_core.hpp"

using namespace slimq;

namespace {

Matrix row(std::initializer_list<double> v) {
  Matrix m(1, static_cast<Eigen::Index>(v.size()));
  Eigen::Index j = 0;
  for (double x : v) m(0, j++) = x;
  return m;
}

}  // namespace

TEST_CASE("row [0,1,2,3] at 2 bits maps onto the integer grid") {
  const QuantizedBlock qb = quantize_uniform(row({0, 1, 2, 3}), 2);
  CHECK(qb.params.scale[0] == 1.0f);
  CHECK(qb.params.zero[0] == 0);
  CHECK(qb.codes == std::vector<std::uint8_t>{0, 1, 2, 3});
  const Matrix d = dequantize(qb);
  CHECK(d == row({0, 1, 2, 3}));
}

TEST_CASE("constant rows reconstruct their value") {
  // [5,5,5]: the zero-inclusive range [0,5] gives scale 5/3, zero 0 and code 3.
  const QuantizedBlock qb = quantize_uniform(row({5, 5, 5}), 2);
  CHECK(qb.params.zero[0] == 0);
  CHECK(qb.codes == std::vector<std::uint8_t>{3, 3, 3});
  const Matrix d = dequantize(qb);
  for (Eigen::Index j = 0; j < 3; ++j) CHECK(d(0, j) == doctest::Approx(5.0).epsilon(1e-5));

  // The all-zero row is the degenerate range.
  const QuantizedBlock z = quantize_uniform(row({0, 0, 0}), 3);
  CHECK(z.params.scale[0] > 0.0f);
  CHECK(z.params.zero[0] == 0);
  CHECK(dequantize(z) == row({0, 0, 0}));

  const QuantizedBlock neg = quantize_uniform(row({-2, -2}), 2);
  const Matrix dn = dequantize(neg);
  CHECK(dn(0, 0) == doctest::Approx(-2.0).epsilon(1e-5));
}

TEST_CASE("codes match a scalar reference on 200 random rows") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int bits = 1 + trial % 4;
    const Matrix block = oracle::random_matrix(1, 37, rng, 0.1 + trial * 0.01);
    std::vector<double> values(block.data(), block.data() + block.size());
    const auto ref = oracle::quantize_row(values, bits);
    const QuantizedBlock qb = quantize_uniform(block, bits);
    REQUIRE(qb.params.scale[0] == ref.scale);
    REQUIRE(qb.params.zero[0] == ref.zero);
    for (Eigen::Index j = 0; j < block.cols(); ++j) REQUIRE(qb.codes[j] == ref.codes[j]);
  }
}

TEST_CASE("dequantize identities") {
  QuantizedBlock qb;
  qb.rows = 1;
  qb.cols = 4;
  qb.codes = {0, 1, 2, 3};
  qb.params = {2, {1.0f}, {0}, false};
  CHECK(dequantize(qb) == row({0, 1, 2, 3}));

  qb.codes = {2, 2, 2, 2};
  qb.params.zero = {2};
  qb.params.scale = {0.37f};
  CHECK(dequantize(qb) == row({0, 0, 0, 0}));
}

TEST_CASE("values already on the grid are recovered exactly") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> code_dist;
  for (int trial = 0; trial < 100; ++trial) {
    const int bits = 1 + trial % 4;
    const int qmax = (1 << bits) - 1;
    const std::uint32_t zero = static_cast<std::uint32_t>(code_dist(rng) % (qmax + 1));
    const float scale = static_cast<float>(0.01 + (trial % 13) * 0.173);
    Matrix block(1, 16);
    for (Eigen::Index j = 0; j < 16; ++j) {
      const int c = j == 0 ? 0 : j == 1 ? qmax : code_dist(rng) % (qmax + 1);
      block(0, j) = (c - static_cast<double>(zero)) * scale;
    }
    const QuantizedBlock qb = quantize_uniform(block, bits);
    REQUIRE(dequantize(qb) == block);
  }
}

TEST_CASE("quantize after dequantize is idempotent on codes") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const int bits = 1 + trial % 4;
    const Matrix block = oracle::random_matrix(6, 32, rng);
    const QuantizedBlock qb = quantize_uniform(block, bits);
    const QuantizedBlock again = quantize_uniform(dequantize(qb), bits, qb.params);
    REQUIRE(again.codes == qb.codes);
  }
}

TEST_CASE("derived parameters bound the per-element error") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const int bits = 1 + trial % 4;
    const Matrix block = oracle::random_matrix(4, 64, rng);
    const QuantizedBlock qb = quantize_uniform(block, bits);
    const Matrix d = dequantize(qb);
    const int qmax = (1 << bits) - 1;
    for (Eigen::Index i = 0; i < block.rows(); ++i) {
      const double s = qb.params.scale[i];
      for (Eigen::Index j = 0; j < block.cols(); ++j) {
        const bool clamped = qb.code(i, j) == 0 || qb.code(i, j) == qmax;
        const double bound = (clamped ? 1.0 : 0.5) * s * (1 + 1e-6);
        REQUIRE(std::abs(d(i, j) - block(i, j)) <= bound);
      }
    }
  }
}

TEST_CASE("rounding is half-to-even") {
  QuantizedBlock qb = quantize_uniform(row({0.5, 1.5, 2.5, 0}), 2, GroupQuantParams{2, {1.0f}, {0}, false});
  CHECK(qb.codes == std::vector<std::uint8_t>{0, 2, 2, 0});
}

TEST_CASE("binarize") {
  const Binarized a = binarize(row({1, -1, 1}));
  CHECK(a.signs == row({1, -1, 1}));
  CHECK(a.alpha == 1.0);

  const Binarized z = binarize(Matrix::Zero(2, 3));
  CHECK((z.signs.array() == 1.0).all());
  CHECK(z.alpha == 0.0);

  std::mt19937_64 rng(2);
  const Matrix block = oracle::random_matrix(8, 8, rng);
  double l1 = 0.0;
  for (Eigen::Index i = 0; i < 8; ++i)
    for (Eigen::Index j = 0; j < 8; ++j) l1 += std::abs(block(i, j));
  CHECK(binarize(block).alpha == doctest::Approx(l1 / 64).epsilon(1e-12));

  // alpha ignores sign flips
  Matrix flipped = block;
  flipped.row(3) *= -1;
  flipped(0, 0) *= -1;
  CHECK(binarize(flipped).alpha == doctest::Approx(binarize(block).alpha).epsilon(1e-14));

  const QuantizedBlock qb = binarize_rows(row({2, -4, 0}));
  CHECK(qb.params.binary);
  CHECK(qb.codes == std::vector<std::uint8_t>{1, 0, 1});
  CHECK(dequantize(qb) == row({2, -2, 2}));
}

TEST_CASE("block_mse") {
  std::mt19937_64 rng(4);
  const Matrix a = oracle::random_matrix(5, 9, rng), b = oracle::random_matrix(5, 9, rng);
  CHECK(block_mse(a, a) == 0.0);
  CHECK(block_mse(row({0, 0}), row({1, 1})) == 2.0);
  double ref = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) ref += (a.data()[i] - b.data()[i]) * (a.data()[i] - b.data()[i]);
  CHECK(oracle::relative_error(block_mse(a, b), ref) < 1e-6);
  CHECK_THROWS_AS(block_mse(a, Matrix::Zero(5, 8)), Error);
}

TEST_CASE("bit widths outside [1,4] are rejected") {
  CHECK_THROWS_AS(quantize_uniform(row({1, 2}), 0), Error);
  CHECK_THROWS_AS(quantize_uniform(row({1, 2}), 5), Error);
}
