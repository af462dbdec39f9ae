#include <doctest.h>

#include "oracles.hpp"
#include "slimq/error.hpp"
#include "slimq/sqc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

using namespace slimq;

namespace {

Mask random_mask(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  Matrix delta = oracle::random_matrix(rows, cols, rng).array().square().matrix();
  std::uniform_int_distribution<Eigen::Index> pick(0, rows * cols - 1);
  for (int s = 0; s < 3; ++s) delta.data()[pick(rng)] = 500.0;
  return salient_mask_3sigma(delta);
}

}  // namespace

TEST_CASE("default grid has 101 candidates ordered outward from unity") {
  const auto grid = gamma_grid({});
  REQUIRE(grid.size() == 101);
  CHECK(grid.front() == 1.0);
  CHECK(std::count(grid.begin(), grid.end(), 1.0) == 1);
  CHECK(*std::min_element(grid.begin(), grid.end()) == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(*std::max_element(grid.begin(), grid.end()) == 1.1);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double a = std::fabs(grid[i - 1] - 1.0), b = std::fabs(grid[i] - 1.0);
    REQUIRE((a < b || (a == b && grid[i - 1] < grid[i])));
  }
}

TEST_CASE("grid without unity has exactly 2n points") {
  SqcConfig cfg;
  cfg.include_unity = false;
  cfg.steps = 3;
  cfg.lambda = 0.5;
  auto grid = gamma_grid(cfg);
  std::sort(grid.begin(), grid.end());
  REQUIRE(grid.size() == 6);
  CHECK(grid.front() == 0.5);
  CHECK(grid.back() == 1.5);
  CHECK(grid[1] == doctest::Approx(0.7));
  CHECK(std::find(grid.begin(), grid.end(), 1.0) == grid.end());
}

TEST_CASE("config is validated") {
  CHECK_THROWS_AS(gamma_grid(SqcConfig{0.0, 50}), Error);
  CHECK_THROWS_AS(gamma_grid(SqcConfig{1.0, 50}), Error);
  CHECK_THROWS_AS(gamma_grid(SqcConfig{0.1, 0}), Error);
}

TEST_CASE("block already on its grid keeps gamma 1 with zero loss") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> code(0, 3), zpick(0, 3), shift(-4, 2);
  Matrix block(16, 128);
  for (Eigen::Index i = 0; i < 16; ++i) {
    const double s = std::ldexp(1.0, shift(rng));
    const int z = zpick(rng);
    for (Eigen::Index j = 0; j < 128; ++j) block(i, j) = (code(rng) - z) * s;
    block(i, 0) = (0 - z) * s;
    block(i, 1) = (3 - z) * s;
  }
  const Mask empty = Mask::Constant(16, 128, false);
  const CalibratedBlock cb = calibrate_group(block, 2, empty);
  CHECK(cb.gamma == 1.0);
  CHECK(cb.loss() == 0.0);
  CHECK(cb.evaluations == 101);
  CHECK(dequantize(cb.block) == block);
}

TEST_CASE("calibrated loss is the grid minimum of the scalar objective") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    std::mt19937_64 rng(seed);
    const Matrix block = oracle::random_matrix(8, 32, rng);
    const Mask mask = random_mask(8, 32, rng);
    const int bits = 1 + static_cast<int>(seed % 4);
    const CalibratedBlock cb = calibrate_group(block, bits, mask);

    double best = std::numeric_limits<double>::infinity();
    for (double g : gamma_grid({})) best = std::min(best, oracle::gamma_loss(block, bits, g));
    REQUIRE(oracle::relative_error(cb.loss(), best) < 1e-12);
    double sal = 0.0;
    REQUIRE(oracle::relative_error(oracle::gamma_loss(block, bits, cb.gamma, &mask, &sal), cb.loss()) < 1e-12);
    REQUIRE(sal == doctest::Approx(cb.salient_loss).epsilon(1e-12));
    for (auto c : cb.block.codes) REQUIRE(c <= (1u << bits) - 1);
  }
}

constexpr int kStrictFixture = 200;

TEST_CASE("calibration never loses to the plain quantizer") {
  // Frozen fixture: 200 seeded 16x128 blocks at 2 bits.
  int strict = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    std::mt19937_64 rng(1000 + seed);
    const Matrix block = oracle::random_matrix(16, 128, rng);
    const Mask mask = random_mask(16, 128, rng);
    const CalibratedBlock cb = calibrate_group(block, 2, mask);
    const double vanilla = split_loss(block, quantize_uniform(block, 2), mask).total();
    REQUIRE(oracle::relative_error(vanilla, oracle::gamma_loss(block, 2, 1.0)) < 1e-12);
    REQUIRE(cb.loss() <= vanilla);
    if (cb.loss() < vanilla) ++strict;
  }
  MESSAGE("strict improvements: " << strict << " / 200");
  CHECK(strict >= 100);
  CHECK(strict == kStrictFixture);
}

TEST_CASE("gamma is invariant to power-of-two scaling") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    const Matrix block = oracle::random_matrix(4, 64, rng);
    const Mask mask = random_mask(4, 64, rng);
    const CalibratedBlock a = calibrate_group(block, 3, mask);
    const CalibratedBlock b = calibrate_group(block * 8.0, 3, mask);
    REQUIRE(a.gamma == b.gamma);
    REQUIRE(b.loss() == doctest::Approx(64.0 * a.loss()).epsilon(1e-12));
    REQUIRE(a.block.codes == b.block.codes);
  }
}

TEST_CASE("an empty mask puts everything in the unsalient term") {
  std::mt19937_64 rng(9);
  const Matrix block = oracle::random_matrix(6, 40, rng);
  const CalibratedBlock cb = calibrate_group(block, 2, Mask::Constant(6, 40, false));
  CHECK(cb.salient_loss == 0.0);
  CHECK(cb.unsalient_loss == doctest::Approx(oracle::gamma_loss(block, 2, cb.gamma)).epsilon(1e-12));
}

TEST_CASE("per-row gamma is never worse than a shared gamma") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed + 77);
    const Matrix block = oracle::random_matrix(8, 64, rng);
    const Mask mask = random_mask(8, 64, rng);
    SqcConfig cfg;
    cfg.per_row_gamma = true;
    const CalibratedBlock rows = calibrate_group(block, 2, mask, cfg);
    const CalibratedBlock shared = calibrate_group(block, 2, mask);
    REQUIRE(rows.row_gammas.size() == 8);
    REQUIRE(rows.loss() <= shared.loss() * (1 + 1e-12));
    const SplitLoss direct = split_loss(block, rows.block, mask);
    REQUIRE(direct.total() == doctest::Approx(rows.loss()).epsilon(1e-12));
  }
}

TEST_CASE("mask shape must match the block") {
  const Matrix block = Matrix::Ones(2, 4);
  CHECK_THROWS_AS(calibrate_group(block, 2, Mask::Constant(2, 3, false)), Error);
}
