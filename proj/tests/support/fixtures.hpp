#pragma once

// Random but structurally valid inputs shared by the format and kernel tests.

#include "slimq/pipeline.hpp"

#include <random>

namespace fixture {

using namespace slimq;

// Random plan-balanced result with arbitrary codes and parameters.
inline QuantizationResult random_result(std::mt19937_64& rng, Eigen::Index n, Eigen::Index beta, std::size_t k,
                                 int target, bool binarize = false) {
  QuantizationResult r;
  r.rows = n;
  r.group_size = beta;
  r.cols = beta * static_cast<Eigen::Index>(k);
  r.binarize_1bit = binarize;
  std::vector<double> salience(k);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& s : salience) s = u(rng);
  r.plan = plan_for_pairs(salience, target, std::uniform_int_distribution<std::size_t>(0, k / 2)(rng));
  for (std::size_t g = 0; g < k; ++g) {
    const int bits = r.plan.bits[g];
    const std::uint32_t qmax = (1u << bits) - 1;
    QuantizedBlock qb;
    qb.rows = n;
    qb.cols = beta;
    qb.params.bit_width = bits;
    qb.params.binary = binarize && bits == 1;
    std::uniform_int_distribution<std::uint32_t> code(0, qmax);
    for (Eigen::Index i = 0; i < n; ++i) {
      qb.params.scale.push_back(static_cast<float>(u(rng) + 1e-3));
      qb.params.zero.push_back(qb.params.binary ? 0 : code(rng));
    }
    for (Eigen::Index e = 0; e < n * beta; ++e) qb.codes.push_back(static_cast<std::uint8_t>(code(rng)));
    r.blocks.push_back(std::move(qb));
  }
  return r;
}

}  // namespace fixture
