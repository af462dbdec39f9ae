#pragma once

// Salience-determined bit allocation: groups are ranked by mean salience and
// a double-pointer search trades p lowest-salience groups down to N-1 bits
// against the p highest-salience groups up to N+1 bits, keeping the average
// at N. The p minimizing output KL divergence wins.

#include "slimq/matrix.hpp"
#include "slimq/salience.hpp"

#include <cstddef>
#include <vector>

namespace slimq {

struct KlConfig {
  double temperature = 1.0;
  double epsilon = 1e-8;

  void validate() const;
};

struct SbaConfig {
  KlConfig kl;
  std::size_t max_tokens = 4096;  // KL rows are subsampled with a uniform stride above this
  bool binarize_1bit = false;
  unsigned threads = 0;
};

struct BitPlan {
  std::vector<int> bits;        // one width per group, in {N-1, N, N+1}
  int target_bits = 2;
  std::size_t p_star = 0;
  std::vector<double> kl_curve; // KL at p = 0 .. floor(k/2); empty for fixed plans
  std::size_t evaluations = 0;  // candidates scored by the search

  double mean_bits() const;
};

/// Mean over token rows of KL(softmax(x w^T / T) || softmax(x w_hat^T / T)),
/// each distribution floored at epsilon and renormalized.
double output_kl(const Matrix& x, const Matrix& w, const Matrix& w_hat, const KlConfig& cfg,
                 unsigned threads = 1);

/// Same objective with precomputed outputs (rows are tokens).
double output_kl_from_outputs(const Matrix& y, const Matrix& y_hat, const KlConfig& cfg,
                              unsigned threads = 1);

/// Group indices sorted by ascending mean salience, ties by ascending index.
std::vector<std::size_t> salience_order(const std::vector<double>& group_mean);

/// Plan with p groups at N-1 and p at N+1 according to the salience order.
BitPlan plan_for_pairs(const std::vector<double>& group_mean, int target_bits, std::size_t pairs);

/// Every group at target_bits.
BitPlan uniform_plan(std::size_t groups, int target_bits);

/// Rows kept for the KL objective: all rows when t <= max_tokens, else a uniform stride.
Matrix subsample_tokens(const Matrix& x, std::size_t max_tokens);

BitPlan allocate_bits(const Matrix& w, const Matrix& x, const SalienceMap& sal,
                      Eigen::Index group_size, int target_bits, const SbaConfig& cfg = {});

}  // namespace slimq
