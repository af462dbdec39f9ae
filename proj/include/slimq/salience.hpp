#pragma once

#include "slimq/matrix.hpp"
#include "slimq/tensor_store.hpp"

#include <vector>

namespace slimq {

inline constexpr double kDampFloor = 1e-8;

/// Damped Hessian proxy and its inverse factors. Immutable once built.
struct HessianState {
  Matrix hessian;         // undamped H, m x m
  double damping = 0.0;   // lambda added to the diagonal
  Vector inv_diag;        // diag((H + lambda I)^-1)
  Matrix chol_inv;        // upper U with (H + lambda I)^-1 = U^T U

  Eigen::Index channels() const { return hessian.rows(); }
};

struct SalienceMap {
  Matrix delta;                     // n x m, per element
  std::vector<double> group_mean;   // k = m / beta, block averages over all rows
  std::vector<double> channel_mean; // m, column averages
};

/// H = (1/T) sum_t x_t x_t^T over every token of every sample.
Matrix accumulate_hessian(const CalibrationSet& calib);
Matrix accumulate_hessian(const Matrix& tokens);

/// lambda = percdamp * mean(diag H), floored at 1e-8.
HessianState damp_and_invert(const Matrix& hessian, double percdamp);

enum class SalienceDenominator {
  InverseDiagonal,  // [(H + lambda I)^-1]_jj
  CholeskyDiagonal, // U_jj of the inverse's Cholesky factor
};

/// delta_ij = w_ij^2 / d_j^2 with d from `denom`.
SalienceMap salience_map(const Matrix& w, const HessianState& hs, Eigen::Index group_size,
                         SalienceDenominator denom = SalienceDenominator::InverseDiagonal);

using Mask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// True where delta > mean + 3 * stddev (population) of the block.
Mask salient_mask_3sigma(const Matrix& delta_block);

}  // namespace slimq
