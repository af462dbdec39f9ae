#include "slimq/sqc.hpp"

#include "slimq/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace slimq {

void SqcConfig::validate() const {
  if (!(lambda > 0.0 && lambda < 1.0)) throw Error(ErrorCode::InvalidArgument, "gamma lambda must lie in (0,1)");
  if (steps < 1) throw Error(ErrorCode::InvalidArgument, "gamma steps must be >= 1");
}

std::vector<double> gamma_grid(const SqcConfig& cfg) {
  cfg.validate();
  const int count = 2 * cfg.steps;
  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(count) + 1);
  const double lo = 1.0 - cfg.lambda, hi = 1.0 + cfg.lambda;
  for (int i = 0; i < count; ++i)
    grid.push_back(i == count - 1 ? hi : lo + (hi - lo) * i / (count - 1));
  if (cfg.include_unity && std::find(grid.begin(), grid.end(), 1.0) == grid.end()) grid.push_back(1.0);
  std::stable_sort(grid.begin(), grid.end(), [](double a, double b) {
    const double da = std::abs(a - 1.0), db = std::abs(b - 1.0);
    return da != db ? da < db : a < b;
  });
  return grid;
}

QuantizedBlock quantize_with_gamma(const Matrix& block, int bits, double gamma) {
  GroupQuantParams params;
  params.bit_width = bits;
  params.scale.resize(static_cast<std::size_t>(block.rows()));
  params.zero.resize(static_cast<std::size_t>(block.rows()));
  for (Eigen::Index i = 0; i < block.rows(); ++i)
    derive_row_params(block.row(i).data(), block.cols(), bits, gamma, params.scale[i], params.zero[i]);
  return quantize_uniform(block, bits, params);
}

SplitLoss split_loss(const Matrix& block, const QuantizedBlock& qb, const Mask& mask) {
  if (mask.rows() != block.rows() || mask.cols() != block.cols())
    throw Error(ErrorCode::ShapeMismatch, "mask does not match block");
  const Matrix err = (block - dequantize(qb)).array().square().matrix();
  SplitLoss loss;
  for (Eigen::Index i = 0; i < err.rows(); ++i)
    for (Eigen::Index j = 0; j < err.cols(); ++j) (mask(i, j) ? loss.salient : loss.unsalient) += err(i, j);
  return loss;
}

namespace {

CalibratedBlock calibrate_shared(const Matrix& block, int bits, const Mask& mask,
                                 const std::vector<double>& grid) {
  CalibratedBlock best;
  double best_loss = std::numeric_limits<double>::infinity();
  for (double gamma : grid) {
    QuantizedBlock qb = quantize_with_gamma(block, bits, gamma);
    const SplitLoss loss = split_loss(block, qb, mask);
    ++best.evaluations;
    if (loss.total() < best_loss) {
      best_loss = loss.total();
      best.block = std::move(qb);
      best.gamma = gamma;
      best.salient_loss = loss.salient;
      best.unsalient_loss = loss.unsalient;
    }
  }
  return best;
}

}  // namespace

CalibratedBlock calibrate_group(const Matrix& block, int bits, const Mask& mask, const SqcConfig& cfg) {
  const auto grid = gamma_grid(cfg);
  if (!cfg.per_row_gamma) return calibrate_shared(block, bits, mask, grid);

  // Rows share nothing but the grid; each picks its own gamma.
  CalibratedBlock out;
  out.block.rows = block.rows();
  out.block.cols = block.cols();
  out.block.codes.resize(static_cast<std::size_t>(block.size()));
  out.block.params.bit_width = bits;
  out.block.params.scale.resize(static_cast<std::size_t>(block.rows()));
  out.block.params.zero.resize(static_cast<std::size_t>(block.rows()));
  for (Eigen::Index i = 0; i < block.rows(); ++i) {
    const Matrix row = block.row(i);
    const Mask row_mask = mask.row(i);
    CalibratedBlock r = calibrate_shared(row, bits, row_mask, grid);
    std::copy(r.block.codes.begin(), r.block.codes.end(), out.block.codes.begin() + i * block.cols());
    out.block.params.scale[i] = r.block.params.scale[0];
    out.block.params.zero[i] = r.block.params.zero[0];
    out.row_gammas.push_back(r.gamma);
    out.salient_loss += r.salient_loss;
    out.unsalient_loss += r.unsalient_loss;
    out.evaluations += r.evaluations;
  }
  if (!out.row_gammas.empty()) out.gamma = out.row_gammas.front();
  return out;
}

}  // namespace slimq
