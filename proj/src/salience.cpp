#include "slimq/salience.hpp"

#include "slimq/error.hpp"

#include <cmath>
#include <string>

namespace slimq {

Matrix accumulate_hessian(const Matrix& tokens) {
  if (tokens.rows() == 0) throw Error(ErrorCode::EmptyCalibration, "no calibration tokens");
  Matrix h = Matrix::Zero(tokens.cols(), tokens.cols());
  h.selfadjointView<Eigen::Lower>().rankUpdate(tokens.transpose());
  h.triangularView<Eigen::StrictlyUpper>() = h.transpose();
  h /= static_cast<double>(tokens.rows());
  return h;
}

Matrix accumulate_hessian(const CalibrationSet& calib) {
  if (calib.token_count() == 0) throw Error(ErrorCode::EmptyCalibration, "no calibration tokens");
  const auto m = static_cast<Eigen::Index>(calib.channels());
  for (const auto& s : calib.samples)
    if (s.cols() != m) throw Error(ErrorCode::ShapeMismatch, "calibration samples differ in channels");
  return accumulate_hessian(calib.stacked());
}

HessianState damp_and_invert(const Matrix& hessian, double percdamp) {
  if (hessian.rows() != hessian.cols())
    throw Error(ErrorCode::ShapeMismatch, "Hessian must be square");
  if (!(percdamp >= 0.0) || !std::isfinite(percdamp))
    throw Error(ErrorCode::InvalidArgument, "percdamp must be a finite non-negative value");
  if (!hessian.allFinite())
    throw Error(ErrorCode::NotPositiveDefinite, "Hessian contains non-finite entries");

  HessianState hs;
  hs.hessian = hessian;
  const auto m = hessian.rows();
  const double mean_diag = m > 0 ? hessian.diagonal().mean() : 0.0;
  hs.damping = percdamp * mean_diag;
  if (!(hs.damping > 0.0)) hs.damping = kDampFloor;

  Matrix damped = hessian;
  damped.diagonal().array() += hs.damping;
  Eigen::LLT<Matrix> llt(damped);
  if (llt.info() != Eigen::Success)
    throw Error(ErrorCode::NotPositiveDefinite, "Cholesky of H + lambda I failed");
  const Matrix inverse = llt.solve(Matrix::Identity(m, m));
  hs.inv_diag = inverse.diagonal();

  // Upper factor of the inverse, as used for column-ordered error propagation.
  Eigen::LLT<Matrix> inv_llt(inverse);
  if (inv_llt.info() != Eigen::Success)
    throw Error(ErrorCode::NotPositiveDefinite, "Cholesky of (H + lambda I)^-1 failed");
  hs.chol_inv = inv_llt.matrixU();
  if (!hs.chol_inv.allFinite() || (hs.inv_diag.array() <= 0.0).any())
    throw Error(ErrorCode::NotPositiveDefinite, "inverse factors are not positive");
  return hs;
}

SalienceMap salience_map(const Matrix& w, const HessianState& hs, Eigen::Index group_size,
                         SalienceDenominator denom) {
  const auto n = w.rows(), m = w.cols();
  if (m != hs.channels()) throw Error(ErrorCode::ShapeMismatch, "weight columns != Hessian size");
  if (group_size <= 0 || m % group_size != 0)
    throw Error(ErrorCode::BadGroupSize,
                "group size " + std::to_string(group_size) + " does not divide " + std::to_string(m));

  const Vector d = denom == SalienceDenominator::InverseDiagonal ? hs.inv_diag
                                                                 : Vector(hs.chol_inv.diagonal());
  SalienceMap sal;
  sal.delta.resize(n, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const double d2 = d[j] * d[j];
    sal.delta.col(j) = w.col(j).array().square() / d2;
  }

  sal.channel_mean.resize(static_cast<std::size_t>(m));
  for (Eigen::Index j = 0; j < m; ++j)
    sal.channel_mean[j] = n > 0 ? sal.delta.col(j).mean() : 0.0;

  const auto k = m / group_size;
  sal.group_mean.resize(static_cast<std::size_t>(k));
  for (Eigen::Index g = 0; g < k; ++g)
    sal.group_mean[g] = n > 0 ? sal.delta.middleCols(g * group_size, group_size).mean() : 0.0;
  return sal;
}

Mask salient_mask_3sigma(const Matrix& delta_block) {
  Mask mask = Mask::Constant(delta_block.rows(), delta_block.cols(), false);
  if (delta_block.size() == 0) return mask;
  const double mean = delta_block.mean();
  const double var = (delta_block.array() - mean).square().mean();
  const double threshold = mean + 3.0 * std::sqrt(var);
  mask = (delta_block.array() > threshold).matrix();
  return mask;
}

}  // namespace slimq
