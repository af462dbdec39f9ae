#include "slimq/pipeline.hpp"

#include "slimq/error.hpp"

#include <chrono>
#include <string>

namespace slimq {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

struct GroupOutcome {
  QuantizedBlock block;
  double gamma = 1.0;
};

GroupOutcome quantize_group(const Matrix& block, int bits, const Mask& mask, const PipelineConfig& cfg) {
  if (bits == 1 && cfg.binarize_1bit) return {binarize_rows(block), 1.0};
  if (cfg.sqc_enabled) {
    CalibratedBlock cb = calibrate_group(block, bits, mask, cfg.sqc);
    return {std::move(cb.block), cb.gamma};
  }
  return {quantize_uniform(block, bits), 1.0};
}

// Requantizes the group column by column with the parameters already chosen,
// pushing each column's error onto the later columns of the group, then onto
// the rest of the matrix in one product.
void columnwise_compensation(Matrix& work, const Matrix& u, Eigen::Index c0, Eigen::Index width,
                             QuantizedBlock& qb) {
  const auto n = work.rows(), m = work.cols();
  const auto& p = qb.params;
  Matrix err(n, width);
  for (Eigen::Index j = 0; j < width; ++j) {
    const auto c = c0 + j;
    const double d = u(c, c);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto code = quantize_value(work(i, c), p.scale[i], p.zero[i], p.bit_width, p.binary);
      qb.codes[static_cast<std::size_t>(i * width + j)] = code;
      err(i, j) = (work(i, c) - dequantize_value(code, p.scale[i], p.zero[i], p.binary)) / d;
    }
    const auto rest_in_group = width - j - 1;
    if (rest_in_group > 0)
      work.middleCols(c + 1, rest_in_group).noalias() -= err.col(j) * u.block(c, c + 1, 1, rest_in_group);
  }
  const auto tail = m - c0 - width;
  if (tail > 0) work.rightCols(tail).noalias() -= err * u.block(c0, c0 + width, width, tail);
}

}  // namespace

void PipelineConfig::validate() const {
  if (group_size <= 0) throw Error(ErrorCode::BadGroupSize, "group size must be positive");
  if (bits < 2 || bits > 3) throw Error(ErrorCode::InvalidArgument, "average bits must be 2 or 3");
  if (!(percdamp >= 0.0)) throw Error(ErrorCode::InvalidArgument, "percdamp must be non-negative");
  kl.validate();
  sqc.validate();
}

Matrix QuantizationResult::dequantized() const {
  Matrix out(rows, cols);
  for (std::size_t g = 0; g < blocks.size(); ++g)
    out.middleCols(static_cast<Eigen::Index>(g) * group_size, group_size) = dequantize(blocks[g]);
  return out;
}

double proxy_loss(const Matrix& w, const Matrix& w_hat, const HessianState& hs) {
  if (w.rows() != w_hat.rows() || w.cols() != w_hat.cols() || w.cols() != hs.channels())
    throw Error(ErrorCode::ShapeMismatch, "proxy_loss shapes are inconsistent");
  const Matrix diff = w_hat - w;
  const Matrix dh = diff * hs.hessian;
  return dh.cwiseProduct(diff).sum() + hs.damping * diff.squaredNorm();
}

double reconstruction_mse(const Matrix& w, const Matrix& w_hat) {
  if (w.size() == 0) return 0.0;
  return block_mse(w, w_hat) / static_cast<double>(w.size());
}

QuantizationResult quantize_layer(const Matrix& w, const CalibrationSet& calib, const PipelineConfig& cfg) {
  cfg.validate();
  const auto n = w.rows(), m = w.cols();
  const auto beta = cfg.group_size;
  if (m == 0 || m % beta != 0)
    throw Error(ErrorCode::BadGroupSize,
                "group size " + std::to_string(beta) + " does not divide " + std::to_string(m));
  if (!w.allFinite()) throw Error(ErrorCode::NonFiniteValue, "weights contain NaN/Inf");
  if (calib.token_count() == 0) throw Error(ErrorCode::EmptyCalibration, "no calibration tokens");
  if (calib.channels() != static_cast<std::size_t>(m))
    throw Error(ErrorCode::ShapeMismatch, "calibration channels != weight columns");

  QuantizationResult result;
  result.rows = n;
  result.cols = m;
  result.group_size = beta;
  result.binarize_1bit = cfg.binarize_1bit;
  const auto k = static_cast<std::size_t>(m / beta);

  auto t0 = Clock::now();
  const Matrix tokens = calib.stacked();
  const HessianState hs = damp_and_invert(accumulate_hessian(tokens), cfg.percdamp);
  const SalienceMap sal = salience_map(w, hs, beta, cfg.denominator);
  result.timing.hessian_ms = elapsed_ms(t0);

  t0 = Clock::now();
  if (cfg.sba_enabled) {
    SbaConfig sba;
    sba.kl = cfg.kl;
    sba.max_tokens = cfg.max_kl_tokens;
    sba.binarize_1bit = cfg.binarize_1bit;
    sba.threads = cfg.threads;
    result.plan = allocate_bits(w, tokens, sal, beta, cfg.bits, sba);
  } else {
    result.plan = uniform_plan(k, cfg.bits);
  }
  result.timing.allocation_ms = elapsed_ms(t0);

  t0 = Clock::now();
  Matrix work = w;
  const Matrix& u = hs.chol_inv;
  result.blocks.reserve(k);
  for (std::size_t g = 0; g < k; ++g) {
    const auto c0 = static_cast<Eigen::Index>(g) * beta;
    const Mask mask = salient_mask_3sigma(sal.delta.middleCols(c0, beta));
    result.mask_density.push_back(mask.size() ? static_cast<double>(mask.count()) / mask.size() : 0.0);

    const Matrix block = work.middleCols(c0, beta);
    GroupOutcome out = quantize_group(block, result.plan.bits[g], mask, cfg);

    if (cfg.compensation_enabled && cfg.inner_columnwise) {
      columnwise_compensation(work, u, c0, beta, out.block);
    } else if (cfg.compensation_enabled) {
      Matrix err = block - dequantize(out.block);
      for (Eigen::Index j = 0; j < beta; ++j) err.col(j) /= u(c0 + j, c0 + j);
      const auto tail = m - c0 - beta;
      if (tail > 0) work.rightCols(tail).noalias() -= err * u.block(c0, c0 + beta, beta, tail);
    }
    if (!work.allFinite())
      throw Error(ErrorCode::NonFiniteIntermediate, "compensation produced NaN/Inf after group " + std::to_string(g));

    result.gammas.push_back(out.gamma);
    result.blocks.push_back(std::move(out.block));
  }
  result.timing.quantization_ms = elapsed_ms(t0);

  t0 = Clock::now();
  const Matrix w_hat = result.dequantized();
  result.proxy_loss = proxy_loss(w, w_hat, hs);
  result.recon_mse = reconstruction_mse(w, w_hat);
  result.recon_kl = output_kl(subsample_tokens(tokens, cfg.max_kl_tokens), w, w_hat, cfg.kl, cfg.threads);
  result.timing.metrics_ms = elapsed_ms(t0);
  return result;
}

}  // namespace slimq
