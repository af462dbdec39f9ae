#include "slimq/sba.hpp"

#include "slimq/error.hpp"
#include "slimq/quant_core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace slimq {

void KlConfig::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature))
    throw Error(ErrorCode::InvalidArgument, "KL temperature must be finite and positive");
  if (!(epsilon > 0.0) || epsilon > 1e-3)
    throw Error(ErrorCode::InvalidArgument, "KL epsilon must lie in (0, 1e-3]");
}

double BitPlan::mean_bits() const {
  if (bits.empty()) return static_cast<double>(target_bits);
  return std::accumulate(bits.begin(), bits.end(), 0.0) / static_cast<double>(bits.size());
}

namespace {

// Floored, renormalized softmax of one output row.
void distribution(const double* row, Eigen::Index len, const KlConfig& cfg, std::vector<double>& out) {
  out.resize(static_cast<std::size_t>(len));
  double peak = -INFINITY;
  for (Eigen::Index j = 0; j < len; ++j) peak = std::max(peak, row[j] / cfg.temperature);
  double sum = 0.0;
  for (Eigen::Index j = 0; j < len; ++j) {
    out[j] = std::exp(row[j] / cfg.temperature - peak);
    sum += out[j];
  }
  double floored = 0.0;
  for (auto& p : out) {
    p = std::max(p / sum, cfg.epsilon);
    floored += p;
  }
  for (auto& p : out) p /= floored;
}

}  // namespace

double output_kl_from_outputs(const Matrix& y, const Matrix& y_hat, const KlConfig& cfg,
                              unsigned threads) {
  cfg.validate();
  if (y.rows() != y_hat.rows() || y.cols() != y_hat.cols())
    throw Error(ErrorCode::ShapeMismatch, "KL operands differ in shape");
  if (y.rows() == 0) return 0.0;
  std::vector<double> per_row(static_cast<std::size_t>(y.rows()));
  parallel_for(per_row.size(), threads, [&](std::size_t begin, std::size_t end) {
    std::vector<double> p, q;
    for (std::size_t r = begin; r < end; ++r) {
      const auto i = static_cast<Eigen::Index>(r);
      distribution(y.row(i).data(), y.cols(), cfg, p);
      distribution(y_hat.row(i).data(), y.cols(), cfg, q);
      double kl = 0.0;
      for (std::size_t j = 0; j < p.size(); ++j) kl += p[j] * std::log(p[j] / q[j]);
      per_row[r] = kl;
    }
  });
  // Ordered reduction keeps the result independent of the thread count.
  double total = 0.0;
  for (double v : per_row) total += v;
  return total / static_cast<double>(per_row.size());
}

double output_kl(const Matrix& x, const Matrix& w, const Matrix& w_hat, const KlConfig& cfg,
                 unsigned threads) {
  if (x.cols() != w.cols() || w.rows() != w_hat.rows() || w.cols() != w_hat.cols())
    throw Error(ErrorCode::ShapeMismatch, "output_kl shapes are inconsistent");
  const Matrix y = x * w.transpose();
  const Matrix y_hat = x * w_hat.transpose();
  return output_kl_from_outputs(y, y_hat, cfg, threads);
}

std::vector<std::size_t> salience_order(const std::vector<double>& group_mean) {
  std::vector<std::size_t> order(group_mean.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return group_mean[a] < group_mean[b]; });
  return order;
}

BitPlan plan_for_pairs(const std::vector<double>& group_mean, int target_bits, std::size_t pairs) {
  const std::size_t k = group_mean.size();
  if (2 * pairs > k) throw Error(ErrorCode::InvalidArgument, "more pairs than groups allow");
  BitPlan plan = uniform_plan(k, target_bits);
  const auto order = salience_order(group_mean);
  for (std::size_t i = 0; i < pairs; ++i) {
    plan.bits[order[i]] = target_bits - 1;
    plan.bits[order[k - 1 - i]] = target_bits + 1;
  }
  plan.p_star = pairs;
  return plan;
}

BitPlan uniform_plan(std::size_t groups, int target_bits) {
  BitPlan plan;
  plan.target_bits = target_bits;
  plan.bits.assign(groups, target_bits);
  return plan;
}

Matrix subsample_tokens(const Matrix& x, std::size_t max_tokens) {
  const auto t = static_cast<std::size_t>(x.rows());
  if (max_tokens == 0 || t <= max_tokens) return x;
  Matrix out(static_cast<Eigen::Index>(max_tokens), x.cols());
  for (std::size_t i = 0; i < max_tokens; ++i)
    out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(i * t / max_tokens));
  return out;
}

BitPlan allocate_bits(const Matrix& w, const Matrix& x, const SalienceMap& sal,
                      Eigen::Index group_size, int target_bits, const SbaConfig& cfg) {
  cfg.kl.validate();
  const auto m = w.cols();
  if (group_size <= 0 || m % group_size != 0 || m / group_size < 1)
    throw Error(ErrorCode::BadGroupSize,
                "group size " + std::to_string(group_size) + " does not divide " + std::to_string(m));
  if (target_bits < 2 || target_bits > 3)
    throw Error(ErrorCode::InvalidArgument, "target bits must be 2 or 3");
  if (x.rows() == 0) throw Error(ErrorCode::InsufficientCalibration, "no activations for the KL search");
  if (x.cols() != m) throw Error(ErrorCode::ShapeMismatch, "activation channels != weight columns");
  const auto k = static_cast<std::size_t>(m / group_size);
  if (sal.group_mean.size() != k) throw Error(ErrorCode::ShapeMismatch, "salience map has wrong group count");

  const Matrix xs = subsample_tokens(x, cfg.max_tokens);
  const Matrix y = xs * w.transpose();

  // Output contribution of group g fake-quantized at `bits`: x_g * w_hat_g^T.
  auto contribution = [&](std::size_t g, int bits) -> Matrix {
    const auto c0 = static_cast<Eigen::Index>(g) * group_size;
    const Matrix wq = fake_quantize(w.middleCols(c0, group_size), bits, cfg.binarize_1bit);
    return xs.middleCols(c0, group_size) * wq.transpose();
  };

  Matrix y_hat = Matrix::Zero(y.rows(), y.cols());
  std::vector<Matrix> at_target(k);
  for (std::size_t g = 0; g < k; ++g) {
    at_target[g] = contribution(g, target_bits);
    y_hat += at_target[g];
  }

  const auto order = salience_order(sal.group_mean);
  BitPlan result;
  result.kl_curve.reserve(k / 2 + 1);
  result.kl_curve.push_back(output_kl_from_outputs(y, y_hat, cfg.kl, cfg.threads));
  result.evaluations = 1;
  // Moving both pointers inward changes exactly two groups per step.
  for (std::size_t p = 1; p <= k / 2; ++p) {
    const std::size_t lo = order[p - 1], hi = order[k - p];
    y_hat += contribution(lo, target_bits - 1) - at_target[lo];
    y_hat += contribution(hi, target_bits + 1) - at_target[hi];
    result.kl_curve.push_back(output_kl_from_outputs(y, y_hat, cfg.kl, cfg.threads));
    ++result.evaluations;
  }

  std::size_t best = 0;
  for (std::size_t p = 1; p < result.kl_curve.size(); ++p)
    if (result.kl_curve[p] < result.kl_curve[best]) best = p;
  if (!std::isfinite(result.kl_curve[best]))
    throw Error(ErrorCode::NonFiniteIntermediate, "KL search produced a non-finite value");

  BitPlan plan = plan_for_pairs(sal.group_mean, target_bits, best);
  plan.kl_curve = std::move(result.kl_curve);
  plan.evaluations = result.evaluations;
  return plan;
}

}  // namespace slimq
