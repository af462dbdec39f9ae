#include "slimq/quant_core.hpp"

#include "slimq/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace slimq {

namespace {

void check_bits(int bits) {
  if (bits < kMinBits || bits > kMaxBits)
    throw Error(ErrorCode::InvalidArgument, "bit width " + std::to_string(bits) + " outside [1,4]");
}

std::uint8_t encode(double w, float scale, std::uint32_t zero, std::uint32_t qmax) {
  const double q = std::nearbyint(w / static_cast<double>(scale)) + static_cast<double>(zero);
  return static_cast<std::uint8_t>(std::clamp(q, 0.0, static_cast<double>(qmax)));
}

}  // namespace

std::uint8_t quantize_value(double w, float scale, std::uint32_t zero, int bits, bool binary) {
  if (binary) return w >= 0.0 ? 1 : 0;
  return encode(w, scale, zero, max_code(bits));
}

double dequantize_value(std::uint8_t code, float scale, std::uint32_t zero, bool binary) {
  const double c = code;
  return binary ? (2.0 * c - 1.0) * static_cast<double>(scale)
                : (c - static_cast<double>(zero)) * static_cast<double>(scale);
}

void derive_row_params(const double* row, Eigen::Index len, int bits, double gamma,
                       float& scale, std::uint32_t& zero) {
  const std::uint32_t qmax = max_code(bits);
  // Range always spans 0 so the zero point lands inside the code range.
  double lo = 0.0, hi = 0.0;
  for (Eigen::Index j = 0; j < len; ++j) {
    lo = std::min(lo, row[j]);
    hi = std::max(hi, row[j]);
  }
  scale = static_cast<float>(gamma * (hi - lo) / qmax);
  if (hi == lo || !(scale > 0.0f)) {
    scale = static_cast<float>(std::max(std::abs(hi), 1.0) * std::ldexp(1.0, -20) / qmax);
    zero = 0;
    return;
  }
  const double z = -std::nearbyint(gamma * lo / static_cast<double>(scale));
  zero = static_cast<std::uint32_t>(std::clamp(z, 0.0, static_cast<double>(qmax)));
}

GroupQuantParams derive_params(const Matrix& block, int bits) {
  check_bits(bits);
  GroupQuantParams p;
  p.bit_width = bits;
  p.scale.resize(static_cast<std::size_t>(block.rows()));
  p.zero.resize(static_cast<std::size_t>(block.rows()));
  for (Eigen::Index i = 0; i < block.rows(); ++i)
    derive_row_params(block.row(i).data(), block.cols(), bits, 1.0, p.scale[i], p.zero[i]);
  return p;
}

QuantizedBlock quantize_uniform(const Matrix& block, int bits,
                                const std::optional<GroupQuantParams>& params) {
  check_bits(bits);
  QuantizedBlock qb;
  qb.rows = block.rows();
  qb.cols = block.cols();
  qb.params = params ? *params : derive_params(block, bits);
  qb.params.bit_width = bits;
  qb.params.binary = false;
  if (qb.params.scale.size() != static_cast<std::size_t>(qb.rows) ||
      qb.params.zero.size() != static_cast<std::size_t>(qb.rows))
    throw Error(ErrorCode::ShapeMismatch, "params do not match block rows");
  const std::uint32_t qmax = max_code(bits);
  qb.codes.resize(static_cast<std::size_t>(block.size()));
  for (Eigen::Index i = 0; i < qb.rows; ++i) {
    const float s = qb.params.scale[i];
    const std::uint32_t z = qb.params.zero[i];
    if (!(s > 0.0f)) throw Error(ErrorCode::InvalidArgument, "scale must be positive");
    if (z > qmax) throw Error(ErrorCode::CodeOutOfRange, "zero point outside code range");
    for (Eigen::Index j = 0; j < qb.cols; ++j)
      qb.codes[static_cast<std::size_t>(i * qb.cols + j)] = encode(block(i, j), s, z, qmax);
  }
  return qb;
}

Matrix dequantize(const QuantizedBlock& qb) {
  Matrix out(qb.rows, qb.cols);
  for (Eigen::Index i = 0; i < qb.rows; ++i)
    for (Eigen::Index j = 0; j < qb.cols; ++j)
      out(i, j) = dequantize_value(qb.code(i, j), qb.params.scale[i], qb.params.zero[i], qb.params.binary);
  return out;
}

Binarized binarize(const Matrix& block) {
  Binarized b;
  b.signs = block.unaryExpr([](double w) { return w >= 0.0 ? 1.0 : -1.0; });
  b.alpha = block.size() == 0 ? 0.0 : block.cwiseAbs().sum() / static_cast<double>(block.size());
  return b;
}

QuantizedBlock binarize_rows(const Matrix& block) {
  QuantizedBlock qb;
  qb.rows = block.rows();
  qb.cols = block.cols();
  qb.params.bit_width = 1;
  qb.params.binary = true;
  qb.params.scale.resize(static_cast<std::size_t>(qb.rows));
  qb.params.zero.assign(static_cast<std::size_t>(qb.rows), 0);
  qb.codes.resize(static_cast<std::size_t>(block.size()));
  for (Eigen::Index i = 0; i < qb.rows; ++i) {
    const Binarized b = binarize(block.row(i));
    qb.params.scale[i] = static_cast<float>(b.alpha);
    for (Eigen::Index j = 0; j < qb.cols; ++j)
      qb.codes[static_cast<std::size_t>(i * qb.cols + j)] = b.signs(0, j) > 0 ? 1 : 0;
  }
  return qb;
}

double block_mse(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw Error(ErrorCode::ShapeMismatch, "block_mse operands differ in shape");
  return (a - b).squaredNorm();
}

Matrix fake_quantize(const Matrix& block, int bits, bool binary) {
  if (bits == 1 && binary) return dequantize(binarize_rows(block));
  return dequantize(quantize_uniform(block, bits));
}

}  // namespace slimq
