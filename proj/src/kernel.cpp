#include "slimq/kernel.hpp"

#include "slimq/bitstream.hpp"
#include "slimq/error.hpp"

#include <algorithm>
#include <chrono>

namespace slimq {

namespace {

void check_input(const PackedModel& pm, const MatrixF& x) {
  if (static_cast<std::uint64_t>(x.cols()) != pm.cols)
    throw Error(ErrorCode::ShapeMismatch, "input channels != packed model columns");
}

// Decodes group g into scratch (n x beta, row-major) from the packed streams.
void decode_group(const PackedModel& pm, std::size_t g, std::uint64_t zero_bit, MatrixF& scratch) {
  const int bits = pm.group_bits(g);
  const bool binary = bits == 1 && pm.binarized();
  const auto n = static_cast<Eigen::Index>(pm.rows);
  const float* scale = pm.scales.data() + g * pm.rows;

  BitReader zeros(pm.zeros_stream, zero_bit);
  thread_local std::vector<float> zero;
  zero.resize(pm.rows);
  for (Eigen::Index i = 0; i < n; ++i) zero[i] = static_cast<float>(zeros.get(bits));

  BitReader codes(pm.weights_stream, pm.offsets[g]);
  const std::uint64_t column_bits = pad_to_word(static_cast<std::uint64_t>(pm.rows) * bits);
  for (Eigen::Index j = 0; j < scratch.cols(); ++j) {
    codes.seek(pm.offsets[g] + static_cast<std::uint64_t>(j) * column_bits);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto c = static_cast<float>(codes.get(bits));
      scratch(i, j) = binary ? (2.0f * c - 1.0f) * scale[i] : (c - zero[i]) * scale[i];
    }
  }
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto mid = v.size() / 2;
  return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

}  // namespace

MatrixF packed_matmul(const PackedModel& pm, const MatrixF& x, unsigned threads) {
  validate(pm);
  check_input(pm, x);
  const auto t = x.rows();
  const auto n = static_cast<Eigen::Index>(pm.rows);
  const auto beta = static_cast<Eigen::Index>(pm.group_size);
  MatrixF y = MatrixF::Zero(t, n);
  if (t == 0 || n == 0) return y;

  std::vector<std::uint64_t> zero_bits(pm.groups());
  for (std::size_t g = 1; g < pm.groups(); ++g)
    zero_bits[g] = zero_bits[g - 1] + pad_to_word(static_cast<std::uint64_t>(pm.rows) * pm.group_bits(g - 1));

  // Workers own disjoint output rows; each decodes groups into its own scratch.
  parallel_for(static_cast<std::size_t>(t), threads, [&](std::size_t begin, std::size_t end) {
    MatrixF scratch(n, beta);
    for (std::size_t g = 0; g < pm.groups(); ++g) {
      decode_group(pm, g, zero_bits[g], scratch);
      const auto c0 = static_cast<Eigen::Index>(g) * beta;
      for (std::size_t r = begin; r < end; ++r) {
        const auto ti = static_cast<Eigen::Index>(r);
        const float* xr = x.row(ti).data() + c0;
        for (Eigen::Index i = 0; i < n; ++i) {
          const float* wr = scratch.row(i).data();
          float acc = y(ti, i);
          for (Eigen::Index j = 0; j < beta; ++j) acc += xr[j] * wr[j];
          y(ti, i) = acc;
        }
      }
    }
  });
  return y;
}

MatrixF dense_reference(const PackedModel& pm, const MatrixF& x) {
  check_input(pm, x);
  const Matrix w_hat = unpack(pm).dequantized();
  const Matrix y = x.cast<double>() * w_hat.transpose();
  return y.cast<float>();
}

BenchReport bench(const PackedModel& pm, const MatrixF& x, std::size_t repeats, unsigned threads) {
  if (repeats == 0) throw Error(ErrorCode::InvalidArgument, "repeats must be >= 1");
  using Clock = std::chrono::steady_clock;
  BenchReport rep;
  rep.repeats = repeats;
  for (std::size_t r = 0; r < repeats; ++r) {
    auto t0 = Clock::now();
    const MatrixF a = packed_matmul(pm, x, threads);
    rep.packed_ms.push_back(std::chrono::duration<double, std::milli>(Clock::now() - t0).count());
    t0 = Clock::now();
    const MatrixF b = dense_reference(pm, x);
    rep.dense_ms.push_back(std::chrono::duration<double, std::milli>(Clock::now() - t0).count());
  }
  rep.packed_median_ms = median(rep.packed_ms);
  rep.dense_median_ms = median(rep.dense_ms);

  const std::uint64_t io = 4ull * static_cast<std::uint64_t>(x.rows()) * (pm.cols + pm.rows);
  rep.dense_bytes = 4ull * pm.rows * pm.cols + io;
  rep.packed_bytes = pm.weights_stream.size() + pm.zeros_stream.size() + pm.scales.size() * 4 +
                     pm.bit_codes.size() + pm.offsets.size() * 8 + io;
  return rep;
}

}  // namespace slimq
