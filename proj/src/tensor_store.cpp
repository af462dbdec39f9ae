#include "slimq/tensor_store.hpp"

#include "slimq/byte_io.hpp"
#include "slimq/error.hpp"

#include <cmath>
#include <fstream>
#include <iterator>

namespace slimq {

namespace {
constexpr std::size_t kFixedHeader = 8;
}  // namespace

std::uint64_t DenseTensor::element_count() const {
  std::uint64_t count = 1;
  for (auto d : dims) count *= d;
  return count;
}

void DenseTensor::validate() const {
  if (dims.size() > 255) throw Error(ErrorCode::ShapeMismatch, "more than 255 dimensions");
  if (element_count() != data.size())
    throw Error(ErrorCode::ShapeMismatch, "product(dims) != data length");
  for (float v : data)
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, "tensor contains NaN/Inf");
}

std::size_t CalibrationSet::channels() const {
  return samples.empty() ? 0 : static_cast<std::size_t>(samples.front().cols());
}

std::size_t CalibrationSet::token_count() const {
  std::size_t total = 0;
  for (const auto& s : samples) total += static_cast<std::size_t>(s.rows());
  return total;
}

Matrix CalibrationSet::stacked() const {
  Matrix out(static_cast<Eigen::Index>(token_count()), static_cast<Eigen::Index>(channels()));
  Eigen::Index row = 0;
  for (const auto& s : samples) {
    out.middleRows(row, s.rows()) = s;
    row += s.rows();
  }
  return out;
}

std::vector<std::uint8_t> encode_tensor(const DenseTensor& t) {
  t.validate();
  ByteWriter w;
  w.raw("SLMT", 4);
  w.u16(kTensorVersion);
  w.u8(static_cast<std::uint8_t>(t.dims.size()));
  w.u8(0);
  for (auto d : t.dims) w.u64(d);
  for (float v : t.data) w.f32(v);
  return w.take();
}

DenseTensor decode_tensor(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "SLMT", 4) != 0)
    throw Error(ErrorCode::BadMagic, "expected SLMT magic");
  if (bytes.size() < kFixedHeader) throw Error(ErrorCode::TruncatedPayload, "short header");
  r.skip(4);
  const auto version = r.u16();
  if (version != kTensorVersion)
    throw Error(ErrorCode::UnsupportedVersion, "SLMT version " + std::to_string(version));
  const auto ndim = r.u8();
  r.u8();  // reserved
  DenseTensor t;
  t.dims.resize(ndim);
  for (auto& d : t.dims) d = r.u64();
  // Corrupt extents must not overflow the element count.
  const std::uint64_t available = r.remaining() / 4;
  std::uint64_t count = 1;
  for (auto d : t.dims) {
    if (d != 0 && count > available / d)
      throw Error(ErrorCode::TruncatedPayload, "declared payload exceeds file size");
    count *= d;
  }
  if (r.remaining() < count * 4)
    throw Error(ErrorCode::TruncatedPayload, "declared payload exceeds file size");
  if (r.remaining() > count * 4)
    throw Error(ErrorCode::PayloadSizeMismatch, "trailing bytes after payload");
  t.data.resize(count);
  for (auto& v : t.data) {
    v = r.f32();
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, "tensor contains NaN/Inf");
  }
  return t;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::IoFailure, "read failed for " + path.string());
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
}

DenseTensor read_tensor(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return decode_tensor(bytes);
}

void write_tensor(const DenseTensor& t, const std::filesystem::path& path) {
  const auto bytes = encode_tensor(t);
  write_file_bytes(path, bytes);
}

DenseTensor tensor_from_matrix(const Matrix& m) {
  DenseTensor t;
  t.dims = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
  t.data.resize(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.size(); ++i) t.data[i] = static_cast<float>(m.data()[i]);
  return t;
}

Matrix matrix_from_tensor(const DenseTensor& t) {
  if (t.dims.size() != 2) throw Error(ErrorCode::ShapeMismatch, "expected a 2-D tensor");
  Matrix m(static_cast<Eigen::Index>(t.dims[0]), static_cast<Eigen::Index>(t.dims[1]));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = t.data[static_cast<std::size_t>(i)];
  return m;
}

CalibrationSet calibration_from_tensor(const DenseTensor& t) {
  CalibrationSet calib;
  if (t.dims.size() == 2) {
    calib.samples.push_back(matrix_from_tensor(t));
    return calib;
  }
  if (t.dims.size() != 3)
    throw Error(ErrorCode::ShapeMismatch, "calibration tensor must be 2-D or 3-D");
  const auto s = t.dims[0], rows = t.dims[1], cols = t.dims[2];
  for (std::uint64_t k = 0; k < s; ++k) {
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    const float* src = t.data.data() + k * rows * cols;
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = src[i];
    calib.samples.push_back(std::move(m));
  }
  return calib;
}

}  // namespace slimq
