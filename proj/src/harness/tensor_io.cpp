#include "asymlab/harness/tensor_io.hpp"

#include "asymlab/error.hpp"
#include "asymlab/harness/output.hpp"

#include <bit>
#include <cstring>

namespace asymlab {

namespace {

template <class T>
void put_le(std::string& out, T v) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint16_t>;
  U u;
  std::memcpy(&u, &v, sizeof(T));
  for (std::size_t b = 0; b < sizeof(T); ++b) out.push_back(static_cast<char>((u >> (8 * b)) & 0xFF));
}

template <class T>
T get_le(const std::string& in, std::size_t& at) {
  require(at + sizeof(T) <= in.size(), ErrorCode::IoError, "tensor: truncated input");
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint16_t>;
  U u = 0;
  for (std::size_t b = 0; b < sizeof(T); ++b)
    u |= static_cast<U>(static_cast<U>(static_cast<unsigned char>(in[at + b])) << (8 * b));
  at += sizeof(T);
  T v;
  std::memcpy(&v, &u, sizeof(T));
  return v;
}

}  // namespace

std::uint64_t Tensor::element_count() const {
  std::uint64_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

Tensor Tensor::from_matrix(const Mat& m) {
  Tensor t;
  t.dims = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
  t.data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) t.data.push_back(m(r, c));
  return t;
}

Mat Tensor::to_matrix() const {
  require(dims.size() == 2, ErrorCode::DimensionMismatch, "tensor: to_matrix needs rank 2");
  Mat m(static_cast<Eigen::Index>(dims[0]), static_cast<Eigen::Index>(dims[1]));
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = data[k++];
  return m;
}

std::string encode_tensor(const Tensor& t) {
  require(t.dims.size() <= 0xFFFF, ErrorCode::InvalidArgument, "tensor: rank too large");
  require(t.element_count() == t.data.size(), ErrorCode::DimensionMismatch,
          "tensor: payload size differs from the product of dims");
  std::string out = "ATNS";
  put_le<std::uint16_t>(out, kTensorFormatVersion);
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(t.dims.size()));
  for (auto d : t.dims) put_le<std::uint64_t>(out, d);
  for (double x : t.data) put_le<double>(out, x);
  return out;
}

Tensor decode_tensor(const std::string& bytes) {
  require(bytes.size() >= 8 && bytes.compare(0, 4, "ATNS") == 0, ErrorCode::IoError,
          "tensor: bad magic");
  std::size_t at = 4;
  const auto version = get_le<std::uint16_t>(bytes, at);
  require(version == kTensorFormatVersion, ErrorCode::IoError,
          "tensor: unsupported version " + std::to_string(version));
  const auto rank = get_le<std::uint16_t>(bytes, at);
  Tensor t;
  for (std::uint16_t i = 0; i < rank; ++i) t.dims.push_back(get_le<std::uint64_t>(bytes, at));
  const std::uint64_t n = t.element_count();
  require(bytes.size() - at == n * 8, ErrorCode::IoError, "tensor: payload length mismatch");
  t.data.resize(static_cast<std::size_t>(n));
  for (auto& x : t.data) x = get_le<double>(bytes, at);
  return t;
}

void write_tensor(const std::filesystem::path& path, const Tensor& t) {
  write_file_atomic(path, encode_tensor(t));
}

Tensor read_tensor(const std::filesystem::path& path) { return decode_tensor(read_file(path)); }

}  // namespace asymlab
