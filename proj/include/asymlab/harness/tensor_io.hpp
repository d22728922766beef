#pragma once

// One tensor per file: "ATNS", u16 version, u16 rank, rank x u64 dims, then
// the row-major payload as f64. All integers and floats little-endian.

#include "asymlab/linalg.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace asymlab {

inline constexpr std::uint16_t kTensorFormatVersion = 1;

struct Tensor {
  std::vector<std::uint64_t> dims;
  std::vector<double> data;

  std::uint64_t element_count() const;
  static Tensor from_matrix(const Mat& m);
  Mat to_matrix() const;  // rank 2 only
};

std::string encode_tensor(const Tensor& t);
Tensor decode_tensor(const std::string& bytes);

/// Atomic: written to a sibling temporary file, then renamed.
void write_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor(const std::filesystem::path& path);

}  // namespace asymlab
