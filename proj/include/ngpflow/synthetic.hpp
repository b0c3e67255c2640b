#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "ngpflow/mnist.hpp"

namespace ngp {

/// Labelled 28 x 28 digit-like images rendered from jittered stroke
/// templates, for use where the real handwritten set is unavailable.
struct SyntheticDigits {
  IdxImages images;
  std::vector<int> labels;
};

/// Deterministic given (count, seed); labels are uniform over 0..9.
SyntheticDigits synthetic_digits(std::size_t count, std::uint64_t seed);

/// Writes <prefix>-images-idx3-ubyte and <prefix>-labels-idx1-ubyte into dir
/// and returns both paths.
std::pair<std::filesystem::path, std::filesystem::path> write_synthetic_idx(const std::filesystem::path& dir,
                                                                            std::size_t count, std::uint64_t seed,
                                                                            const std::string& prefix = "synthetic");

}  // namespace ngp
