#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ngpflow/core_types.hpp"

namespace ngp {

/// Unsigned-byte images from an IDX file, one row per image.
struct IdxImages {
  std::size_t count = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> pixels;

  std::size_t pixels_per_image() const noexcept { return rows * cols; }
};

/// Magic 0x00000803, big-endian counts, then count * rows * cols bytes.
IdxImages read_idx_images(const std::filesystem::path& path);
/// Magic 0x00000801, big-endian count, then count bytes.
std::vector<int> read_idx_labels(const std::filesystem::path& path);

void write_idx_images(const std::filesystem::path& path, const IdxImages& images);
void write_idx_labels(const std::filesystem::path& path, const std::vector<int>& labels);

/// count distinct indices drawn from [0, total) by a seeded partial shuffle.
std::vector<std::size_t> subsample_indices(std::size_t total, std::size_t count, std::uint64_t seed);

/// Pixels as reals 0..255 (no centering or scaling), rows in the given order.
Matrix image_matrix(const IdxImages& images, const std::vector<std::size_t>& indices);

/// count images chosen by subsample_indices(seed); every row is a training
/// sample and the labels are attached.
Dataset load_mnist(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                   std::size_t count, std::uint64_t seed);

}  // namespace ngp
