#include "ngpflow/mnist.hpp"

#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <sstream>

#include "ngpflow/rng.hpp"

namespace ngp {

namespace {
constexpr const char* kModule = "cli-io";
constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::vector<std::uint8_t> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(kModule, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

[[noreturn]] void fail(const std::filesystem::path& path, std::size_t offset, const std::string& what) {
  std::ostringstream msg;
  msg << path.string() << " at offset " << offset << ": " << what;
  throw ConfigError(kModule, msg.str());
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset,
                        const std::filesystem::path& path) {
  if (offset + 4 > bytes.size()) fail(path, offset, "truncated header");
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void put_be32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                     static_cast<char>(v)};
  out.write(b, 4);
}
}  // namespace

IdxImages read_idx_images(const std::filesystem::path& path) {
  const auto bytes = read_all(path);
  const auto magic = read_be32(bytes, 0, path);
  if (magic != kImageMagic) {
    std::ostringstream msg;
    msg << "bad image magic 0x" << std::hex << magic;
    fail(path, 0, msg.str());
  }
  IdxImages out;
  out.count = read_be32(bytes, 4, path);
  out.rows = read_be32(bytes, 8, path);
  out.cols = read_be32(bytes, 12, path);
  const std::size_t need = out.count * out.rows * out.cols;
  if (bytes.size() < 16 + need) fail(path, bytes.size(), "truncated pixel data");
  out.pixels.assign(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(need));
  return out;
}

std::vector<int> read_idx_labels(const std::filesystem::path& path) {
  const auto bytes = read_all(path);
  const auto magic = read_be32(bytes, 0, path);
  if (magic != kLabelMagic) {
    std::ostringstream msg;
    msg << "bad label magic 0x" << std::hex << magic;
    fail(path, 0, msg.str());
  }
  const std::size_t count = read_be32(bytes, 4, path);
  if (bytes.size() < 8 + count) fail(path, bytes.size(), "truncated label data");
  return {bytes.begin() + 8, bytes.begin() + 8 + static_cast<std::ptrdiff_t>(count)};
}

void write_idx_images(const std::filesystem::path& path, const IdxImages& images) {
  if (images.pixels.size() != images.count * images.pixels_per_image()) {
    throw ConfigError(kModule, "image buffer size does not match its dimensions");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError(kModule, "cannot write " + path.string());
  put_be32(out, kImageMagic);
  put_be32(out, static_cast<std::uint32_t>(images.count));
  put_be32(out, static_cast<std::uint32_t>(images.rows));
  put_be32(out, static_cast<std::uint32_t>(images.cols));
  out.write(reinterpret_cast<const char*>(images.pixels.data()), static_cast<std::streamsize>(images.pixels.size()));
}

void write_idx_labels(const std::filesystem::path& path, const std::vector<int>& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError(kModule, "cannot write " + path.string());
  put_be32(out, kLabelMagic);
  put_be32(out, static_cast<std::uint32_t>(labels.size()));
  for (int l : labels) {
    if (l < 0 || l > 255) throw ConfigError(kModule, "label does not fit in a byte");
    out.put(static_cast<char>(l));
  }
}

std::vector<std::size_t> subsample_indices(std::size_t total, std::size_t count, std::uint64_t seed) {
  if (count > total) {
    throw ConfigError(kModule, "cannot draw " + std::to_string(count) + " of " + std::to_string(total) + " items");
  }
  std::vector<std::size_t> idx(total);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Xoshiro256 rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, total - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(count);
  return idx;
}

Matrix image_matrix(const IdxImages& images, const std::vector<std::size_t>& indices) {
  const std::size_t n = images.pixels_per_image();
  Matrix out(static_cast<Eigen::Index>(indices.size()), static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= images.count) throw ConfigError(kModule, "image index out of range");
    const std::uint8_t* px = images.pixels.data() + indices[r] * n;
    for (std::size_t c = 0; c < n; ++c) out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = px[c];
  }
  return out;
}

Dataset load_mnist(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                   std::size_t count, std::uint64_t seed) {
  if (count == 0) throw ConfigError(kModule, "empty dataset");
  const auto images = read_idx_images(images_path);
  const auto labels = read_idx_labels(labels_path);
  if (labels.size() != images.count) throw ConfigError(kModule, "image and label counts differ");
  const auto idx = subsample_indices(images.count, count, seed);
  std::vector<int> picked;
  picked.reserve(idx.size());
  for (auto i : idx) picked.push_back(labels[i]);
  return Dataset(image_matrix(images, idx), count, std::nullopt, std::move(picked));
}

}  // namespace ngp
