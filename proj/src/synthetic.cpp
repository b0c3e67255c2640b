#include "ngpflow/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "ngpflow/rng.hpp"

namespace ngp {

namespace {
constexpr std::size_t kSide = 28;

struct Point {
  double x, y;
};
using Stroke = std::vector<Point>;

Stroke ellipse(double cx, double cy, double rx, double ry) {
  Stroke s;
  for (int k = 0; k <= 16; ++k) {
    const double t = 2.0 * std::numbers::pi * k / 16.0;
    s.push_back({cx + rx * std::cos(t), cy + ry * std::sin(t)});
  }
  return s;
}

/// Strokes in the unit square, y pointing down.
const std::array<std::vector<Stroke>, 10>& templates() {
  static const std::array<std::vector<Stroke>, 10> t = {{
      {ellipse(0.5, 0.5, 0.26, 0.38)},
      {{{0.5, 0.1}, {0.5, 0.9}}, {{0.35, 0.25}, {0.5, 0.1}}},
      {{{0.25, 0.3}, {0.4, 0.12}, {0.65, 0.12}, {0.75, 0.3}, {0.25, 0.9}, {0.78, 0.9}}},
      {{{0.25, 0.15}, {0.7, 0.15}, {0.45, 0.48}, {0.72, 0.62}, {0.65, 0.85}, {0.25, 0.88}}},
      {{{0.6, 0.9}, {0.6, 0.1}, {0.2, 0.65}, {0.8, 0.65}}},
      {{{0.75, 0.12}, {0.3, 0.12}, {0.28, 0.45}, {0.65, 0.45}, {0.75, 0.68}, {0.6, 0.88}, {0.25, 0.85}}},
      {{{0.7, 0.12}, {0.35, 0.4}, {0.28, 0.7}, {0.45, 0.9}, {0.7, 0.8}, {0.68, 0.58}, {0.4, 0.55}, {0.3, 0.68}}},
      {{{0.22, 0.12}, {0.78, 0.12}, {0.42, 0.9}}},
      {ellipse(0.5, 0.3, 0.2, 0.17), ellipse(0.5, 0.68, 0.24, 0.21)},
      {ellipse(0.5, 0.32, 0.2, 0.19), {{0.7, 0.32}, {0.62, 0.9}}},
  }};
  return t;
}

double segment_distance(Point p, Point a, Point b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double ex = p.x - (a.x + t * dx), ey = p.y - (a.y + t * dy);
  return std::sqrt(ex * ex + ey * ey);
}

void render(int digit, Xoshiro256& rng, std::uint8_t* out) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double scale = 20.0 * (0.95 + 0.12 * u(rng));
  const double angle = 0.18 * u(rng);
  const double shear = 0.2 * u(rng);
  const double tx = 14.0 + 1.5 * u(rng), ty = 14.0 + 1.5 * u(rng);
  const double thickness = 1.7 + 0.5 * u(rng);
  const double ca = std::cos(angle), sa = std::sin(angle);

  std::vector<Stroke> strokes = templates()[static_cast<std::size_t>(digit)];
  for (auto& s : strokes)
    for (auto& p : s) {
      const double x = p.x - 0.5 + 0.03 * u(rng) + shear * (p.y - 0.5);
      const double y = p.y - 0.5 + 0.03 * u(rng);
      p = {tx + scale * (ca * x - sa * y), ty + scale * (sa * x + ca * y)};
    }

  for (std::size_t r = 0; r < kSide; ++r)
    for (std::size_t c = 0; c < kSide; ++c) {
      const Point px{static_cast<double>(c) + 0.5, static_cast<double>(r) + 0.5};
      double d = 1e9;
      for (const auto& s : strokes)
        for (std::size_t k = 0; k + 1 < s.size(); ++k) d = std::min(d, segment_distance(px, s[k], s[k + 1]));
      const double level = std::clamp(1.0 - std::max(0.0, d - 0.5 * thickness), 0.0, 1.0);
      out[r * kSide + c] = static_cast<std::uint8_t>(std::lround(255.0 * level));
    }
}
}  // namespace

SyntheticDigits synthetic_digits(std::size_t count, std::uint64_t seed) {
  SyntheticDigits out;
  out.images.count = count;
  out.images.rows = kSide;
  out.images.cols = kSide;
  out.images.pixels.assign(count * kSide * kSide, 0);
  out.labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    auto rng = Xoshiro256::stream(seed, i);
    const int digit = static_cast<int>(rng() % 10);
    out.labels[i] = digit;
    render(digit, rng, out.images.pixels.data() + i * kSide * kSide);
  }
  return out;
}

std::pair<std::filesystem::path, std::filesystem::path> write_synthetic_idx(const std::filesystem::path& dir,
                                                                            std::size_t count, std::uint64_t seed,
                                                                            const std::string& prefix) {
  std::filesystem::create_directories(dir);
  const auto data = synthetic_digits(count, seed);
  const auto images = dir / (prefix + "-images-idx3-ubyte");
  const auto labels = dir / (prefix + "-labels-idx1-ubyte");
  write_idx_images(images, data.images);
  write_idx_labels(labels, data.labels);
  return {images, labels};
}

}  // namespace ngp
