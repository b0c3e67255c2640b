#include "ngpflow/mc.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <random>
#include <thread>

#include "ngpflow/quadrature.hpp"
#include "ngpflow/rng.hpp"

namespace ngp {

namespace {
constexpr const char* kModule = "mc-oracle";

/// L with L L^T = G; Cholesky when possible, PSD eigen factor otherwise.
Matrix gram_factor(const Matrix& gram) {
  if (gram.rows() == 1) return Matrix::Constant(1, 1, std::sqrt(std::max(gram(0, 0), 0.0)));
  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  return psd_factor(gram);
}

void fill_normal(Matrix& m, Xoshiro256& gen, std::normal_distribution<double>& nd) {
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = nd(gen);
}

void apply_activation(const Activation& act, Matrix& m) {
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = act(m(r, c));
}

class Sampler {
 public:
  Sampler(const Dataset& dataset, const NetworkConfig& config, SamplerKind kind)
      : config_(config), kind_(kind), inputs_(dataset.inputs()) {
    if (dataset.input_dim() != config.input_dim()) throw ConfigError(kModule, "dataset does not match n_0");
    Matrix k1 = (inputs_ * inputs_.transpose()) * (config.weight_var(1) / static_cast<double>(config.input_dim()));
    k1.array() += config.bias_var(1);
    first_factor_ = gram_factor(k1);
  }

  /// Output of draw `index` written as channel-major row.
  void draw(std::uint64_t seed, std::uint64_t index, double* row) const {
    Xoshiro256 gen = Xoshiro256::stream(seed, index);
    std::normal_distribution<double> nd(0.0, 1.0);
    const Eigen::Index D = inputs_.rows();
    Matrix z;
    if (kind_ == SamplerKind::marginal) {
      Matrix u(static_cast<Eigen::Index>(config_.width(1)), D);
      fill_normal(u, gen, nd);
      z = u * first_factor_.transpose();
      for (std::size_t l = 1; l < config_.depth(); ++l) {
        apply_activation(config_.activation(), z);
        Matrix gram = (z.transpose() * z) * (config_.weight_var(l + 1) / static_cast<double>(config_.width(l)));
        gram.array() += config_.bias_var(l + 1);
        const Matrix factor = gram_factor(gram);
        Matrix next(static_cast<Eigen::Index>(config_.width(l + 1)), D);
        fill_normal(next, gen, nd);
        z = next * factor.transpose();
      }
    } else {
      Matrix act = inputs_.transpose();  // n_0 x D
      for (std::size_t l = 1; l <= config_.depth(); ++l) {
        if (l > 1) apply_activation(config_.activation(), act);
        const auto rows = static_cast<Eigen::Index>(config_.width(l));
        Matrix w(rows, act.rows());
        fill_normal(w, gen, nd);
        w *= std::sqrt(config_.weight_var(l) / static_cast<double>(config_.width(l - 1)));
        Vector b(rows);
        for (Eigen::Index r = 0; r < rows; ++r) b[r] = std::sqrt(config_.bias_var(l)) * nd(gen);
        act = (w * act).colwise() + b;
      }
      z = std::move(act);
    }
    for (Eigen::Index i = 0; i < z.rows(); ++i)
      for (Eigen::Index a = 0; a < D; ++a) row[i * D + a] = z(i, a);
  }

 private:
  const NetworkConfig& config_;
  SamplerKind kind_;
  Matrix inputs_;
  Matrix first_factor_;
};

void require_rows(const Matrix& samples, std::size_t minimum) {
  if (static_cast<std::size_t>(samples.rows()) < minimum) {
    throw ConfigError(kModule, "need at least " + std::to_string(minimum) + " samples, got " +
                                   std::to_string(samples.rows()));
  }
}

void require_col(const Matrix& samples, std::size_t col) {
  if (col >= static_cast<std::size_t>(samples.cols())) throw ConfigError(kModule, "sample column out of range");
}
}  // namespace

SamplerKind parse_sampler(const std::string& name) {
  if (name == "marginal") return SamplerKind::marginal;
  if (name == "explicit" || name == "explicit_weights") return SamplerKind::explicit_weights;
  throw ConfigError(kModule, "unknown sampler '" + name + "' (expected marginal or explicit)");
}

unsigned thread_count(unsigned requested) {
  unsigned n = requested > 0 ? requested : std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("NGPFLOW_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && cap > 0) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
  }
  return std::max(1u, n);
}

Matrix sample_outputs(const Dataset& dataset, const NetworkConfig& config, std::size_t n_samples, std::uint64_t seed,
                      const McOptions& options) {
  if (n_samples < 1) throw ConfigError(kModule, "n_samples must be >= 1");
  const Sampler sampler(dataset, config, options.sampler);
  const auto cols = static_cast<Eigen::Index>(dataset.size() * config.output_dim());
  using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  RowMatrix out(static_cast<Eigen::Index>(n_samples), cols);
  const unsigned threads = std::min<std::size_t>(thread_count(options.threads), n_samples);
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t s = begin; s < end; ++s) sampler.draw(seed, s, out.row(static_cast<Eigen::Index>(s)).data());
  };
  if (threads <= 1) {
    work(0, n_samples);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (n_samples + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t begin = t * chunk, end = std::min(n_samples, begin + chunk);
      if (begin < end) pool.emplace_back(work, begin, end);
    }
    for (auto& th : pool) th.join();
  }
  return out;
}

std::string estimator_name(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::moment2:
      return "moment2";
    case EstimatorKind::connected4:
      return "connected4";
    case EstimatorKind::histogram_bin:
      return "histogram-bin";
    case EstimatorKind::cumulant4:
      return "cumulant4";
  }
  return "unknown";
}

McEstimate estimate_moment2(const Matrix& samples, std::size_t col_a, std::size_t col_b) {
  require_rows(samples, 2);
  require_col(samples, col_a);
  require_col(samples, col_b);
  const Vector prod = samples.col(col_a).cwiseProduct(samples.col(col_b));
  const double n = static_cast<double>(prod.size());
  const double mean = prod.mean();
  const double var = (prod.array() - mean).square().sum() / (n - 1.0);
  return {mean, std::sqrt(var / n), static_cast<std::size_t>(prod.size()), EstimatorKind::moment2};
}

McEstimate estimate_connected4(const Matrix& samples, const std::array<std::size_t, 4>& cols) {
  require_rows(samples, kMinCumulantSamples);
  for (auto c : cols) require_col(samples, c);
  const Eigen::Index n = samples.rows();
  const auto x0 = samples.col(cols[0]), x1 = samples.col(cols[1]), x2 = samples.col(cols[2]), x3 = samples.col(cols[3]);
  // Per-row products: four-point, then pairs (01)(23), (02)(13), (03)(12).
  std::array<Vector, 7> prods;
  prods[0] = x0.cwiseProduct(x1).cwiseProduct(x2).cwiseProduct(x3);
  prods[1] = x0.cwiseProduct(x1);
  prods[2] = x2.cwiseProduct(x3);
  prods[3] = x0.cwiseProduct(x2);
  prods[4] = x1.cwiseProduct(x3);
  prods[5] = x0.cwiseProduct(x3);
  prods[6] = x1.cwiseProduct(x2);
  std::array<double, 7> sums{};
  for (int k = 0; k < 7; ++k) sums[k] = prods[k].sum();
  auto stat = [](const std::array<double, 7>& m) { return m[0] - m[1] * m[2] - m[3] * m[4] - m[5] * m[6]; };

  std::array<double, 7> full{};
  for (int k = 0; k < 7; ++k) full[k] = sums[k] / static_cast<double>(n);
  const double value = stat(full);

  double mean_loo = 0.0, sq = 0.0;
  std::vector<double> loo(static_cast<std::size_t>(n));
  const double inv = 1.0 / static_cast<double>(n - 1);
  for (Eigen::Index r = 0; r < n; ++r) {
    std::array<double, 7> m{};
    for (int k = 0; k < 7; ++k) m[k] = (sums[k] - prods[k][r]) * inv;
    loo[r] = stat(m);
    mean_loo += loo[r];
  }
  mean_loo /= static_cast<double>(n);
  for (double v : loo) sq += (v - mean_loo) * (v - mean_loo);
  const double se = std::sqrt(sq * static_cast<double>(n - 1) / static_cast<double>(n));
  return {value, se, static_cast<std::size_t>(n), EstimatorKind::connected4};
}

McEstimate estimate_cumulant4(const Matrix& samples, std::size_t col) {
  auto est = estimate_connected4(samples, {col, col, col, col});
  est.estimator = EstimatorKind::cumulant4;
  return est;
}

std::vector<HistogramBin> histogram(const Matrix& samples, std::size_t col, double lo, double hi, std::size_t bins) {
  require_rows(samples, 2);
  require_col(samples, col);
  if (bins < 10) throw ConfigError(kModule, "histograms need at least 10 bins");
  if (!(hi > lo)) throw ConfigError(kModule, "histogram range is empty");
  std::vector<double> counts(bins, 0.0);
  const double width = (hi - lo) / static_cast<double>(bins);
  double inside = 0.0;
  for (Eigen::Index r = 0; r < samples.rows(); ++r) {
    const double v = samples(r, static_cast<Eigen::Index>(col));
    if (v < lo || v > hi) continue;
    auto k = static_cast<std::size_t>((v - lo) / width);
    if (k >= bins) k = bins - 1;
    counts[k] += 1.0;
    inside += 1.0;
  }
  std::vector<HistogramBin> out(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    const double frac = inside > 0.0 ? counts[k] / inside : 0.0;
    out[k].center = lo + (static_cast<double>(k) + 0.5) * width;
    out[k].density = frac / width;
    out[k].std_error = inside > 0.0 ? std::sqrt(frac * (1.0 - frac) / inside) / width : 0.0;
  }
  return out;
}

std::vector<HistogramBin> histogram(const Matrix& samples, std::size_t col, std::size_t bins, double half_width_sd) {
  require_rows(samples, 2);
  require_col(samples, col);
  const auto c = samples.col(static_cast<Eigen::Index>(col));
  const double mean = c.mean();
  const double sd = std::sqrt((c.array() - mean).square().sum() / static_cast<double>(c.size() - 1));
  if (!(sd > 0.0)) throw NumericError(kModule, "samples have zero spread; histogram range undefined");
  return histogram(samples, col, mean - half_width_sd * sd, mean + half_width_sd * sd, bins);
}

namespace {
template <typename T>
T swap_bytes(T value) {
  auto* bytes = reinterpret_cast<unsigned char*>(&value);
  std::reverse(bytes, bytes + sizeof value);
  return value;
}

template <typename T>
void put_le(std::ofstream& out, T value) {
  if constexpr (std::endian::native == std::endian::big) value = swap_bytes(value);
  out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

template <typename T>
T get_le(std::ifstream& in, const std::filesystem::path& path) {
  T value{};
  const auto offset = static_cast<long long>(in.tellg());
  if (!in.read(reinterpret_cast<char*>(&value), sizeof value)) {
    throw ConfigError(kModule, "truncated sample file " + path.string() + " at offset " + std::to_string(offset));
  }
  if constexpr (std::endian::native == std::endian::big) value = swap_bytes(value);
  return value;
}
}  // namespace

void write_raw_samples(const std::filesystem::path& path, const Matrix& samples) {
  if (samples.rows() > 0xffffffffLL || samples.cols() > 0xffffffffLL) {
    throw ConfigError(kModule, "sample matrix too large for the raw format");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError(kModule, "cannot open " + path.string() + " for writing");
  out.write("NGPSAMP0", 8);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(samples.rows()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(samples.cols()));
  for (Eigen::Index c = 0; c < samples.cols(); ++c)
    for (Eigen::Index r = 0; r < samples.rows(); ++r) {
      put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(samples(r, c)));
    }
  if (!out) throw ConfigError(kModule, "failed writing " + path.string());
}

Matrix read_raw_samples(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(kModule, "cannot open " + path.string());
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, "NGPSAMP0", 8) != 0) {
    throw ConfigError(kModule, "bad magic in " + path.string() + " at offset 0");
  }
  const auto rows = get_le<std::uint32_t>(in, path);
  const auto cols = get_le<std::uint32_t>(in, path);
  Matrix out(rows, cols);
  for (Eigen::Index c = 0; c < out.cols(); ++c)
    for (Eigen::Index r = 0; r < out.rows(); ++r) out(r, c) = std::bit_cast<double>(get_le<std::uint64_t>(in, path));
  return out;
}

}  // namespace ngp
