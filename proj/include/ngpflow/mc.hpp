#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ngpflow/core_types.hpp"

namespace ngp {

enum class SamplerKind {
  /// Exact layer-wise conditional Gaussians: given layer l, each neuron of
  /// layer l + 1 is N(0, C_b + C_W/n_l sigma^T sigma) over the samples.
  marginal,
  /// Draws every weight and bias explicitly.
  explicit_weights,
};

SamplerKind parse_sampler(const std::string& name);

struct McOptions {
  SamplerKind sampler = SamplerKind::marginal;
  /// 0 means hardware concurrency, capped by NGPFLOW_THREADS.
  unsigned threads = 0;
};

/// Worker count from the hardware, capped by the NGPFLOW_THREADS variable.
unsigned thread_count(unsigned requested = 0);

/// One row per network draw; column i * D + alpha holds output channel i at
/// sample alpha. Bit-identical for a given seed regardless of thread count.
Matrix sample_outputs(const Dataset& dataset, const NetworkConfig& config, std::size_t n_samples, std::uint64_t seed,
                      const McOptions& options = {});

enum class EstimatorKind { moment2, connected4, histogram_bin, cumulant4 };
std::string estimator_name(EstimatorKind kind);

struct McEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t n_samples = 0;
  EstimatorKind estimator = EstimatorKind::moment2;
};

/// E[z_i z_j] with its standard error.
McEstimate estimate_moment2(const Matrix& samples, std::size_t col_a, std::size_t col_b);

/// E[z1 z2 z3 z4] - E[z1 z2]E[z3 z4] - E[z1 z3]E[z2 z4] - E[z1 z4]E[z2 z3] for
/// zero-mean outputs, with a delete-one jackknife standard error.
McEstimate estimate_connected4(const Matrix& samples, const std::array<std::size_t, 4>& cols);

/// Fourth cumulant of one column (all four indices equal).
McEstimate estimate_cumulant4(const Matrix& samples, std::size_t col);

/// Minimum number of rows accepted by the cumulant estimators.
inline constexpr std::size_t kMinCumulantSamples = 100;

struct HistogramBin {
  double center;
  double density;
  double std_error;
};

/// Density-normalized histogram over [lo, hi].
std::vector<HistogramBin> histogram(const Matrix& samples, std::size_t col, double lo, double hi, std::size_t bins);

/// Histogram over mean +- half_width_sd empirical standard deviations.
std::vector<HistogramBin> histogram(const Matrix& samples, std::size_t col, std::size_t bins = 101,
                                    double half_width_sd = 5.0);

/// "NGPSAMP0", u32 rows, u32 cols, then column-major little-endian doubles.
void write_raw_samples(const std::filesystem::path& path, const Matrix& samples);
Matrix read_raw_samples(const std::filesystem::path& path);

}  // namespace ngp
