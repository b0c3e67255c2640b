#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ngpflow/core_types.hpp"
#include "ngpflow/flow.hpp"
#include "ngpflow/mc.hpp"

namespace ngp {

enum class DataSource { inline_data, mnist, synthetic };

struct NetworkSpec {
  /// (n_0, ..., n_L); optional for the sweep commands, which build their own.
  std::optional<std::vector<std::size_t>> widths;
  /// One entry (broadcast to every layer) or one entry per layer.
  std::vector<double> bias_vars{0.0};
  std::vector<double> weight_vars{1.0};
  Activation activation = Activation::linear();

  NetworkConfig build(const std::vector<std::size_t>& widths) const;
  NetworkConfig build() const;
};

struct DatasetSpec {
  DataSource source = DataSource::inline_data;
  Matrix inputs;
  std::optional<Matrix> targets;
  std::vector<int> labels;
  std::filesystem::path images;
  std::filesystem::path label_file;
  /// Samples drawn from a file or synthetic pool.
  std::size_t count = 0;
  /// Leading samples used as training points; 0 means all.
  std::size_t train_count = 0;
  /// Size of the generated synthetic pool.
  std::size_t pool = 5000;
  std::uint64_t seed = 0;
  /// Image used by the single-input sweep.
  std::size_t image_index = 0;
  std::size_t classes = 10;
};

struct RunSpec {
  Backend backend = Backend::wick;
  int quadrature_order = 0;
  double jitter = 0.0;
  std::size_t mc_samples = 100000;
  SamplerKind sampler = SamplerKind::marginal;
  unsigned threads = 0;
  std::size_t bins = 101;
  double histogram_half_width_sd = 5.0;
  std::size_t grid = 2001;
  /// "exp", "lin", "both" or "auto" (picked against the sampled histogram).
  std::string mode = "exp";
  std::vector<double> epsilon_sweep{0.0, 0.001, 0.002, 0.005, 0.01};
  /// Width parameters n; nullopt is the infinite-width limit.
  std::vector<std::optional<std::size_t>> width_sweep{10, 30, 100, std::nullopt};
  /// "deep" builds (n_0, n, 2n, 1), "shallow" builds (n_0, n, 1).
  std::string shape = "deep";
  std::vector<std::size_t> train_counts{100, 300};
  std::size_t test_count = 1000;
  std::size_t subsample_seeds = 10;
  std::uint64_t seed = 0;
};

struct ExperimentConfig {
  NetworkSpec network;
  DatasetSpec dataset;
  RunSpec run;
  std::filesystem::path output_dir = "out";
};

/// Parses and validates a JSON document; unknown keys and ill-typed values are
/// ConfigErrors. Relative paths resolve against base_dir.
ExperimentConfig parse_experiment(const std::string& json_text, const std::filesystem::path& base_dir = ".");
ExperimentConfig load_experiment(const std::filesystem::path& path);

/// Parses an activation given as a name or {"name": ..., "power"/"coefficients": ...} JSON text.
Activation parse_activation(const std::string& json_text);

/// Dataset from the config. Inline data is used as is; file and synthetic
/// sources draw dataset.count samples with dataset.seed.
Dataset load_dataset(const DatasetSpec& spec);

/// Labelled pool images and labels for the sources backed by images.
struct ImagePool {
  Matrix inputs;
  std::vector<int> labels;
};
ImagePool load_pool(const DatasetSpec& spec);

/// count pool rows chosen by subsample_indices(seed), all marked as training samples.
Dataset draw_from_pool(const ImagePool& pool, std::size_t count, std::uint64_t seed);

}  // namespace ngp
