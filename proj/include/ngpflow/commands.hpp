#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ngpflow/bayes.hpp"
#include "ngpflow/density.hpp"
#include "ngpflow/experiment.hpp"
#include "ngpflow/mc.hpp"

namespace ngp {

struct CommandOverrides {
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
  std::optional<Backend> backend;
  std::optional<std::string> mode;
};

void apply_overrides(ExperimentConfig& config, const CommandOverrides& overrides);

/// Flow options for an activation: non-polynomial activations always use quadrature.
FlowOptions flow_options(const RunSpec& run, const Activation& activation);

// ---------------------------------------------------------------------------
// Single-input output distributions across widths
// ---------------------------------------------------------------------------

/// Theory curve and histogram for one width parameter n.
struct WidthPanel {
  /// nullopt is the infinite-width limit.
  std::optional<std::size_t> n;
  std::vector<std::size_t> widths;
  double kernel = 0.0;
  double self_energy = 0.0;
  double vertex = 0.0;
  double epsilon = 0.0;
  std::optional<DensityCurve> exponentiated;
  std::optional<DensityCurve> linearized;
  std::vector<HistogramBin> histogram;
  double bin_width = 0.0;
  std::size_t mc_samples = 0;
  /// Fractions of bins with standardized density > 1e-3 agreeing within 3 standard errors.
  std::optional<double> agreement_exp;
  std::optional<double> agreement_lin;
  std::size_t compared_bins = 0;
  DensityMode selected = DensityMode::exponentiated;
  McEstimate mc_cumulant4;

  const DensityCurve& selected_curve() const;
};

/// Mean of the linearly interpolated curve over [lo, hi]; zero outside the grid.
double bin_average(const DensityCurve& curve, double lo, double hi);

/// Fraction of bins whose theory density, in units of sqrt(K), exceeds 1e-3
/// and whose histogram value lies within 3 standard errors of the bin-averaged
/// curve. Also returns the number of bins compared.
std::pair<double, std::size_t> histogram_agreement(const DensityCurve& curve, const std::vector<HistogramBin>& hist,
                                                   double bin_width, double kernel);

/// Flow, both density modes, and a sampled histogram for one width parameter.
WidthPanel run_width_panel(const Matrix& input, const NetworkSpec& network, std::optional<std::size_t> n,
                           const RunSpec& run);

/// (n_0, n, 2n, 1) for "deep", (n_0, n, 1) for "shallow".
std::vector<std::size_t> sweep_widths(std::size_t input_dim, std::size_t n, const std::string& shape);

// ---------------------------------------------------------------------------
// Classification accuracy against epsilon
// ---------------------------------------------------------------------------

struct EpsilonCurve {
  std::size_t train_count = 0;
  std::size_t test_count = 0;
  std::vector<double> epsilons;
  /// accuracy[seed][k] at epsilons[k].
  std::vector<std::vector<double>> accuracy;
  std::vector<double> mean;
  std::vector<double> std_error;
  /// Max over seeds of the relative departure of the prediction shift from
  /// linearity in epsilon.
  double linearity_residual = 0.0;
  /// Paired accuracy difference between the largest epsilon and epsilon = 0.
  double shift_mean = 0.0;
  double shift_std_error = 0.0;
};

/// Depth-2 networks use the factored second-layer vertex; deeper networks
/// build the dense flow.
EpsilonCurve run_epsilon_curve(const ImagePool& pool, const NetworkSpec& network, std::size_t train_count,
                               std::size_t test_count, std::size_t seeds, const std::vector<double>& epsilons,
                               std::uint64_t base_seed, std::size_t classes);

/// Posterior for a dataset with training targets.
PosteriorResult infer(const Dataset& dataset, const Matrix& targets, const NetworkConfig& config,
                      const FlowOptions& options, double epsilon);

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

std::vector<std::filesystem::path> cmd_flow(const ExperimentConfig& config);
std::vector<std::filesystem::path> cmd_density(const ExperimentConfig& config);
std::vector<std::filesystem::path> cmd_mc(const ExperimentConfig& config);
std::vector<std::filesystem::path> cmd_infer(const ExperimentConfig& config);
std::vector<std::filesystem::path> cmd_fig1(const ExperimentConfig& config);
std::vector<std::filesystem::path> cmd_fig2(const ExperimentConfig& config);
/// Writes the synthetic digit pool as IDX files.
std::vector<std::filesystem::path> cmd_synth(const ExperimentConfig& config);

const std::vector<std::string>& command_names();

/// Loads the config, runs the command and maps errors to exit codes:
/// 0 success, 1 numeric failure, 2 configuration or IO error.
int run_command(const std::string& command, const std::filesystem::path& config_path,
                const CommandOverrides& overrides, std::ostream& out, std::ostream& err);

}  // namespace ngp
