#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ngpflow/flow.hpp"

namespace ngp {

enum class DensityMode { exponentiated, linearized };

/// "exp"/"exponentiated" or "lin"/"linearized".
DensityMode parse_density_mode(const std::string& name);
std::string density_mode_name(DensityMode mode);

/// Last-layer quadratic and quartic couplings of the output distribution
/// p(z) ~ exp(-H0(z) - epsilon H1(z)).
struct OutputPotential {
  Matrix kernel;
  Matrix inverse_kernel;
  Matrix raised_self_energy;
  Matrix raised_vertex;
  Matrix j_tilde;
  double epsilon = 0.0;
  std::size_t n_out = 1;

  /// (H0, H1) at outputs z given as n_out x D.
  std::pair<double, double> energy(const Matrix& z) const;
};

/// J^{ab} = S^{ab} - sum_{cd} K_cd [V^{(ac)(bd)} + (n_L / 2) V^{(ab)(cd)}].
Matrix j_tilde(const Matrix& kernel, const Matrix& raised_self_energy, const Matrix& raised_vertex, std::size_t n_out);

/// Requires L >= 2 (epsilon = 1/n_{L-1}); for L = 1 the potential is Gaussian
/// with epsilon = 0.
OutputPotential build_potential(const FlowTrace& trace, const RaiseOptions& options = {});

struct DensityCurve {
  std::vector<double> y;
  std::vector<double> p;
  DensityMode mode = DensityMode::exponentiated;
  /// Half-width of the admissible domain; +inf when untruncated.
  double truncation = 0.0;
};

/// Largest |y| up to which the exponentiated potential keeps growing
/// (+inf when the quartic coupling is non-negative). Throws NumericError when
/// the potential turns over within one standard deviation.
double exponentiated_truncation(const OutputPotential& potential);

/// 2001 points over +-6 sqrt(K), clipped to the truncation in exponentiated mode.
std::vector<double> default_grid(const OutputPotential& potential, DensityMode mode, std::size_t points = 2001);

/// Normalized 1-D density for D = 1, n_out = 1 on an increasing grid.
DensityCurve marginal_density(const OutputPotential& potential, const std::vector<double>& grid, DensityMode mode);

/// Trapezoid integral of f over the curve's grid.
double integrate(const std::vector<double>& x, const std::vector<double>& f);

struct CurveMoments {
  double mass;
  double mean;
  double variance;
  double moment2;
  double cumulant4;
};

CurveMoments curve_moments(const DensityCurve& curve);

}  // namespace ngp
