#pragma once

#include <array>
#include <functional>
#include <vector>

#include "ngpflow/core_types.hpp"

namespace ngp {

/// Gauss rule on a fixed interval and weight. For Gauss-Hermite the weight is
/// the standard normal density, so weights sum to 1.
class QuadratureRule {
 public:
  /// Probabilists' Gauss-Hermite rule with Q nodes (Golub-Welsch).
  static QuadratureRule gauss_hermite(int order);
  /// Gauss-Legendre rule on [-1, 1]; weights sum to 2.
  static QuadratureRule gauss_legendre(int order);

  int order() const noexcept { return static_cast<int>(nodes_.size()); }
  const std::vector<double>& nodes() const noexcept { return nodes_; }
  const std::vector<double>& weights() const noexcept { return weights_; }

 private:
  QuadratureRule(std::vector<double> nodes, std::vector<double> weights)
      : nodes_(std::move(nodes)), weights_(std::move(weights)) {}

  std::vector<double> nodes_;
  std::vector<double> weights_;
};

/// 40 nodes per dimension for d <= 2, 20 for d = 3, 4.
int default_order(std::size_t dims);
/// As above, but 80 nodes for smooth non-polynomial activations with d <= 2,
/// whose nearest complex singularities slow Gauss-Hermite convergence.
int default_order(std::size_t dims, const Activation& activation);

/// Cached rule of the given order.
const QuadratureRule& hermite_rule(int order);

/// Factor L with L L^T = kernel after PSD repair. Eigenvalues in [-1e-10, 0]
/// are clipped to zero, anything more negative raises NumericError.
Matrix psd_factor(const Matrix& kernel);

using Integrand = std::function<double(const double* z)>;

/// <f(z)> for z ~ N(0, kernel), d = kernel.rows() in 1..4, by a tensor-product
/// Gauss-Hermite rule over z = L u.
double expect(const Integrand& f, const Matrix& kernel, const QuadratureRule& rule);
double expect(const Integrand& f, const Matrix& kernel);

/// <g(z)> for a positively homogeneous g of the given degree, g(t z) = t^degree g(z)
/// for t > 0, and d in {1, 2}. The radial integral is done in closed form and
/// the angular one by Gauss-Legendre on arcs split where any coordinate of z
/// vanishes, so integrands with kinks on the coordinate axes converge spectrally.
double expect_homogeneous(const Integrand& g, const Matrix& kernel, int degree, int order = 40);

/// <prod_i sigma(z_{sigma_vars[i]}) prod_j z_{extra_vars[j]}> by quadrature over
/// the distinct variables involved. Uses the homogeneous rule for ReLU in one
/// or two dimensions and the tensor rule otherwise.
double quadrature_activation_moment(const Activation& activation, const std::vector<std::size_t>& sigma_vars,
                                    const std::vector<std::size_t>& extra_vars, const Matrix& kernel,
                                    int order = 0);

// ---------------------------------------------------------------------------
// Conditioning on a sigma pair
// ---------------------------------------------------------------------------

/// Decomposition z = beta u + r for u = (z_a, z_b) (or u = z_a when a = b),
/// r ~ N(0, residual) independent of u.
struct PairConditioning {
  std::size_t a = 0;
  std::size_t b = 0;
  int dim = 1;
  Matrix block;     // dim x dim covariance of u
  Matrix beta;      // D x dim
  Matrix residual;  // D x D

  static PairConditioning build(const Matrix& kernel, std::size_t a, std::size_t b);
};

/// <f(u) u^{k...}> moments up to fourth order in u for the sigma pair.
struct PairMoments {
  int dim = 1;
  double m0 = 0.0;
  Matrix m2;                   // dim x dim
  std::array<double, 16> m4{};  // index ((k*2 + l)*2 + m)*2 + n

  double fourth(int k, int l, int m, int n) const { return m4[((k * 2 + l) * 2 + m) * 2 + n]; }

  /// Fills all moments from a callback returning <f(u) prod_k u_k^{e_k}>.
  static PairMoments from(int dim, const std::function<double(const std::array<int, 2>&)>& moment);
};

/// Moments of f(u_1, u_2) (f(u, u) when dim = 1) under N(0, block) by Gauss-Hermite.
PairMoments pair_moments(const std::function<double(double, double)>& f, const Matrix& block, int order = 0);

/// <f . (z_c z_d - K_cd)> given the conditioning and the moments.
double centered_pair_value(const PairConditioning& cond, const PairMoments& mom, std::size_t c, std::size_t d);

/// <f . (z_c z_d z_e z_f - 2 z_c z_d K_ef - 4 z_c z_e K_df + K_cd K_ef + 2 K_ce K_df)>.
double quartic_combination_value(const PairConditioning& cond, const PairMoments& mom, const Matrix& kernel,
                                 std::size_t c, std::size_t d, std::size_t e, std::size_t f);

/// <f(z_a, z_b) (z_c z_d - K_cd)> under N(0, kernel).
double expect_centered_pair(const std::function<double(double, double)>& f, std::array<std::size_t, 2> sigma_vars,
                            std::array<std::size_t, 2> pair_vars, const Matrix& kernel);

/// <f(z_a, z_b) (quartic bracket over quad_vars)> under N(0, kernel).
double expect_quartic_combination(const std::function<double(double, double)>& f,
                                  std::array<std::size_t, 2> sigma_vars, std::array<std::size_t, 4> quad_vars,
                                  const Matrix& kernel);

}  // namespace ngp
