#pragma once

#include <array>
#include <cstdint>
#include <tuple>
#include <utility>
#include <vector>

#include "ngpflow/core_types.hpp"

namespace ngp {

/// Maximum total degree of a single monomial the pairing enumerator accepts.
inline constexpr int kMaxWickDegree = 16;

/// Sum of real-weighted monomials prod_a z_a^{e_a} over Gaussian variables.
class WickExpression {
 public:
  struct Term {
    double coefficient;
    std::vector<int> exponents;
  };

  explicit WickExpression(std::size_t variables);

  /// Adds coefficient * prod z_a^{exponents[a]}. Throws ConfigError on a
  /// negative exponent, wrong length, or total degree above kMaxWickDegree.
  WickExpression& add(double coefficient, std::vector<int> exponents);

  std::size_t variables() const noexcept { return variables_; }
  const std::vector<Term>& terms() const noexcept { return terms_; }

 private:
  std::size_t variables_;
  std::vector<Term> terms_;
};

/// K_{ab}^power with a <= b.
struct KernelFactor {
  std::uint8_t a;
  std::uint8_t b;
  std::uint8_t power;
  friend bool operator<(const KernelFactor& x, const KernelFactor& y) {
    return std::tie(x.a, x.b, x.power) < std::tie(y.a, y.b, y.power);
  }
  friend bool operator==(const KernelFactor& x, const KernelFactor& y) {
    return x.a == y.a && x.b == y.b && x.power == y.power;
  }
};

/// One product of kernel entries with the number of Wick pairings producing it.
struct PairingMonomial {
  std::vector<KernelFactor> factors;
  std::int64_t count;
};

/// All pairings of the multiset prod z_a^{e_a}, grouped by the product of
/// kernel entries they produce. The result is cached per thread.
const std::vector<PairingMonomial>& pairing_polynomial(const std::vector<int>& exponents);

/// <prod z_a^{e_a}> under N(0, kernel). Exact integer pairing counts times
/// floating-point kernel products.
double monomial_moment(const std::vector<int>& exponents, const Matrix& kernel);

/// <expr> under N(0, kernel). Odd-degree terms vanish and are skipped.
double gaussian_moment(const WickExpression& expr, const Matrix& kernel);

/// m4 minus the three disconnected products.
double connected_four_point(double m4, const std::array<double, 3>& pair_products);

/// <prod_i sigma(z_{sigma_vars[i]}) prod_j z_{extra_vars[j]}> under N(0, kernel)
/// for a polynomial sigma. At most 4 sigma factors and 4 bare factors.
double polynomial_activation_moment(const Activation& activation, const std::vector<std::size_t>& sigma_vars,
                                    const std::vector<std::size_t>& extra_vars, const Matrix& kernel);

/// Expands prod sigma(z_i) prod z_j into a WickExpression over kernel.rows() variables.
WickExpression expand_activation_product(const Activation& activation, const std::vector<std::size_t>& sigma_vars,
                                         const std::vector<std::size_t>& extra_vars, std::size_t variables);

}  // namespace ngp
