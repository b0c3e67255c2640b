#include "ngpflow/wick.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <string>

namespace ngp {

namespace {
constexpr const char* kModule = "wick-engine";

using FactorList = std::vector<KernelFactor>;

void multiply_edge(FactorList& factors, std::uint8_t a, std::uint8_t b) {
  auto it = std::find_if(factors.begin(), factors.end(), [&](const KernelFactor& f) { return f.a == a && f.b == b; });
  if (it != factors.end()) {
    ++it->power;
    return;
  }
  factors.push_back({a, b, 1});
  std::sort(factors.begin(), factors.end());
}

std::vector<PairingMonomial> enumerate(const std::vector<int>& exponents);

std::map<std::vector<int>, std::vector<PairingMonomial>>& cache() {
  thread_local std::map<std::vector<int>, std::vector<PairingMonomial>> table;
  return table;
}

const std::vector<PairingMonomial>& lookup(const std::vector<int>& exponents) {
  auto& table = cache();
  auto it = table.find(exponents);
  if (it != table.end()) return it->second;
  auto value = enumerate(exponents);
  return table.emplace(exponents, std::move(value)).first->second;
}

std::vector<PairingMonomial> enumerate(const std::vector<int>& exponents) {
  const auto first = std::find_if(exponents.begin(), exponents.end(), [](int e) { return e > 0; });
  if (first == exponents.end()) return {PairingMonomial{{}, 1}};
  const int total = std::accumulate(exponents.begin(), exponents.end(), 0);
  if (total % 2 != 0) return {};

  const auto i = static_cast<std::size_t>(first - exponents.begin());
  std::map<FactorList, std::int64_t> merged;
  for (std::size_t j = i; j < exponents.size(); ++j) {
    const int ways = j == i ? exponents[i] - 1 : exponents[j];
    if (ways <= 0) continue;
    std::vector<int> rest = exponents;
    --rest[i];
    --rest[j];
    for (const auto& mono : lookup(rest)) {
      FactorList factors = mono.factors;
      multiply_edge(factors, static_cast<std::uint8_t>(i), static_cast<std::uint8_t>(j));
      merged[factors] += mono.count * ways;
    }
  }
  std::vector<PairingMonomial> out;
  out.reserve(merged.size());
  for (auto& [factors, count] : merged) out.push_back({factors, count});
  return out;
}

void check_degree(const std::vector<int>& exponents) {
  int total = 0;
  for (int e : exponents) {
    if (e < 0) throw ConfigError(kModule, "negative exponent in monomial");
    total += e;
  }
  if (total > kMaxWickDegree) {
    throw ConfigError(kModule, "monomial degree " + std::to_string(total) + " exceeds the pairing guard of " +
                                   std::to_string(kMaxWickDegree));
  }
  if (exponents.size() > 255) throw ConfigError(kModule, "too many Gaussian variables");
}
}  // namespace

WickExpression::WickExpression(std::size_t variables) : variables_(variables) {}

WickExpression& WickExpression::add(double coefficient, std::vector<int> exponents) {
  if (exponents.size() != variables_) throw ConfigError(kModule, "exponent vector has the wrong length");
  check_degree(exponents);
  terms_.push_back({coefficient, std::move(exponents)});
  return *this;
}

const std::vector<PairingMonomial>& pairing_polynomial(const std::vector<int>& exponents) {
  check_degree(exponents);
  return lookup(exponents);
}

double monomial_moment(const std::vector<int>& exponents, const Matrix& kernel) {
  check_degree(exponents);
  if (kernel.rows() != static_cast<Eigen::Index>(exponents.size()) || kernel.cols() != kernel.rows()) {
    throw ConfigError(kModule, "kernel size does not match the number of variables");
  }
  std::vector<int> squeezed;
  std::vector<Eigen::Index> original;
  int total = 0;
  for (std::size_t a = 0; a < exponents.size(); ++a) {
    if (exponents[a] == 0) continue;
    squeezed.push_back(exponents[a]);
    original.push_back(static_cast<Eigen::Index>(a));
    total += exponents[a];
  }
  if (total % 2 != 0) return 0.0;
  double acc = 0.0;
  for (const auto& mono : lookup(squeezed)) {
    double term = static_cast<double>(mono.count);
    for (const auto& f : mono.factors) {
      const double k = kernel(original[f.a], original[f.b]);
      for (int p = 0; p < f.power; ++p) term *= k;
    }
    acc += term;
  }
  return acc;
}

double gaussian_moment(const WickExpression& expr, const Matrix& kernel) {
  if (kernel.rows() != static_cast<Eigen::Index>(expr.variables()) || kernel.cols() != kernel.rows()) {
    throw ConfigError(kModule, "kernel size does not match the number of variables");
  }
  double acc = 0.0;
  for (const auto& term : expr.terms()) {
    if (term.coefficient == 0.0) continue;
    const int total = std::accumulate(term.exponents.begin(), term.exponents.end(), 0);
    if (total % 2 != 0) continue;
    acc += term.coefficient * monomial_moment(term.exponents, kernel);
  }
  return acc;
}

double connected_four_point(double m4, const std::array<double, 3>& pair_products) {
  return m4 - pair_products[0] - pair_products[1] - pair_products[2];
}

WickExpression expand_activation_product(const Activation& activation, const std::vector<std::size_t>& sigma_vars,
                                         const std::vector<std::size_t>& extra_vars, std::size_t variables) {
  const auto& coeffs = activation.coefficients();
  for (auto v : sigma_vars) {
    if (v >= variables) throw ConfigError(kModule, "sigma variable out of range");
  }
  for (auto v : extra_vars) {
    if (v >= variables) throw ConfigError(kModule, "bare variable out of range");
  }
  std::map<std::vector<int>, double> terms;
  std::vector<int> base(variables, 0);
  for (auto v : extra_vars) ++base[v];
  terms[base] = 1.0;
  for (auto v : sigma_vars) {
    std::map<std::vector<int>, double> next;
    for (const auto& [exps, c] : terms) {
      for (std::size_t k = 0; k < coeffs.size(); ++k) {
        if (coeffs[k] == 0.0) continue;
        auto e = exps;
        e[v] += static_cast<int>(k);
        next[e] += c * coeffs[k];
      }
    }
    terms = std::move(next);
  }
  WickExpression expr(variables);
  for (auto& [exps, c] : terms) {
    if (c != 0.0) expr.add(c, exps);
  }
  return expr;
}

double polynomial_activation_moment(const Activation& activation, const std::vector<std::size_t>& sigma_vars,
                                    const std::vector<std::size_t>& extra_vars, const Matrix& kernel) {
  if (!activation.is_polynomial()) {
    throw ConfigError(kModule, "activation '" + activation.name() +
                                   "' is not polynomial; the Wick backend cannot expand it, use the quadrature backend");
  }
  if (sigma_vars.size() > 4 || extra_vars.size() > 4) {
    throw ConfigError(kModule, "at most 4 sigma factors and 4 bare factors are supported");
  }
  const auto expr = expand_activation_product(activation, sigma_vars, extra_vars, static_cast<std::size_t>(kernel.rows()));
  return gaussian_moment(expr, kernel);
}

}  // namespace ngp
