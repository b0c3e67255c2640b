#include <doctest.h>

#include <cmath>
#include <random>

#include "ngpflow/quadrature.hpp"
#include "ngpflow/wick.hpp"
#include "oracles.hpp"

using namespace ngp;

namespace {
double relu(double x) { return x > 0.0 ? x : 0.0; }
}  // namespace

TEST_CASE("Gauss-Hermite rule normalization and exactness") {
  for (int q : {1, 5, 20, 40, 80}) {
    const auto rule = QuadratureRule::gauss_hermite(q);
    double sum = 0.0;
    for (double w : rule.weights()) sum += w;
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
  const auto rule = QuadratureRule::gauss_hermite(5);
  for (int k = 0; k <= 8; ++k) {
    double m = 0.0;
    for (int i = 0; i < rule.order(); ++i) m += rule.weights()[i] * std::pow(rule.nodes()[i], k);
    double exact = k % 2 ? 0.0 : 1.0;
    for (int j = k - 1; j > 0 && k % 2 == 0; j -= 2) exact *= j;
    CHECK(std::abs(m - exact) < 1e-12 * std::max(1.0, exact));
  }
  const auto gl = QuadratureRule::gauss_legendre(12);
  double sum = 0.0;
  for (double w : gl.weights()) sum += w;
  CHECK(std::abs(sum - 2.0) < 1e-13);
  CHECK_THROWS_AS(QuadratureRule::gauss_hermite(0), ConfigError);
}

TEST_CASE("expect: variance") {
  CHECK(std::abs(expect([](const double* z) { return z[0] * z[0]; }, Matrix::Constant(1, 1, 2.0)) - 2.0) < 1e-10);
}

TEST_CASE("expect: polynomials match the Wick engine for d <= 4") {
  std::mt19937_64 rng(21);
  for (std::size_t d = 1; d <= 4; ++d) {
    for (int trial = 0; trial < 5; ++trial) {
      const Matrix k = oracle::random_spd(d, rng);
      std::vector<int> e(d, 0);
      std::uniform_int_distribution<int> pw(0, 4);
      int total = 0;
      for (auto& x : e) total += (x = pw(rng));
      if (total % 2) ++e[0];
      const double q = expect(
          [&](const double* z) {
            double p = 1.0;
            for (std::size_t a = 0; a < d; ++a) p *= std::pow(z[a], e[a]);
            return p;
          },
          k);
      const double w = monomial_moment(e, k);
      CHECK(std::abs(q - w) <= 1e-9 * std::max(1.0, std::abs(w)));
    }
  }
}

TEST_CASE("ReLU: single input and the arc-cosine kernel") {
  const double k = 1.7;
  const auto act = Activation::relu();
  CHECK(std::abs(quadrature_activation_moment(act, {0, 0}, {}, Matrix::Constant(1, 1, k)) - k / 2) < 1e-12);
  CHECK(std::abs(quadrature_activation_moment(act, {0, 1}, {}, Matrix::Identity(2, 2) * k) -
                 k / (2.0 * std::numbers::pi)) < 1e-12);
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix kk = oracle::random_spd(2, rng);
    const double q = quadrature_activation_moment(act, {0, 1}, {}, kk);
    CHECK(oracle::rel_diff(q, oracle::arccos_relu(kk(0, 0), kk(1, 1), kk(0, 1))) < 1e-10);
  }
}

TEST_CASE("ReLU: half-Gaussian fourth moment") {
  const double q = quadrature_activation_moment(Activation::relu(), {0, 0}, {0, 0}, Matrix::Identity(1, 1));
  const double simpson = oracle::simpson(
      [](double x) { return x * x * x * x * std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }, 0.0, 40.0,
      20000);
  CHECK(std::abs(q - 1.5) < 1e-12);
  CHECK(std::abs(simpson - 1.5) < 1e-10);
}

TEST_CASE("homogeneous rule with a kink off the axes") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix k = oracle::random_spd(2, rng);
    const double h = expect_homogeneous([](const double* z) { return relu(z[0]) * relu(z[1]) * z[0] * z[1]; }, k, 4);
    const double norm = std::sqrt(k(0, 0) * k(1, 1));
    const double cosine = k(0, 1) / norm;
    const double theta = std::acos(cosine);
    const double exact = norm * norm / (2.0 * std::numbers::pi) *
                         (3.0 * std::sin(theta) * cosine + (std::numbers::pi - theta) * (1.0 + 2.0 * cosine * cosine));
    CHECK(std::abs(h - exact) < 1e-11 * exact);
  }
}

TEST_CASE("convergence self-test: doubling the order changes little") {
  std::mt19937_64 rng(24);
  const Matrix k1 = Matrix::Constant(1, 1, 0.8);
  const Matrix k2 = oracle::random_spd(2, rng);
  for (std::string name : {"tanh", "erf", "gelu", "swish"}) {
    const auto act = Activation::numeric(name);
    for (const Matrix* k : {&k1, &k2}) {
      const std::vector<std::size_t> sig = k->rows() == 1 ? std::vector<std::size_t>{0, 0}
                                                          : std::vector<std::size_t>{0, 1};
      const double a = quadrature_activation_moment(act, sig, {}, *k);
      const double b = quadrature_activation_moment(act, sig, {}, *k, 2 * default_order(k->rows(), act));
      INFO(name, " d=", k->rows());
      CHECK(std::abs(a - b) <= 1e-8 * std::abs(b));
    }
  }
  const auto relu_act = Activation::relu();
  const double a = quadrature_activation_moment(relu_act, {0, 1}, {0, 1}, k2);
  const double b = quadrature_activation_moment(relu_act, {0, 1}, {0, 1}, k2, 80);
  CHECK(std::abs(a - b) <= 1e-8 * std::abs(b));
}

TEST_CASE("PSD repair") {
  Matrix k(2, 2);
  k << 1.0, 1.0, 1.0, 1.0 - 1e-14;
  const Matrix l = psd_factor(k);
  CHECK((l * l.transpose() - k).cwiseAbs().maxCoeff() < 1e-12);
  Matrix bad(2, 2);
  bad << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(psd_factor(bad), NumericError);
}

TEST_CASE("centered pair expectations") {
  const double k = 1.3;
  const Matrix kk = Matrix::Constant(1, 1, k);
  auto lin = [](double a, double b) { return a * b; };
  auto quad = [](double a, double b) { return a * a * b * b; };
  CHECK(std::abs(expect_centered_pair(lin, {0, 0}, {0, 0}, kk) - 2 * k * k) < 1e-12);
  CHECK(std::abs(expect_centered_pair(quad, {0, 0}, {0, 0}, Matrix::Identity(1, 1)) - 12.0) < 1e-11);

  Matrix block = Matrix::Zero(4, 4);
  std::mt19937_64 rng(25);
  block.topLeftCorner(2, 2) = oracle::random_spd(2, rng);
  block.bottomRightCorner(2, 2) = oracle::random_spd(2, rng);
  CHECK(std::abs(expect_centered_pair([](double a, double b) { return std::tanh(a) * std::tanh(b); }, {0, 1}, {2, 3},
                                      block)) < 1e-14);
}

TEST_CASE("quartic combination matches brute-force moments") {
  std::mt19937_64 rng(26);
  const std::vector<double> c{0.2, 0.5, -0.4};
  const auto act = Activation::polynomial(c);
  auto f = [&](double a, double b) { return act(a) * act(b); };
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix k = oracle::random_spd(5, rng);
    std::uniform_int_distribution<std::size_t> pick(0, 4);
    const std::array<std::size_t, 2> s{pick(rng), pick(rng)};
    const std::array<std::size_t, 4> q{pick(rng), pick(rng), pick(rng), pick(rng)};
    const std::vector<std::size_t> sig{s[0], s[1]};
    const double expected =
        oracle::poly_moment(c, sig, {q[0], q[1], q[2], q[3]}, k) -
        2 * oracle::poly_moment(c, sig, {q[0], q[1]}, k) * k(q[2], q[3]) -
        4 * oracle::poly_moment(c, sig, {q[0], q[2]}, k) * k(q[1], q[3]) +
        oracle::poly_moment(c, sig, {}, k) * (k(q[0], q[1]) * k(q[2], q[3]) + 2 * k(q[0], q[2]) * k(q[1], q[3]));
    const double got = expect_quartic_combination(f, s, q, k);
    CHECK(std::abs(got - expected) <= 1e-9 * std::max(1.0, std::abs(expected)));
  }
  const double lin = expect_quartic_combination([](double a, double b) { return a * b; }, {0, 0}, {0, 0, 0, 0},
                                                Matrix::Identity(1, 1));
  const double lin_oracle = oracle::poly_moment({0.0, 1.0}, {0, 0}, {0, 0, 0, 0}, Matrix::Identity(1, 1)) -
                            6 * oracle::poly_moment({0.0, 1.0}, {0, 0}, {0, 0}, Matrix::Identity(1, 1)) + 3.0;
  CHECK(std::abs(lin - lin_oracle) < 1e-11);
}

TEST_CASE("quartic bracket vanishes for constant f once symmetrized") {
  std::mt19937_64 rng(27);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix k = oracle::random_spd(4, rng);
    std::uniform_int_distribution<std::size_t> pick(0, 3);
    const std::array<std::size_t, 4> q{pick(rng), pick(rng), pick(rng), pick(rng)};
    auto one = [](double, double) { return 1.0; };
    const double sum = expect_quartic_combination(one, {0, 1}, q, k) +
                       expect_quartic_combination(one, {0, 1}, {q[0], q[1], q[3], q[2]}, k);
    CHECK(std::abs(sum) < 1e-9);
  }
}

TEST_CASE("quadrature activation moments agree with Wick for polynomials") {
  std::mt19937_64 rng(28);
  const auto act = Activation::polynomial({0.1, 0.9, 0.3, -0.2});
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix k = oracle::random_spd(4, rng);
    for (const auto& sig : {std::vector<std::size_t>{0, 1}, std::vector<std::size_t>{0, 1, 2, 3},
                            std::vector<std::size_t>{2, 2, 3, 1}}) {
      const double w = polynomial_activation_moment(act, sig, {}, k);
      const double q = quadrature_activation_moment(act, sig, {}, k);
      CHECK(std::abs(w - q) <= 1e-9 * std::max(1.0, std::abs(w)));
    }
  }
}
