#include <doctest.h>

#include <cmath>
#include <numbers>

#include "ngpflow/density.hpp"
#include "oracles.hpp"

using namespace ngp;

namespace {

OutputPotential scalar_potential(double k, double v, double s, double eps) {
  OutputPotential pot;
  pot.kernel = Matrix::Constant(1, 1, k);
  pot.inverse_kernel = Matrix::Constant(1, 1, 1.0 / k);
  pot.raised_self_energy = Matrix::Constant(1, 1, s / (k * k));
  pot.raised_vertex = Matrix::Constant(1, 1, v / (k * k * k * k));
  pot.n_out = 1;
  pot.epsilon = eps;
  pot.j_tilde = j_tilde(pot.kernel, pot.raised_self_energy, pot.raised_vertex, 1);
  return pot;
}

FlowTrace scalar_trace(const Activation& act, double cw, std::size_t width, Backend backend = Backend::wick) {
  Matrix x(1, 1);
  x << 1.0;
  const auto cfg = NetworkConfig::uniform({1, width, width, 1}, 0.0, cw, act);
  return run_flow(Dataset(x, 1), cfg, {backend});
}

}  // namespace

TEST_CASE("J tilde for a single sample with S = 0") {
  const auto pot = scalar_potential(1.7, 2.3, 0.0, 0.1);
  CHECK(pot.j_tilde(0, 0) == doctest::Approx(-1.5 * 2.3 / std::pow(1.7, 3)).epsilon(1e-14));
  const auto pot3 = scalar_potential(1.7, 2.3, 0.4, 0.1);
  const Matrix j3 = j_tilde(pot3.kernel, pot3.raised_self_energy, pot3.raised_vertex, 3);
  CHECK(j3(0, 0) == doctest::Approx(0.4 / (1.7 * 1.7) - 2.5 * 2.3 / std::pow(1.7, 3)).epsilon(1e-14));
}

TEST_CASE("potential built from a flow trace") {
  const auto trace = scalar_trace(Activation::relu(), 2.0, 20, Backend::quadrature);
  const auto pot = build_potential(trace);
  const double k = trace.last().kernel()(0, 0);
  CHECK(pot.epsilon == doctest::Approx(0.05));
  CHECK(pot.raised_vertex(0, 0) == doctest::Approx(trace.last().vertex()(0, 0) / std::pow(k, 4)).epsilon(1e-12));
  CHECK(pot.inverse_kernel(0, 0) == doctest::Approx(1.0 / k).epsilon(1e-14));
}

TEST_CASE("epsilon = 0 gives the Gaussian in both modes") {
  const double k = 1.3;
  const auto pot = scalar_potential(k, 5.0, 0.2, 0.0);
  for (auto mode : {DensityMode::exponentiated, DensityMode::linearized}) {
    const auto curve = marginal_density(pot, default_grid(pot, mode), mode);
    for (std::size_t i = 0; i < curve.y.size(); i += 50) {
      const double g = std::exp(-0.5 * curve.y[i] * curve.y[i] / k) / std::sqrt(2.0 * std::numbers::pi * k);
      CHECK(std::abs(curve.p[i] - g) < 1e-8 * std::max(g, 1e-3));
    }
  }
}

TEST_CASE("densities are even and normalized") {
  const auto pot = scalar_potential(0.9, 2.0, 0.0, 0.01);
  for (auto mode : {DensityMode::exponentiated, DensityMode::linearized}) {
    const auto curve = marginal_density(pot, default_grid(pot, mode), mode);
    for (std::size_t i = 0; i < curve.y.size(); ++i) {
      CHECK(curve.p[i] == doctest::Approx(curve.p[curve.y.size() - 1 - i]).epsilon(1e-13));
    }
    const double simpson = [&] {
      const double h = curve.y[1] - curve.y[0];
      double acc = curve.p.front() + curve.p.back();
      for (std::size_t i = 1; i + 1 < curve.y.size(); ++i) acc += (i % 2 ? 4.0 : 2.0) * curve.p[i];
      return acc * h / 3.0;
    }();
    CHECK(std::abs(simpson - 1.0) < 1e-6);
    CHECK(std::abs(curve_moments(curve).mass - 1.0) < 1e-12);
  }
}

TEST_CASE("linearized moments match a Simpson integration of the reweighted Gaussian") {
  const double k = 1.0, v = 2.0, eps = 0.02;
  const auto pot = scalar_potential(k, v, 0.3, eps);
  const double q = -0.5 * pot.j_tilde(0, 0), r = -0.125 * pot.raised_vertex(0, 0);
  auto weight = [&](double y, int power) {
    return std::pow(y, power) * std::exp(-0.5 * y * y / k) * (1.0 - eps * (q * y * y + r * y * y * y * y));
  };
  const double half = 6.0 * std::sqrt(k);
  auto moment = [&](int power) { return oracle::simpson([&](double y) { return weight(y, power); }, -half, half, 4000); };
  const double m0 = moment(0), m2 = moment(2) / m0, m4 = moment(4) / m0;
  const auto curve = marginal_density(pot, default_grid(pot, DensityMode::linearized, 4001), DensityMode::linearized);
  const auto mom = curve_moments(curve);
  CHECK(mom.moment2 == doctest::Approx(m2).epsilon(1e-6));
  CHECK(mom.cumulant4 == doctest::Approx(m4 - 3.0 * m2 * m2).epsilon(1e-4));
}

TEST_CASE("with S = 0 the linearized variance is K and the fourth cumulant is 3 eps V") {
  const double k = 1.4, v = 3.1, eps = 0.01;
  const auto pot = scalar_potential(k, v, 0.0, eps);
  const auto curve = marginal_density(pot, default_grid(pot, DensityMode::linearized), DensityMode::linearized);
  const auto mom = curve_moments(curve);
  CHECK(mom.variance == doctest::Approx(k).epsilon(1e-6));
  CHECK(mom.cumulant4 == doctest::Approx(3.0 * eps * v).epsilon(0.02));
}

TEST_CASE("exponentiated and linearized modes differ at second order in epsilon") {
  const double k = 1.0, v = 2.0;
  auto gap = [&](double eps) {
    const auto pot = scalar_potential(k, v, 0.0, eps);
    const auto grid = default_grid(pot, DensityMode::exponentiated, 4001);
    const auto e = curve_moments(marginal_density(pot, grid, DensityMode::exponentiated));
    const auto l = curve_moments(marginal_density(pot, grid, DensityMode::linearized));
    return e.cumulant4 - l.cumulant4;
  };
  const double ratio = gap(0.002) / gap(0.001);
  CHECK(ratio > 3.5);
  CHECK(ratio < 4.5);
}

TEST_CASE("second moment is K + eps S up to second order") {
  const double k = 1.2, v = 2.0, s = 0.6;
  auto residual = [&](double eps) {
    const auto pot = scalar_potential(k, v, s, eps);
    const auto grid = default_grid(pot, DensityMode::exponentiated, 4001);
    return curve_moments(marginal_density(pot, grid, DensityMode::exponentiated)).moment2 - (k + eps * s);
  };
  const double ratio = residual(0.002) / residual(0.001);
  CHECK(ratio > 3.5);
  CHECK(ratio < 4.5);
}

TEST_CASE("exponentiated truncation") {
  const double k = 1.0, v = 2.0, eps = 0.05;
  const auto pot = scalar_potential(k, v, 0.0, eps);
  const double a = 0.5 / k - 0.5 * eps * pot.j_tilde(0, 0);
  const double c = -eps * pot.raised_vertex(0, 0) / 8.0;
  CHECK(exponentiated_truncation(pot) == doctest::Approx(std::sqrt(-a / (2.0 * c))));
  CHECK(std::isinf(exponentiated_truncation(scalar_potential(k, -v, 0.0, eps))));
  CHECK_THROWS_AS(exponentiated_truncation(scalar_potential(k, 2.0, 12.5, 0.1)), NumericError);
  CHECK_THROWS_AS(exponentiated_truncation(scalar_potential(k, 2.0, 20.0, 0.1)), NumericError);
  std::vector<double> wide(101);
  for (std::size_t i = 0; i < wide.size(); ++i) wide[i] = -10.0 + 0.2 * static_cast<double>(i);
  CHECK_THROWS_AS(marginal_density(pot, wide, DensityMode::exponentiated), NumericError);
}

TEST_CASE("grid validation") {
  const auto pot = scalar_potential(1.0, 1.0, 0.0, 0.01);
  CHECK_THROWS_AS(marginal_density(pot, {0.0, 1.0, 2.0}, DensityMode::linearized), ConfigError);
  CHECK_THROWS_AS(marginal_density(pot, {0.0, 1.0, 1.0, 2.0, 3.0}, DensityMode::linearized), ConfigError);
  CHECK_THROWS_AS(marginal_density(pot, default_grid(pot, DensityMode::linearized, 9), DensityMode::linearized),
                  NumericError);
  CHECK_THROWS_AS(parse_density_mode("cubic"), ConfigError);
  CHECK(parse_density_mode("lin") == DensityMode::linearized);
}

TEST_CASE("marginal densities need a scalar output") {
  OutputPotential pot = scalar_potential(1.0, 1.0, 0.0, 0.01);
  pot.n_out = 2;
  CHECK_THROWS_AS(default_grid(pot, DensityMode::linearized), ConfigError);
}

TEST_CASE("depth-one networks have a Gaussian potential") {
  Matrix x(1, 1);
  x << 2.0;
  const auto trace = run_flow(Dataset(x, 1), NetworkConfig::uniform({1, 1}, 0.0, 1.0, Activation::linear()));
  const auto pot = build_potential(trace);
  CHECK(pot.epsilon == 0.0);
  CHECK(pot.kernel(0, 0) == doctest::Approx(4.0));
}
