#include "ngpflow/density.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace ngp {

namespace {
constexpr const char* kModule = "density";

void require_scalar(const OutputPotential& potential) {
  if (potential.kernel.rows() != 1 || potential.n_out != 1) {
    throw ConfigError(kModule, "marginal densities need a single input and a single output (D = 1, n_L = 1)");
  }
}

/// Quadratic and quartic coefficients of H0 + eps H1 = a y^2 + c y^4 for D = n_L = 1.
std::pair<double, double> scalar_coefficients(const OutputPotential& potential) {
  const double a = 0.5 * potential.inverse_kernel(0, 0) - 0.5 * potential.epsilon * potential.j_tilde(0, 0);
  const double c = -0.125 * potential.epsilon * potential.raised_vertex(0, 0);
  return {a, c};
}
}  // namespace

DensityMode parse_density_mode(const std::string& name) {
  if (name == "exp" || name == "exponentiated") return DensityMode::exponentiated;
  if (name == "lin" || name == "linearized") return DensityMode::linearized;
  throw ConfigError(kModule, "unknown density mode '" + name + "' (expected exp or lin)");
}

std::string density_mode_name(DensityMode mode) { return mode == DensityMode::exponentiated ? "exp" : "lin"; }

std::pair<double, double> OutputPotential::energy(const Matrix& z) const {
  const auto d = kernel.rows();
  if (z.cols() != d || static_cast<std::size_t>(z.rows()) != n_out) {
    throw ConfigError(kModule, "output array must be n_L x D");
  }
  const Matrix gram = z.transpose() * z;
  const double h0 = 0.5 * (inverse_kernel.cwiseProduct(gram)).sum();
  const PairTable pairs(static_cast<std::size_t>(d));
  const Vector g = pairs.pack_weighted(gram);
  const double h1 = -0.5 * (j_tilde.cwiseProduct(gram)).sum() - 0.125 * g.dot(raised_vertex * g);
  return {h0, h1};
}

Matrix j_tilde(const Matrix& kernel, const Matrix& raised_self_energy, const Matrix& raised_vertex, std::size_t n_out) {
  const auto d = static_cast<std::size_t>(kernel.rows());
  const PairTable pairs(d);
  Matrix out = raised_self_energy;
  const Vector parallel = raised_vertex * pairs.pack_weighted(kernel);
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = 0; b < d; ++b) {
      double cross = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const auto ac = pairs.index(a, c);
        for (std::size_t e = 0; e < d; ++e) cross += kernel(c, e) * raised_vertex(ac, pairs.index(b, e));
      }
      out(a, b) -= cross + 0.5 * static_cast<double>(n_out) * parallel[pairs.index(a, b)];
    }
  }
  return 0.5 * (out + out.transpose());
}

OutputPotential build_potential(const FlowTrace& trace, const RaiseOptions& options) {
  if (trace.states.size() != trace.config.depth()) throw ConfigError(kModule, "flow trace is incomplete");
  const FlowState& last = trace.last();
  OutputPotential pot;
  const RaisedTensors raised = raise_indices(last, options);
  pot.kernel = last.kernel();
  pot.inverse_kernel = raised.inverse_kernel;
  pot.raised_self_energy = raised.self_energy;
  pot.raised_vertex = raised.vertex;
  pot.n_out = trace.config.output_dim();
  pot.epsilon = trace.config.depth() >= 2 ? trace.config.epsilon() : 0.0;
  pot.j_tilde = j_tilde(pot.kernel, pot.raised_self_energy, pot.raised_vertex, pot.n_out);
  return pot;
}

double exponentiated_truncation(const OutputPotential& potential) {
  require_scalar(potential);
  const auto [a, c] = scalar_coefficients(potential);
  const double sd = std::sqrt(potential.kernel(0, 0));
  if (!(a > 0.0)) throw NumericError(kModule, "exponentiated potential has a non-positive quadratic coupling");
  if (c >= 0.0) return std::numeric_limits<double>::infinity();
  const double ymax = std::sqrt(-a / (2.0 * c));
  if (ymax < sd) {
    std::ostringstream msg;
    msg << "exponentiated potential stops growing at |y| = " << ymax << ", inside one standard deviation (" << sd
        << "); use the linearized mode";
    throw NumericError(kModule, msg.str());
  }
  return ymax;
}

std::vector<double> default_grid(const OutputPotential& potential, DensityMode mode, std::size_t points) {
  require_scalar(potential);
  if (points < 3) throw ConfigError(kModule, "grid needs at least 3 points");
  double half = 6.0 * std::sqrt(potential.kernel(0, 0));
  if (mode == DensityMode::exponentiated) half = std::min(half, exponentiated_truncation(potential));
  std::vector<double> grid(points);
  for (std::size_t i = 0; i < points; ++i) {
    grid[i] = -half + 2.0 * half * static_cast<double>(i) / static_cast<double>(points - 1);
  }
  return grid;
}

double integrate(const std::vector<double>& x, const std::vector<double>& f) {
  double acc = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) acc += 0.5 * (x[i] - x[i - 1]) * (f[i] + f[i - 1]);
  return acc;
}

DensityCurve marginal_density(const OutputPotential& potential, const std::vector<double>& grid, DensityMode mode) {
  require_scalar(potential);
  if (grid.size() < 5) throw ConfigError(kModule, "grid needs at least 5 points");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) throw ConfigError(kModule, "grid must be strictly increasing");
  }
  DensityCurve curve;
  curve.mode = mode;
  curve.y = grid;
  curve.p.resize(grid.size());
  const double k = potential.kernel(0, 0);
  const double eps = potential.epsilon;

  if (mode == DensityMode::exponentiated) {
    curve.truncation = exponentiated_truncation(potential);
    const double reach = std::max(std::abs(grid.front()), std::abs(grid.back()));
    if (reach > curve.truncation * (1.0 + 1e-12)) {
      std::ostringstream msg;
      msg << "grid reaches |y| = " << reach << " but the exponentiated density is only normalizable for |y| <= "
          << curve.truncation;
      throw NumericError(kModule, msg.str());
    }
    const auto [a, c] = scalar_coefficients(potential);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double y2 = grid[i] * grid[i];
      curve.p[i] = std::exp(-(a * y2 + c * y2 * y2));
    }
  } else {
    curve.truncation = std::numeric_limits<double>::infinity();
    const double h1_quad = -0.5 * potential.j_tilde(0, 0);
    const double h1_quart = -0.125 * potential.raised_vertex(0, 0);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double y2 = grid[i] * grid[i];
      const double g = std::exp(-0.5 * y2 / k);
      const double factor = 1.0 - eps * (h1_quad * y2 + h1_quart * y2 * y2);
      if (factor < 0.0) {
        std::ostringstream msg;
        msg << "linearized density turns negative at y = " << grid[i] << "; narrow the grid";
        throw NumericError(kModule, msg.str());
      }
      curve.p[i] = g * factor;
    }
  }

  const double fine = integrate(curve.y, curve.p);
  std::vector<double> xs, fs;
  for (std::size_t i = 0; i < grid.size(); i += 2) {
    xs.push_back(grid[i]);
    fs.push_back(curve.p[i]);
  }
  if (xs.back() != grid.back()) {
    xs.push_back(grid.back());
    fs.push_back(curve.p.back());
  }
  const double coarse = integrate(xs, fs);
  if (!(fine > 0.0) || std::abs(fine - coarse) / 3.0 > 1e-6 * fine) {
    throw NumericError(kModule, "grid too coarse: normalization estimates disagree beyond 1e-6");
  }
  for (auto& v : curve.p) v /= fine;
  return curve;
}

CurveMoments curve_moments(const DensityCurve& curve) {
  const auto& y = curve.y;
  std::vector<double> f(y.size());
  auto moment = [&](auto&& fn) {
    for (std::size_t i = 0; i < y.size(); ++i) f[i] = fn(y[i]) * curve.p[i];
    return integrate(y, f);
  };
  CurveMoments m{};
  m.mass = moment([](double) { return 1.0; });
  m.mean = moment([](double v) { return v; }) / m.mass;
  m.moment2 = moment([](double v) { return v * v; }) / m.mass;
  const double mu = m.mean;
  const double c2 = moment([mu](double v) { return (v - mu) * (v - mu); }) / m.mass;
  const double c4 = moment([mu](double v) { return std::pow(v - mu, 4); }) / m.mass;
  m.variance = c2;
  m.cumulant4 = c4 - 3.0 * c2 * c2;
  return m;
}

}  // namespace ngp
