#include "ngpflow/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <string>

namespace ngp {

namespace {
constexpr const char* kModule = "quadrature";

std::pair<std::vector<double>, std::vector<double>> golub_welsch(const Vector& diag, const Vector& offdiag,
                                                                 double mass) {
  const auto n = diag.size();
  Matrix jacobi = Matrix::Zero(n, n);
  jacobi.diagonal() = diag;
  for (Eigen::Index k = 0; k + 1 < n; ++k) {
    jacobi(k, k + 1) = offdiag[k];
    jacobi(k + 1, k) = offdiag[k];
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(jacobi);
  if (eig.info() != Eigen::Success) throw NumericError(kModule, "Golub-Welsch eigensolve failed");
  std::vector<double> nodes(n), weights(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    nodes[k] = eig.eigenvalues()[k];
    const double v = eig.eigenvectors()(0, k);
    weights[k] = mass * v * v;
  }
  for (Eigen::Index k = 0; k < n / 2; ++k) {
    const auto j = n - 1 - k;
    const double x = 0.5 * (nodes[j] - nodes[k]);
    const double w = 0.5 * (weights[j] + weights[k]);
    nodes[k] = -x;
    nodes[j] = x;
    weights[k] = w;
    weights[j] = w;
  }
  if (n % 2 == 1) nodes[n / 2] = 0.0;
  return {std::move(nodes), std::move(weights)};
}

double abs_moment(int m) {
  // E|u|^m for a standard normal u.
  return std::pow(2.0, 0.5 * m) * std::tgamma(0.5 * (m + 1)) / std::sqrt(std::numbers::pi);
}
}  // namespace

QuadratureRule QuadratureRule::gauss_hermite(int order) {
  if (order < 1 || order > 400) throw ConfigError(kModule, "Gauss-Hermite order must be in 1..400");
  Vector diag = Vector::Zero(order);
  Vector off(std::max(order - 1, 0));
  for (int k = 1; k < order; ++k) off[k - 1] = std::sqrt(static_cast<double>(k));
  auto [nodes, weights] = golub_welsch(diag, off, 1.0);
  return QuadratureRule(std::move(nodes), std::move(weights));
}

QuadratureRule QuadratureRule::gauss_legendre(int order) {
  if (order < 1 || order > 400) throw ConfigError(kModule, "Gauss-Legendre order must be in 1..400");
  Vector diag = Vector::Zero(order);
  Vector off(std::max(order - 1, 0));
  for (int k = 1; k < order; ++k) off[k - 1] = k / std::sqrt(4.0 * k * k - 1.0);
  auto [nodes, weights] = golub_welsch(diag, off, 2.0);
  return QuadratureRule(std::move(nodes), std::move(weights));
}

int default_order(std::size_t dims) { return dims <= 2 ? 40 : 20; }

int default_order(std::size_t dims, const Activation& activation) {
  if (activation.kind() == ActivationKind::numeric && dims <= 2) return 80;
  return default_order(dims);
}

namespace {
const QuadratureRule& cached_rule(int order, bool hermite) {
  static std::mutex mutex;
  static std::map<std::pair<int, bool>, QuadratureRule> rules;
  std::lock_guard<std::mutex> lock(mutex);
  auto key = std::make_pair(order, hermite);
  auto it = rules.find(key);
  if (it == rules.end()) {
    it = rules
             .emplace(key, hermite ? QuadratureRule::gauss_hermite(order) : QuadratureRule::gauss_legendre(order))
             .first;
  }
  return it->second;
}
}  // namespace

const QuadratureRule& hermite_rule(int order) { return cached_rule(order, true); }

Matrix psd_factor(const Matrix& kernel) {
  if (kernel.rows() != kernel.cols() || kernel.rows() < 1) throw ConfigError(kModule, "kernel must be square");
  if (!kernel.allFinite()) throw NumericError(kModule, "kernel has non-finite entries");
  const Matrix sym = 0.5 * (kernel + kernel.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  if (eig.info() != Eigen::Success) throw NumericError(kModule, "eigendecomposition of kernel block failed");
  Vector vals = eig.eigenvalues();
  for (Eigen::Index k = 0; k < vals.size(); ++k) {
    if (vals[k] < -1e-10) {
      throw NumericError(kModule, "kernel block is not positive semidefinite (eigenvalue " +
                                      std::to_string(vals[k]) + ")");
    }
    vals[k] = std::max(vals[k], 0.0);
  }
  return eig.eigenvectors() * vals.cwiseSqrt().asDiagonal();
}

double expect(const Integrand& f, const Matrix& kernel, const QuadratureRule& rule) {
  const auto d = kernel.rows();
  if (d < 1 || d > 4) throw ConfigError(kModule, "expect supports 1 to 4 dimensions");
  const Matrix L = psd_factor(kernel);
  const int q = rule.order();
  const auto& x = rule.nodes();
  const auto& w = rule.weights();
  std::array<int, 4> idx{0, 0, 0, 0};
  std::array<double, 4> u{}, z{};
  double acc = 0.0;
  while (true) {
    double weight = 1.0;
    for (Eigen::Index k = 0; k < d; ++k) {
      u[k] = x[idx[k]];
      weight *= w[idx[k]];
    }
    for (Eigen::Index r = 0; r < d; ++r) {
      double s = 0.0;
      for (Eigen::Index k = 0; k < d; ++k) s += L(r, k) * u[k];
      z[r] = s;
    }
    acc += weight * f(z.data());
    Eigen::Index k = 0;
    while (k < d && ++idx[k] == q) idx[k++] = 0;
    if (k == d) break;
  }
  return acc;
}

double expect(const Integrand& f, const Matrix& kernel) {
  return expect(f, kernel, hermite_rule(default_order(static_cast<std::size_t>(kernel.rows()))));
}

double expect_homogeneous(const Integrand& g, const Matrix& kernel, int degree, int order) {
  const auto d = kernel.rows();
  if (degree < 0) throw ConfigError(kModule, "homogeneous degree must be >= 0");
  const Matrix L = psd_factor(kernel);
  if (d == 1) {
    const double s = L(0, 0);
    double z = 0.0;
    if (s == 0.0) return g(&z);
    z = s;
    const double up = g(&z);
    z = -s;
    const double down = g(&z);
    return 0.5 * abs_moment(degree) * (up + down);
  }
  if (d != 2) throw ConfigError(kModule, "homogeneous rule supports 1 or 2 dimensions");

  constexpr double two_pi = 2.0 * std::numbers::pi;
  std::vector<double> cuts{0.0, two_pi};
  for (int a = 0; a < 2; ++a) {
    if (L(a, 0) == 0.0 && L(a, 1) == 0.0) continue;
    double theta = std::atan2(-L(a, 0), L(a, 1));
    for (int rep = 0; rep < 2; ++rep) {
      double t = std::fmod(theta + rep * std::numbers::pi, two_pi);
      if (t < 0) t += two_pi;
      cuts.push_back(t);
    }
  }
  std::sort(cuts.begin(), cuts.end());
  const auto& rule = cached_rule(order, false);
  double angular = 0.0;
  std::array<double, 2> z{};
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double lo = cuts[k], hi = cuts[k + 1];
    if (hi - lo < 1e-15) continue;
    const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
    for (int j = 0; j < rule.order(); ++j) {
      const double theta = mid + half * rule.nodes()[j];
      const double c = std::cos(theta), s = std::sin(theta);
      z[0] = L(0, 0) * c + L(0, 1) * s;
      z[1] = L(1, 0) * c + L(1, 1) * s;
      angular += half * rule.weights()[j] * g(z.data());
    }
  }
  const double radial = std::pow(2.0, 0.5 * degree) * std::tgamma(0.5 * degree + 1.0);
  return angular * radial / two_pi;
}

double quadrature_activation_moment(const Activation& activation, const std::vector<std::size_t>& sigma_vars,
                                    const std::vector<std::size_t>& extra_vars, const Matrix& kernel, int order) {
  std::vector<std::size_t> distinct;
  for (auto v : sigma_vars) distinct.push_back(v);
  for (auto v : extra_vars) distinct.push_back(v);
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.empty()) return 1.0;
  for (auto v : distinct) {
    if (v >= static_cast<std::size_t>(kernel.rows())) throw ConfigError(kModule, "variable index out of range");
  }
  const auto dims = distinct.size();
  if (dims > 4) throw ConfigError(kModule, "at most 4 distinct Gaussian variables are supported");

  auto local = [&](std::size_t v) {
    return static_cast<int>(std::lower_bound(distinct.begin(), distinct.end(), v) - distinct.begin());
  };
  std::vector<int> sig, ext;
  for (auto v : sigma_vars) sig.push_back(local(v));
  for (auto v : extra_vars) ext.push_back(local(v));
  Matrix sub(dims, dims);
  for (std::size_t i = 0; i < dims; ++i) {
    for (std::size_t j = 0; j < dims; ++j) sub(i, j) = kernel(distinct[i], distinct[j]);
  }
  auto g = [&](const double* z) {
    double v = 1.0;
    for (int i : sig) v *= activation(z[i]);
    for (int j : ext) v *= z[j];
    return v;
  };
  if (activation.kinked_at_origin() && dims <= 2) {
    return expect_homogeneous(g, sub, static_cast<int>(sig.size() + ext.size()), order > 0 ? order : 40);
  }
  return expect(g, sub, hermite_rule(order > 0 ? order : default_order(dims, activation)));
}

// ---------------------------------------------------------------------------

PairConditioning PairConditioning::build(const Matrix& kernel, std::size_t a, std::size_t b) {
  const auto n = kernel.rows();
  if (a >= static_cast<std::size_t>(n) || b >= static_cast<std::size_t>(n)) {
    throw ConfigError(kModule, "sigma pair index out of range");
  }
  PairConditioning c;
  c.a = std::min(a, b);
  c.b = std::max(a, b);
  c.dim = c.a == c.b ? 1 : 2;
  std::vector<Eigen::Index> idx{static_cast<Eigen::Index>(c.a)};
  if (c.dim == 2) idx.push_back(static_cast<Eigen::Index>(c.b));
  c.block.resize(c.dim, c.dim);
  Matrix cross(n, c.dim);
  for (int i = 0; i < c.dim; ++i) {
    cross.col(i) = kernel.col(idx[i]);
    for (int j = 0; j < c.dim; ++j) c.block(i, j) = kernel(idx[i], idx[j]);
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(c.block);
  const Vector& vals = eig.eigenvalues();
  const double top = vals.cwiseAbs().maxCoeff();
  Vector inv = Vector::Zero(c.dim);
  for (int i = 0; i < c.dim; ++i) {
    if (vals[i] > 1e-13 * top && vals[i] > 0.0) inv[i] = 1.0 / vals[i];
  }
  const Matrix pinv = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
  c.beta = cross * pinv;
  if ((inv.array() > 0.0).all()) {
    for (int i = 0; i < c.dim; ++i) {
      c.beta.row(idx[i]).setZero();
      c.beta(idx[i], i) = 1.0;
    }
  }
  Matrix resid = kernel - c.beta * c.block * c.beta.transpose();
  c.residual = 0.5 * (resid + resid.transpose());
  return c;
}

PairMoments PairMoments::from(int dim, const std::function<double(const std::array<int, 2>&)>& moment) {
  PairMoments m;
  m.dim = dim;
  m.m0 = moment({0, 0});
  m.m2.resize(dim, dim);
  std::map<std::array<int, 2>, double> memo;
  auto get = [&](std::array<int, 2> e) {
    auto it = memo.find(e);
    if (it != memo.end()) return it->second;
    const double v = moment(e);
    memo.emplace(e, v);
    return v;
  };
  for (int k = 0; k < dim; ++k) {
    for (int l = 0; l < dim; ++l) {
      std::array<int, 2> e{0, 0};
      ++e[k];
      ++e[l];
      m.m2(k, l) = get(e);
    }
  }
  for (int k = 0; k < dim; ++k)
    for (int l = 0; l < dim; ++l)
      for (int p = 0; p < dim; ++p)
        for (int q = 0; q < dim; ++q) {
          std::array<int, 2> e{0, 0};
          ++e[k];
          ++e[l];
          ++e[p];
          ++e[q];
          m.m4[((k * 2 + l) * 2 + p) * 2 + q] = get(e);
        }
  return m;
}

PairMoments pair_moments(const std::function<double(double, double)>& f, const Matrix& block, int order) {
  const int dim = static_cast<int>(block.rows());
  if (dim < 1 || dim > 2) throw ConfigError(kModule, "pair block must be 1x1 or 2x2");
  const auto& rule = hermite_rule(order > 0 ? order : default_order(static_cast<std::size_t>(dim)));
  return PairMoments::from(dim, [&](const std::array<int, 2>& e) {
    return expect(
        [&](const double* z) {
          const double u0 = z[0], u1 = dim == 2 ? z[1] : z[0];
          double v = f(u0, u1) * std::pow(z[0], e[0]);
          if (dim == 2) v *= std::pow(z[1], e[1]);
          return v;
        },
        block, rule);
  });
}

namespace {
double n_entry(const PairConditioning& c, const PairMoments& m, std::size_t x, std::size_t y) {
  return c.beta.row(x) * m.m2 * c.beta.row(y).transpose();
}
double e2(const PairConditioning& c, const PairMoments& m, std::size_t x, std::size_t y) {
  return n_entry(c, m, x, y) + m.m0 * c.residual(x, y);
}
}  // namespace

double centered_pair_value(const PairConditioning& cond, const PairMoments& mom, std::size_t c, std::size_t d) {
  const Matrix centered = mom.m2 - mom.m0 * cond.block;
  return cond.beta.row(c) * centered * cond.beta.row(d).transpose();
}

double quartic_combination_value(const PairConditioning& cond, const PairMoments& mom, const Matrix& kernel,
                                 std::size_t c, std::size_t d, std::size_t e, std::size_t f) {
  const auto& B = cond.beta;
  const auto& R = cond.residual;
  double m4term = 0.0;
  for (int k = 0; k < mom.dim; ++k)
    for (int l = 0; l < mom.dim; ++l)
      for (int p = 0; p < mom.dim; ++p)
        for (int q = 0; q < mom.dim; ++q) m4term += mom.fourth(k, l, p, q) * B(c, k) * B(d, l) * B(e, p) * B(f, q);
  auto N = [&](std::size_t x, std::size_t y) { return n_entry(cond, mom, x, y); };
  const double mixed = R(c, d) * N(e, f) + R(c, e) * N(d, f) + R(c, f) * N(d, e) + R(d, e) * N(c, f) +
                       R(d, f) * N(c, e) + R(e, f) * N(c, d);
  const double gauss = mom.m0 * (R(c, d) * R(e, f) + R(c, e) * R(d, f) + R(c, f) * R(d, e));
  const double four = m4term + mixed + gauss;
  return four - 2.0 * e2(cond, mom, c, d) * kernel(e, f) - 4.0 * e2(cond, mom, c, e) * kernel(d, f) +
         mom.m0 * (kernel(c, d) * kernel(e, f) + 2.0 * kernel(c, e) * kernel(d, f));
}

double expect_centered_pair(const std::function<double(double, double)>& f, std::array<std::size_t, 2> sigma_vars,
                            std::array<std::size_t, 2> pair_vars, const Matrix& kernel) {
  const auto cond = PairConditioning::build(kernel, sigma_vars[0], sigma_vars[1]);
  const bool swapped = sigma_vars[0] > sigma_vars[1];
  auto g = [&](double x, double y) { return swapped ? f(y, x) : f(x, y); };
  const auto mom = pair_moments(g, cond.block);
  if (pair_vars[0] >= static_cast<std::size_t>(kernel.rows()) || pair_vars[1] >= static_cast<std::size_t>(kernel.rows())) {
    throw ConfigError(kModule, "pair variable out of range");
  }
  return centered_pair_value(cond, mom, pair_vars[0], pair_vars[1]);
}

double expect_quartic_combination(const std::function<double(double, double)>& f,
                                  std::array<std::size_t, 2> sigma_vars, std::array<std::size_t, 4> quad_vars,
                                  const Matrix& kernel) {
  const auto cond = PairConditioning::build(kernel, sigma_vars[0], sigma_vars[1]);
  const bool swapped = sigma_vars[0] > sigma_vars[1];
  auto g = [&](double x, double y) { return swapped ? f(y, x) : f(x, y); };
  const auto mom = pair_moments(g, cond.block);
  for (auto v : quad_vars) {
    if (v >= static_cast<std::size_t>(kernel.rows())) throw ConfigError(kModule, "quartic variable out of range");
  }
  return quartic_combination_value(cond, mom, kernel, quad_vars[0], quad_vars[1], quad_vars[2], quad_vars[3]);
}

}  // namespace ngp
