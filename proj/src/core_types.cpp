#include "ngpflow/core_types.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <iomanip>
#include <limits>
#include <sstream>

namespace ngp {

namespace {
constexpr const char* kModule = "core-types";

bool all_finite(const Matrix& m) { return m.allFinite(); }
}  // namespace

// ---------------------------------------------------------------------------
// Activation

Activation::Activation(ActivationKind kind, std::string name, std::vector<double> coeffs,
                       std::function<double(double)> fn)
    : kind_(kind), name_(std::move(name)), coeffs_(std::move(coeffs)), fn_(std::move(fn)) {}

Activation Activation::linear() {
  return Activation(ActivationKind::linear, "linear", {0.0, 1.0}, [](double z) { return z; });
}

Activation Activation::relu() {
  return Activation(ActivationKind::relu, "relu", {}, [](double z) { return z > 0.0 ? z : 0.0; });
}

Activation Activation::quadratic() {
  return Activation(ActivationKind::quadratic, "quadratic", {0.0, 0.0, 1.0},
                    [](double z) { return z * z; });
}

Activation Activation::monomial(int power) {
  if (power < 1 || power > 8) {
    throw ConfigError(kModule, "monomial power must be in 1..8, got " + std::to_string(power));
  }
  std::vector<double> coeffs(static_cast<std::size_t>(power) + 1, 0.0);
  coeffs.back() = 1.0;
  return Activation(ActivationKind::monomial, "monomial" + std::to_string(power), std::move(coeffs),
                    [power](double z) { return std::pow(z, power); });
}

Activation Activation::polynomial(std::vector<double> coefficients) {
  while (coefficients.size() > 1 && coefficients.back() == 0.0) coefficients.pop_back();
  if (coefficients.empty()) throw ConfigError(kModule, "polynomial activation needs coefficients");
  if (coefficients.size() > 9) throw ConfigError(kModule, "polynomial activation degree must be <= 8");
  for (double c : coefficients) {
    if (!std::isfinite(c)) throw ConfigError(kModule, "polynomial coefficient is not finite");
  }
  auto fn = [c = coefficients](double z) {
    double acc = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * z + *it;
    return acc;
  };
  return Activation(ActivationKind::polynomial, "polynomial", std::move(coefficients), std::move(fn));
}

Activation Activation::numeric(const std::string& tag) {
  std::function<double(double)> fn;
  if (tag == "tanh") {
    fn = [](double z) { return std::tanh(z); };
  } else if (tag == "erf") {
    fn = [](double z) { return std::erf(z); };
  } else if (tag == "gelu") {
    fn = [](double z) { return 0.5 * z * (1.0 + std::erf(z / std::sqrt(2.0))); };
  } else if (tag == "swish") {
    fn = [](double z) { return z / (1.0 + std::exp(-z)); };
  } else {
    throw ConfigError(kModule, "unknown numeric activation '" + tag + "'");
  }
  return Activation(ActivationKind::numeric, tag, {}, std::move(fn));
}

const std::vector<double>& Activation::coefficients() const {
  if (!is_polynomial()) {
    throw ConfigError(kModule, "activation '" + name_ + "' is not polynomial; use the quadrature backend");
  }
  return coeffs_;
}

std::optional<int> Activation::monomial_power() const {
  switch (kind_) {
    case ActivationKind::linear:
      return 1;
    case ActivationKind::quadratic:
      return 2;
    case ActivationKind::monomial:
      return static_cast<int>(coeffs_.size()) - 1;
    default:
      return std::nullopt;
  }
}

// ---------------------------------------------------------------------------
// NetworkConfig

NetworkConfig::NetworkConfig(std::vector<std::size_t> widths, std::vector<double> bias_vars,
                             std::vector<double> weight_vars, Activation activation)
    : widths_(std::move(widths)),
      bias_vars_(std::move(bias_vars)),
      weight_vars_(std::move(weight_vars)),
      activation_(std::move(activation)) {
  if (widths_.size() < 2) throw ConfigError(kModule, "network needs at least one layer (L >= 1)");
  for (auto n : widths_) {
    if (n < 1) throw ConfigError(kModule, "all widths must be >= 1");
  }
  const std::size_t L = depth();
  if (bias_vars_.size() != L || weight_vars_.size() != L) {
    throw ConfigError(kModule, "expected " + std::to_string(L) + " bias and weight variances");
  }
  for (double cb : bias_vars_) {
    if (!(cb >= 0.0) || !std::isfinite(cb)) throw ConfigError(kModule, "bias variances must be >= 0");
  }
  for (double cw : weight_vars_) {
    if (!(cw > 0.0) || !std::isfinite(cw)) throw ConfigError(kModule, "weight variances must be > 0");
  }
}

NetworkConfig NetworkConfig::uniform(std::vector<std::size_t> widths, double bias_var, double weight_var,
                                     Activation activation) {
  const std::size_t L = widths.empty() ? 0 : widths.size() - 1;
  return NetworkConfig(std::move(widths), std::vector<double>(L, bias_var), std::vector<double>(L, weight_var),
                       std::move(activation));
}

double NetworkConfig::width_ratio(std::size_t layer) const {
  if (layer < 1 || layer > depth()) throw ConfigError(kModule, "width ratio layer out of range");
  return static_cast<double>(widths_[layer]) / static_cast<double>(widths_[layer - 1]);
}

double NetworkConfig::epsilon() const {
  if (depth() < 2) throw ConfigError(kModule, "epsilon = 1/n_{L-1} needs L >= 2");
  return 1.0 / static_cast<double>(widths_[depth() - 1]);
}

// ---------------------------------------------------------------------------
// Dataset

Dataset::Dataset(Matrix inputs, std::size_t train_count, std::optional<Matrix> targets, std::vector<int> labels)
    : inputs_(std::move(inputs)), train_count_(train_count), targets_(std::move(targets)), labels_(std::move(labels)) {
  if (inputs_.rows() < 1 || inputs_.cols() < 1) throw ConfigError(kModule, "dataset must have D >= 1 inputs");
  if (!all_finite(inputs_)) throw ConfigError(kModule, "dataset inputs contain non-finite entries");
  if (train_count_ > size()) throw ConfigError(kModule, "train_count exceeds number of inputs");
  if (targets_) {
    if (static_cast<std::size_t>(targets_->rows()) != train_count_) {
      throw ConfigError(kModule, "targets must have one row per training input");
    }
    if (!all_finite(*targets_)) throw ConfigError(kModule, "targets contain non-finite entries");
  }
  if (!labels_.empty() && labels_.size() != size()) {
    throw ConfigError(kModule, "labels must have one entry per input");
  }
}

std::string Dataset::digest() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  };
  const std::uint64_t rows = static_cast<std::uint64_t>(inputs_.rows());
  const std::uint64_t cols = static_cast<std::uint64_t>(inputs_.cols());
  mix(&rows, sizeof rows);
  mix(&cols, sizeof cols);
  for (Eigen::Index r = 0; r < inputs_.rows(); ++r) {
    for (Eigen::Index c = 0; c < inputs_.cols(); ++c) {
      const double v = inputs_(r, c);
      mix(&v, sizeof v);
    }
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

// ---------------------------------------------------------------------------
// Pairs

std::size_t pair_index(std::size_t a, std::size_t b, std::size_t samples) {
  if (a >= samples || b >= samples) {
    throw ConfigError(kModule, "pair index (" + std::to_string(a) + "," + std::to_string(b) +
                                   ") out of range for D = " + std::to_string(samples));
  }
  if (a > b) std::swap(a, b);
  return a * samples - (a * (a + 1)) / 2 + a + (b - a);
}

PairTable::PairTable(std::size_t samples) : samples_(samples), index_(samples * samples) {
  const std::size_t m = pair_count(samples);
  first_.reserve(m);
  second_.reserve(m);
  for (std::size_t a = 0; a < samples; ++a) {
    for (std::size_t b = a; b < samples; ++b) {
      const std::size_t p = first_.size();
      first_.push_back(a);
      second_.push_back(b);
      index_[a * samples + b] = p;
      index_[b * samples + a] = p;
    }
  }
}

Vector PairTable::pack(const Matrix& symmetric) const {
  Vector out(static_cast<Eigen::Index>(size()));
  for (std::size_t p = 0; p < size(); ++p) out[p] = symmetric(first_[p], second_[p]);
  return out;
}

Vector PairTable::pack_weighted(const Matrix& symmetric) const {
  Vector out(static_cast<Eigen::Index>(size()));
  for (std::size_t p = 0; p < size(); ++p) {
    out[p] = first_[p] == second_[p] ? symmetric(first_[p], first_[p])
                                     : symmetric(first_[p], second_[p]) + symmetric(second_[p], first_[p]);
  }
  return out;
}

Matrix PairTable::unpack(const Vector& packed) const {
  Matrix out(samples_, samples_);
  for (std::size_t p = 0; p < size(); ++p) {
    out(first_[p], second_[p]) = packed[p];
    out(second_[p], first_[p]) = packed[p];
  }
  return out;
}

// ---------------------------------------------------------------------------
// FlowState

FlowState::FlowState(std::size_t layer, Matrix kernel, Matrix self_energy, Matrix vertex)
    : layer_(layer), kernel_(std::move(kernel)), self_energy_(std::move(self_energy)), vertex_(std::move(vertex)) {
  const auto d = kernel_.rows();
  const auto m = static_cast<Eigen::Index>(pair_count(static_cast<std::size_t>(d)));
  if (d < 1 || kernel_.cols() != d) throw ConfigError(kModule, "kernel must be square and non-empty");
  if (self_energy_.rows() != d || self_energy_.cols() != d) {
    throw ConfigError(kModule, "self-energy must match kernel dimensions");
  }
  if (vertex_.rows() != m || vertex_.cols() != m) {
    throw ConfigError(kModule, "vertex must be M x M with M = D(D+1)/2");
  }
  kernel_ = 0.5 * (kernel_ + kernel_.transpose()).eval();
  self_energy_ = 0.5 * (self_energy_ + self_energy_.transpose()).eval();
  vertex_ = 0.5 * (vertex_ + vertex_.transpose()).eval();
  if (!kernel_.allFinite() || !self_energy_.allFinite() || !vertex_.allFinite()) {
    throw NumericError(kModule, "flow state at layer " + std::to_string(layer) + " has non-finite entries");
  }
  gaussian_ = self_energy_.isZero(0.0) && vertex_.isZero(0.0);
}

FlowState FlowState::gaussian(std::size_t layer, Matrix kernel) {
  const auto d = kernel.rows();
  const auto m = static_cast<Eigen::Index>(pair_count(static_cast<std::size_t>(d)));
  return FlowState(layer, std::move(kernel), Matrix::Zero(d, d), Matrix::Zero(m, m));
}

double FlowState::vertex(std::size_t a, std::size_t b, std::size_t c, std::size_t d) const {
  const std::size_t n = samples();
  return vertex_(pair_index(a, b, n), pair_index(c, d, n));
}

// ---------------------------------------------------------------------------
// Raising and lowering

std::pair<Matrix, double> checked_inverse(const Matrix& kernel, const RaiseOptions& options) {
  Matrix k = kernel;
  if (options.jitter != 0.0) k.diagonal().array() += options.jitter;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(k);
  if (eig.info() != Eigen::Success) throw NumericError(kModule, "eigendecomposition of kernel failed");
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().cwiseAbs().maxCoeff();
  const double condition = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  if (!(condition <= options.max_condition)) {
    std::ostringstream msg;
    msg << "kernel is singular or ill-conditioned (condition estimate " << std::setprecision(3) << condition
        << " > " << options.max_condition << "); consider a jitter";
    throw SingularKernelError(kModule, msg.str(), condition);
  }
  const Vector inv_vals = eig.eigenvalues().cwiseInverse();
  Matrix inv = eig.eigenvectors() * inv_vals.asDiagonal() * eig.eigenvectors().transpose();
  inv = 0.5 * (inv + inv.transpose()).eval();
  return {std::move(inv), condition};
}

Matrix transform_two_index(const Matrix& tensor, const Matrix& metric) {
  Matrix out = metric * tensor * metric.transpose();
  return 0.5 * (out + out.transpose());
}

Matrix transform_vertex(const Matrix& vertex, const Matrix& metric) {
  const auto samples = static_cast<std::size_t>(metric.rows());
  const PairTable pairs(samples);
  const auto m = static_cast<Eigen::Index>(pairs.size());
  Matrix t(m, m);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto a = pairs.first(p), b = pairs.second(p);
    for (std::size_t q = 0; q < pairs.size(); ++q) {
      const auto c = pairs.first(q), d = pairs.second(q);
      double v = metric(a, c) * metric(b, d);
      if (c != d) v += metric(a, d) * metric(b, c);
      t(p, q) = v;
    }
  }
  Matrix out = t * vertex * t.transpose();
  return 0.5 * (out + out.transpose());
}

RaisedTensors raise_indices(const FlowState& state, const RaiseOptions& options) {
  auto [inv, condition] = checked_inverse(state.kernel(), options);
  RaisedTensors out;
  out.self_energy = transform_two_index(state.self_energy(), inv);
  out.vertex = transform_vertex(state.vertex(), inv);
  out.inverse_kernel = std::move(inv);
  out.condition = condition;
  return out;
}

}  // namespace ngp
