#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ngpflow/errors.hpp"

namespace ngp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Activation functions
// ---------------------------------------------------------------------------

enum class ActivationKind { linear, relu, quadratic, monomial, polynomial, numeric };

/// Pointwise nonlinearity sigma. Polynomial kinds expose their coefficients
/// a_0..a_p so the Wick backend can expand them; numeric kinds are only
/// usable through quadrature.
class Activation {
 public:
  static Activation linear();
  static Activation relu();
  static Activation quadratic();
  static Activation monomial(int power);
  static Activation polynomial(std::vector<double> coefficients);
  /// Named smooth function: "tanh", "erf", "gelu", "swish".
  static Activation numeric(const std::string& tag);

  double operator()(double z) const { return fn_(z); }

  ActivationKind kind() const noexcept { return kind_; }
  const std::string& name() const noexcept { return name_; }
  bool is_polynomial() const noexcept { return kind_ != ActivationKind::relu && kind_ != ActivationKind::numeric; }
  /// Non-smooth only at z = 0 (ReLU). Quadrature picks a kink-aware rule.
  bool kinked_at_origin() const noexcept { return kind_ == ActivationKind::relu; }

  /// Coefficients a_0..a_p; throws ConfigError for non-polynomial kinds.
  const std::vector<double>& coefficients() const;
  /// p for linear/quadratic/monomial; nullopt otherwise.
  std::optional<int> monomial_power() const;

 private:
  Activation(ActivationKind kind, std::string name, std::vector<double> coeffs,
             std::function<double(double)> fn);

  ActivationKind kind_;
  std::string name_;
  std::vector<double> coeffs_;
  std::function<double(double)> fn_;
};

// ---------------------------------------------------------------------------
// Network configuration and datasets
// ---------------------------------------------------------------------------

class NetworkConfig {
 public:
  /// widths = (n_0, ..., n_L); bias/weight variances have one entry per layer 1..L.
  NetworkConfig(std::vector<std::size_t> widths, std::vector<double> bias_vars,
                std::vector<double> weight_vars, Activation activation);

  /// Same variances at every layer.
  static NetworkConfig uniform(std::vector<std::size_t> widths, double bias_var, double weight_var,
                               Activation activation);

  std::size_t depth() const noexcept { return widths_.size() - 1; }
  std::size_t input_dim() const noexcept { return widths_.front(); }
  std::size_t output_dim() const noexcept { return widths_.back(); }
  std::size_t width(std::size_t layer) const { return widths_.at(layer); }
  const std::vector<std::size_t>& widths() const noexcept { return widths_; }
  /// C_b^(l), l = 1..L.
  double bias_var(std::size_t layer) const { return bias_vars_.at(layer - 1); }
  /// C_W^(l), l = 1..L.
  double weight_var(std::size_t layer) const { return weight_vars_.at(layer - 1); }
  const std::vector<double>& bias_vars() const noexcept { return bias_vars_; }
  const std::vector<double>& weight_vars() const noexcept { return weight_vars_; }
  const Activation& activation() const noexcept { return activation_; }

  /// n_l / n_{l-1}.
  double width_ratio(std::size_t layer) const;
  /// 1 / n_{L-1}; requires L >= 2.
  double epsilon() const;

 private:
  std::vector<std::size_t> widths_;
  std::vector<double> bias_vars_;
  std::vector<double> weight_vars_;
  Activation activation_;
};

/// Inputs x_alpha as rows (D x n_0). The first train_count rows are the
/// training inputs, the remaining rows are test inputs.
class Dataset {
 public:
  Dataset(Matrix inputs, std::size_t train_count, std::optional<Matrix> targets = std::nullopt,
          std::vector<int> labels = {});

  std::size_t size() const noexcept { return static_cast<std::size_t>(inputs_.rows()); }
  std::size_t input_dim() const noexcept { return static_cast<std::size_t>(inputs_.cols()); }
  std::size_t train_count() const noexcept { return train_count_; }
  std::size_t test_count() const noexcept { return size() - train_count_; }
  const Matrix& inputs() const noexcept { return inputs_; }
  const std::optional<Matrix>& targets() const noexcept { return targets_; }
  /// Optional class labels, one per row (used by classification harnesses).
  const std::vector<int>& labels() const noexcept { return labels_; }

  /// 64-bit FNV-1a digest of the input bytes, hex encoded.
  std::string digest() const;

 private:
  Matrix inputs_;
  std::size_t train_count_;
  std::optional<Matrix> targets_;
  std::vector<int> labels_;
};

// ---------------------------------------------------------------------------
// Unordered sample pairs
// ---------------------------------------------------------------------------

/// Number of unordered pairs (a <= b) over D samples: D(D+1)/2.
constexpr std::size_t pair_count(std::size_t samples) noexcept { return samples * (samples + 1) / 2; }

/// Row-major upper-triangular index of the unordered pair {a, b}, 0-based.
/// Throws ConfigError when a or b is out of range.
std::size_t pair_index(std::size_t a, std::size_t b, std::size_t samples);

/// Lookup tables both ways between pair indices and their members.
class PairTable {
 public:
  explicit PairTable(std::size_t samples);

  std::size_t samples() const noexcept { return samples_; }
  std::size_t size() const noexcept { return first_.size(); }
  std::size_t index(std::size_t a, std::size_t b) const noexcept { return index_[a * samples_ + b]; }
  std::size_t first(std::size_t p) const noexcept { return first_[p]; }
  std::size_t second(std::size_t p) const noexcept { return second_[p]; }
  /// Number of ordered pairs represented by p: 1 on the diagonal, 2 otherwise.
  double multiplicity(std::size_t p) const noexcept { return first_[p] == second_[p] ? 1.0 : 2.0; }

  /// Pack a symmetric D x D matrix into a pair-indexed vector.
  Vector pack(const Matrix& symmetric) const;
  /// Pack and weight by multiplicity, so that sum_{c,d} V_{p,(cd)} X_{cd} = V.row(p) * pack_weighted(X).
  Vector pack_weighted(const Matrix& symmetric) const;
  Matrix unpack(const Vector& packed) const;

 private:
  std::size_t samples_;
  std::vector<std::size_t> first_;
  std::vector<std::size_t> second_;
  std::vector<std::size_t> index_;
};

// ---------------------------------------------------------------------------
// Per-layer flow state
// ---------------------------------------------------------------------------

/// (core kernel, self-energy, four-point vertex) at one layer. The vertex is
/// stored as an M x M symmetric matrix over unordered sample pairs. All
/// tensors are symmetrized on construction.
class FlowState {
 public:
  FlowState(std::size_t layer, Matrix kernel, Matrix self_energy, Matrix vertex);
  /// Gaussian state: zero self-energy and vertex.
  static FlowState gaussian(std::size_t layer, Matrix kernel);

  std::size_t layer() const noexcept { return layer_; }
  std::size_t samples() const noexcept { return static_cast<std::size_t>(kernel_.rows()); }
  const Matrix& kernel() const noexcept { return kernel_; }
  const Matrix& self_energy() const noexcept { return self_energy_; }
  const Matrix& vertex() const noexcept { return vertex_; }
  double vertex(std::size_t a, std::size_t b, std::size_t c, std::size_t d) const;

  /// True when both S and V are identically zero.
  bool is_gaussian() const noexcept { return gaussian_; }

 private:
  std::size_t layer_;
  Matrix kernel_;
  Matrix self_energy_;
  Matrix vertex_;
  bool gaussian_;
};

struct RaiseOptions {
  /// delta in K + delta * I before inversion.
  double jitter = 0.0;
  /// Reject kernels whose eigenvalue condition number exceeds this.
  double max_condition = 1e12;
};

/// S and V with indices raised by the inverse core kernel.
struct RaisedTensors {
  Matrix inverse_kernel;
  Matrix self_energy;
  Matrix vertex;
  double condition = 0.0;
};

/// Inverse of a symmetric kernel after the condition-number gate.
/// Returns (inverse, condition). Throws SingularKernelError.
std::pair<Matrix, double> checked_inverse(const Matrix& kernel, const RaiseOptions& options = {});

/// Applies metric^{(x)4} to a pair-indexed four-index tensor:
/// out_{(ab)(cd)} = sum metric_{aa'} metric_{bb'} metric_{cc'} metric_{dd'} V_{(a'b')(c'd')}.
Matrix transform_vertex(const Matrix& vertex, const Matrix& metric);

/// out_{ab} = sum metric_{aa'} metric_{bb'} S_{a'b'}.
Matrix transform_two_index(const Matrix& tensor, const Matrix& metric);

RaisedTensors raise_indices(const FlowState& state, const RaiseOptions& options = {});

}  // namespace ngp
