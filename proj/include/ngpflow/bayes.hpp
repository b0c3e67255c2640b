#pragma once

#include <vector>

#include <Eigen/Cholesky>

#include "ngpflow/core_types.hpp"

namespace ngp {

/// Train/test partition of a kernel whose first N_R rows are training samples.
class KernelBlocks {
 public:
  /// Factorizes K_RR; when the factorization fails and jitter is 0, retries
  /// once with 1e-10 * trace(K_RR) / N_R on the diagonal.
  KernelBlocks(const Matrix& kernel, std::size_t train_count, double jitter = 0.0);

  std::size_t train_count() const noexcept { return static_cast<std::size_t>(k_rr_.rows()); }
  std::size_t test_count() const noexcept { return static_cast<std::size_t>(k_ee_.rows()); }
  const Matrix& k_rr() const noexcept { return k_rr_; }
  const Matrix& k_re() const noexcept { return k_re_; }
  Matrix k_er() const { return k_re_.transpose(); }
  const Matrix& k_ee() const noexcept { return k_ee_; }
  /// K_EE - K_ER K_RR^{-1} K_RE.
  const Matrix& k_delta() const noexcept { return k_delta_; }
  const Eigen::LLT<Matrix>& chol_rr() const noexcept { return chol_; }
  /// Diagonal jitter actually added to K_RR.
  double jitter() const noexcept { return jitter_; }

  /// K_RR^{-1} rhs by Cholesky solves.
  Matrix solve_rr(const Matrix& rhs) const;
  Matrix inverse_rr() const;
  /// K_ER K_RR^{-1}.
  Matrix regression_weights() const;

  /// Max abs entry of (block-assembled inverse) * K - I.
  double block_inverse_residual() const;

 private:
  Matrix k_rr_, k_re_, k_ee_, k_delta_;
  Eigen::LLT<Matrix> chol_;
  double jitter_ = 0.0;
};

/// K_ER K_RR^{-1} y_R.
Matrix gp_posterior_mean(const KernelBlocks& blocks, const Matrix& targets);

/// Contractions of the last-layer self-energy and four-point vertex (lower
/// indices) against training-block matrices. Rows run over all D samples,
/// columns over the N_R training samples.
class VertexContractor {
 public:
  virtual ~VertexContractor() = default;
  virtual std::size_t samples() const = 0;
  /// S_{a b} for all a, training b.
  virtual Matrix self_energy_block(std::size_t train_count) const = 0;
  /// out(a, b) = sum_{c, d in R} V_{(ab)(cd)} W_cd.
  virtual Matrix parallel(const Matrix& w, std::size_t train_count) const = 0;
  /// out(a, b) = sum_{c, d in R} V_{(ac)(bd)} W_cd.
  virtual Matrix cross(const Matrix& w, std::size_t train_count) const = 0;
};

/// Contractor over a stored flow state.
class DenseVertex final : public VertexContractor {
 public:
  explicit DenseVertex(const FlowState& state) : state_(state) {}
  std::size_t samples() const override { return state_.samples(); }
  Matrix self_energy_block(std::size_t train_count) const override;
  Matrix parallel(const Matrix& w, std::size_t train_count) const override;
  Matrix cross(const Matrix& w, std::size_t train_count) const override;

 private:
  const FlowState& state_;
};

/// A_{a b} = S_{ab} + 1/2 sum V_{(ab)(cd)} Phi^{cd}
///           - sum [V_{(ac)(bd)} + n_L/2 V_{(ab)(cd)}] (K_RR^{-1})^{cd},
/// with Phi^{cd} = sum_j phi_j^c phi_j^d and phi = K_RR^{-1} y_R.
Matrix correction_matrix_A(const VertexContractor& vertex, const KernelBlocks& blocks, const Matrix& targets,
                           std::size_t n_out);

struct PosteriorResult {
  Matrix gp_mean;
  Matrix correction;
  double epsilon = 0.0;
  Matrix corrected_mean;
  double jitter = 0.0;
};

/// gp_mean + epsilon * sum_b phi^b [A_{g b} - (K_ER K_RR^{-1} A_RR)_{g b}].
PosteriorResult corrected_posterior_mean(const KernelBlocks& blocks, const Matrix& targets, const Matrix& a,
                                         double epsilon);

/// Same result reusing a correction for a different epsilon.
PosteriorResult with_epsilon(const PosteriorResult& base, double epsilon);

/// Fraction of rows whose argmax matches the label.
double classify(const Matrix& predictions, const std::vector<int>& labels);
double classify(const PosteriorResult& result, const std::vector<int>& labels);

/// Targets in {0, 1}, one column per class.
Matrix one_hot(const std::vector<int>& labels, std::size_t classes);

}  // namespace ngp
