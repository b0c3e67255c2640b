#pragma once

#include <array>
#include <vector>

#include "ngpflow/bayes.hpp"

namespace ngp {

/// Last-layer tensors of a depth-2 network with polynomial activation, kept
/// in factored form so large sample sets never materialize the M x M vertex.
/// The vertex is a sum over Wick pairing graphs of four sigma slots that link
/// the first pair of slots to the second; each graph contributes a product of
/// elementwise powers of the first-layer kernel.
class SecondLayerVertex final : public VertexContractor {
 public:
  SecondLayerVertex(Matrix first_kernel, const Activation& activation, double bias_var, double weight_var);

  /// Requires depth 2 and a polynomial activation.
  static SecondLayerVertex from(const Dataset& dataset, const NetworkConfig& config);

  std::size_t samples() const override { return static_cast<std::size_t>(k1_.rows()); }
  Matrix self_energy_block(std::size_t train_count) const override;
  Matrix parallel(const Matrix& w, std::size_t train_count) const override;
  Matrix cross(const Matrix& w, std::size_t train_count) const override;

  /// Second-layer core kernel.
  const Matrix& kernel() const noexcept { return k2_; }
  /// Dense pair-indexed vertex; O(D^4) memory, for small D.
  Matrix dense_vertex() const;
  std::size_t graph_count() const noexcept { return graphs_.size(); }

 private:
  /// Edge powers over slot pairs (0,0),(0,1),(0,2),(0,3),(1,1),(1,2),(1,3),(2,2),(2,3),(3,3).
  struct Graph {
    double weight;
    std::array<int, 10> power;
  };

  Matrix contract(const Matrix& w, std::size_t train_count, const std::array<int, 4>& slot_of) const;

  Matrix k1_;
  Matrix k2_;
  std::vector<Graph> graphs_;
};

}  // namespace ngp
