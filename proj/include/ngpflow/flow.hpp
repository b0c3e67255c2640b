#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ngpflow/core_types.hpp"

namespace ngp {

enum class Backend { wick, quadrature };

/// "wick" or "quad"/"quadrature".
Backend parse_backend(const std::string& name);
std::string backend_name(Backend backend);

struct FlowOptions {
  Backend backend = Backend::wick;
  RaiseOptions raise{};
  /// Nodes per dimension for the quadrature backend; 0 picks the default.
  int quadrature_order = 0;
};

/// Layer-by-layer states l = 1..L together with what produced them.
struct FlowTrace {
  std::vector<FlowState> states;
  NetworkConfig config;
  std::string dataset_digest;
  /// ratios[k] is the width ratio n_l / n_{l-1} used by the step out of layer
  /// l = k + 1; empty at l = 1 where it is never evaluated.
  std::vector<std::optional<double>> ratios;

  const FlowState& last() const { return states.back(); }
  const FlowState& at(std::size_t layer) const { return states.at(layer - 1); }
};

/// C_b + C_W x.x' / n_0.
Matrix first_layer_kernel(const Dataset& dataset, const NetworkConfig& config);

/// Gaussian first-layer state: K = C_b + C_W x.x' / n_0, S = V = 0.
FlowState init_first_layer(const Dataset& dataset, const NetworkConfig& config);

/// One application of the recursion from layer l to l + 1.
FlowState step(const FlowState& state, const NetworkConfig& config, const FlowOptions& options = {});

FlowTrace run_flow(const Dataset& dataset, const NetworkConfig& config, const FlowOptions& options = {});

/// Scalar recursion for D = 1 with linear, quadratic, monomial or ReLU
/// activations and zero bias beyond the first layer. k1 is K at layer 1.
FlowTrace closed_form_single_input(const NetworkConfig& config, double k1);

/// (4p-1)!! / ((2p-1)!!)^2 - 1.
double monomial_vertex_constant(int power);

}  // namespace ngp
