#include "ngpflow/flow.hpp"

#include <cmath>
#include <functional>

#include "ngpflow/quadrature.hpp"
#include "ngpflow/wick.hpp"

namespace ngp {

namespace {
constexpr const char* kModule = "flow-engine";

using MomentFn = std::function<double(const std::vector<std::size_t>&, const std::vector<std::size_t>&, const Matrix&)>;

MomentFn make_moment(const Activation& act, const FlowOptions& options) {
  if (options.backend == Backend::wick) {
    if (!act.is_polynomial()) {
      throw ConfigError(kModule, "activation '" + act.name() + "' is not polynomial; use the quadrature backend");
    }
    return [&act](const std::vector<std::size_t>& s, const std::vector<std::size_t>& e, const Matrix& k) {
      return polynomial_activation_moment(act, s, e, k);
    };
  }
  const int order = options.quadrature_order;
  return [&act, order](const std::vector<std::size_t>& s, const std::vector<std::size_t>& e, const Matrix& k) {
    return quadrature_activation_moment(act, s, e, k, order);
  };
}

/// Dense four-index view of a pair-indexed tensor.
std::vector<double> expand_vertex(const Matrix& vertex, const PairTable& pairs) {
  const std::size_t d = pairs.samples();
  std::vector<double> out(d * d * d * d);
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b < d; ++b)
      for (std::size_t c = 0; c < d; ++c)
        for (std::size_t e = 0; e < d; ++e) out[((a * d + b) * d + c) * d + e] = vertex(pairs.index(a, b), pairs.index(c, e));
  return out;
}

/// sum V_{(cd)(ef)} X_ce Y_df
double cross_contract(const std::vector<double>& v4, std::size_t d, const Matrix& x, const Matrix& y) {
  double acc = 0.0;
  for (std::size_t c = 0; c < d; ++c)
    for (std::size_t e = 0; e < d; ++e) {
      const double xce = x(c, e);
      if (xce == 0.0) continue;
      double inner = 0.0;
      for (std::size_t dd = 0; dd < d; ++dd) {
        const double* row = &v4[((c * d + dd) * d + e) * d];
        for (std::size_t f = 0; f < d; ++f) inner += row[f] * y(dd, f);
      }
      acc += xce * inner;
    }
  return acc;
}

void check_layer_state(const FlowState& state, const NetworkConfig& config) {
  if (state.layer() < 1 || state.layer() >= config.depth()) {
    throw ConfigError(kModule, "cannot step out of layer " + std::to_string(state.layer()) + " for depth " +
                                   std::to_string(config.depth()));
  }
  if (state.layer() == 1 && !state.is_gaussian()) {
    throw NumericError(kModule, "first-layer state must have zero self-energy and vertex");
  }
}
}  // namespace

Backend parse_backend(const std::string& name) {
  if (name == "wick") return Backend::wick;
  if (name == "quad" || name == "quadrature") return Backend::quadrature;
  throw ConfigError(kModule, "unknown backend '" + name + "' (expected wick or quad)");
}

std::string backend_name(Backend backend) { return backend == Backend::wick ? "wick" : "quad"; }

Matrix first_layer_kernel(const Dataset& dataset, const NetworkConfig& config) {
  if (dataset.input_dim() != config.input_dim()) {
    throw ConfigError(kModule, "dataset input dimension " + std::to_string(dataset.input_dim()) +
                                   " does not match n_0 = " + std::to_string(config.input_dim()));
  }
  const auto& x = dataset.inputs();
  Matrix kernel = (x * x.transpose()) * (config.weight_var(1) / static_cast<double>(config.input_dim()));
  kernel.array() += config.bias_var(1);
  return kernel;
}

FlowState init_first_layer(const Dataset& dataset, const NetworkConfig& config) {
  return FlowState::gaussian(1, first_layer_kernel(dataset, config));
}

FlowState step(const FlowState& state, const NetworkConfig& config, const FlowOptions& options) {
  check_layer_state(state, config);
  const std::size_t layer = state.layer();
  const double cb = config.bias_var(layer + 1);
  const double cw = config.weight_var(layer + 1);
  const auto moment = make_moment(config.activation(), options);

  const Matrix& K = state.kernel();
  const std::size_t D = state.samples();
  const PairTable pairs(D);
  const std::size_t M = pairs.size();

  std::vector<PairConditioning> cond(M);
  std::vector<PairMoments> mom(M);
  Matrix kernel_next(D, D);
  for (std::size_t p = 0; p < M; ++p) {
    cond[p] = PairConditioning::build(K, pairs.first(p), pairs.second(p));
    const int dim = cond[p].dim;
    const Matrix& block = cond[p].block;
    const std::vector<std::size_t> sig = dim == 1 ? std::vector<std::size_t>{0, 0} : std::vector<std::size_t>{0, 1};
    mom[p] = PairMoments::from(dim, [&](const std::array<int, 2>& e) {
      std::vector<std::size_t> extra;
      for (int k = 0; k < 2; ++k)
        for (int j = 0; j < e[k]; ++j) extra.push_back(dim == 1 ? 0 : static_cast<std::size_t>(k));
      return moment(sig, extra, block);
    });
    const double value = cb + cw * mom[p].m0;
    kernel_next(pairs.first(p), pairs.second(p)) = value;
    kernel_next(pairs.second(p), pairs.first(p)) = value;
  }

  Matrix vertex_next(M, M);
  for (std::size_t p = 0; p < M; ++p) {
    for (std::size_t q = p; q < M; ++q) {
      const double four = moment({pairs.first(p), pairs.second(p), pairs.first(q), pairs.second(q)}, {}, K);
      const double v = cw * cw * (four - mom[p].m0 * mom[q].m0);
      vertex_next(p, q) = v;
      vertex_next(q, p) = v;
    }
  }

  Matrix self_next = Matrix::Zero(D, D);
  if (!state.is_gaussian()) {
    const double ratio = config.width_ratio(layer);
    const RaisedTensors raised = raise_indices(state, options.raise);
    const Matrix& Vr = raised.vertex;

    Matrix T(M, M);
    std::vector<Matrix> centered(M), second(M);
    for (std::size_t p = 0; p < M; ++p) {
      const Matrix& beta = cond[p].beta;
      centered[p] = beta * (mom[p].m2 - mom[p].m0 * cond[p].block) * beta.transpose();
      second[p] = beta * mom[p].m2 * beta.transpose();
      T.row(p) = pairs.pack_weighted(centered[p]).transpose();
    }
    vertex_next += (cw * cw * 0.25 * ratio) * (T * Vr * T.transpose());

    const Vector s_packed = pairs.pack(raised.self_energy);
    const auto v4 = expand_vertex(Vr, pairs);
    auto parallel = [&](const Matrix& x, const Matrix& y) -> double {
      return pairs.pack_weighted(x).dot(Vr * pairs.pack_weighted(y));
    };
    auto cross = [&](const Matrix& x, const Matrix& y) { return cross_contract(v4, D, x, y); };
    const double kk = parallel(K, K) + 2.0 * cross(K, K);

    for (std::size_t p = 0; p < M; ++p) {
      const auto& c = cond[p];
      const auto& m = mom[p];
      const Matrix& R = c.residual;
      const Matrix& N = second[p];
      const Matrix E2 = N + m.m0 * R;

      std::vector<Vector> outer;
      for (int k = 0; k < c.dim; ++k)
        for (int l = 0; l < c.dim; ++l) {
          Matrix e = c.beta.col(k) * c.beta.col(l).transpose();
          outer.push_back(pairs.pack_weighted(0.5 * (e + e.transpose())));
        }
      double quartic_part = 0.0;
      for (int k = 0; k < c.dim; ++k)
        for (int l = 0; l < c.dim; ++l) {
          const Vector vx = Vr * outer[k * c.dim + l];
          for (int a = 0; a < c.dim; ++a)
            for (int b = 0; b < c.dim; ++b) quartic_part += m.fourth(k, l, a, b) * outer[a * c.dim + b].dot(vx);
        }

      const double q_term =
          0.125 * (quartic_part + 2.0 * parallel(R, N) + 4.0 * cross(R, N) +
                   m.m0 * (parallel(R, R) + 2.0 * cross(R, R)) - 2.0 * parallel(E2, K) - 4.0 * cross(E2, K) + m.m0 * kk);
      const double s_term = 0.5 * T.row(p).dot(s_packed);
      const double value = ratio * cw * (s_term + q_term);
      self_next(pairs.first(p), pairs.second(p)) = value;
      self_next(pairs.second(p), pairs.first(p)) = value;
    }
  }
  return FlowState(layer + 1, std::move(kernel_next), std::move(self_next), std::move(vertex_next));
}

FlowTrace run_flow(const Dataset& dataset, const NetworkConfig& config, const FlowOptions& options) {
  FlowTrace trace{{}, config, dataset.digest(), {}};
  trace.states.push_back(init_first_layer(dataset, config));
  for (std::size_t layer = 1; layer < config.depth(); ++layer) {
    const FlowState& current = trace.states.back();
    trace.ratios.push_back(current.is_gaussian() ? std::nullopt : std::optional<double>(config.width_ratio(layer)));
    trace.states.push_back(step(current, config, options));
  }
  return trace;
}

double monomial_vertex_constant(int power) {
  auto double_factorial = [](int n) {
    double acc = 1.0;
    for (int k = n; k > 1; k -= 2) acc *= k;
    return acc;
  };
  const double num = double_factorial(4 * power - 1);
  const double den = double_factorial(2 * power - 1);
  return num / (den * den) - 1.0;
}

FlowTrace closed_form_single_input(const NetworkConfig& config, double k1) {
  const auto& act = config.activation();
  const auto power = act.monomial_power();
  const bool relu = act.kind() == ActivationKind::relu;
  if (!power && !relu) {
    throw ConfigError(kModule, "closed-form single-input flow supports linear, quadratic, monomial and relu only");
  }
  for (std::size_t l = 2; l <= config.depth(); ++l) {
    if (config.bias_var(l) != 0.0) throw ConfigError(kModule, "closed-form single-input flow needs C_b = 0 beyond layer 1");
  }
  if (!(k1 >= 0.0) || !std::isfinite(k1)) throw ConfigError(kModule, "k1 must be a finite non-negative number");

  auto df = [](int n) {
    double acc = 1.0;
    for (int k = n; k > 1; k -= 2) acc *= k;
    return acc;
  };

  FlowTrace trace{{}, config, std::string(), {}};
  trace.states.push_back(FlowState::gaussian(1, Matrix::Constant(1, 1, k1)));
  double K = k1, v = 0.0, s = 0.0;  // v = V / K^2, s = S / K
  for (std::size_t layer = 1; layer < config.depth(); ++layer) {
    const double cw = config.weight_var(layer + 1);
    const bool gaussian = v == 0.0 && s == 0.0;
    const double r = gaussian ? 0.0 : config.width_ratio(layer);
    trace.ratios.push_back(gaussian ? std::nullopt : std::optional<double>(r));
    double K_next, v_next, s_next;
    if (relu) {
      K_next = 0.5 * cw * K;
      v_next = 5.0 + (gaussian ? 0.0 : r * v);
      s_next = gaussian ? 0.0 : r * s;
    } else {
      const int p = *power;
      K_next = df(2 * p - 1) * cw * std::pow(K, p);
      v_next = monomial_vertex_constant(p) + (gaussian ? 0.0 : p * p * r * v);
      s_next = gaussian ? 0.0 : r * (p * s + 0.5 * p * (p - 1) * v);
    }
    K = K_next;
    v = v_next;
    s = s_next;
    trace.states.emplace_back(layer + 1, Matrix::Constant(1, 1, K), Matrix::Constant(1, 1, s * K),
                              Matrix::Constant(1, 1, v * K * K));
  }
  return trace;
}

}  // namespace ngp
