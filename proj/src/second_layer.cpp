#include "ngpflow/second_layer.hpp"

#include <map>

#include "ngpflow/flow.hpp"
#include "ngpflow/wick.hpp"

namespace ngp {

namespace {
constexpr const char* kModule = "bayes";

int slot_pair(int i, int j) {
  if (i > j) std::swap(i, j);
  return i * 4 - i * (i - 1) / 2 + (j - i);
}

/// Elementwise powers of a matrix, computed on demand.
class PowerCache {
 public:
  explicit PowerCache(Matrix base) : base_(std::move(base)) {}
  const Matrix& operator()(int power) {
    auto it = cache_.find(power);
    if (it != cache_.end()) return it->second;
    Matrix m = Matrix::Ones(base_.rows(), base_.cols());
    for (int k = 0; k < power; ++k) m = m.cwiseProduct(base_);
    return cache_.emplace(power, std::move(m)).first->second;
  }

 private:
  Matrix base_;
  std::map<int, Matrix> cache_;
};

Vector vpow(const Vector& v, int power) {
  Vector out = Vector::Ones(v.size());
  for (int k = 0; k < power; ++k) out = out.cwiseProduct(v);
  return out;
}
}  // namespace

SecondLayerVertex::SecondLayerVertex(Matrix first_kernel, const Activation& activation, double bias_var,
                                     double weight_var)
    : k1_(std::move(first_kernel)) {
  if (k1_.rows() != k1_.cols() || k1_.rows() < 1) throw ConfigError(kModule, "first-layer kernel must be square");
  if (k1_.rows() > 0xffff) throw ConfigError(kModule, "too many samples");
  const auto& coeffs = activation.coefficients();
  const int degree = static_cast<int>(coeffs.size()) - 1;
  if (4 * degree > kMaxWickDegree) {
    throw ConfigError(kModule, "activation degree too high for exact four-point pairing (max 4)");
  }

  const Vector diag = k1_.diagonal();
  k2_ = Matrix::Constant(k1_.rows(), k1_.cols(), bias_var);
  for (int i = 0; i <= degree; ++i)
    for (int j = 0; j <= degree; ++j) {
      const double c = coeffs[i] * coeffs[j];
      if (c == 0.0 || (i + j) % 2 != 0) continue;
      for (const auto& mono : pairing_polynomial({i, j})) {
        int p00 = 0, p01 = 0, p11 = 0;
        for (const auto& f : mono.factors) {
          if (f.a == 0 && f.b == 0) p00 = f.power;
          else if (f.a == 1 && f.b == 1) p11 = f.power;
          else p01 = f.power;
        }
        Matrix term = k1_.array().pow(static_cast<double>(p01)).matrix();
        term = vpow(diag, p00).asDiagonal() * term * vpow(diag, p11).asDiagonal();
        k2_ += (weight_var * c * static_cast<double>(mono.count)) * term;
      }
    }

  std::map<std::array<int, 10>, double> merged;
  for (int i = 0; i <= degree; ++i)
    for (int j = 0; j <= degree; ++j)
      for (int k = 0; k <= degree; ++k)
        for (int l = 0; l <= degree; ++l) {
          const double c = coeffs[i] * coeffs[j] * coeffs[k] * coeffs[l];
          if (c == 0.0 || (i + j + k + l) % 2 != 0) continue;
          for (const auto& mono : pairing_polynomial({i, j, k, l})) {
            std::array<int, 10> power{};
            bool linked = false;
            for (const auto& f : mono.factors) {
              power[slot_pair(f.a, f.b)] = f.power;
              if ((f.a < 2) != (f.b < 2)) linked = true;
            }
            if (linked) merged[power] += weight_var * weight_var * c * static_cast<double>(mono.count);
          }
        }
  for (const auto& [power, weight] : merged) {
    if (weight != 0.0) graphs_.push_back({weight, power});
  }
}

SecondLayerVertex SecondLayerVertex::from(const Dataset& dataset, const NetworkConfig& config) {
  if (config.depth() != 2) throw ConfigError(kModule, "the factored vertex needs a depth-2 network");
  return SecondLayerVertex(first_layer_kernel(dataset, config), config.activation(), config.bias_var(2),
                           config.weight_var(2));
}

Matrix SecondLayerVertex::self_energy_block(std::size_t train_count) const {
  return Matrix::Zero(k1_.rows(), static_cast<Eigen::Index>(train_count));
}

Matrix SecondLayerVertex::parallel(const Matrix& w, std::size_t train_count) const {
  // V_{(uv)(st)}: u, v, s, t sit in slots 0, 1, 2, 3.
  return contract(w, train_count, {0, 1, 2, 3});
}

Matrix SecondLayerVertex::cross(const Matrix& w, std::size_t train_count) const {
  // V_{(us)(vt)}: u, s, v, t sit in slots 0, 1, 2, 3.
  return contract(w, train_count, {0, 2, 1, 3});
}

Matrix SecondLayerVertex::contract(const Matrix& w, std::size_t train_count, const std::array<int, 4>& slot_of) const {
  const auto d = k1_.rows();
  const auto nr = static_cast<Eigen::Index>(train_count);
  if (nr < 1 || nr > d) throw ConfigError(kModule, "train_count out of range");
  if (w.rows() != nr || w.cols() != nr) throw ConfigError(kModule, "contraction matrix must be N_R x N_R");
  const Vector diag = k1_.diagonal();
  const Vector diag_r = diag.head(nr);
  PowerCache dr(k1_.leftCols(nr));
  PowerCache rr(k1_.topLeftCorner(nr, nr));

  enum { U, V, S, T };
  Matrix out = Matrix::Zero(d, nr);
  for (const auto& g : graphs_) {
    auto p = [&](int x, int y) { return g.power[slot_pair(slot_of[x], slot_of[y])]; };
    const Matrix wp = (vpow(diag_r, p(S, S)).asDiagonal() * rr(p(S, T)).cwiseProduct(w) *
                       vpow(diag_r, p(T, T)).asDiagonal());
    Matrix inner(d, nr);
    if (p(U, S) == 0 && p(U, T) == 0) {
      const Vector col = ((rr(p(V, S)) * wp).cwiseProduct(rr(p(V, T)))).rowwise().sum();
      inner = col.transpose().replicate(d, 1);
    } else if (p(V, S) == 0 && p(V, T) == 0) {
      const Vector col = ((dr(p(U, S)) * wp).cwiseProduct(dr(p(U, T)))).rowwise().sum();
      inner = col.replicate(1, nr);
    } else {
      const Matrix& us = dr(p(U, S));
      const Matrix& ut = dr(p(U, T));
      const Matrix& vs = rr(p(V, S));
      const Matrix& vt = rr(p(V, T));
      for (Eigen::Index v = 0; v < nr; ++v) {
        const Matrix x = us * vs.row(v).asDiagonal();
        inner.col(v) = ((x * wp).cwiseProduct(ut * vt.row(v).asDiagonal())).rowwise().sum();
      }
    }
    const Matrix prefix = vpow(diag, p(U, U)).asDiagonal() * dr(p(U, V)) * vpow(diag_r, p(V, V)).asDiagonal();
    out += g.weight * prefix.cwiseProduct(inner);
  }
  return out;
}

Matrix SecondLayerVertex::dense_vertex() const {
  const auto d = static_cast<std::size_t>(k1_.rows());
  const PairTable pairs(d);
  Matrix out = Matrix::Zero(pairs.size(), pairs.size());
  for (std::size_t p = 0; p < pairs.size(); ++p)
    for (std::size_t q = p; q < pairs.size(); ++q) {
      const std::array<std::size_t, 4> idx{pairs.first(p), pairs.second(p), pairs.first(q), pairs.second(q)};
      double acc = 0.0;
      for (const auto& g : graphs_) {
        double term = g.weight;
        for (int i = 0; i < 4; ++i)
          for (int j = i; j < 4; ++j) {
            const int pw = g.power[slot_pair(i, j)];
            for (int k = 0; k < pw; ++k) term *= k1_(idx[i], idx[j]);
          }
        acc += term;
      }
      out(p, q) = acc;
      out(q, p) = acc;
    }
  return out;
}

}  // namespace ngp
