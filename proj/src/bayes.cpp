#include "ngpflow/bayes.hpp"

#include <cmath>
#include <sstream>

namespace ngp {

namespace {
constexpr const char* kModule = "bayes";
}

KernelBlocks::KernelBlocks(const Matrix& kernel, std::size_t train_count, double jitter) {
  const auto d = static_cast<std::size_t>(kernel.rows());
  if (kernel.cols() != kernel.rows()) throw ConfigError(kModule, "kernel must be square");
  if (train_count < 1 || train_count > d) throw ConfigError(kModule, "train_count must be in 1..D");
  const auto nr = static_cast<Eigen::Index>(train_count);
  const auto ne = static_cast<Eigen::Index>(d - train_count);
  k_rr_ = kernel.topLeftCorner(nr, nr);
  k_re_ = kernel.topRightCorner(nr, ne);
  k_ee_ = kernel.bottomRightCorner(ne, ne);

  auto factor = [&](double delta) {
    Matrix m = k_rr_;
    m.diagonal().array() += delta;
    chol_.compute(m);
    return chol_.info() == Eigen::Success;
  };
  jitter_ = jitter;
  bool ok = factor(jitter_);
  if (!ok && jitter == 0.0) {
    jitter_ = 1e-10 * k_rr_.trace() / static_cast<double>(nr);
    ok = factor(jitter_);
  }
  if (!ok) throw SingularKernelError(kModule, "training kernel block is singular even with jitter", INFINITY);

  k_delta_ = k_ee_ - k_re_.transpose() * chol_.solve(k_re_);
  k_delta_ = 0.5 * (k_delta_ + k_delta_.transpose()).eval();
  if (ne > 0) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(k_delta_);
    const double scale = std::max(1.0, k_ee_.cwiseAbs().maxCoeff());
    if (eig.eigenvalues().minCoeff() < -1e-8 * scale) {
      std::ostringstream msg;
      msg << "posterior covariance block is not positive semidefinite (min eigenvalue " << eig.eigenvalues().minCoeff()
          << ")";
      throw NumericError(kModule, msg.str());
    }
  }
}

Matrix KernelBlocks::solve_rr(const Matrix& rhs) const {
  if (rhs.rows() != k_rr_.rows()) throw ConfigError(kModule, "right-hand side must have N_R rows");
  return chol_.solve(rhs);
}

Matrix KernelBlocks::inverse_rr() const { return chol_.solve(Matrix::Identity(k_rr_.rows(), k_rr_.rows())); }

Matrix KernelBlocks::regression_weights() const { return chol_.solve(k_re_).transpose(); }

double KernelBlocks::block_inverse_residual() const {
  const auto nr = k_rr_.rows(), ne = k_ee_.rows();
  Matrix full(nr + ne, nr + ne);
  full << k_rr_, k_re_, k_re_.transpose(), k_ee_;
  const Matrix rr_inv = inverse_rr();
  const Matrix delta_inv = k_delta_.inverse();
  const Matrix g = rr_inv * k_re_;
  Matrix inv(nr + ne, nr + ne);
  inv.topLeftCorner(nr, nr) = rr_inv + g * delta_inv * g.transpose();
  inv.topRightCorner(nr, ne) = -g * delta_inv;
  inv.bottomLeftCorner(ne, nr) = -delta_inv * g.transpose();
  inv.bottomRightCorner(ne, ne) = delta_inv;
  return (inv * full - Matrix::Identity(nr + ne, nr + ne)).cwiseAbs().maxCoeff();
}

Matrix gp_posterior_mean(const KernelBlocks& blocks, const Matrix& targets) {
  if (static_cast<std::size_t>(targets.rows()) != blocks.train_count()) {
    throw ConfigError(kModule, "targets must have one row per training sample");
  }
  return blocks.k_re().transpose() * blocks.solve_rr(targets);
}

// ---------------------------------------------------------------------------

Matrix DenseVertex::self_energy_block(std::size_t train_count) const {
  return state_.self_energy().leftCols(static_cast<Eigen::Index>(train_count));
}

Matrix DenseVertex::parallel(const Matrix& w, std::size_t train_count) const {
  const std::size_t d = state_.samples();
  const PairTable pairs(d);
  Matrix full = Matrix::Zero(d, d);
  const auto nr = static_cast<Eigen::Index>(train_count);
  full.topLeftCorner(nr, nr) = w;
  const Vector contracted = state_.vertex() * pairs.pack_weighted(0.5 * (full + full.transpose()));
  Matrix out(d, train_count);
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b < train_count; ++b) out(a, b) = contracted[pairs.index(a, b)];
  return out;
}

Matrix DenseVertex::cross(const Matrix& w, std::size_t train_count) const {
  const std::size_t d = state_.samples();
  const PairTable pairs(d);
  const Matrix& v = state_.vertex();
  Matrix out = Matrix::Zero(d, train_count);
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b < train_count; ++b) {
      double acc = 0.0;
      for (std::size_t c = 0; c < train_count; ++c) {
        const auto ac = pairs.index(a, c);
        for (std::size_t e = 0; e < train_count; ++e) acc += v(ac, pairs.index(b, e)) * w(c, e);
      }
      out(a, b) = acc;
    }
  return out;
}

Matrix correction_matrix_A(const VertexContractor& vertex, const KernelBlocks& blocks, const Matrix& targets,
                           std::size_t n_out) {
  const std::size_t nr = blocks.train_count();
  if (vertex.samples() != nr + blocks.test_count()) throw ConfigError(kModule, "vertex and kernel sizes differ");
  if (static_cast<std::size_t>(targets.rows()) != nr) throw ConfigError(kModule, "targets must have N_R rows");
  if (static_cast<std::size_t>(targets.cols()) != n_out) throw ConfigError(kModule, "targets must have n_L columns");
  const Matrix phi = blocks.solve_rr(targets);
  const Matrix phi_outer = phi * phi.transpose();
  const Matrix rr_inv = blocks.inverse_rr();
  Matrix a = vertex.self_energy_block(nr);
  a += 0.5 * vertex.parallel(phi_outer, nr);
  a -= vertex.cross(rr_inv, nr);
  a -= 0.5 * static_cast<double>(n_out) * vertex.parallel(rr_inv, nr);
  return a;
}

PosteriorResult corrected_posterior_mean(const KernelBlocks& blocks, const Matrix& targets, const Matrix& a,
                                         double epsilon) {
  if (!(epsilon >= 0.0)) throw ConfigError(kModule, "epsilon must be >= 0");
  const auto nr = static_cast<Eigen::Index>(blocks.train_count());
  const auto ne = static_cast<Eigen::Index>(blocks.test_count());
  if (a.rows() != nr + ne || a.cols() != nr) throw ConfigError(kModule, "A must be D x N_R");
  const Matrix phi = blocks.solve_rr(targets);
  PosteriorResult out;
  out.gp_mean = gp_posterior_mean(blocks, targets);
  const Matrix projected = a.bottomRows(ne) - blocks.regression_weights() * a.topRows(nr);
  out.correction = projected * phi;
  out.jitter = blocks.jitter();
  return with_epsilon(out, epsilon);
}

PosteriorResult with_epsilon(const PosteriorResult& base, double epsilon) {
  PosteriorResult out = base;
  out.epsilon = epsilon;
  out.corrected_mean = epsilon == 0.0 ? out.gp_mean : Matrix(out.gp_mean + epsilon * out.correction);
  return out;
}

double classify(const Matrix& predictions, const std::vector<int>& labels) {
  if (static_cast<std::size_t>(predictions.rows()) != labels.size()) {
    throw ConfigError(kModule, "need one label per prediction row");
  }
  if (labels.empty()) throw ConfigError(kModule, "no test points to classify");
  std::size_t hits = 0;
  for (Eigen::Index r = 0; r < predictions.rows(); ++r) {
    const int label = labels[static_cast<std::size_t>(r)];
    if (label < 0 || label >= predictions.cols()) {
      throw ConfigError(kModule, "label " + std::to_string(label) + " has no matching output channel");
    }
    Eigen::Index best = 0;
    predictions.row(r).maxCoeff(&best);
    if (best == label) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double classify(const PosteriorResult& result, const std::vector<int>& labels) {
  return classify(result.corrected_mean, labels);
}

Matrix one_hot(const std::vector<int>& labels, std::size_t classes) {
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(labels.size()), static_cast<Eigen::Index>(classes));
  for (std::size_t r = 0; r < labels.size(); ++r) {
    if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= classes) {
      throw ConfigError(kModule, "label out of range for one-hot encoding");
    }
    out(static_cast<Eigen::Index>(r), labels[r]) = 1.0;
  }
  return out;
}

}  // namespace ngp
