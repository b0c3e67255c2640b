#include <doctest.h>

#include <random>

#include "ngpflow/bayes.hpp"
#include "ngpflow/flow.hpp"
#include "ngpflow/second_layer.hpp"
#include "oracles.hpp"

using namespace ngp;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = n(rng);
  return m;
}

FlowState random_state(std::size_t d, std::mt19937_64& rng) {
  const Matrix k = oracle::random_spd(d, rng);
  const Matrix s = random_matrix(d, d, rng);
  const auto m = static_cast<Eigen::Index>(pair_count(d));
  const Matrix v = random_matrix(m, m, rng);
  return FlowState(2, k, 0.5 * (s + s.transpose()), 0.5 * (v + v.transpose()));
}

}  // namespace

TEST_CASE("scalar GP posterior mean") {
  Matrix k(2, 2);
  k << 2.0, 1.0, 1.0, 3.0;
  const KernelBlocks blocks(k, 1);
  CHECK(gp_posterior_mean(blocks, Matrix::Constant(1, 1, 4.0))(0, 0) == doctest::Approx(2.0));
  CHECK(blocks.k_delta()(0, 0) == doctest::Approx(2.5));
}

TEST_CASE("GP posterior mean matches the explicit inverse") {
  std::mt19937_64 rng(41);
  const Matrix k = oracle::random_spd(7, rng);
  const Matrix y = random_matrix(4, 2, rng);
  const KernelBlocks blocks(k, 4);
  const Matrix expected = k.bottomLeftCorner(3, 4) * k.topLeftCorner(4, 4).inverse() * y;
  CHECK(oracle::rel_diff(gp_posterior_mean(blocks, y), expected) < 1e-12);
  CHECK(blocks.block_inverse_residual() < 1e-10);
}

TEST_CASE("GP mean interpolates when a test point duplicates a training point") {
  std::mt19937_64 rng(42);
  Matrix k = oracle::random_spd(4, rng);
  Matrix full(5, 5);
  full.topLeftCorner(4, 4) = k;
  full.block(0, 4, 4, 1) = k.col(1);
  full.block(4, 0, 1, 4) = k.row(1);
  full(4, 4) = k(1, 1);
  const Matrix y = random_matrix(4, 1, rng);
  const KernelBlocks blocks(full, 4);
  CHECK(gp_posterior_mean(blocks, y)(0, 0) == doctest::Approx(y(1, 0)).epsilon(1e-10));
  CHECK(std::abs(blocks.k_delta()(0, 0)) < 1e-10);
}

TEST_CASE("singular training blocks get jitter or fail") {
  Matrix k = Matrix::Ones(3, 3);
  const KernelBlocks blocks(k, 2);
  CHECK(blocks.jitter() > 0.0);
  Matrix bad(2, 2);
  bad << 1.0, 0.0, 0.0, -1.0;
  CHECK_THROWS_AS(KernelBlocks(bad, 2), SingularKernelError);
  CHECK_THROWS_AS(KernelBlocks(k, 0), ConfigError);
}

TEST_CASE("Gaussian states give no correction") {
  std::mt19937_64 rng(43);
  const FlowState s = FlowState::gaussian(2, oracle::random_spd(5, rng));
  const KernelBlocks blocks(s.kernel(), 3);
  const Matrix y = random_matrix(3, 2, rng);
  const Matrix a = correction_matrix_A(DenseVertex(s), blocks, y, 2);
  CHECK(a.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("simplified correction matches the unsimplified expression") {
  std::mt19937_64 rng(44);
  std::uniform_int_distribution<std::size_t> pick_r(1, 3), pick_e(1, 2), pick_n(1, 3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t nr = pick_r(rng), ne = pick_e(rng), n_out = pick_n(rng);
    const FlowState s = random_state(nr + ne, rng);
    const Matrix y = random_matrix(static_cast<Eigen::Index>(nr), static_cast<Eigen::Index>(n_out), rng);
    const KernelBlocks blocks(s.kernel(), nr);
    const Matrix a = correction_matrix_A(DenseVertex(s), blocks, y, n_out);
    const auto result = corrected_posterior_mean(blocks, y, a, 0.01);
    const auto [gp, corr] = oracle::ngpm_direct(s, nr, y, n_out);
    CHECK(oracle::rel_diff(result.gp_mean, gp) < 1e-10);
    CHECK(oracle::rel_diff(result.correction, corr) < 1e-8);
    CHECK(oracle::rel_diff(result.corrected_mean, gp + 0.01 * corr) < 1e-8);
  }
}

TEST_CASE("epsilon = 0 returns the GP mean exactly") {
  std::mt19937_64 rng(45);
  const FlowState s = random_state(5, rng);
  const KernelBlocks blocks(s.kernel(), 3);
  const Matrix y = random_matrix(3, 1, rng);
  const auto result = corrected_posterior_mean(blocks, y, correction_matrix_A(DenseVertex(s), blocks, y, 1), 0.0);
  CHECK((result.corrected_mean - result.gp_mean).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(corrected_posterior_mean(blocks, y, Matrix::Zero(5, 3), -0.1), ConfigError);
  CHECK(with_epsilon(result, 0.5).corrected_mean.isApprox(result.gp_mean + 0.5 * result.correction));
}

TEST_CASE("deep linear networks without bias have no mean correction") {
  std::mt19937_64 rng(46);
  Matrix x = random_matrix(6, 8, rng);
  const Dataset data(x, 4);
  for (double cw : {0.7, 1.0, 1.6}) {
    const auto cfg = NetworkConfig::uniform({8, 12, 9, 2}, 0.0, cw, Activation::linear());
    const auto trace = run_flow(data, cfg);
    const FlowState& s = trace.last();
    const Matrix y = random_matrix(4, 2, rng);
    const KernelBlocks blocks(s.kernel(), 4);
    const auto result = corrected_posterior_mean(blocks, y, correction_matrix_A(DenseVertex(s), blocks, y, 2), 0.1);
    CHECK(result.correction.cwiseAbs().maxCoeff() < 1e-9 * std::max(1.0, result.gp_mean.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("target scaling") {
  std::mt19937_64 rng(48);
  const Dataset data(random_matrix(7, 3, rng), 4);
  const auto cfg = NetworkConfig::uniform({3, 8, 8, 3}, 0.2, 1.0, Activation::quadratic());
  const auto trace = run_flow(data, cfg);
  const FlowState& s = trace.last();
  const KernelBlocks blocks(s.kernel(), 4);
  const Matrix y = one_hot({0, 2, 1, 2}, 3);
  const std::vector<int> labels{1, 0, 2};
  auto run = [&](const Matrix& t) {
    return corrected_posterior_mean(blocks, t, correction_matrix_A(DenseVertex(s), blocks, t, 3), 0.01);
  };
  const auto base = run(y);
  for (double c : {0.5, 3.0}) {
    const auto scaled = run(c * y);
    CHECK(oracle::rel_diff(scaled.gp_mean, c * base.gp_mean) < 1e-12);
    CHECK(classify(scaled.gp_mean, labels) == classify(base.gp_mean, labels));
    CHECK((scaled.correction - c * base.correction).cwiseAbs().maxCoeff() > 1e-6 * base.correction.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("classification helpers") {
  Matrix p(3, 3);
  p << 0.1, 0.7, 0.2, 0.9, 0.0, 0.1, 0.2, 0.3, 0.5;
  CHECK(classify(p, {1, 0, 2}) == doctest::Approx(1.0));
  CHECK(classify(p, {1, 1, 1}) == doctest::Approx(1.0 / 3.0));
  CHECK_THROWS_AS(classify(p, {1, 0}), ConfigError);
  CHECK_THROWS_AS(classify(p, {1, 0, 3}), ConfigError);
  const Matrix t = one_hot({2, 0}, 3);
  CHECK(t(0, 2) == 1.0);
  CHECK(t(1, 0) == 1.0);
  CHECK(t.sum() == 2.0);
  CHECK_THROWS_AS(one_hot({3}, 3), ConfigError);
}

TEST_CASE("factored second-layer vertex agrees with the dense flow") {
  std::mt19937_64 rng(47);
  const Dataset data(random_matrix(6, 4, rng), 4);
  for (const auto& act : {Activation::quadratic(), Activation::polynomial({0.2, 0.9, 0.4}), Activation::linear()}) {
    const auto cfg = NetworkConfig::uniform({4, 10, 3}, 0.3, 1.2, act);
    const auto trace = run_flow(data, cfg);
    const FlowState& s = trace.last();
    const auto factored = SecondLayerVertex::from(data, cfg);
    const DenseVertex dense(s);
    INFO(act.name());
    CHECK(oracle::rel_diff(factored.kernel(), s.kernel()) < 1e-12);
    CHECK(oracle::rel_diff(factored.dense_vertex(), s.vertex()) < 1e-12);
    const Matrix w = random_matrix(4, 4, rng);
    CHECK(oracle::rel_diff(factored.parallel(w, 4), dense.parallel(w, 4)) < 1e-11);
    CHECK(oracle::rel_diff(factored.cross(w, 4), dense.cross(w, 4)) < 1e-11);
    const Matrix y = random_matrix(4, 3, rng);
    const KernelBlocks blocks(s.kernel(), 4);
    CHECK(oracle::rel_diff(correction_matrix_A(factored, blocks, y, 3), correction_matrix_A(dense, blocks, y, 3)) <
          1e-10);
  }
  CHECK_THROWS_AS(SecondLayerVertex::from(data, NetworkConfig::uniform({4, 5, 5, 1}, 0.0, 1.0, Activation::quadratic())),
                  ConfigError);
}
