#include <doctest.h>

#include <random>
#include <set>

#include "ngpflow/core_types.hpp"
#include "oracles.hpp"

using namespace ngp;

TEST_CASE("pair_index is a symmetric bijection in row-major upper-triangular order") {
  CHECK(pair_index(0, 0, 3) == 0);
  CHECK(pair_index(0, 1, 3) == pair_index(1, 0, 3));
  CHECK(pair_index(0, 1, 3) == 1);
  CHECK(pair_index(1, 1, 3) == 3);
  CHECK(pair_index(2, 2, 3) == 5);

  std::set<std::size_t> seen;
  for (std::size_t a = 0; a < 4; ++a)
    for (std::size_t b = a; b < 4; ++b) seen.insert(pair_index(a, b, 4));
  CHECK(seen.size() == 10);
  CHECK(*seen.begin() == 0);
  CHECK(*seen.rbegin() == 9);
}

TEST_CASE("pair_index rejects out-of-range samples") {
  CHECK_THROWS_AS(pair_index(3, 0, 3), ConfigError);
  CHECK_THROWS_AS(pair_index(0, 5, 3), ConfigError);
}

TEST_CASE("PairTable agrees with pair_index and packs symmetric matrices") {
  const PairTable t(5);
  CHECK(t.size() == pair_count(5));
  for (std::size_t a = 0; a < 5; ++a)
    for (std::size_t b = 0; b < 5; ++b) CHECK(t.index(a, b) == pair_index(a, b, 5));
  for (std::size_t p = 0; p < t.size(); ++p) CHECK(t.index(t.first(p), t.second(p)) == p);

  std::mt19937_64 rng(3);
  const Matrix x = oracle::random_spd(5, rng);
  CHECK(t.unpack(t.pack(x)) == x);

  Matrix v = Matrix::Random(static_cast<Eigen::Index>(t.size()), static_cast<Eigen::Index>(t.size()));
  v = (v + v.transpose()).eval();
  const Vector fast = v * t.pack_weighted(x);
  for (std::size_t p = 0; p < t.size(); ++p) {
    double slow = 0.0;
    for (std::size_t c = 0; c < 5; ++c)
      for (std::size_t d = 0; d < 5; ++d) slow += v(p, t.index(c, d)) * x(c, d);
    CHECK(fast[p] == doctest::Approx(slow).epsilon(1e-13));
  }
}

TEST_CASE("FlowState symmetrizes exactly and tracks Gaussianity") {
  Matrix k(2, 2);
  k << 2.0, 0.5, 0.5000001, 1.0;
  Matrix s(2, 2);
  s << 0.1, 0.2, 0.3, 0.4;
  Matrix v = Matrix::Random(3, 3);
  const FlowState st(2, k, s, v);
  CHECK(st.kernel() == st.kernel().transpose());
  CHECK(st.self_energy() == st.self_energy().transpose());
  CHECK(st.vertex() == st.vertex().transpose());
  CHECK_FALSE(st.is_gaussian());
  CHECK(st.vertex(0, 1, 1, 0) == st.vertex(1, 0, 0, 1));
  CHECK(st.vertex(0, 1, 1, 1) == st.vertex(1, 1, 1, 0));

  const FlowState g = FlowState::gaussian(1, k);
  CHECK(g.is_gaussian());
  CHECK(g.self_energy().isZero(0.0));
  CHECK(g.vertex().isZero(0.0));
}

TEST_CASE("FlowState rejects mismatched shapes") {
  CHECK_THROWS_AS(FlowState(1, Matrix::Identity(2, 2), Matrix::Zero(3, 3), Matrix::Zero(3, 3)), ConfigError);
  CHECK_THROWS_AS(FlowState(1, Matrix::Identity(2, 2), Matrix::Zero(2, 2), Matrix::Zero(4, 4)), ConfigError);
}

TEST_CASE("raise_indices: zero self-energy stays zero") {
  std::mt19937_64 rng(1);
  const Matrix k = oracle::random_spd(3, rng);
  const FlowState st(2, k, Matrix::Zero(3, 3), Matrix::Identity(6, 6));
  CHECK(raise_indices(st).self_energy.isZero(0.0));
}

TEST_CASE("raise_indices: scalar metric") {
  const double k = 1.7, s = 0.3, v = 0.9;
  const FlowState st(2, Matrix::Constant(1, 1, k), Matrix::Constant(1, 1, s), Matrix::Constant(1, 1, v));
  const auto r = raise_indices(st);
  CHECK(r.self_energy(0, 0) == doctest::Approx(s / (k * k)).epsilon(1e-14));
  CHECK(r.vertex(0, 0) == doctest::Approx(v / std::pow(k, 4)).epsilon(1e-14));
}

TEST_CASE("raise_indices matches brute-force sums with an explicit 2x2 inverse") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix k = oracle::random_spd(2, rng);
    Matrix s = Matrix::Random(2, 2);
    s = (s + s.transpose()).eval();
    Matrix v = Matrix::Random(3, 3);
    v = (v + v.transpose()).eval();
    const FlowState st(2, k, s, v);
    const auto r = raise_indices(st);
    const Matrix kinv = oracle::inverse2(k);
    CHECK(oracle::rel_diff(r.self_energy, oracle::raise2(st.self_energy(), kinv)) < 1e-12);
    const auto v4 = oracle::raise4(oracle::dense4(st), kinv);
    for (std::size_t a = 0; a < 2; ++a)
      for (std::size_t b = 0; b < 2; ++b)
        for (std::size_t c = 0; c < 2; ++c)
          for (std::size_t d = 0; d < 2; ++d) {
            const double got = r.vertex(pair_index(a, b, 2), pair_index(c, d, 2));
            CHECK(got == doctest::Approx(v4[((a * 2 + b) * 2 + c) * 2 + d]).epsilon(1e-11));
          }
  }
}

TEST_CASE("raising then lowering recovers the tensors") {
  std::mt19937_64 rng(5);
  for (std::size_t d : {1u, 2u, 3u, 4u}) {
    const Matrix k = oracle::random_spd(d, rng);
    const auto m = static_cast<Eigen::Index>(pair_count(d));
    Matrix s = Matrix::Random(d, d);
    s = (s + s.transpose()).eval();
    Matrix v = Matrix::Random(m, m);
    v = (v + v.transpose()).eval();
    const FlowState st(3, k, s, v);
    const auto r = raise_indices(st);
    CHECK(oracle::rel_diff(transform_two_index(r.self_energy, k), st.self_energy()) < 1e-10);
    CHECK(oracle::rel_diff(transform_vertex(r.vertex, k), st.vertex()) < 1e-10);
  }
}

TEST_CASE("condition gate rejects duplicate inputs unless jitter is supplied") {
  Matrix k(2, 2);
  k << 1.0, 1.0, 1.0, 1.0;
  const FlowState st(2, k, Matrix::Identity(2, 2), Matrix::Identity(3, 3));
  try {
    raise_indices(st);
    FAIL("expected SingularKernelError");
  } catch (const SingularKernelError& e) {
    CHECK(e.condition() > 1e12);
  }
  RaiseOptions opts;
  opts.jitter = 1e-3;
  CHECK_NOTHROW(raise_indices(st, opts));
}

TEST_CASE("activations") {
  CHECK(Activation::linear()(-2.0) == -2.0);
  CHECK(Activation::relu()(-2.0) == 0.0);
  CHECK(Activation::relu()(3.0) == 3.0);
  CHECK(Activation::quadratic()(-3.0) == 9.0);
  CHECK(Activation::monomial(3)(2.0) == 8.0);
  CHECK(*Activation::monomial(3).monomial_power() == 3);
  const auto p = Activation::polynomial({1.0, 0.0, 2.0, 0.0});
  CHECK(p.coefficients().size() == 3);
  CHECK(p(2.0) == 9.0);
  CHECK_THROWS_AS(Activation::relu().coefficients(), ConfigError);
  CHECK_THROWS_AS(Activation::monomial(0), ConfigError);
  CHECK_THROWS_AS(Activation::numeric("softsign"), ConfigError);
  CHECK(Activation::numeric("tanh")(0.5) == doctest::Approx(std::tanh(0.5)));
  CHECK_FALSE(Activation::numeric("erf").is_polynomial());
}

TEST_CASE("NetworkConfig validation and derived quantities") {
  const auto cfg = NetworkConfig::uniform({784, 50, 100, 1}, 0.0, 1.0, Activation::linear());
  CHECK(cfg.depth() == 3);
  CHECK(cfg.epsilon() == doctest::Approx(0.01));
  CHECK(cfg.width_ratio(2) == doctest::Approx(2.0));
  CHECK_THROWS_AS(NetworkConfig::uniform({5}, 0.0, 1.0, Activation::linear()), ConfigError);
  CHECK_THROWS_AS(NetworkConfig::uniform({5, 0, 1}, 0.0, 1.0, Activation::linear()), ConfigError);
  CHECK_THROWS_AS(NetworkConfig::uniform({5, 3, 1}, -1.0, 1.0, Activation::linear()), ConfigError);
  CHECK_THROWS_AS(NetworkConfig::uniform({5, 3, 1}, 0.0, 0.0, Activation::linear()), ConfigError);
  CHECK_THROWS_AS(NetworkConfig::uniform({5, 1}, 0.0, 1.0, Activation::linear()).epsilon(), ConfigError);
}

TEST_CASE("Dataset validation and digest") {
  Matrix x(3, 2);
  x << 1, 2, 3, 4, 5, 6;
  const Dataset d(x, 2, Matrix::Ones(2, 1));
  CHECK(d.test_count() == 1);
  CHECK(d.digest() == Dataset(x, 2).digest());
  Matrix y = x;
  y(0, 0) = 1.5;
  CHECK(d.digest() != Dataset(y, 2).digest());
  CHECK_THROWS_AS(Dataset(x, 4), ConfigError);
  CHECK_THROWS_AS(Dataset(x, 2, Matrix::Ones(3, 1)), ConfigError);
  x(1, 1) = std::nan("");
  CHECK_THROWS_AS(Dataset(x, 2), ConfigError);
}
