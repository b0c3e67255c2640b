#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "ngpflow/flow.hpp"
#include "ngpflow/mc.hpp"

using namespace ngp;

namespace {

Dataset inputs(std::initializer_list<double> values) {
  Matrix x(static_cast<Eigen::Index>(values.size()), 1);
  Eigen::Index i = 0;
  for (double v : values) x(i++, 0) = v;
  return Dataset(x, x.rows());
}

}  // namespace

TEST_CASE("first-layer outputs have the first-layer kernel as covariance") {
  const auto data = inputs({1.0, -0.5});
  const auto cfg = NetworkConfig::uniform({1, 3}, 0.3, 1.2, Activation::relu());
  const Matrix k = init_first_layer(data, cfg).kernel();
  const Matrix z = sample_outputs(data, cfg, 40000, 11);
  REQUIRE(z.cols() == 6);
  for (std::size_t a = 0; a < 2; ++a)
    for (std::size_t b = 0; b < 2; ++b) {
      const auto est = estimate_moment2(z, a, b);
      CHECK(std::abs(est.value - k(a, b)) < 5.0 * est.std_error);
    }
  const auto cross = estimate_moment2(z, 0, 2);
  CHECK(std::abs(cross.value) < 5.0 * cross.std_error);
}

TEST_CASE("linear network output variance equals the flowed kernel for both samplers") {
  const auto data = inputs({1.5});
  const auto cfg = NetworkConfig::uniform({1, 4, 1}, 0.2, 1.1, Activation::linear());
  const double k = run_flow(data, cfg).last().kernel()(0, 0);
  for (auto sampler : {SamplerKind::marginal, SamplerKind::explicit_weights}) {
    const Matrix z = sample_outputs(data, cfg, 40000, 12, {sampler, 1});
    const auto est = estimate_moment2(z, 0, 0);
    CHECK(std::abs(est.value - k) < 5.0 * est.std_error);
  }
}

TEST_CASE("deep linear connected four-point is 3 eps V") {
  const auto data = inputs({1.0});
  const auto cfg = NetworkConfig::uniform({1, 10, 1}, 0.0, 1.0, Activation::linear());
  const auto trace = run_flow(data, cfg);
  const double expected = 3.0 * cfg.epsilon() * trace.last().vertex()(0, 0);
  const Matrix z = sample_outputs(data, cfg, 200000, 13);
  const auto est = estimate_connected4(z, {0, 0, 0, 0});
  CHECK(std::abs(est.value - expected) < 5.0 * est.std_error);
  CHECK(est.std_error < 0.2 * expected);
}

TEST_CASE("samples are identical for any thread count") {
  const auto data = inputs({0.4, 1.1, -0.8});
  const auto cfg = NetworkConfig::uniform({1, 6, 5, 2}, 0.1, 1.7, Activation::numeric("tanh"));
  for (auto sampler : {SamplerKind::marginal, SamplerKind::explicit_weights}) {
    const Matrix a = sample_outputs(data, cfg, 257, 99, {sampler, 1});
    const Matrix b = sample_outputs(data, cfg, 257, 99, {sampler, 3});
    const Matrix c = sample_outputs(data, cfg, 257, 100, {sampler, 1});
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a - c).cwiseAbs().maxCoeff() > 0.0);
  }
}

TEST_CASE("Gaussian outputs have vanishing connected four-point") {
  const auto data = inputs({1.0, 0.3});
  const auto cfg = NetworkConfig::uniform({1, 1}, 0.0, 1.0, Activation::linear());
  const Matrix z = sample_outputs(data, cfg, 50000, 14);
  for (const auto& cols : {std::array<std::size_t, 4>{0, 0, 0, 0}, std::array<std::size_t, 4>{0, 1, 0, 1}}) {
    const auto est = estimate_connected4(z, cols);
    CHECK(std::abs(est.value) < 5.0 * est.std_error);
  }
  const auto c4 = estimate_cumulant4(z, 1);
  CHECK(std::abs(c4.value) < 5.0 * c4.std_error);
}

TEST_CASE("cumulant estimators need enough samples") {
  const auto data = inputs({1.0});
  const auto cfg = NetworkConfig::uniform({1, 1}, 0.0, 1.0, Activation::linear());
  const Matrix z = sample_outputs(data, cfg, kMinCumulantSamples - 1, 15);
  CHECK_THROWS_AS(estimate_connected4(z, {0, 0, 0, 0}), ConfigError);
  CHECK_THROWS_AS(estimate_cumulant4(z, 0), ConfigError);
  CHECK_THROWS_AS(estimate_moment2(z, 0, 3), ConfigError);
  CHECK_THROWS_AS(sample_outputs(data, cfg, 0, 15), ConfigError);
}

TEST_CASE("histograms are density normalized and match a Gaussian") {
  const auto data = inputs({1.0});
  const auto cfg = NetworkConfig::uniform({1, 1}, 0.0, 2.0, Activation::linear());
  const Matrix z = sample_outputs(data, cfg, 100000, 16);
  const auto bins = histogram(z, 0, 41, 4.0);
  const double width = bins[1].center - bins[0].center;
  double mass = 0.0, chi2 = 0.0;
  std::size_t dof = 0;
  for (const auto& b : bins) {
    mass += b.density * width;
    const double lo = b.center - 0.5 * width, hi = b.center + 0.5 * width;
    const double expected =
        (0.5 * (std::erf(hi / 2.0) - std::erf(lo / 2.0))) / width;
    if (b.std_error > 0.0 && expected * width * 100000 > 20) {
      chi2 += std::pow((b.density - expected) / b.std_error, 2);
      ++dof;
    }
  }
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
  REQUIRE(dof > 20);
  CHECK(chi2 / static_cast<double>(dof) < 2.0);
  CHECK_THROWS_AS(histogram(z, 0, -1.0, 1.0, 5), ConfigError);
}

TEST_CASE("standard errors shrink as one over root N") {
  const auto data = inputs({1.0});
  const auto cfg = NetworkConfig::uniform({1, 8, 1}, 0.0, 1.0, Activation::linear());
  const Matrix small = sample_outputs(data, cfg, 20000, 17);
  const Matrix large = sample_outputs(data, cfg, 80000, 18);
  const double ratio2 = estimate_moment2(small, 0, 0).std_error / estimate_moment2(large, 0, 0).std_error;
  CHECK(ratio2 == doctest::Approx(2.0).epsilon(0.2));
  const double ratio4 = estimate_cumulant4(small, 0).std_error / estimate_cumulant4(large, 0).std_error;
  CHECK(ratio4 == doctest::Approx(2.0).epsilon(0.2));
}

TEST_CASE("raw sample files round trip bit for bit") {
  const auto data = inputs({1.0, 2.0});
  const auto cfg = NetworkConfig::uniform({1, 3, 2}, 0.1, 1.0, Activation::relu());
  const Matrix z = sample_outputs(data, cfg, 33, 19);
  const auto path = std::filesystem::temp_directory_path() / "ngpflow_test_samples.bin";
  write_raw_samples(path, z);
  const Matrix back = read_raw_samples(path);
  CHECK(back.rows() == z.rows());
  CHECK(back.cols() == z.cols());
  CHECK((back - z).cwiseAbs().maxCoeff() == 0.0);
  std::filesystem::resize_file(path, 30);
  CHECK_THROWS_AS(read_raw_samples(path), ConfigError);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(parse_sampler("gibbs"), ConfigError);
}
