#include <doctest.h>

#include <cmath>

#include "dg/dataset.hpp"
#include "dg/error.hpp"
#include "dg/fid.hpp"
#include "dg/metrics.hpp"
#include "dg/rng.hpp"

using namespace dg;

namespace {

GaussianSummary summary(Eigen::VectorXd mean, Eigen::MatrixXd cov) { return {std::move(mean), std::move(cov), 2}; }

Eigen::MatrixXd random_psd(std::size_t n, Rng& rng) {
  Eigen::MatrixXd a(n, n);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.normal();
  // Rank-deficient about a third of the time.
  if (rng.below(3) == 0) a.col(0).setZero();
  return a * a.transpose();
}

const DatasetBundle& bundle() {
  static const DatasetBundle b = [] {
    StyleShapesConfig c;
    c.classes = 4;
    c.styles = {Style::Plain, Style::SketchOutline};
    c.per_cell = 20;
    return generate_style_shapes(c);
  }();
  return b;
}

std::vector<std::size_t> domain_indices(const DatasetBundle& b, std::uint32_t d) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (b.domains[i] == d) out.push_back(i);
  }
  return out;
}

}  // namespace

TEST_CASE("gaussian summary") {
  Eigen::MatrixXd pts(2, 2);
  pts << 0, 0, 2, 2;
  const auto s = gaussian_summary(pts);
  CHECK(s.mean.isApprox(Eigen::Vector2d(1, 1)));
  Eigen::Matrix2d expected;
  expected << 2, 2, 2, 2;
  CHECK((s.cov - expected).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(s.n == 2);

  Eigen::MatrixXd same = Eigen::MatrixXd::Constant(5, 3, 0.7);
  CHECK(gaussian_summary(same).cov.cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(gaussian_summary(Eigen::MatrixXd::Zero(1, 3)), ContractError);

  Rng rng(2);
  Eigen::MatrixXd cloud(30, 4);
  for (Eigen::Index i = 0; i < cloud.size(); ++i) cloud.data()[i] = rng.normal();
  Eigen::MatrixXd shifted = cloud.rowwise() + Eigen::RowVector4d(3, -1, 10, 0.5);
  CHECK((gaussian_summary(cloud).cov - gaussian_summary(shifted).cov).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("psd square root") {
  CHECK(psd_sqrt(Eigen::MatrixXd::Identity(3, 3)).isApprox(Eigen::MatrixXd::Identity(3, 3)));
  Eigen::MatrixXd d = Eigen::Vector2d(4, 9).asDiagonal();
  Eigen::MatrixXd r = Eigen::Vector2d(2, 3).asDiagonal();
  CHECK((psd_sqrt(d) - r).cwiseAbs().maxCoeff() < 1e-14);

  Rng rng(3);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::MatrixXd c = random_psd(1 + rng.below(12), rng);
    const Eigen::MatrixXd s = psd_sqrt(c);
    CHECK((s - s.transpose()).cwiseAbs().maxCoeff() == 0.0);
    worst = std::max(worst, (s * s - c).cwiseAbs().maxCoeff() / c.cwiseAbs().maxCoeff());
  }
  CHECK(worst <= 1e-8);

  Eigen::Matrix2d asym;
  asym << 1, 0.5, 0, 1;
  CHECK_THROWS_AS(psd_sqrt(asym), ContractError);
}

TEST_CASE("frechet distance closed forms") {
  const auto a1 = summary(Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Constant(1, 1, 1.0));
  const auto b1 = summary(Eigen::VectorXd::Constant(1, 3.0), Eigen::MatrixXd::Constant(1, 1, 4.0));
  CHECK(std::abs(frechet_distance(a1, b1) - std::sqrt(10.0)) <= 1e-9);

  const auto a2 = summary(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2));
  const auto b2 = summary(Eigen::VectorXd::Ones(2), 4.0 * Eigen::MatrixXd::Identity(2, 2));
  CHECK(std::abs(frechet_distance(a2, b2) - 2.0) <= 1e-9);
  CHECK(frechet_distance(a2, a2) == 0.0);
  CHECK_THROWS_AS(frechet_distance(a1, a2), DimensionError);

  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.below(8);
    Eigen::VectorXd m1(n), m2(n);
    for (std::size_t i = 0; i < n; ++i) {
      m1[static_cast<Eigen::Index>(i)] = rng.normal();
      m2[static_cast<Eigen::Index>(i)] = rng.normal();
    }
    const auto x = summary(m1, random_psd(n, rng));
    const auto y = summary(m2, random_psd(n, rng));
    CHECK(std::abs(frechet_distance(x, y) - frechet_distance(y, x)) <= 1e-10);
    CHECK(frechet_distance(x, y) >= 0.0);
    CHECK(frechet_distance(x, x) <= 1e-6);
  }
}

TEST_CASE("fid between index sets") {
  const auto& b = bundle();
  const auto plain = domain_indices(b, 0), sketch = domain_indices(b, 1);
  CHECK(fid_between_splits(b, plain, plain) <= 1e-6);
  const double ab = fid_between_splits(b, plain, sketch), ba = fid_between_splits(b, sketch, plain);
  CHECK(std::abs(ab - ba) <= 1e-10);
  CHECK(ab > 0.1);
  const std::vector<std::size_t> single{0};
  CHECK_THROWS_AS(fid_between_splits(b, single, plain), ContractError);
}

TEST_CASE("shifting one side adds the squared shift") {
  const auto& b = bundle();
  const auto idx = domain_indices(b, 0);
  const Eigen::MatrixXd e = embed(b, idx, pixel_embedder());
  CHECK(e.cols() == 64);
  Eigen::RowVectorXd v(64);
  Rng rng(5);
  for (Eigen::Index i = 0; i < 64; ++i) v[i] = 0.1 * rng.normal();
  const auto base = gaussian_summary(e);
  const auto moved = gaussian_summary(e.rowwise() + v);
  const double d = frechet_distance(base, moved);
  CHECK(d * d == doctest::Approx(v.squaredNorm()).epsilon(1e-6));
}

TEST_CASE("pixel embedder averages 2x2 gray blocks") {
  Tensor img({1, 3, 16, 16}, 0.0);
  // Red only in the top-left 2x2 block.
  for (std::size_t y = 0; y < 2; ++y)
    for (std::size_t x = 0; x < 2; ++x) img[y * 16 + x] = 1.0;
  const Eigen::MatrixXd e = pixel_embedder()(img);
  REQUIRE(e.rows() == 1);
  CHECK(e(0, 0) == doctest::Approx(0.299));
  for (Eigen::Index j = 1; j < 64; ++j) CHECK(e(0, j) == 0.0);
}

TEST_CASE("accuracy corner cases") {
  const std::vector<std::uint32_t> labels{0, 1, 2, 0, 1, 2};
  CHECK(accuracy(labels, labels, 3).fraction == 1.0);
  const std::vector<std::uint32_t> constant(6, 2);
  const auto r = accuracy(constant, labels, 3);
  CHECK(r.fraction == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(r.histogram == std::vector<std::size_t>{0, 0, 6});
}
