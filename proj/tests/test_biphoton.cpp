#include "qao/biphoton.hpp"
#include "qao/optics.hpp"

#include <doctest.h>

#include <cmath>

using namespace qao;

namespace {

double max_relative_difference(const SumProjection& a, const SumProjection& b) {
  return (a.values - b.values).abs().maxCoeff() / a.values.abs().maxCoeff();
}

Vec random_transmission(int n, unsigned seed) {
  std::srand(seed);
  return (Vec::Random(n).array() * 0.5 + 0.5).matrix();
}

}  // namespace

TEST_CASE("ideal input is the scaled anti-diagonal") {
  const int n = 1001;
  const TwoPhotonField f = ideal_input(uniform_envelope(n));
  CHECK(f.phi(0, n - 1).real() == doctest::Approx(1.0 / std::sqrt(1001.0)));
  CHECK(f.phi(500, 500).real() == doctest::Approx(1.0 / std::sqrt(1001.0)));
  CHECK((f.phi.array() != cdouble(0.0)).count() == n);
  CHECK(f.phi.squaredNorm() == doctest::Approx(1.0));

  const TwoPhotonField narrow = ideal_input(rect_envelope(101, 11));
  for (int i = 0; i < 101; ++i) CHECK((std::abs(narrow.phi(i, 100 - i)) > 0.0) == (std::abs(i - 50) < 5.5));
  CHECK_THROWS_AS(ideal_input(Vec(Vec::Zero(9))), ArgumentError);
  CHECK_THROWS_AS(ideal_input(Image(Image::Ones(33, 33))), CapacityError);
}

TEST_CASE("pair propagation conserves the norm and G2 ignores global phases") {
  const int n = 31;
  const TransferOperator1d op = build_transfer_1d(correlated_phase_screen(1.0, 2, n));
  const TwoPhotonField out = propagate_pair(ideal_input(uniform_envelope(n)), Vec(Vec::Ones(n)), op);
  CHECK(out.phi.squaredNorm() == doctest::Approx(1.0).epsilon(1e-8));
  const CorrelationTensor g2 = g2_of(out);
  CHECK(g2.values.minCoeff() >= 0.0);
  TwoPhotonField rotated = out;
  rotated.phi *= std::polar(1.0, 0.7);
  CHECK((g2_of(rotated).values - g2.values).cwiseAbs().maxCoeff() < 1e-15);

  const int m = 8;
  const TwoPhotonField out2 = propagate_pair(ideal_input(uniform_envelope_2d(m)), Image(Image::Ones(m, m)),
                                             build_transfer_2d(correlated_phase_screen_2d(2.0, 3, m, m / 2.0)));
  CHECK(out2.phi.squaredNorm() == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("dense and streaming projections agree") {
  for (unsigned seed = 1; seed <= 3; ++seed) {
    const int n = 41;
    const Vec t = random_transmission(n, seed);
    const Vec env = rect_envelope(n, 25);
    const TransferOperator1d op = build_transfer_1d(correlated_phase_screen(1.5, seed, n));
    const SumProjection dense = sum_projection(g2_of(propagate_pair(ideal_input(env), t, op)));
    const SumProjection direct = sum_projection_direct(t, op, env);
    REQUIRE(dense.values.rows() == 2 * n - 1);
    CHECK(max_relative_difference(dense, direct) < 1e-8);
    const auto batch = sum_projection_direct(std::vector<Vec>{t, Vec::Ones(n)}, op, env);
    CHECK(max_relative_difference(direct, batch[0]) < 1e-12);
    const SumProjection windowed = sum_projection_direct(t, op, env, 2);
    CHECK(c0_peak(windowed, 2) == doctest::Approx(c0_peak(dense, 2)).epsilon(1e-10));
  }
  const int m = 8;
  std::srand(21);
  const Image t2 = Image::Random(m, m).abs();
  const TransferOperator2d op2 = build_transfer_2d(correlated_phase_screen_2d(2.0, 4, m, m / 2.0));
  const SumProjection dense2 = sum_projection(g2_of(propagate_pair(ideal_input(uniform_envelope_2d(m)), t2, op2)));
  const SumProjection direct2 = sum_projection_direct(t2, op2, uniform_envelope_2d(m));
  REQUIRE(dense2.values.rows() == 2 * m - 1);
  REQUIRE(dense2.values.cols() == 2 * m - 1);
  CHECK(max_relative_difference(dense2, direct2) < 1e-8);
}

TEST_CASE("unaberrated projection is a central spike") {
  const int n = 65;
  const SumProjection p = sum_projection_direct(Vec(Vec::Ones(n)), build_transfer_1d(Vec(Vec::Zero(n))), uniform_envelope(n));
  CHECK(c0_peak(p, 0) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(p.values.sum() == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("c0_peak windows") {
  SumProjection ones{1, 5, Image::Ones(9, 1)};
  CHECK(c0_peak(ones, 1) == doctest::Approx(3.0));
  SumProjection spike{1, 5, Image::Zero(9, 1)};
  spike.values(4, 0) = 2.5;
  CHECK(c0_peak(spike, 0) == doctest::Approx(2.5));
  CHECK_THROWS_AS(c0_peak(ones, 5), ArgumentError);
  CHECK_THROWS_AS(c0_peak(ones, -1), ArgumentError);
  SumProjection plane{2, 3, Image::Ones(5, 5)};
  CHECK(c0_peak(plane, 1) == doctest::Approx(9.0));
}

TEST_CASE("Gaussian PSF central value follows the inverse-square law") {
  const int n = 257;
  Vec point = Vec::Zero(n);
  point[center_pixel(n)] = 1.0;
  auto c0_2d = [&](double sigma) {
    return std::pow(c0_direct(Vec(Vec::Ones(n)), build_transfer_1d(gaussian_apodized_pupil(n, sigma)), point, 0), 2);
  };
  CHECK(c0_2d(8.0) / c0_2d(4.0) == doctest::Approx(0.25).epsilon(1e-6));
  // Frozen: the separable 2D central value at sigma = 4 is 1 / (2 sigma^2).
  CHECK(c0_2d(4.0) == doctest::Approx(0.03125).epsilon(1e-8));
}

TEST_CASE("anti-correlation and conditional images") {
  const int n = 8;
  const TwoPhotonField in = ideal_input(uniform_envelope_2d(n));
  Image half = Image::Ones(n, n);
  half.rightCols(n / 2).row(1).setZero();
  const CorrelationTensor g2 = g2_of(propagate_pair(in, half, build_transfer_2d(Image(Image::Zero(n, n)))));
  const Image strict = anti_correlation_image(g2, 0);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x)
      CHECK(strict(y, x) == doctest::Approx(g2.values(pixel_index(y, x, n), pixel_index(n - 1 - y, n - 1 - x, n))));
  // The blocked pixels and their mirrors are dark; everything else is lit.
  const Image r = anti_correlation_image(g2);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const bool blocked = (y == 1 && x >= n / 2) || (n - 1 - y == 1 && n - 1 - x >= n / 2);
      CHECK((r(y, x) > 1e-12) == !blocked);
    }

  const Image cond = conditional_image(g2, 2, 3);
  Eigen::Index py, px;
  cond.maxCoeff(&py, &px);
  CHECK(py == n - 1 - 2);
  CHECK(px == n - 1 - 3);
  CHECK_THROWS_AS(conditional_image(g2, n, 0), ArgumentError);
}

TEST_CASE("pearson similarity") {
  std::srand(31);
  const Vec x = Vec::Random(50);
  CHECK(pearson(x, x) == doctest::Approx(1.0));
  CHECK(pearson(x, (-x.array() + 3.0).matrix()) == doctest::Approx(-1.0));
  CHECK_THROWS_AS(pearson(x, Vec(Vec::Constant(50, 2.0))), DomainError);
  SumProjection a{1, 3, Image::Random(5, 1)};
  CHECK(projection_similarity(a, a) == doctest::Approx(1.0));
}
