#include "qao/ao_engine.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace qao;

namespace {

BiasScan synthetic_scan(double centre, double sigma, double noise, unsigned seed) {
  BiasScan scan;
  scan.biases = linspace(-2.0, 2.0, 21);
  std::mt19937 rng(seed);
  std::normal_distribution<double> jitter(0.0, noise);
  for (double a : scan.biases)
    scan.responses.push_back(0.2 + 1.5 * std::exp(-(a - centre) * (a - centre) / (sigma * sigma)) +
                             (noise > 0.0 ? jitter(rng) : 0.0));
  return scan;
}

SystemState defocused_state(double alpha) {
  SystemState s = make_state(32, 16.0);
  s.aberration = defocus_phase(alpha, 32, 16.0);
  return s;
}

}  // namespace

TEST_CASE("linspace") {
  CHECK(linspace(-2.0, 2.0, 5) == std::vector<double>{-2.0, -1.0, 0.0, 1.0, 2.0});
  CHECK_THROWS_AS(linspace(0.0, 1.0, 1), ArgumentError);
}

TEST_CASE("Gaussian peak fit") {
  const GaussianFit exact = fit_peak(synthetic_scan(0.5, 0.8, 0.0, 1));
  CHECK(exact.alpha_corr == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(exact.sigma == doctest::Approx(0.8).epsilon(1e-5));
  CHECK(exact.residual < 1e-6);

  const GaussianFit centred = fit_peak(synthetic_scan(0.0, 1.0, 0.0, 1));
  CHECK(std::abs(centred.alpha_corr) < 1e-6);

  const BiasScan noisy = synthetic_scan(-0.7, 0.9, 0.05 * 1.5, 4);
  const GaussianFit rough = fit_peak(noisy);
  CHECK(rough.alpha_corr == doctest::Approx(-0.7).epsilon(0.1));
  CHECK(rough.residual < 0.05);

  BiasScan flat = synthetic_scan(0.0, 1.0, 0.0, 1);
  std::fill(flat.responses.begin(), flat.responses.end(), 1.0);
  CHECK_THROWS_AS(fit_peak(flat), FitError);
  BiasScan tiny;
  tiny.biases = {0.0, 1.0};
  tiny.responses = {0.0, 1.0};
  CHECK_THROWS_AS(fit_peak(tiny), ArgumentError);
}

TEST_CASE("main lobe isolation") {
  BiasScan scan;
  scan.biases = linspace(-4.0, 4.0, 9);
  scan.responses = {0.1, 0.6, 0.1, 0.0, 0.5, 0.9, 1.0, 0.8, 0.2};
  const BiasScan lobe = main_lobe(scan, 0.5, 3);
  CHECK(lobe.biases == std::vector<double>{0.0, 1.0, 2.0, 3.0});
  const BiasScan widened = main_lobe(scan, 0.5, 6);
  CHECK(widened.biases.size() == 6);
  CHECK(widened.biases.back() == 4.0);
}

TEST_CASE("bias scans") {
  SystemState s = defocused_state(0.0);
  const ZernikeIndex defocus(2, 0);
  const BiasScan centred = scan_mode(s, defocus, linspace(-2.0, 2.0, 5), MetricKind::QAO_C0);
  CHECK_FALSE(centred.flagged);
  CHECK(std::max_element(centred.responses.begin(), centred.responses.end()) - centred.responses.begin() == 2);
  CHECK((s.correction == 0.0).all());

  SystemState d = defocused_state(-2.0);
  const BiasScan shifted = scan_mode(d, defocus, linspace(-2.0, 2.0, 5), MetricKind::QAO_C0);
  CHECK(std::max_element(shifted.responses.begin(), shifted.responses.end()) - shifted.responses.begin() == 4);

  // A featureless object gives a featureless classical image: the scan is flagged.
  const BiasScan pib = scan_mode(d, defocus, linspace(-2.0, 2.0, 5), MetricKind::PIB);
  CHECK(pib.flagged);

  CHECK_THROWS_AS(scan_mode(s, defocus, {0.0, 1.0}, MetricKind::QAO_C0), ArgumentError);
  CHECK_THROWS_AS(scan_mode(s, defocus, {0.0, 2.0, 1.0}, MetricKind::QAO_C0), ArgumentError);
}

TEST_CASE("modal loop") {
  const std::vector<ZernikeIndex> modes = mode_list(2, 2);
  const auto biases = linspace(-2.0, 2.0, 7);

  SystemState clean = defocused_state(0.0);
  const CorrectionState none = modal_optimize(clean, modes, biases, 1);
  CHECK(none.history.size() == modes.size());
  for (const auto& [mode, value] : none.cumulative) CHECK(std::abs(value) < 0.05);

  SystemState s = defocused_state(-2.0);
  int steps = 0;
  const CorrectionState result = modal_optimize(s, modes, biases, 2, MetricKind::QAO_C0, [&](const ModeStep&) { ++steps; });
  CHECK(result.iterations == 2);
  CHECK(result.history.size() == 2 * modes.size());
  CHECK(steps == static_cast<int>(result.history.size()));
  CHECK(result.cumulative.at(ZernikeIndex(2, 0)) == doctest::Approx(2.0).epsilon(0.05));
  CHECK(residual_rms(s.aberration + s.correction, s.aperture_radius) < 0.1);
  CHECK_THROWS_AS(modal_optimize(s, modes, biases, 0), ArgumentError);
}

TEST_CASE("the quantum feedback does not depend on the object") {
  SystemState s = defocused_state(-1.0);
  const BiasScan plain = scan_mode(s, ZernikeIndex(2, 0), linspace(-3.0, 3.0, 13), MetricKind::QAO_C0);
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(0.2, 1.0);
  s.object = Image::NullaryExpr(32, 32, [&] { return u(rng); });
  const BiasScan textured = scan_mode(s, ZernikeIndex(2, 0), linspace(-3.0, 3.0, 13), MetricKind::QAO_C0);
  CHECK(fit_peak(textured).alpha_corr == doctest::Approx(fit_peak(plain).alpha_corr).epsilon(0.1));
  CHECK(fit_peak(plain).alpha_corr == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("defocus comparison returns one row per metric") {
  SystemState s = defocused_state(-2.0);
  s.object = Image::Ones(32, 32);
  s.object.rightCols(16).topRows(16) = 0.0;
  const auto rows = defocus_comparison(s, linspace(-5.0, 5.0, 21), {MetricKind::QAO_C0, MetricKind::PIB});
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].metric == MetricKind::QAO_C0);
  CHECK(rows[0].alpha_corr == doctest::Approx(2.0).epsilon(0.1));
  CHECK(rows[1].scan.responses.size() == 21);
}

TEST_CASE("residual phase RMS ignores piston and the outside of the pupil") {
  Image phase = Image::Constant(16, 16, 3.0);
  CHECK(residual_rms(phase, 8.0) < 1e-12);
  const Image tilt = zernike_mode_image(ZernikeIndex(1, 1), 16, 8.0);
  CHECK(residual_rms(0.5 * tilt, 8.0) == doctest::Approx(0.5).epsilon(0.1));
}
