#include "qao/acquisition.hpp"

#include <doctest.h>

#include <cmath>

using namespace qao;

namespace {

CorrelationTensor single_pair(int n, int a, int b) {
  CorrelationTensor g2{1, n, Mat::Zero(n, n)};
  g2.values(a, b) = 1.0;
  return g2;
}

}  // namespace

TEST_CASE("detector configuration validation") {
  DetectorConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.eta = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ArgumentError);
  cfg = {};
  cfg.p_dark = -0.1;
  CHECK_THROWS_AS(cfg.validate(), ArgumentError);
  cfg = {};
  cfg.lambda_pairs = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ArgumentError);
  cfg = {};
  cfg.frames = 1;
  CHECK_THROWS_AS(cfg.validate(), ArgumentError);
}

TEST_CASE("frame stack packing") {
  FrameStack s = FrameStack::zeros(5, 3, 4);
  CHECK(s.frame_count() == 4);
  CHECK(s.bytes_per_frame() == 2);
  s.set(2, 9);
  s.set(2, 14);
  CHECK(s.at(2, 9));
  CHECK_FALSE(s.at(1, 9));
  CHECK(s.active(2) == std::vector<int>{9, 14});
  CHECK(s.active(0).empty());
}

TEST_CASE("empty source and dark-free detector give empty frames") {
  DetectorConfig cfg;
  cfg.lambda_pairs = 0.0;
  cfg.p_dark = 0.0;
  cfg.frames = 50;
  const FrameStack s = sample_frames(single_pair(6, 1, 4), cfg, 3);
  CHECK(s.frame_count() == 51);
  for (long l = 0; l < s.frame_count(); ++l) CHECK(s.active(l).empty());
  CHECK((estimate_g2(s, 1).gamma.values.array() == 0.0).all());
}

TEST_CASE("a single pair location only ever clicks its two pixels") {
  DetectorConfig cfg;
  cfg.eta = 1.0;
  cfg.p_dark = 0.0;
  cfg.lambda_pairs = 0.5;
  cfg.frames = 2000;
  const FrameStack s = sample_frames(single_pair(6, 1, 4), cfg, 5);
  long both = 0;
  for (long l = 0; l < s.frame_count(); ++l) {
    const auto a = s.active(l);
    CHECK((a.empty() || a == std::vector<int>{1, 4}));
    both += !a.empty();
  }
  CHECK(both / static_cast<double>(s.frame_count()) == doctest::Approx(1.0 - std::exp(-0.5)).epsilon(0.08));
  const Mat gamma = estimate_g2(s, 1).gamma.values;
  CHECK(gamma(1, 4) > 0.15);
  CHECK(gamma(1, 4) == doctest::Approx(gamma(4, 1)));
  CHECK(gamma(0, 2) == 0.0);
  CHECK(gamma(1, 1) == 0.0);
}

TEST_CASE("sampling is deterministic in the seed") {
  DetectorConfig cfg;
  cfg.frames = 300;
  cfg.lambda_pairs = 2.0;
  CorrelationTensor g2{1, 8, Mat::Constant(8, 8, 1.0)};
  CHECK(sample_frames(g2, cfg, 7).bits == sample_frames(g2, cfg, 7).bits);
  CHECK(sample_frames(g2, cfg, 7).bits != sample_frames(g2, cfg, 8).bits);
  g2.values(0, 0) = -1.0;
  CHECK_THROWS_AS(sample_frames(g2, cfg, 7), ArgumentError);
}

TEST_CASE("occupancy flag") {
  DetectorConfig cfg;
  cfg.frames = 4;
  cfg.p_dark = 0.6;
  CorrelationTensor g2{1, 4, Mat::Constant(4, 4, 1.0)};
  CHECK(sample_frames(g2, cfg, 1).high_occupancy);
  cfg.p_dark = 1e-3;
  CHECK_FALSE(sample_frames(g2, cfg, 1).high_occupancy);
}

TEST_CASE("estimator on hand-built stacks") {
  // Identical frames: the accidental term cancels the coincidence term exactly.
  FrameStack same = FrameStack::zeros(3, 1, 11);
  for (long l = 0; l < 11; ++l) {
    same.set(l, 0);
    same.set(l, 2);
  }
  CHECK((estimate_g2(same, 1).gamma.values.array() == 0.0).all());

  // Pixels 0 and 2 fire together on even frames only: half the frame pairs contribute one coincidence.
  FrameStack alternating = FrameStack::zeros(3, 1, 11);
  for (long l = 0; l < 11; l += 2) {
    alternating.set(l, 0);
    alternating.set(l, 2);
  }
  const Mat gamma = estimate_g2(alternating, 1).gamma.values;
  CHECK(gamma(0, 2) == doctest::Approx(0.5));
  CHECK(gamma(2, 0) == doctest::Approx(0.5));
  CHECK(gamma(0, 0) == 0.0);
  CHECK_THROWS_AS(estimate_g2(FrameStack::zeros(3, 1, 2), 1), ArgumentError);
}

TEST_CASE("uncorrelated clicks average to zero") {
  DetectorConfig cfg;
  cfg.lambda_pairs = 0.0;
  cfg.p_dark = 0.2;
  cfg.frames = 20000;
  const FrameStack s = sample_frames(single_pair(4, 0, 3), cfg, 11);
  const Mat gamma = estimate_g2(s, 1).gamma.values;
  // Each off-diagonal entry has standard deviation about sqrt(2) p (1 - p) / sqrt(M) = 0.0016.
  CHECK(gamma.cwiseAbs().maxCoeff() < 0.01);
}

TEST_CASE("signal-to-noise ratio") {
  Image img(2, 3);
  img << 10, 10, 0, 10, 2, -2;
  Mask signal = Mask::Constant(2, 3, false), noise = Mask::Constant(2, 3, false);
  signal(0, 0) = signal(0, 1) = signal(1, 0) = true;
  noise(1, 1) = noise(1, 2) = true;
  CHECK(snr(img, signal, noise) == doctest::Approx(5.0));
  noise.setConstant(false);
  noise(0, 2) = true;
  CHECK_THROWS_AS(snr(img, signal, noise), DomainError);
  CHECK_THROWS_AS(snr(img, signal, Mask::Constant(2, 3, false)), ArgumentError);
  CHECK_THROWS_AS(snr(img, Mask::Constant(3, 3, true), noise), ArgumentError);
}
