#pragma once

#include "qao/biphoton.hpp"
#include "qao/types.hpp"

#include <cstdint>
#include <vector>

namespace qao {

struct DetectorConfig {
  double eta = 0.3;           // per-photon detection efficiency
  double lambda_pairs = 1.0;  // mean pairs per frame
  double p_dark = 1e-3;       // per-pixel dark/noise click probability per frame
  long frames = 10000;        // M; the stack holds M + 1 frames

  void validate() const;
};

// M + 1 binary frames, bit-packed row-major (pixel y * width + x at bit k of the frame,
// least significant bit first within each byte).
struct FrameStack {
  int width = 0;
  int height = 0;
  std::uint64_t seed = 0;
  bool high_occupancy = false;  // mean fill > 0.5: the estimator is biased in this regime
  std::vector<std::uint8_t> bits;

  long frame_count() const;
  int pixel_count() const { return width * height; }
  std::size_t bytes_per_frame() const { return (static_cast<std::size_t>(pixel_count()) + 7) / 8; }
  bool at(long frame, int pixel) const;
  void set(long frame, int pixel);
  std::vector<int> active(long frame) const;
  static FrameStack zeros(int width, int height, long count);
};

struct CorrelationEstimate {
  CorrelationTensor gamma;  // may be negative: covariance-style estimator
  bool same_pixel_zeroed = true;
};

// Exact-pdf sampling: per frame n ~ Poisson(lambda) pairs drawn i.i.d. from the normalized G^2,
// each photon registers with probability eta, independent dark clicks, clipped to binary.
FrameStack sample_frames(const CorrelationTensor& g2, const DetectorConfig& cfg, std::uint64_t seed);

// Approximate path for grids too large for a dense G^2: the source point is drawn from
// |A(r) t(r) t(-r)|^2 and each photon independently from |h|^2 around its image point.
// Interference between source points is not retained.
FrameStack sample_frames_factorized(const Image& envelope, const Image& transmission, const TransferOperator2d& op,
                                    const DetectorConfig& cfg, std::uint64_t seed);

// Gamma_ijkl = (1/M) sum_l [I^l_ij I^l_kl - I^l_ij I^(l+1)_kl], same-pixel entries zeroed.
CorrelationEstimate estimate_g2(const FrameStack& stack, int dim);

// mean(signal) / std(noise).
double snr(const Image& image, const Mask& signal_region, const Mask& noise_region);

}  // namespace qao
