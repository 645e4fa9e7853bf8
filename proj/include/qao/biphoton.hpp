#pragma once

#include "qao/optics.hpp"
#include "qao/types.hpp"

#include <vector>

namespace qao {

// Largest 2D grid for which dense N^2 x N^2 pair amplitudes are materialized.
inline constexpr int kMaxDense2d = 32;

// phi(r1, r2) as a matrix: rows index photon 1, columns photon 2 (flattened y * N + x in 2D).
struct TwoPhotonField {
  int dim = 1;
  int size = 0;
  CMat phi;
};

// Pair-indexed real values: G^2 = |phi|^2, or a frame-based estimate of it.
struct CorrelationTensor {
  int dim = 1;
  int size = 0;
  Mat values;
};

// C+ over the index sum s = i1 + i2 - (N-1) in [-(N-1), N-1] per axis. Values are
// (2N-1) x 1 in 1D and (2N-1) x (2N-1) in 2D; s = 0 sits at center_index() on each axis.
struct SumProjection {
  int dim = 1;
  int size = 0;
  Image values;
  int center_index() const { return size - 1; }
};

// Mirror of a pixel about the grid center: i -> N-1-i per axis.
inline Eigen::Index mirror_index(Eigen::Index i, Eigen::Index n) { return n - 1 - i; }

// phi(r1, r2) = A(r1) delta(r2 = mirror(r1)) / ||A||.
TwoPhotonField ideal_input(const Vec& envelope);
TwoPhotonField ideal_input(const Image& envelope);

// T diag(t) phi diag(t) T^T.
TwoPhotonField propagate_pair(const TwoPhotonField& input, const Vec& transmission, const TransferOperator1d& op);
TwoPhotonField propagate_pair(const TwoPhotonField& input, const Image& transmission, const TransferOperator2d& op);

CorrelationTensor g2_of(const TwoPhotonField& field);

// Exact sum over all pixel pairs with fixed index sum.
SumProjection sum_projection(const CorrelationTensor& g2);

// Streaming C+ without the pair tensor: w(r) = A(r) t(r) t(-r), k_s(u) = h(u) h(s-u),
// C+(s) = sum_r' |(w * k_s)(r')|^2. With window >= 0 only shifts |s| <= window (per axis) are
// evaluated and the rest of the projection is left at zero.
SumProjection sum_projection_direct(const Vec& transmission, const TransferOperator1d& op, const Vec& envelope,
                                    int window = -1);
SumProjection sum_projection_direct(const Image& transmission, const TransferOperator2d& op, const Image& envelope,
                                    int window = -1);
// Several objects through the same operator; each shift kernel is transformed once.
std::vector<SumProjection> sum_projection_direct(const std::vector<Vec>& transmissions, const TransferOperator1d& op,
                                                 const Vec& envelope, int window = -1);

// Sum of C+ over the (2 bin + 1)-wide window around s = 0.
double c0_peak(const SumProjection& projection, int bin);

// Windowed streaming evaluation of c0_peak.
double c0_direct(const Vec& transmission, const TransferOperator1d& op, const Vec& envelope, int bin);
double c0_direct(const Image& transmission, const TransferOperator2d& op, const Image& envelope, int bin);

// R(r) = sum over the (2 half_window + 1)-wide neighbourhood of G^2(r, -r + k). 1D results are N x 1.
Image anti_correlation_image(const CorrelationTensor& g2, int half_window = 2);

// G^2(r | A): slice at fixed second photon pixel A = (y, x); 1D uses y = 0. 1D results are N x 1.
Image conditional_image(const CorrelationTensor& g2, int y, int x);

// Pearson correlation of the flattened projections.
double projection_similarity(const SumProjection& a, const SumProjection& b);
double pearson(const Eigen::Ref<const Vec>& a, const Eigen::Ref<const Vec>& b);

}  // namespace qao
