#pragma once

#include "qao/types.hpp"

#include <cstdint>
#include <vector>

namespace qao {

struct Grid {
  int dim = 1;
  int size = 1001;
  double pitch = 1.0;  // metadata only; the model is dimensionless

  // size >= 8; odd in 1D so that a center pixel exists.
  void validate() const;
};

// T = F D F with the centered unitary DFT F and pupil D. The operator is stored through its
// pupil and the shift kernel g(m) = (1/N) sum_k D_k exp(-2 pi i (k - c) m / N), m in [-(N-1), N-1],
// so that T[p][i] = g(p + i - (N-1)).
struct TransferOperator1d {
  CVec pupil;
  CVec kernel;  // g(m) stored at m + N - 1
  int size() const { return static_cast<int>(pupil.size()); }
};

// 2D 4f operator: centered 2D DFT, pointwise pupil, centered 2D DFT. Kernel indices (m_y + N-1, m_x + N-1).
struct TransferOperator2d {
  CImage pupil;
  CImage kernel;
  int size() const { return static_cast<int>(pupil.rows()); }
};

struct DepthSlice {
  Image transmission;
  double defocus = 0.0;  // Z_2^0 coefficient
};

struct DepthObject {
  std::vector<DepthSlice> slices;
};

TransferOperator1d build_transfer_1d(const Vec& pupil_phase);
TransferOperator1d build_transfer_1d(const CVec& pupil);
TransferOperator2d build_transfer_2d(const Image& pupil_phase);
TransferOperator2d build_transfer_2d(const CImage& pupil);

// Dense matrices; 2D is indexed by flattened pixel index y * N + x and capped at N <= 32.
CMat transfer_matrix(const TransferOperator1d& op);
CMat transfer_matrix(const TransferOperator2d& op);

CVec apply(const TransferOperator1d& op, const CVec& field);
CImage apply(const TransferOperator2d& op, const CImage& field);

// Index of the grid center pixel used as point source: (N-1)/2 for odd N, N/2 for even N.
int center_pixel(int size);

// Response to a unit point at the center pixel; columns of T.
CVec psf_of(const TransferOperator1d& op);
CImage psf_of(const TransferOperator2d& op);

// Random phase with correlation length size / f_ab, from low-pass filtered unit-modulus noise.
Vec correlated_phase_screen(double f_ab, std::uint64_t seed, int size);
// 2D analog over an aperture disk (zero outside); correlation length is measured in aperture diameters.
Image correlated_phase_screen_2d(double f_ab, std::uint64_t seed, int size, double aperture_radius);

// alpha * Z_2^0. In 1D the aperture is the full line with unit radius at size / 2.
Vec defocus_phase(double alpha, int size);
Image defocus_phase(double alpha, int size, double aperture_radius);

// Incoherent image I = |T|^2 |t|^2.
Vec intensity_image(const Vec& transmission, const TransferOperator1d& op);
Image intensity_image(const Image& transmission, const TransferOperator2d& op);

// Sum over slices of intensity_image(t_k, T(base + defocus(d_k) + correction)).
Image depth_stack_intensity(const DepthObject& object, const Image& base_pupil, const Image& correction,
                            double aperture_radius);

// Illumination envelopes A with sum |A|^2 = 1.
Vec rect_envelope(int size, double width);
Image rect_envelope_2d(int size, double width);
Vec uniform_envelope(int size);
Image uniform_envelope_2d(int size);

// Gaussian-apodized pupil exp(-2 pi sigma^2 (k - c)^2 / N^2), scaled to mean |D|^2 = 1.
// Its PSF has |h|^2 proportional to exp(-pi x^2 / sigma^2).
CVec gaussian_apodized_pupil(int size, double sigma);

// 2 a^2 / sigma^2.
double gaussian_c0_analytic(double sigma, double a);

}  // namespace qao
