#pragma once

#include "qao/types.hpp"

#include <compare>
#include <cstdint>
#include <map>
#include <vector>

namespace qao {

// Zernike index (n, m) with |m| <= n and n + m even. Ordered by (n, m) ascending.
struct ZernikeIndex {
  int n = 0;
  int m = 0;

  ZernikeIndex() = default;
  ZernikeIndex(int n_, int m_);

  auto operator<=>(const ZernikeIndex&) const = default;
};

// Coefficients in radians, orthonormal convention; std::map keeps (n asc, m asc) order.
using ZernikeExpansion = std::map<ZernikeIndex, double>;

struct PhaseMask {
  Image phase;  // radians; exactly 0 outside the aperture disk
  double aperture_radius = 0.0;
  double center_y = 0.0;
  double center_x = 0.0;
};

std::vector<ZernikeIndex> mode_list(int n_min, int n_max);
std::size_t mode_count(int n_min, int n_max);

// Radial polynomial R_n^{|m|}(rho) by the explicit factorial sum.
double radial_polynomial(int n, int m, double rho);

// Orthonormal Zernike: sqrt(n+1) R_n^0 for m = 0, sqrt(2(n+1)) R_n^{|m|} cos(m psi) for m > 0,
// sqrt(2(n+1)) R_n^{|m|} sin(|m| psi) for m < 0. Throws DomainError for rho outside [0, 1].
double eval_zernike(const ZernikeIndex& idx, double rho, double psi);

// Pixel centers map to rho = r / aperture_radius about the grid center ((size-1)/2, (size-1)/2);
// psi = atan2(y, x). Pixels with rho > 1 are 0.
Image zernike_mode_image(const ZernikeIndex& idx, int size, double aperture_radius);
PhaseMask synthesize_mask(const ZernikeExpansion& expansion, int size, double aperture_radius);
Mask aperture_mask(int size, double aperture_radius);

// Coefficients i.i.d. uniform in [-amplitude, amplitude], deterministic in the seed.
ZernikeExpansion random_expansion(std::uint64_t seed, int n_min, int n_max, double amplitude);

}  // namespace qao
