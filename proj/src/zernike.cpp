#include "qao/zernike.hpp"

#include <cmath>
#include <random>
#include <string>

namespace qao {

namespace {

double factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

void check_order_range(int n_min, int n_max) {
  if (n_min < 0 || n_max < n_min)
    throw ArgumentError("mode_list: require 0 <= n_min <= n_max, got " + std::to_string(n_min) + ".." +
                        std::to_string(n_max));
}

}  // namespace

ZernikeIndex::ZernikeIndex(int n_, int m_) : n(n_), m(m_) {
  if (n < 0 || std::abs(m) > n) throw ArgumentError("ZernikeIndex: require |m| <= n");
  if ((n + m) % 2 != 0) throw ArgumentError("ZernikeIndex: n + m must be even");
}

std::size_t mode_count(int n_min, int n_max) {
  check_order_range(n_min, n_max);
  return static_cast<std::size_t>(((n_max + 1) * (n_max + 2) - n_min * (n_min + 1)) / 2);
}

std::vector<ZernikeIndex> mode_list(int n_min, int n_max) {
  check_order_range(n_min, n_max);
  std::vector<ZernikeIndex> modes;
  for (int n = n_min; n <= n_max; ++n)
    for (int m = -n; m <= n; m += 2) modes.emplace_back(n, m);
  return modes;
}

double radial_polynomial(int n, int m, double rho) {
  m = std::abs(m);
  if ((n - m) % 2 != 0) return 0.0;
  double sum = 0.0;
  for (int k = 0; k <= (n - m) / 2; ++k) {
    const double coeff = factorial(n - k) / (factorial(k) * factorial((n + m) / 2 - k) * factorial((n - m) / 2 - k));
    sum += (k % 2 == 0 ? coeff : -coeff) * std::pow(rho, n - 2 * k);
  }
  return sum;
}

double eval_zernike(const ZernikeIndex& idx, double rho, double psi) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw DomainError("eval_zernike: rho must lie in [0, 1]");
  const double radial = radial_polynomial(idx.n, idx.m, rho);
  if (idx.m == 0) return std::sqrt(idx.n + 1.0) * radial;
  const double norm = std::sqrt(2.0 * (idx.n + 1.0));
  return idx.m > 0 ? norm * radial * std::cos(idx.m * psi) : norm * radial * std::sin(-idx.m * psi);
}

Mask aperture_mask(int size, double aperture_radius) {
  const double c = 0.5 * (size - 1);
  Mask mask(size, size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) mask(y, x) = std::hypot(x - c, y - c) <= aperture_radius;
  return mask;
}

Image zernike_mode_image(const ZernikeIndex& idx, int size, double aperture_radius) {
  if (aperture_radius <= 0.0 || 2.0 * aperture_radius > size + 1e-9)
    throw ArgumentError("synthesize_mask: aperture must fit inside the grid");
  const double c = 0.5 * (size - 1);
  Image out = Image::Zero(size, size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double dx = (x - c) / aperture_radius, dy = (y - c) / aperture_radius;
      const double rho = std::hypot(dx, dy);
      if (rho <= 1.0) out(y, x) = eval_zernike(idx, rho, std::atan2(dy, dx));
    }
  return out;
}

PhaseMask synthesize_mask(const ZernikeExpansion& expansion, int size, double aperture_radius) {
  PhaseMask mask;
  mask.aperture_radius = aperture_radius;
  mask.center_y = mask.center_x = 0.5 * (size - 1);
  mask.phase = Image::Zero(size, size);
  for (const auto& [idx, alpha] : expansion) mask.phase += alpha * zernike_mode_image(idx, size, aperture_radius);
  return mask;
}

ZernikeExpansion random_expansion(std::uint64_t seed, int n_min, int n_max, double amplitude) {
  if (amplitude < 0.0) throw ArgumentError("random_expansion: amplitude must be non-negative");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  ZernikeExpansion out;
  for (const auto& idx : mode_list(n_min, n_max)) out[idx] = amplitude * unit(rng);
  return out;
}

}  // namespace qao
