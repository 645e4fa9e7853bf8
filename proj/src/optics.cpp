#include "qao/optics.hpp"

#include "qao/fft.hpp"
#include "qao/zernike.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace qao {

namespace {

constexpr int kScreenOversample1d = 16;
constexpr int kScreenOversample2d = 8;
// Filter cut-off in cycles per aperture per unit f_ab. Calibrated so that the 1/e full width of the
// autocorrelation of exp(i phi) is close to size / f_ab.
constexpr double kScreenCutoff = 0.58;

// Phase factor exp(2 pi i c m / N) / N that turns an FFT of the pupil into g(m), m in [0, N).
CVec kernel_twiddle(int n) {
  const double c = 0.5 * (n - 1);
  CVec w(n);
  for (int m = 0; m < n; ++m) w[m] = std::polar(1.0 / n, 2.0 * std::numbers::pi * c * m / n);
  return w;
}

// g(m - N) = (-1)^(N-1) g(m): the exponent picks up exp(2 pi i (k - c)) = exp(-2 pi i c).
double wrap_sign(int n) { return (n - 1) % 2 == 0 ? 1.0 : -1.0; }

CVec kernel_1d(const CVec& pupil) {
  const int n = static_cast<int>(pupil.size());
  const CVec base = fft(pupil).cwiseProduct(kernel_twiddle(n));
  CVec g(2 * n - 1);
  for (int m = 0; m < n; ++m) g[m + n - 1] = base[m];
  for (int m = 1; m < n; ++m) g[m - 1] = wrap_sign(n) * base[m];
  return g;
}

CImage kernel_2d(const CImage& pupil) {
  const int n = static_cast<int>(pupil.rows());
  CImage base = pupil;
  fft2_inplace(base, false);
  const CVec w = kernel_twiddle(n);
  base.colwise() *= w.array();
  base.rowwise() *= w.array().transpose();
  const double s = wrap_sign(n);
  CImage g(2 * n - 1, 2 * n - 1);
  auto axis = [n](int m, int& src) {
    src = m >= 0 ? m : m + n;
    return m >= 0 ? 0 : 1;
  };
  for (int my = -(n - 1); my < n; ++my)
    for (int mx = -(n - 1); mx < n; ++mx) {
      int sy = 0, sx = 0;
      const int flips = axis(my, sy) + axis(mx, sx);
      g(my + n - 1, mx + n - 1) = (flips % 2 == 1 ? s : 1.0) * base(sy, sx);
    }
  return g;
}

void require_square(const Image& a, const char* what) {
  if (a.rows() != a.cols()) throw ArgumentError(std::string(what) + ": square grid required");
}

}  // namespace

void Grid::validate() const {
  if (dim != 1 && dim != 2) throw ArgumentError("Grid: dim must be 1 or 2");
  if (size < 8) throw ArgumentError("Grid: size must be >= 8");
  if (dim == 1 && size % 2 == 0) throw ArgumentError("Grid: 1D size must be odd");
  if (!(pitch > 0.0)) throw ArgumentError("Grid: pitch must be positive");
}

TransferOperator1d build_transfer_1d(const CVec& pupil) {
  if (pupil.size() < 1 || !pupil.allFinite()) throw ArgumentError("build_transfer_1d: finite pupil required");
  return {pupil, kernel_1d(pupil)};
}

TransferOperator1d build_transfer_1d(const Vec& pupil_phase) {
  if (!pupil_phase.allFinite()) throw ArgumentError("build_transfer_1d: pupil phase must be finite");
  CVec d(pupil_phase.size());
  for (Eigen::Index k = 0; k < d.size(); ++k) d[k] = std::polar(1.0, pupil_phase[k]);
  return build_transfer_1d(d);
}

TransferOperator2d build_transfer_2d(const CImage& pupil) {
  if (pupil.rows() != pupil.cols() || !pupil.allFinite())
    throw ArgumentError("build_transfer_2d: finite square pupil required");
  return {pupil, kernel_2d(pupil)};
}

TransferOperator2d build_transfer_2d(const Image& pupil_phase) {
  require_square(pupil_phase, "build_transfer_2d");
  if (!pupil_phase.allFinite()) throw ArgumentError("build_transfer_2d: pupil phase must be finite");
  CImage d(pupil_phase.rows(), pupil_phase.cols());
  for (Eigen::Index j = 0; j < d.cols(); ++j)
    for (Eigen::Index i = 0; i < d.rows(); ++i) d(i, j) = std::polar(1.0, pupil_phase(i, j));
  return build_transfer_2d(d);
}

CMat transfer_matrix(const TransferOperator1d& op) {
  const int n = op.size();
  CMat t(n, n);
  for (int p = 0; p < n; ++p)
    for (int i = 0; i < n; ++i) t(p, i) = op.kernel[p + i];
  return t;
}

CMat transfer_matrix(const TransferOperator2d& op) {
  const int n = op.size();
  if (n > 32) throw CapacityError("transfer_matrix: dense 2D operator limited to 32x32 grids");
  const int np = n * n;
  CMat t(np, np);
  for (int py = 0; py < n; ++py)
    for (int px = 0; px < n; ++px)
      for (int iy = 0; iy < n; ++iy)
        for (int ix = 0; ix < n; ++ix)
          t(pixel_index(py, px, n), pixel_index(iy, ix, n)) = op.kernel(py + iy, px + ix);
  return t;
}

CVec apply(const TransferOperator1d& op, const CVec& field) {
  if (field.size() != op.size()) throw ArgumentError("apply: field size mismatch");
  return centered_dft(op.pupil.cwiseProduct(centered_dft(field)));
}

CImage apply(const TransferOperator2d& op, const CImage& field) {
  if (field.rows() != op.size() || field.cols() != op.size()) throw ArgumentError("apply: field size mismatch");
  return centered_dft2(op.pupil * centered_dft2(field));
}

int center_pixel(int size) { return size / 2; }

CVec psf_of(const TransferOperator1d& op) {
  const int n = op.size();
  return op.kernel.segment(center_pixel(n), n);
}

CImage psf_of(const TransferOperator2d& op) {
  const int n = op.size();
  const int c = center_pixel(n);
  return op.kernel.block(c, c, n, n);
}

Vec correlated_phase_screen(double f_ab, std::uint64_t seed, int size) {
  if (!(f_ab >= 0.0)) throw ArgumentError("correlated_phase_screen: f_ab must be >= 0");
  if (f_ab == 0.0) return Vec::Zero(size);
  const int len = kScreenOversample1d * size;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  CVec noise(len);
  for (int k = 0; k < len; ++k) noise[k] = std::polar(1.0, 2.0 * std::numbers::pi * unit(rng));
  CVec spectrum = fft(noise);
  const double cutoff = kScreenCutoff * f_ab + 1e-12;
  for (int k = 0; k < len; ++k) {
    const int freq = k <= len / 2 ? k : k - len;
    if (std::abs(static_cast<double>(freq) / kScreenOversample1d) > cutoff) spectrum[k] = 0.0;
  }
  const CVec filtered = ifft(spectrum);
  Vec phase(size);
  for (int i = 0; i < size; ++i) phase[i] = std::arg(filtered[i]);
  return phase;
}

Image correlated_phase_screen_2d(double f_ab, std::uint64_t seed, int size, double aperture_radius) {
  if (!(f_ab >= 0.0)) throw ArgumentError("correlated_phase_screen_2d: f_ab must be >= 0");
  const Mask inside = aperture_mask(size, aperture_radius);
  if (f_ab == 0.0) return Image::Zero(size, size);
  const int len = kScreenOversample2d * size;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  CImage field(len, len);
  for (int y = 0; y < len; ++y)
    for (int x = 0; x < len; ++x) field(y, x) = std::polar(1.0, 2.0 * std::numbers::pi * unit(rng));
  fft2_inplace(field, false);
  // Frequency index k maps to k / len cycles per sample, i.e. k * 2R / len cycles per aperture.
  const double per_aperture = 2.0 * aperture_radius / len;
  const double cutoff = kScreenCutoff * f_ab + 1e-12;
  for (int y = 0; y < len; ++y)
    for (int x = 0; x < len; ++x) {
      const int fy = y <= len / 2 ? y : y - len;
      const int fx = x <= len / 2 ? x : x - len;
      if (std::hypot(fy * per_aperture, fx * per_aperture) > cutoff) field(y, x) = 0.0;
    }
  fft2_inplace(field, true);
  // Remove the circular-mean piston over the aperture: with no hard stop outside the disk a
  // piston offset would act as a phase step at the aperture edge.
  cdouble mean = 0.0;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      if (inside(y, x)) mean += field(y, x) / std::abs(field(y, x));
  const cdouble unpiston = std::abs(mean) > 0.0 ? std::conj(mean) / std::abs(mean) : cdouble(1.0);
  Image phase = Image::Zero(size, size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      if (inside(y, x)) phase(y, x) = std::arg(field(y, x) * unpiston);
  return phase;
}

Vec defocus_phase(double alpha, int size) {
  const double c = 0.5 * (size - 1);
  const double radius = 0.5 * size;
  const ZernikeIndex defocus(2, 0);
  Vec phase(size);
  for (int i = 0; i < size; ++i) phase[i] = alpha * eval_zernike(defocus, std::abs(i - c) / radius, 0.0);
  return phase;
}

Image defocus_phase(double alpha, int size, double aperture_radius) {
  return alpha * zernike_mode_image(ZernikeIndex(2, 0), size, aperture_radius);
}

Vec intensity_image(const Vec& transmission, const TransferOperator1d& op) {
  if (transmission.size() != op.size()) throw ArgumentError("intensity_image: shape mismatch");
  const KernelCorrelator1d corr(transmission.cwiseAbs2().cast<cdouble>());
  return corr(op.kernel.cwiseAbs2().cast<cdouble>()).real();
}

Image intensity_image(const Image& transmission, const TransferOperator2d& op) {
  if (transmission.rows() != op.size() || transmission.cols() != op.size())
    throw ArgumentError("intensity_image: shape mismatch");
  const KernelCorrelator2d corr(transmission.abs2().cast<cdouble>());
  return corr(op.kernel.abs2().cast<cdouble>()).real();
}

Image depth_stack_intensity(const DepthObject& object, const Image& base_pupil, const Image& correction,
                            double aperture_radius) {
  if (object.slices.empty()) throw ArgumentError("depth_stack_intensity: at least one slice required");
  const int n = static_cast<int>(base_pupil.rows());
  Image total = Image::Zero(n, n);
  for (const auto& slice : object.slices) {
    const Image pupil = base_pupil + defocus_phase(slice.defocus, n, aperture_radius) + correction;
    total += intensity_image(slice.transmission, build_transfer_2d(pupil));
  }
  return total;
}

Vec rect_envelope(int size, double width) {
  if (!(width > 0.0)) throw ArgumentError("rect_envelope: width must be positive");
  const double c = 0.5 * (size - 1);
  Vec a(size);
  for (int i = 0; i < size; ++i) a[i] = std::abs(i - c) < 0.5 * width ? 1.0 : 0.0;
  if (a.sum() == 0.0) a[center_pixel(size)] = 1.0;
  return a / a.norm();
}

Image rect_envelope_2d(int size, double width) {
  const Vec line = rect_envelope(size, width);
  return (line * line.transpose()).array();
}

Vec uniform_envelope(int size) { return Vec::Constant(size, 1.0 / std::sqrt(static_cast<double>(size))); }

Image uniform_envelope_2d(int size) { return Image::Constant(size, size, 1.0 / size); }

CVec gaussian_apodized_pupil(int size, double sigma) {
  if (!(sigma > 0.0)) throw DomainError("gaussian_apodized_pupil: sigma must be positive");
  const double c = 0.5 * (size - 1);
  CVec d(size);
  for (int k = 0; k < size; ++k) {
    const double f = (k - c) / size;
    d[k] = std::exp(-2.0 * std::numbers::pi * sigma * sigma * f * f);
  }
  return d * std::sqrt(size / d.squaredNorm());
}

double gaussian_c0_analytic(double sigma, double a) {
  if (!(sigma > 0.0)) throw DomainError("gaussian_c0_analytic: sigma must be positive");
  if (!(a > 0.0)) throw DomainError("gaussian_c0_analytic: a must be positive");
  return 2.0 * a * a / (sigma * sigma);
}

}  // namespace qao
