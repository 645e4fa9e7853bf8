#include "qao/biphoton.hpp"

#include "qao/fft.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace qao {

namespace {

void require_dense_2d(int n) {
  if (n > kMaxDense2d)
    throw CapacityError("dense two-photon field limited to " + std::to_string(kMaxDense2d) + "x" +
                        std::to_string(kMaxDense2d) + " grids; use sum_projection_direct");
}

// Pixel (y, x) of a flattened index on an N x N grid; 1D uses y = 0 and width N.
struct Pixel {
  Eigen::Index y, x;
};

Pixel unflatten(Eigen::Index idx, int dim, int n) {
  return dim == 1 ? Pixel{0, idx} : Pixel{idx / n, idx % n};
}

// Shift kernel k_s(a) = g(a) g(s - a) for a in [-(N-1), N-1]; zero where s - a leaves the range.
CVec shift_kernel(const CVec& g, int n, int s) {
  CVec k = CVec::Zero(2 * n - 1);
  for (int a = std::max(-(n - 1), s - (n - 1)); a <= std::min(n - 1, s + (n - 1)); ++a)
    k[a + n - 1] = g[a + n - 1] * g[s - a + n - 1];
  return k;
}

CImage shift_kernel(const CImage& g, int n, int sy, int sx) {
  CImage k = CImage::Zero(2 * n - 1, 2 * n - 1);
  const int ay0 = std::max(-(n - 1), sy - (n - 1)), ay1 = std::min(n - 1, sy + (n - 1));
  const int ax0 = std::max(-(n - 1), sx - (n - 1)), ax1 = std::min(n - 1, sx + (n - 1));
  for (int ax = ax0; ax <= ax1; ++ax)
    for (int ay = ay0; ay <= ay1; ++ay)
      k(ay + n - 1, ax + n - 1) = g(ay + n - 1, ax + n - 1) * g(sy - ay + n - 1, sx - ax + n - 1);
  return k;
}

// Output pixels p whose partner s + N - 1 - p stays on the grid.
std::pair<int, int> valid_range(int n, int s) { return {std::max(0, s), std::min(n - 1, s + n - 1)}; }

double projected_power(const CVec& phi, int n, int s) {
  const auto [lo, hi] = valid_range(n, s);
  return phi.segment(lo, hi - lo + 1).squaredNorm();
}

double projected_power(const CImage& phi, int n, int sy, int sx) {
  const auto [y0, y1] = valid_range(n, sy);
  const auto [x0, x1] = valid_range(n, sx);
  return phi.block(y0, x0, y1 - y0 + 1, x1 - x0 + 1).abs2().sum();
}

// The envelope is normalized exactly as in ideal_input so both paths share one scale.
Vec pair_weights(const Vec& t, const Vec& a) {
  const double norm = a.norm();
  if (norm == 0.0) throw ArgumentError("sum_projection_direct: envelope must be nonzero");
  return (a / norm).cwiseProduct(t).cwiseProduct(t.reverse());
}

Image pair_weights(const Image& t, const Image& a) {
  const double norm = std::sqrt(a.abs2().sum());
  if (norm == 0.0) throw ArgumentError("sum_projection_direct: envelope must be nonzero");
  return (a / norm) * t * t.reverse();
}

int window_extent(int n, int window) { return window < 0 ? n - 1 : std::min(window, n - 1); }

void check_shapes(const Vec& t, const Vec& a, int n) {
  if (t.size() != n || a.size() != n) throw ArgumentError("sum_projection_direct: shape mismatch");
}

void check_shapes(const Image& t, const Image& a, int n) {
  if (t.rows() != n || t.cols() != n || a.rows() != n || a.cols() != n)
    throw ArgumentError("sum_projection_direct: shape mismatch");
}

}  // namespace

TwoPhotonField ideal_input(const Vec& envelope) {
  const auto n = envelope.size();
  const double norm = envelope.norm();
  if (norm == 0.0) throw ArgumentError("ideal_input: envelope must be nonzero");
  TwoPhotonField f{1, static_cast<int>(n), CMat::Zero(n, n)};
  for (Eigen::Index i = 0; i < n; ++i) f.phi(i, mirror_index(i, n)) = envelope[i] / norm;
  return f;
}

TwoPhotonField ideal_input(const Image& envelope) {
  const int n = static_cast<int>(envelope.rows());
  if (envelope.cols() != n) throw ArgumentError("ideal_input: square envelope required");
  require_dense_2d(n);
  const double norm = std::sqrt(envelope.abs2().sum());
  if (norm == 0.0) throw ArgumentError("ideal_input: envelope must be nonzero");
  const Eigen::Index np = static_cast<Eigen::Index>(n) * n;
  TwoPhotonField f{2, n, CMat::Zero(np, np)};
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x)
      f.phi(pixel_index(y, x, n), pixel_index(mirror_index(y, n), mirror_index(x, n), n)) = envelope(y, x) / norm;
  return f;
}

TwoPhotonField propagate_pair(const TwoPhotonField& input, const Vec& transmission, const TransferOperator1d& op) {
  if (input.dim != 1 || input.size != op.size() || transmission.size() != op.size())
    throw ArgumentError("propagate_pair: shapes inconsistent");
  const CMat t = transfer_matrix(op);
  const auto d = transmission.cast<cdouble>().asDiagonal();
  CMat out = t * (d * input.phi * d) * t.transpose();
  return {1, input.size, std::move(out)};
}

TwoPhotonField propagate_pair(const TwoPhotonField& input, const Image& transmission, const TransferOperator2d& op) {
  const int n = op.size();
  require_dense_2d(n);
  if (input.dim != 2 || input.size != n || transmission.rows() != n || transmission.cols() != n)
    throw ArgumentError("propagate_pair: shapes inconsistent");
  const CMat t = transfer_matrix(op);
  CVec flat(static_cast<Eigen::Index>(n) * n);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) flat[pixel_index(y, x, n)] = transmission(y, x);
  const auto d = flat.asDiagonal();
  CMat out = t * (d * input.phi * d) * t.transpose();
  return {2, n, std::move(out)};
}

CorrelationTensor g2_of(const TwoPhotonField& field) { return {field.dim, field.size, field.phi.cwiseAbs2()}; }

SumProjection sum_projection(const CorrelationTensor& g2) {
  const int n = g2.size;
  const int span = 2 * n - 1;
  SumProjection out{g2.dim, n, Image::Zero(span, g2.dim == 1 ? 1 : span)};
  const Eigen::Index np = g2.values.rows();
  for (Eigen::Index j = 0; j < np; ++j) {
    const Pixel b = unflatten(j, g2.dim, n);
    for (Eigen::Index i = 0; i < np; ++i) {
      const Pixel a = unflatten(i, g2.dim, n);
      if (g2.dim == 1)
        out.values(a.x + b.x, 0) += g2.values(i, j);
      else
        out.values(a.y + b.y, a.x + b.x) += g2.values(i, j);
    }
  }
  return out;
}

std::vector<SumProjection> sum_projection_direct(const std::vector<Vec>& transmissions, const TransferOperator1d& op,
                                                 const Vec& envelope, int window) {
  const int n = op.size();
  std::vector<KernelCorrelator1d> correlators;
  correlators.reserve(transmissions.size());
  for (const auto& t : transmissions) {
    check_shapes(t, envelope, n);
    correlators.emplace_back(pair_weights(t, envelope).cast<cdouble>());
  }
  const int extent = window_extent(n, window);
  std::vector<SumProjection> out(transmissions.size(), SumProjection{1, n, Image::Zero(2 * n - 1, 1)});
  parallel_for(2 * extent + 1, [&](std::ptrdiff_t k) {
    const int s = static_cast<int>(k) - extent;
    if (correlators.empty()) return;
    const CVec kernel_hat = correlators.front().kernel_spectrum(shift_kernel(op.kernel, n, s));
    for (std::size_t o = 0; o < correlators.size(); ++o)
      out[o].values(s + n - 1, 0) = projected_power(correlators[o].from_spectrum(kernel_hat), n, s);
  });
  return out;
}

SumProjection sum_projection_direct(const Vec& transmission, const TransferOperator1d& op, const Vec& envelope,
                                    int window) {
  return sum_projection_direct(std::vector<Vec>{transmission}, op, envelope, window).front();
}

SumProjection sum_projection_direct(const Image& transmission, const TransferOperator2d& op, const Image& envelope,
                                    int window) {
  const int n = op.size();
  check_shapes(transmission, envelope, n);
  const KernelCorrelator2d correlator(pair_weights(transmission, envelope).cast<cdouble>());
  const int extent = window_extent(n, window);
  const int side = 2 * extent + 1;
  SumProjection out{2, n, Image::Zero(2 * n - 1, 2 * n - 1)};
  parallel_for(static_cast<std::ptrdiff_t>(side) * side, [&](std::ptrdiff_t k) {
    const int sy = static_cast<int>(k / side) - extent;
    const int sx = static_cast<int>(k % side) - extent;
    const CImage phi = correlator(shift_kernel(op.kernel, n, sy, sx));
    out.values(sy + n - 1, sx + n - 1) = projected_power(phi, n, sy, sx);
  });
  return out;
}

double c0_peak(const SumProjection& projection, int bin) {
  if (bin < 0) throw ArgumentError("c0_peak: bin must be >= 0");
  const int c = projection.center_index();
  const auto rows = projection.values.rows();
  if (c - bin < 0 || c + bin >= rows) throw ArgumentError("c0_peak: window exceeds projection");
  if (projection.dim == 1) return projection.values.col(0).segment(c - bin, 2 * bin + 1).sum();
  return projection.values.block(c - bin, c - bin, 2 * bin + 1, 2 * bin + 1).sum();
}

double c0_direct(const Vec& transmission, const TransferOperator1d& op, const Vec& envelope, int bin) {
  return c0_peak(sum_projection_direct(transmission, op, envelope, bin), bin);
}

double c0_direct(const Image& transmission, const TransferOperator2d& op, const Image& envelope, int bin) {
  return c0_peak(sum_projection_direct(transmission, op, envelope, bin), bin);
}

Image anti_correlation_image(const CorrelationTensor& g2, int half_window) {
  if (half_window < 0) throw ArgumentError("anti_correlation_image: half_window must be >= 0");
  const int n = g2.size;
  if (g2.dim == 1) {
    Image r = Image::Zero(n, 1);
    for (int i = 0; i < n; ++i)
      for (int k = -half_window; k <= half_window; ++k) {
        const int j = static_cast<int>(mirror_index(i, n)) + k;
        if (j >= 0 && j < n) r(i, 0) += g2.values(i, j);
      }
    return r;
  }
  Image r = Image::Zero(n, n);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x)
      for (int k = -half_window; k <= half_window; ++k)
        for (int l = -half_window; l <= half_window; ++l) {
          const int y2 = static_cast<int>(mirror_index(y, n)) + k;
          const int x2 = static_cast<int>(mirror_index(x, n)) + l;
          if (y2 >= 0 && y2 < n && x2 >= 0 && x2 < n)
            r(y, x) += g2.values(pixel_index(y, x, n), pixel_index(y2, x2, n));
        }
  return r;
}

Image conditional_image(const CorrelationTensor& g2, int y, int x) {
  const int n = g2.size;
  if (g2.dim == 1) {
    if (y != 0 || x < 0 || x >= n) throw ArgumentError("conditional_image: pixel out of range");
    return g2.values.col(x).array();
  }
  if (y < 0 || y >= n || x < 0 || x >= n) throw ArgumentError("conditional_image: pixel out of range");
  const Vec column = g2.values.col(pixel_index(y, x, n));
  Image out(n, n);
  for (int yy = 0; yy < n; ++yy)
    for (int xx = 0; xx < n; ++xx) out(yy, xx) = column[pixel_index(yy, xx, n)];
  return out;
}

double pearson(const Eigen::Ref<const Vec>& a, const Eigen::Ref<const Vec>& b) {
  if (a.size() != b.size() || a.size() < 2) throw ArgumentError("pearson: equal sizes >= 2 required");
  const Vec da = a.array() - a.mean();
  const Vec db = b.array() - b.mean();
  const double denom = da.norm() * db.norm();
  if (denom == 0.0) throw DomainError("projection_similarity: zero-variance input");
  return da.dot(db) / denom;
}

double projection_similarity(const SumProjection& a, const SumProjection& b) {
  if (a.values.rows() != b.values.rows() || a.values.cols() != b.values.cols())
    throw ArgumentError("projection_similarity: shape mismatch");
  const Eigen::Map<const Vec> fa(a.values.data(), a.values.size());
  const Eigen::Map<const Vec> fb(b.values.data(), b.values.size());
  return pearson(fa, fb);
}

}  // namespace qao
