#include "qao/fft.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <exception>
#include <numbers>
#include <thread>
#include <vector>

namespace qao {

namespace {

// Eigen::FFT caches twiddles per size and is not thread-safe; one engine per thread.
Eigen::FFT<double>& engine() {
  thread_local Eigen::FFT<double> e;
  return e;
}

void transform(cdouble* data, Eigen::Index n, bool inverse, std::vector<cdouble>& scratch) {
  scratch.resize(static_cast<std::size_t>(n));
  if (inverse)
    engine().inv(scratch.data(), data, n);
  else
    engine().fwd(scratch.data(), data, n);
  std::copy(scratch.begin(), scratch.end(), data);
}

CVec twiddle(int n, double sign, double shift) {
  const double c = 0.5 * (n - 1);
  CVec w(n);
  for (int k = 0; k < n; ++k) w[k] = std::polar(1.0, sign * 2.0 * std::numbers::pi * (k * c + shift) / n);
  return w;
}

}  // namespace

int fast_size(int n) {
  if (n <= 1) return 1;
  for (int m = n;; ++m) {
    int r = m;
    for (int p : {2, 3, 5})
      while (r % p == 0) r /= p;
    if (r == 1) return m;
  }
}

CVec fft(const CVec& x) {
  CVec out(x.size());
  engine().fwd(out.data(), x.data(), x.size());
  return out;
}

CVec ifft(const CVec& x) {
  CVec out(x.size());
  engine().inv(out.data(), x.data(), x.size());
  return out;
}

CVec fft_padded(const CVec& x, int n) {
  CVec padded = CVec::Zero(n);
  padded.head(std::min<Eigen::Index>(n, x.size())) = x.head(std::min<Eigen::Index>(n, x.size()));
  return fft(padded);
}

void fft2_inplace(CImage& x, bool inverse) {
  std::vector<cdouble> scratch;
  // Columns are contiguous in Eigen's default storage.
  for (Eigen::Index j = 0; j < x.cols(); ++j) transform(&x(0, j), x.rows(), inverse, scratch);
  std::vector<cdouble> row(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) row[j] = x(i, j);
    transform(row.data(), x.cols(), inverse, scratch);
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = row[j];
  }
}

CImage fft2_padded(const CImage& x, int rows, int cols) {
  CImage padded = CImage::Zero(rows, cols);
  const auto r = std::min<Eigen::Index>(rows, x.rows());
  const auto c = std::min<Eigen::Index>(cols, x.cols());
  padded.topLeftCorner(r, c) = x.topLeftCorner(r, c);
  fft2_inplace(padded, false);
  return padded;
}

// With (j-c)(k-c) = jk - jc - kc + c^2 the centered DFT is a plain FFT between
// a pre-twiddle exp(+2 pi i k c / N) and a post-twiddle exp(+2 pi i j c / N - 2 pi i c^2 / N).
CVec centered_dft(const CVec& x) {
  const int n = static_cast<int>(x.size());
  const double c = 0.5 * (n - 1);
  const CVec pre = twiddle(n, +1.0, 0.0);
  const CVec post = twiddle(n, +1.0, -c * c) / std::sqrt(static_cast<double>(n));
  return post.cwiseProduct(fft(pre.cwiseProduct(x)));
}

CImage centered_dft2(const CImage& x) {
  const int ny = static_cast<int>(x.rows());
  const int nx = static_cast<int>(x.cols());
  const double cy = 0.5 * (ny - 1), cx = 0.5 * (nx - 1);
  const CVec pre_y = twiddle(ny, +1.0, 0.0), pre_x = twiddle(nx, +1.0, 0.0);
  const CVec post_y = twiddle(ny, +1.0, -cy * cy) / std::sqrt(static_cast<double>(ny));
  const CVec post_x = twiddle(nx, +1.0, -cx * cx) / std::sqrt(static_cast<double>(nx));
  CImage out = x;
  out.colwise() *= pre_y.array();
  out.rowwise() *= pre_x.array().transpose();
  fft2_inplace(out, false);
  out.colwise() *= post_y.array();
  out.rowwise() *= post_x.array().transpose();
  return out;
}

CMat centered_dft_matrix(int n) {
  const double c = 0.5 * (n - 1);
  CMat f(n, n);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k)
      f(j, k) = std::polar(1.0 / std::sqrt(static_cast<double>(n)), -2.0 * std::numbers::pi * (j - c) * (k - c) / n);
  return f;
}

// Reversing w turns the correlation into a convolution: with r(j) = w(N-1-j),
// out(p) = (r * K)(p + N - 1). The linear convolution has 3N-2 samples.
KernelCorrelator1d::KernelCorrelator1d(const CVec& w) : n_(static_cast<int>(w.size())), len_(fast_size(3 * n_ - 2)) {
  w_hat_ = fft_padded(w.reverse(), len_);
}

CVec KernelCorrelator1d::kernel_spectrum(const CVec& kernel) const {
  if (kernel.size() != 2 * n_ - 1) throw ArgumentError("KernelCorrelator1d: kernel must have 2N-1 samples");
  return fft_padded(kernel, len_);
}

CVec KernelCorrelator1d::from_spectrum(const CVec& kernel_hat) const {
  const CVec conv = ifft(kernel_hat.cwiseProduct(w_hat_));
  return conv.segment(n_ - 1, n_);
}

CVec KernelCorrelator1d::operator()(const CVec& kernel) const { return from_spectrum(kernel_spectrum(kernel)); }

KernelCorrelator2d::KernelCorrelator2d(const CImage& w) : n_(static_cast<int>(w.rows())), len_(fast_size(3 * n_ - 2)) {
  if (w.rows() != w.cols()) throw ArgumentError("KernelCorrelator2d: square input required");
  w_hat_ = fft2_padded(w.reverse(), len_, len_);
}

CImage KernelCorrelator2d::operator()(const CImage& kernel) const {
  if (kernel.rows() != 2 * n_ - 1 || kernel.cols() != 2 * n_ - 1)
    throw ArgumentError("KernelCorrelator2d: kernel must be (2N-1) x (2N-1)");
  CImage conv = fft2_padded(kernel, len_, len_) * w_hat_;
  fft2_inplace(conv, true);
  return conv.block(n_ - 1, n_ - 1, n_, n_);
}

int worker_count() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

namespace {
// Set inside pool threads so that nested parallel_for calls run serially.
thread_local bool in_parallel_region = false;
}  // namespace

void parallel_for(std::ptrdiff_t n, const std::function<void(std::ptrdiff_t)>& body) {
  const std::ptrdiff_t workers = in_parallel_region ? 1 : std::min<std::ptrdiff_t>(worker_count(), n);
  if (workers <= 1) {
    for (std::ptrdiff_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (std::ptrdiff_t w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        in_parallel_region = true;
        try {
          for (std::ptrdiff_t i = w; i < n; i += workers) body(i);
        } catch (...) {
          errors[static_cast<std::size_t>(w)] = std::current_exception();
        }
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace qao
