#pragma once

#include "qao/types.hpp"

#include <functional>

namespace qao {

// Smallest size >= n of the form 2^a 3^b 5^c (fast for the mixed-radix backend).
int fast_size(int n);

// Plain (non-centered) transforms. Forward is unnormalized; inverse carries 1/N.
CVec fft(const CVec& x);
CVec ifft(const CVec& x);
void fft2_inplace(CImage& x, bool inverse);

// Zero-padded forward FFT of x to length n.
CVec fft_padded(const CVec& x, int n);
CImage fft2_padded(const CImage& x, int rows, int cols);

// Centered unitary DFT: (F x)_j = N^{-1/2} sum_k x_k exp(-2 pi i (j-c)(k-c)/N), c = (N-1)/2.
// F^2 is the mirror i -> N-1-i and F^4 = I.
CVec centered_dft(const CVec& x);
CImage centered_dft2(const CImage& x);
CMat centered_dft_matrix(int n);

// Evaluates out(p) = sum_i w(i) K(p + i), p in [0, N), for kernels K spanning 2N-1 samples,
// as one zero-padded FFT convolution. The transform of w is computed once and reused.
class KernelCorrelator1d {
 public:
  explicit KernelCorrelator1d(const CVec& w);
  CVec operator()(const CVec& kernel) const;
  // Split form for reusing one kernel transform across several correlators of equal size.
  CVec kernel_spectrum(const CVec& kernel) const;
  CVec from_spectrum(const CVec& kernel_hat) const;
  int size() const { return n_; }

 private:
  int n_ = 0;
  int len_ = 0;
  CVec w_hat_;
};

// 2D analog on N x N arrays with (2N-1) x (2N-1) kernels, out(p) = sum_i w(i) K(p + i) per axis.
class KernelCorrelator2d {
 public:
  explicit KernelCorrelator2d(const CImage& w);
  CImage operator()(const CImage& kernel) const;
  int size() const { return n_; }

 private:
  int n_ = 0;
  int len_ = 0;
  CImage w_hat_;
};

// Run body(i) for i in [0, n). Each index must write only to its own output slot;
// results are then independent of the thread count.
void parallel_for(std::ptrdiff_t n, const std::function<void(std::ptrdiff_t)>& body);
int worker_count();

}  // namespace qao
