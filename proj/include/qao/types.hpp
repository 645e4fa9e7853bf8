#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace qao {

// Dense types are templated on the scalar; the library itself is compiled for double.
template <typename Scalar>
using Complex = std::complex<Scalar>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using ArrayXX = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using cdouble = Complex<double>;
using Vec = VectorX<double>;
using CVec = VectorX<cdouble>;
using Mat = MatrixX<double>;
using CMat = MatrixX<cdouble>;
// 2D images are indexed (row, col) = (y, x). Flattened pixel index is y * width + x,
// independent of Eigen's storage order.
using Image = ArrayXX<double>;
using CImage = ArrayXX<cdouble>;
using Mask = ArrayXX<bool>;

inline Eigen::Index pixel_index(Eigen::Index y, Eigen::Index x, Eigen::Index width) { return y * width + x; }

struct ArgumentError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// Raised when a dense path would exceed the desk-scale memory cap.
struct CapacityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace qao
