#include "qao/metrics.hpp"

#include "qao/fft.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace qao {

namespace {

constexpr double kReferenceSize = 100.0;

void require_same_shape(const Image& a, const Image& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ArgumentError("ssim: shape mismatch");
}

}  // namespace

std::string to_string(MetricKind kind) {
  switch (kind) {
    case MetricKind::PIB: return "pib";
    case MetricKind::Contrast: return "contrast";
    case MetricKind::LowFreq: return "lowfreq";
    case MetricKind::QAO_C0: return "qao";
  }
  return "unknown";
}

MetricKind metric_from_string(const std::string& name) {
  if (name == "pib") return MetricKind::PIB;
  if (name == "contrast") return MetricKind::Contrast;
  if (name == "lowfreq") return MetricKind::LowFreq;
  if (name == "qao") return MetricKind::QAO_C0;
  throw ArgumentError("unknown metric '" + name + "' (expected pib, contrast, lowfreq or qao)");
}

RegionSpec RegionSpec::disk(double cy, double cx, double r) { return annulus(cy, cx, 0.0, r); }

RegionSpec RegionSpec::annulus(double cy, double cx, double r0, double r1) {
  RegionSpec spec{cy, cx, r0, r1};
  spec.validate();
  return spec;
}

void RegionSpec::validate() const {
  if (r0 < 0.0 || r1 < 0.0 || r0 > r1) throw ArgumentError("RegionSpec: require 0 <= r0 <= r1");
}

Mask RegionSpec::mask(Eigen::Index rows, Eigen::Index cols) const {
  Mask m(rows, cols);
  for (Eigen::Index y = 0; y < rows; ++y)
    for (Eigen::Index x = 0; x < cols; ++x) {
      const double d2 = (y - center_y) * (y - center_y) + (x - center_x) * (x - center_x);
      m(y, x) = d2 >= r0 * r0 && d2 <= r1 * r1;
    }
  return m;
}

RegionSpec default_bucket(Eigen::Index rows, Eigen::Index cols) {
  const double scale = static_cast<double>(std::min(rows, cols)) / kReferenceSize;
  return RegionSpec::disk(static_cast<double>(rows / 2), static_cast<double>(cols / 2), 50.0 * scale);
}

RegionSpec default_frequency_annulus(Eigen::Index rows, Eigen::Index cols) {
  const double scale = static_cast<double>(std::min(rows, cols)) / kReferenceSize;
  return RegionSpec::annulus(static_cast<double>(rows / 2), static_cast<double>(cols / 2), 4.0 * scale,
                             10.0 * scale);
}

double ssim(const Image& a, const Image& b, double dynamic_range, bool squared_constants) {
  require_same_shape(a, b);
  if (!(dynamic_range > 0.0)) throw ArgumentError("ssim: dynamic range must be positive");
  const double c1 = squared_constants ? std::pow(0.01 * dynamic_range, 2) : 0.01 * dynamic_range;
  const double c2 = squared_constants ? std::pow(0.03 * dynamic_range, 2) : 0.03 * dynamic_range;
  const double n = static_cast<double>(a.size());
  const double mu_a = a.mean(), mu_b = b.mean();
  const double var_a = (a - mu_a).square().sum() / n;
  const double var_b = (b - mu_b).square().sum() / n;
  const double cov = ((a - mu_a) * (b - mu_b)).sum() / n;
  return ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
}

double pib(const Image& image, const RegionSpec& region) {
  return region.mask(image.rows(), image.cols()).select(image, 0.0).sum();
}

double contrast(const Image& image, const RegionSpec& region) {
  const Mask m = region.mask(image.rows(), image.cols());
  if (!m.any()) throw ArgumentError("contrast: region is empty");
  const double inf = std::numeric_limits<double>::infinity();
  return m.select(image, -inf).maxCoeff() - m.select(image, inf).minCoeff();
}

double low_frequencies(const Image& image, const RegionSpec& annulus) {
  CImage spectrum = image.cast<cdouble>();
  fft2_inplace(spectrum, false);
  const Eigen::Index rows = image.rows(), cols = image.cols();
  double total = 0.0;
  for (Eigen::Index y = 0; y < rows; ++y)
    for (Eigen::Index x = 0; x < cols; ++x) {
      // Centered coordinates (y, x) hold frequency (y - rows/2, x - cols/2).
      const double dy = y - annulus.center_y, dx = x - annulus.center_x;
      const double d2 = dy * dy + dx * dx;
      if (d2 < annulus.r0 * annulus.r0 || d2 > annulus.r1 * annulus.r1) continue;
      const Eigen::Index fy = ((y - rows / 2) % rows + rows) % rows;
      const Eigen::Index fx = ((x - cols / 2) % cols + cols) % cols;
      total += std::abs(spectrum(fy, fx));
    }
  return total;
}

double image_metric(MetricKind kind, const Image& image) {
  switch (kind) {
    case MetricKind::PIB: return pib(image, default_bucket(image.rows(), image.cols()));
    case MetricKind::Contrast: return contrast(image, default_bucket(image.rows(), image.cols()));
    case MetricKind::LowFreq: return low_frequencies(image, default_frequency_annulus(image.rows(), image.cols()));
    case MetricKind::QAO_C0: break;
  }
  throw ArgumentError("image_metric: QAO_C0 is evaluated from the sum-coordinate projection");
}

}  // namespace qao
