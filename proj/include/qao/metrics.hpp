#pragma once

#include "qao/types.hpp"

#include <string>

namespace qao {

enum class MetricKind { PIB, Contrast, LowFreq, QAO_C0 };

std::string to_string(MetricKind kind);
MetricKind metric_from_string(const std::string& name);

// Circular region tau (inner radius 0) or annulus [r0, r1], both inclusive, in pixels.
struct RegionSpec {
  double center_y = 0.0;
  double center_x = 0.0;
  double r0 = 0.0;
  double r1 = 0.0;

  static RegionSpec disk(double cy, double cx, double r);
  static RegionSpec annulus(double cy, double cx, double r0, double r1);
  void validate() const;
  Mask mask(Eigen::Index rows, Eigen::Index cols) const;
};

// Reference radii are given at the 100 x 100 scale and scale linearly with the grid.
RegionSpec default_bucket(Eigen::Index rows, Eigen::Index cols);               // r = 50
RegionSpec default_frequency_annulus(Eigen::Index rows, Eigen::Index cols);    // r0 = 4, r1 = 10

// Single-window SSIM with C1 = 0.01 L, C2 = 0.03 L; squared_constants selects (0.01 L)^2, (0.03 L)^2.
double ssim(const Image& a, const Image& b, double dynamic_range, bool squared_constants = false);

double pib(const Image& image, const RegionSpec& region);
double contrast(const Image& image, const RegionSpec& region);
// Sum of |DFT(I)| over the annulus of the centered spectrum (zero frequency at (rows/2, cols/2)).
double low_frequencies(const Image& image, const RegionSpec& annulus);

// Classical metric with its default region; QAO_C0 is not an image metric.
double image_metric(MetricKind kind, const Image& image);

}  // namespace qao
