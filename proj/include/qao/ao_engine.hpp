#pragma once

#include "qao/acquisition.hpp"
#include "qao/metrics.hpp"
#include "qao/optics.hpp"
#include "qao/types.hpp"
#include "qao/zernike.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace qao {

enum class MeasurementMode { Exact, Frames };

struct MeasurementConfig {
  MeasurementMode mode = MeasurementMode::Exact;
  DetectorConfig detector;
  long frames_per_point = 10000;
  int bin = 1;  // c0_peak macropixel half-width
  std::uint64_t seed = 1;
};

// Total pupil phase is aberration + correction. The object is `object` unless `depth` is set.
struct SystemState {
  int size = 64;
  double aperture_radius = 32.0;
  Image object;
  std::optional<DepthObject> depth;
  Image envelope;
  Image aberration;
  Image correction;
  MeasurementConfig measurement;
  std::uint64_t evaluations = 0;  // draws consumed in frame-sampled mode; advances the per-point seeds
};

// Unit transmission, uniform illumination, no aberration, exact measurement.
SystemState make_state(int size, double aperture_radius);

struct BiasScan {
  ZernikeIndex mode;
  std::vector<double> biases;
  std::vector<double> responses;
  MetricKind feedback = MetricKind::QAO_C0;
  bool flagged = false;
  std::string flag_reason;
};

// response(alpha) = beta + amplitude exp(-(alpha - alpha_corr)^2 / sigma^2) on min-max rescaled data.
struct GaussianFit {
  double beta = 0.0;
  double amplitude = 0.0;
  double sigma = 1.0;
  double alpha_corr = 0.0;
  double residual = 0.0;  // RMS on the rescaled data
};

// Non-convergence; carries the best grid-search fit.
struct FitError : std::runtime_error {
  FitError(const std::string& what, GaussianFit best) : std::runtime_error(what), fallback(best) {}
  GaussianFit fallback;
};

struct ModeStep {
  int iteration = 0;
  BiasScan scan;
  std::optional<GaussianFit> fit;
  double applied = 0.0;  // coefficient added to the correction
  std::string status;    // "applied", "best-bias", or "skipped: <reason>"
};

struct CorrectionState {
  ZernikeExpansion cumulative;
  std::vector<ModeStep> history;
  int iterations = 0;
};

// Rescaled-data RMS above which a single-Gaussian fit is not trusted (e.g. two-lobed responses).
inline constexpr double kMaxFitResidual = 0.12;

std::vector<double> linspace(double lo, double hi, int count);

// Feedback for the current state with `extra` added to the pupil phase.
double evaluate_feedback(SystemState& state, MetricKind kind, const Image& extra);

BiasScan scan_mode(SystemState& state, const ZernikeIndex& mode, const std::vector<double>& biases, MetricKind kind);
GaussianFit fit_peak(const BiasScan& scan);

// The contiguous run of scan points around the maximum whose min-max rescaled response is >= level,
// widened to at least min_points. Isolates the main lobe when the response has secondary peaks.
BiasScan main_lobe(const BiasScan& scan, double level = 0.5, int min_points = 5);

CorrectionState modal_optimize(SystemState& state, const std::vector<ZernikeIndex>& modes,
                               const std::vector<double>& biases, int iterations,
                               MetricKind kind = MetricKind::QAO_C0,
                               const std::function<void(const ModeStep&)>& on_step = {});

// Each metric's defocus scan is fitted on its main lobe.
struct DefocusRow {
  MetricKind metric = MetricKind::QAO_C0;
  double alpha_corr = 0.0;
  bool fit_converged = true;
  BiasScan scan;
};

std::vector<DefocusRow> defocus_comparison(SystemState& state, const std::vector<double>& alpha_range,
                                           const std::vector<MetricKind>& metrics);

// RMS over the aperture after removing the mean (piston).
double residual_rms(const Image& phase, double aperture_radius);

}  // namespace qao
