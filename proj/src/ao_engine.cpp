#include "qao/ao_engine.hpp"

#include "qao/biphoton.hpp"
#include "qao/fft.hpp"

#include <unsupported/Eigen/LevenbergMarquardt>

#include <algorithm>
#include <cmath>
#include <limits>

namespace qao {

namespace {

// Parameter bounds on rescaled data, relative to the scanned bias range.
struct FitBounds {
  Eigen::Vector4d lo, hi;  // beta, amplitude, alpha_corr, sigma

  explicit FitBounds(double bias_lo, double bias_hi) {
    const double span = bias_hi - bias_lo;
    lo << -1.0, 0.0, bias_lo, 1e-3 * span;
    hi << 1.0, 2.0, bias_hi, 4.0 * span;
  }

  // Sine transform: p = lo + (hi - lo)(1 + sin u)/2 keeps p inside [lo, hi] for any u.
  Eigen::Vector4d to_params(const Eigen::VectorXd& u) const {
    Eigen::Vector4d p;
    for (int k = 0; k < 4; ++k) p[k] = lo[k] + (hi[k] - lo[k]) * 0.5 * (1.0 + std::sin(u[k]));
    return p;
  }

  Eigen::VectorXd to_internal(const Eigen::Vector4d& p) const {
    Eigen::VectorXd u(4);
    for (int k = 0; k < 4; ++k) {
      const double frac = std::clamp((p[k] - lo[k]) / (hi[k] - lo[k]), 1e-6, 1.0 - 1e-6);
      u[k] = std::asin(2.0 * frac - 1.0);
    }
    return u;
  }

  double dparam(const Eigen::VectorXd& u, int k) const { return (hi[k] - lo[k]) * 0.5 * std::cos(u[k]); }
};

double gaussian(const Eigen::Vector4d& p, double a) {
  const double d = (a - p[2]) / p[3];
  return p[0] + p[1] * std::exp(-d * d);
}

// Residuals padded with zero rows so that the solver always sees at least as many values as inputs.
struct GaussianFunctor : Eigen::DenseFunctor<double> {
  GaussianFunctor(const Eigen::VectorXd& a, const Eigen::VectorXd& r, const FitBounds& b)
      : Eigen::DenseFunctor<double>(4, static_cast<int>(std::max<Eigen::Index>(a.size(), 4))),
        alpha(a), response(r), bounds(b) {}

  int operator()(const InputType& u, ValueType& f) const {
    const Eigen::Vector4d p = bounds.to_params(u);
    f.setZero(values());
    for (Eigen::Index i = 0; i < alpha.size(); ++i) f[i] = gaussian(p, alpha[i]) - response[i];
    return 0;
  }

  int df(const InputType& u, JacobianType& j) const {
    const Eigen::Vector4d p = bounds.to_params(u);
    j.setZero(values(), 4);
    for (Eigen::Index i = 0; i < alpha.size(); ++i) {
      const double d = (alpha[i] - p[2]) / p[3];
      const double e = std::exp(-d * d);
      j(i, 0) = 1.0;
      j(i, 1) = e;
      j(i, 2) = p[1] * e * 2.0 * d / p[3];
      j(i, 3) = p[1] * e * 2.0 * d * d / p[3];
    }
    for (int k = 0; k < 4; ++k) j.col(k) *= bounds.dparam(u, k);
    return 0;
  }

  Eigen::VectorXd alpha, response;
  FitBounds bounds;
};

double rms_residual(const Eigen::Vector4d& p, const Eigen::VectorXd& a, const Eigen::VectorXd& r) {
  double sse = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) sse += std::pow(gaussian(p, a[i]) - r[i], 2);
  return std::sqrt(sse / static_cast<double>(a.size()));
}

GaussianFit to_fit(const Eigen::Vector4d& p, const Eigen::VectorXd& a, const Eigen::VectorXd& r) {
  return {p[0], p[1], p[3], p[2], rms_residual(p, a, r)};
}

// Exhaustive search over centre and width; baseline and amplitude by linear least squares.
Eigen::Vector4d grid_search(const Eigen::VectorXd& a, const Eigen::VectorXd& r, const FitBounds& b) {
  Eigen::Vector4d best(0.0, 1.0, a[0], 1.0);
  double best_err = std::numeric_limits<double>::infinity();
  constexpr int kCentres = 201, kWidths = 60;
  for (int ic = 0; ic < kCentres; ++ic) {
    const double centre = b.lo[2] + (b.hi[2] - b.lo[2]) * ic / (kCentres - 1);
    for (int iw = 0; iw < kWidths; ++iw) {
      const double width = b.lo[3] * std::pow(b.hi[3] / b.lo[3], static_cast<double>(iw) / (kWidths - 1));
      Eigen::MatrixXd design(a.size(), 2);
      for (Eigen::Index i = 0; i < a.size(); ++i) {
        const double d = (a[i] - centre) / width;
        design(i, 0) = 1.0;
        design(i, 1) = std::exp(-d * d);
      }
      Eigen::Vector2d coef = design.colPivHouseholderQr().solve(r);
      coef[0] = std::clamp(coef[0], b.lo[0], b.hi[0]);
      coef[1] = std::clamp(coef[1], b.lo[1], b.hi[1]);
      const Eigen::Vector4d p(coef[0], coef[1], centre, width);
      const double err = rms_residual(p, a, r);
      if (err < best_err) {
        best_err = err;
        best = p;
      }
    }
  }
  return best;
}

bool converged(Eigen::LevenbergMarquardtSpace::Status status) {
  using namespace Eigen::LevenbergMarquardtSpace;
  return status != ImproperInputParameters && status != TooManyFunctionEvaluation;
}

std::optional<Eigen::Vector4d> run_lm(const GaussianFunctor& functor, const Eigen::Vector4d& start) {
  Eigen::VectorXd u = functor.bounds.to_internal(start);
  GaussianFunctor f = functor;
  Eigen::LevenbergMarquardt<GaussianFunctor> lm(f);
  lm.setMaxfev(2000);
  lm.setXtol(1e-14);
  lm.setFtol(1e-14);
  const auto status = lm.minimize(u);
  if (!converged(status) || !u.allFinite()) return std::nullopt;
  return functor.bounds.to_params(u);
}

Image mode_phase(const SystemState& state, const ZernikeIndex& mode) {
  return zernike_mode_image(mode, state.size, state.aperture_radius);
}

double qao_exact(const SystemState& state, const TransferOperator2d& op) {
  const int bin = state.measurement.bin;
  if (!state.depth) return c0_direct(state.object, op, state.envelope, bin);
  // The pair-correlation plane is fixed: slice defocus does not enter C+.
  double total = 0.0;
  for (const auto& slice : state.depth->slices) total += c0_direct(slice.transmission, op, state.envelope, bin);
  return total;
}

double qao_frames(const SystemState& state, const TransferOperator2d& op, std::uint64_t seed) {
  const TwoPhotonField input = ideal_input(state.envelope);
  CorrelationTensor g2;
  if (!state.depth) {
    g2 = g2_of(propagate_pair(input, state.object, op));
  } else {
    for (const auto& slice : state.depth->slices) {
      CorrelationTensor part = g2_of(propagate_pair(input, slice.transmission, op));
      if (g2.values.size() == 0)
        g2 = std::move(part);
      else
        g2.values += part.values;
    }
  }
  DetectorConfig cfg = state.measurement.detector;
  cfg.frames = state.measurement.frames_per_point;
  const CorrelationEstimate est = estimate_g2(sample_frames(g2, cfg, seed), 2);
  return c0_peak(sum_projection(est.gamma), state.measurement.bin);
}

double feedback_value(const SystemState& state, MetricKind kind, const Image& extra, std::uint64_t seed) {
  const Image total = state.aberration + state.correction + extra;
  if (kind == MetricKind::QAO_C0) {
    const TransferOperator2d op = build_transfer_2d(total);
    return state.measurement.mode == MeasurementMode::Exact ? qao_exact(state, op) : qao_frames(state, op, seed);
  }
  if (state.depth)
    return image_metric(kind, depth_stack_intensity(*state.depth, state.aberration, state.correction + extra,
                                                    state.aperture_radius));
  return image_metric(kind, intensity_image(state.object, build_transfer_2d(total)));
}

std::uint64_t next_seed(SystemState& state) {
  return state.measurement.seed * 0x9E3779B97F4A7C15ULL + 1000003ULL * ++state.evaluations;
}

bool strictly_increasing(const std::vector<double>& v) {
  return std::adjacent_find(v.begin(), v.end(), std::greater_equal<>()) == v.end();
}

}  // namespace

SystemState make_state(int size, double aperture_radius) {
  SystemState s;
  s.size = size;
  s.aperture_radius = aperture_radius;
  s.object = Image::Ones(size, size);
  s.envelope = uniform_envelope_2d(size);
  s.aberration = Image::Zero(size, size);
  s.correction = Image::Zero(size, size);
  return s;
}

std::vector<double> linspace(double lo, double hi, int count) {
  if (count < 2) throw ArgumentError("linspace: count must be >= 2");
  std::vector<double> v(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) v[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (count - 1);
  return v;
}

double evaluate_feedback(SystemState& state, MetricKind kind, const Image& extra) {
  return feedback_value(state, kind, extra, next_seed(state));
}

BiasScan scan_mode(SystemState& state, const ZernikeIndex& mode, const std::vector<double>& biases, MetricKind kind) {
  if (biases.size() < 3) throw ArgumentError("scan_mode: at least 3 biases required");
  if (!strictly_increasing(biases)) throw ArgumentError("scan_mode: biases must be strictly increasing");
  BiasScan scan{mode, biases, std::vector<double>(biases.size()), kind, false, {}};
  const Image shape = mode_phase(state, mode);
  std::vector<std::uint64_t> seeds(biases.size());
  for (auto& s : seeds) s = next_seed(state);
  // The state is only read while bias points are evaluated, so the correction is untouched.
  const SystemState& frozen = state;
  parallel_for(static_cast<std::ptrdiff_t>(biases.size()), [&](std::ptrdiff_t i) {
    const auto k = static_cast<std::size_t>(i);
    scan.responses[k] = feedback_value(frozen, kind, biases[k] * shape, seeds[k]);
  });
  const auto [lo, hi] = std::minmax_element(scan.responses.begin(), scan.responses.end());
  if (!std::isfinite(*lo) || !std::isfinite(*hi)) {
    scan.flagged = true;
    scan.flag_reason = "non-finite feedback";
  } else if (*hi - *lo <= 1e-12 * std::max(std::abs(*hi), 1e-300)) {
    scan.flagged = true;
    scan.flag_reason = "degenerate feedback";
  }
  return scan;
}

GaussianFit fit_peak(const BiasScan& scan) {
  const auto n = static_cast<Eigen::Index>(scan.biases.size());
  if (n < 3 || static_cast<Eigen::Index>(scan.responses.size()) != n)
    throw ArgumentError("fit_peak: at least 3 matching points required");
  const Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(scan.biases.data(), n);
  Eigen::VectorXd r = Eigen::Map<const Eigen::VectorXd>(scan.responses.data(), n);
  const double rmin = r.minCoeff(), rmax = r.maxCoeff();
  Eigen::Index arg = 0;
  r.maxCoeff(&arg);
  const FitBounds bounds(a[0], a[n - 1]);
  if (!(rmax > rmin)) throw FitError("fit_peak: degenerate responses", to_fit(Eigen::Vector4d(0, 0, a[arg], 1), a, r));
  r = (r.array() - rmin) / (rmax - rmin);

  const GaussianFunctor functor(a, r, bounds);
  const Eigen::Vector4d grid = grid_search(a, r, bounds);
  const double grid_err = rms_residual(grid, a, r);
  // Initialization: baseline = min, amplitude = range, centre = argmax bias, width = half the span.
  const Eigen::Vector4d start(0.0, 1.0, a[arg], 0.5 * (a[n - 1] - a[0]));
  std::optional<Eigen::Vector4d> best = run_lm(functor, start);
  if (!best || rms_residual(*best, a, r) > grid_err + 1e-12) {
    const std::optional<Eigen::Vector4d> refined = run_lm(functor, grid);
    if (refined && (!best || rms_residual(*refined, a, r) < rms_residual(*best, a, r))) best = refined;
  }
  if (!best) throw FitError("fit_peak: least squares did not converge", to_fit(grid, a, r));
  return to_fit(*best, a, r);
}

BiasScan main_lobe(const BiasScan& scan, double level, int min_points) {
  const auto n = static_cast<std::ptrdiff_t>(scan.responses.size());
  if (n == 0 || static_cast<std::ptrdiff_t>(scan.biases.size()) != n) throw ArgumentError("main_lobe: empty scan");
  const auto [lo_it, hi_it] = std::minmax_element(scan.responses.begin(), scan.responses.end());
  const double lo = *lo_it, range = *hi_it - *lo_it;
  const std::ptrdiff_t peak = hi_it - scan.responses.begin();
  auto above = [&](std::ptrdiff_t i) { return range > 0.0 && (scan.responses[static_cast<std::size_t>(i)] - lo) >= level * range; };
  std::ptrdiff_t first = peak, last = peak;
  while (first > 0 && above(first - 1)) --first;
  while (last + 1 < n && above(last + 1)) ++last;
  while (last - first + 1 < std::min<std::ptrdiff_t>(min_points, n)) {
    if (first > 0) --first;
    if (last - first + 1 < min_points && last + 1 < n) ++last;
  }
  BiasScan lobe = scan;
  lobe.biases.assign(scan.biases.begin() + first, scan.biases.begin() + last + 1);
  lobe.responses.assign(scan.responses.begin() + first, scan.responses.begin() + last + 1);
  return lobe;
}

CorrectionState modal_optimize(SystemState& state, const std::vector<ZernikeIndex>& modes,
                               const std::vector<double>& biases, int iterations, MetricKind kind,
                               const std::function<void(const ModeStep&)>& on_step) {
  if (iterations < 1) throw ArgumentError("modal_optimize: iterations must be >= 1");
  CorrectionState result;
  const Image zero = Image::Zero(state.size, state.size);
  for (int it = 0; it < iterations; ++it) {
    for (const auto& mode : modes) {
      ModeStep step;
      step.iteration = it;
      step.scan = scan_mode(state, mode, biases, kind);
      if (step.scan.flagged) {
        step.status = "skipped: " + step.scan.flag_reason;
      } else {
        try {
          step.fit = fit_peak(step.scan);
        } catch (const FitError& e) {
          step.status = std::string("skipped: ") + e.what();
        }
      }
      if (step.fit && step.fit->residual > kMaxFitResidual) step.status = "skipped: poor single-peak fit";
      if (step.fit && step.status.empty()) {
        // Accept only corrections that do not lower the feedback (monotone improvement).
        const auto zero_it = std::find(biases.begin(), biases.end(), 0.0);
        const double current = zero_it != biases.end()
                                   ? step.scan.responses[static_cast<std::size_t>(zero_it - biases.begin())]
                                   : evaluate_feedback(state, kind, zero);
        const Image shape = zernike_mode_image(mode, state.size, state.aperture_radius);
        const double proposed = evaluate_feedback(state, kind, step.fit->alpha_corr * shape);
        const auto best = std::max_element(step.scan.responses.begin(), step.scan.responses.end());
        if (proposed >= current) {
          step.applied = step.fit->alpha_corr;
          step.status = "applied";
        } else if (*best > current) {
          step.applied = biases[static_cast<std::size_t>(best - step.scan.responses.begin())];
          step.status = "best-bias";
        } else {
          step.status = "skipped: no improvement";
        }
        if (step.applied != 0.0) {
          state.correction += step.applied * shape;
          result.cumulative[mode] += step.applied;
        }
      }
      if (on_step) on_step(step);
      result.history.push_back(std::move(step));
    }
    result.iterations = it + 1;
  }
  return result;
}

std::vector<DefocusRow> defocus_comparison(SystemState& state, const std::vector<double>& alpha_range,
                                           const std::vector<MetricKind>& metrics) {
  if (state.depth && state.depth->slices.empty()) throw ArgumentError("defocus_comparison: empty depth object");
  std::vector<DefocusRow> rows;
  const ZernikeIndex defocus(2, 0);
  for (MetricKind kind : metrics) {
    DefocusRow row;
    row.metric = kind;
    row.scan = scan_mode(state, defocus, alpha_range, kind);
    try {
      row.alpha_corr = fit_peak(main_lobe(row.scan)).alpha_corr;
    } catch (const FitError& e) {
      row.alpha_corr = e.fallback.alpha_corr;
      row.fit_converged = false;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

double residual_rms(const Image& phase, double aperture_radius) {
  const Mask inside = aperture_mask(static_cast<int>(phase.rows()), aperture_radius);
  const double count = static_cast<double>(inside.count());
  const double mean = inside.select(phase, 0.0).sum() / count;
  return std::sqrt(inside.select((phase - mean).square(), 0.0).sum() / count);
}

}  // namespace qao
