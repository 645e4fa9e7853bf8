#include "qao/harness.hpp"

#include "qao/acquisition.hpp"
#include "qao/biphoton.hpp"
#include "qao/fft.hpp"
#include "qao/io.hpp"
#include "qao/optics.hpp"
#include "qao/zernike.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace qao {

using nlohmann::json;

namespace {

// Largest 1D grid whose dense pair tensor is materialized for frame sampling.
constexpr int kMaxFrames1d = 512;

// ---------------------------------------------------------------------------------------------
// Configuration

class ConfigReader {
 public:
  const json& section(const json& doc, const char* key) {
    static const json empty = json::object();
    if (!doc.contains(key)) return empty;
    if (!doc[key].is_object()) {
      fail(key, "expected an object");
      return empty;
    }
    return doc[key];
  }

  void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
    for (const auto& [key, value] : obj.items()) {
      const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; });
      if (!known) fail(join(path, key), "unknown key");
    }
  }

  template <typename T>
  T get(const json& obj, const char* key, const std::string& path, T fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj[key];
    const std::string where = join(path, key);
    if constexpr (std::is_same_v<T, bool>) {
      if (v.is_boolean()) return v.get<bool>();
      fail(where, "expected a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (v.is_number_integer() && (std::is_signed_v<T> || v.get<std::int64_t>() >= 0)) return v.get<T>();
      fail(where, std::is_signed_v<T> ? "expected an integer" : "expected a non-negative integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (v.is_number()) return v.get<T>();
      fail(where, "expected a number");
    } else {
      if (v.is_string()) return v.get<std::string>();
      fail(where, "expected a string");
    }
    return fallback;
  }

  void require(bool ok, const std::string& where, const std::string& message) {
    if (!ok) fail(where, message);
  }

  void fail(const std::string& where, const std::string& message) { errors.push_back(where + ": " + message); }

  static std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

  std::vector<std::string> errors;
};

bool one_of(const std::string& value, std::initializer_list<const char*> options) {
  return std::any_of(options.begin(), options.end(), [&](const char* o) { return value == o; });
}

// ---------------------------------------------------------------------------------------------
// Scene construction

Vec line_bars(int size, double period) {
  Vec t(size);
  for (int i = 0; i < size; ++i) t[i] = std::fmod(i, period) < 0.5 * period ? 1.0 : 0.0;
  return t;
}

Image grid_target(int size, double period) {
  Image t = Image::Ones(size, size);
  const int p = std::max(2, static_cast<int>(std::lround(period)));
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      if (y % p == 0 || x % p == 0) t(y, x) = 0.0;
  return t;
}

Vec object_1d(const ScenarioConfig& cfg) {
  const std::string& kind = cfg.object.kind;
  if (kind == "none") return Vec::Ones(cfg.size);
  if (kind == "bars") return line_bars(cfg.size, cfg.object.period);
  if (kind == "random") return random_object_1d(cfg.size, cfg.seed);
  if (kind == "half_plane") {
    Vec t = line_bars(cfg.size, cfg.object.period);
    t.head(cfg.size / 2).setOnes();
    return t;
  }
  const Image img = read_csv(cfg.object.path);
  if (img.size() != cfg.size) throw ConfigError("object.path: expected " + std::to_string(cfg.size) + " values");
  return Eigen::Map<const Vec>(img.data(), img.size());
}

Image object_2d(const ScenarioConfig& cfg) {
  const std::string& kind = cfg.object.kind;
  const int n = cfg.size;
  if (kind == "none" || kind == "depth_wires") return Image::Ones(n, n);
  if (kind == "bars") return line_bars(n, cfg.object.period).transpose().replicate(n, 1).array();
  if (kind == "grid_target") return grid_target(n, cfg.object.period);
  if (kind == "half_plane") return half_plane_object(n, cfg.object.period);
  const Image img = read_csv(cfg.object.path);
  if (img.rows() != n || img.cols() != n) throw ConfigError("object.path: expected a " + std::to_string(n) + "^2 CSV");
  return img;
}

Vec aberration_1d(const ScenarioConfig& cfg) {
  const AberrationSpec& a = cfg.aberration;
  if (a.kind == "screen") return correlated_phase_screen(a.f_ab, cfg.seed, cfg.size);
  if (a.kind == "defocus") return defocus_phase(a.alpha, cfg.size);
  return Vec::Zero(cfg.size);
}

Image aberration_2d(const ScenarioConfig& cfg) {
  const AberrationSpec& a = cfg.aberration;
  const double r = cfg.radius();
  if (a.kind == "screen") return correlated_phase_screen_2d(a.f_ab, cfg.seed, cfg.size, r);
  if (a.kind == "defocus") return defocus_phase(a.alpha, cfg.size, r);
  if (a.kind == "zernike") {
    ZernikeExpansion e;
    if (a.random_amplitude > 0.0) e = random_expansion(cfg.seed, a.random_n_min, a.random_n_max, a.random_amplitude);
    for (const auto& t : a.coefficients) e[ZernikeIndex(t.n, t.m)] += t.value;
    return synthesize_mask(e, cfg.size, r).phase;
  }
  return Image::Zero(cfg.size, cfg.size);
}

// Sum-coordinate projection as a tidy (s, value) table in 1D or a CSV matrix in 2D.
void export_projection(const SumProjection& proj, const std::filesystem::path& path) {
  if (proj.dim == 1) {
    std::vector<std::vector<double>> rows;
    for (Eigen::Index k = 0; k < proj.values.rows(); ++k)
      rows.push_back({static_cast<double>(k - proj.center_index()), proj.values(k, 0)});
    write_table(path, {"s", "c_plus"}, rows);
  } else {
    write_csv(path, proj.values);
  }
}

json step_record(const ModeStep& step) {
  json j;
  j["iteration"] = step.iteration;
  j["mode"] = {{"n", step.scan.mode.n}, {"m", step.scan.mode.m}};
  j["biases"] = step.scan.biases;
  j["responses"] = step.scan.responses;
  j["alpha_corr"] = step.fit ? json(step.fit->alpha_corr) : json(nullptr);
  j["residual"] = step.fit ? json(step.fit->residual) : json(nullptr);
  j["applied"] = step.applied;
  j["status"] = step.status;
  return j;
}

class Recorder {
 public:
  Recorder(std::filesystem::path dir, ExperimentReport& report) : dir_(std::move(dir)), report_(report) {
    std::filesystem::create_directories(dir_);
  }

  std::filesystem::path operator()(const std::string& name) {
    report_.files.push_back(name);
    return dir_ / name;
  }

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  ExperimentReport& report_;
};

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

std::string key(const std::string& name, double param) {
  std::ostringstream os;
  os << name << '@' << param;
  return os.str();
}

// ---------------------------------------------------------------------------------------------
// Scenario pipeline

CorrelationTensor pair_tensor_1d(const Vec& t, const TransferOperator1d& op) {
  return g2_of(propagate_pair(ideal_input(uniform_envelope(op.size())), t, op));
}

CorrelationTensor pair_tensor_2d(const Image& t, const TransferOperator2d& op, const Image& envelope) {
  return g2_of(propagate_pair(ideal_input(envelope), t, op));
}

void record_frames(const ScenarioConfig& cfg, const CorrelationTensor& g2, Recorder& out, ExperimentReport& report) {
  DetectorConfig det = cfg.detector;
  const FrameStack stack = sample_frames(g2, det, cfg.seed);
  write_qaof(out("frames.qaof"), stack);
  const CorrelationEstimate est = estimate_g2(stack, cfg.dim);
  const SumProjection proj = sum_projection(est.gamma);
  export_projection(proj, out("projection_estimated.csv"));
  report.scalars["c0_peak_estimated"] = c0_peak(proj, cfg.bin);
  report.scalars["high_occupancy"] = stack.high_occupancy ? 1.0 : 0.0;
  double clicks = 0.0;
  for (long l = 0; l < stack.frame_count(); ++l) clicks += static_cast<double>(stack.active(l).size());
  report.scalars["mean_clicks_per_pixel"] = clicks / (static_cast<double>(stack.frame_count()) * stack.pixel_count());
  const Image r = anti_correlation_image(est.gamma);
  write_csv(out("anti_correlation.csv"), r);
  if (cfg.dim == 2) write_pgm16(out("anti_correlation.pgm"), r.max(0.0));
}

void run_1d(const ScenarioConfig& cfg, Recorder& out, ExperimentReport& report) {
  const Vec t = object_1d(cfg);
  const Vec phase = aberration_1d(cfg);
  const TransferOperator1d op = build_transfer_1d(phase);
  const Vec env = uniform_envelope(cfg.size);
  write_csv(out("pupil_phase.csv"), phase.transpose());
  write_csv(out("psf.csv"), psf_of(op).cwiseAbs2().transpose());
  write_csv(out("image.csv"), intensity_image(t, op).transpose());
  if (cfg.mode == MeasurementMode::Exact) {
    const SumProjection proj = sum_projection_direct(t, op, env);
    export_projection(proj, out("projection.csv"));
    report.scalars["c0_peak"] = c0_peak(proj, cfg.bin);
    report.scalars["c0_peak_unaberrated"] = c0_direct(t, build_transfer_1d(Vec(Vec::Zero(cfg.size))), env, cfg.bin);
  } else {
    if (cfg.size > kMaxFrames1d)
      throw CapacityError("frame sampling in 1D is limited to size <= " + std::to_string(kMaxFrames1d));
    const CorrelationTensor g2 = pair_tensor_1d(t, op);
    report.scalars["c0_peak"] = c0_peak(sum_projection(g2), cfg.bin);
    record_frames(cfg, g2, out, report);
  }
}

void run_2d(const ScenarioConfig& cfg, Recorder& out, ExperimentReport& report) {
  const double radius = cfg.radius();
  SystemState state = make_state(cfg.size, radius);
  state.object = object_2d(cfg);
  if (cfg.object.kind == "depth_wires") state.depth = depth_wires_object(cfg.size, cfg.object.slice_defocus);
  state.aberration = aberration_2d(cfg);
  state.measurement.mode = MeasurementMode::Exact;
  state.measurement.bin = cfg.bin;
  state.measurement.seed = cfg.seed;
  if (cfg.mode == MeasurementMode::Frames && cfg.size > kMaxDense2d)
    throw CapacityError("frame sampling in 2D is limited to size <= " + std::to_string(kMaxDense2d));

  const Image zero = Image::Zero(cfg.size, cfg.size);
  report.scalars["c0_peak"] = evaluate_feedback(state, MetricKind::QAO_C0, zero);
  report.scalars["residual_rms"] = residual_rms(state.aberration, radius);
  write_csv(out("aberration_phase.csv"), state.aberration);
  write_phase_pgm(out("aberration_phase.pgm"), state.aberration);

  if (cfg.ao.enabled) {
    const std::vector<double> biases = linspace(cfg.ao.bias_min, cfg.ao.bias_max, cfg.ao.bias_count);
    if (!cfg.ao.compare.empty()) {
      const std::vector<DefocusRow> rows = defocus_comparison(state, biases, cfg.ao.compare);
      std::vector<std::vector<double>> table;
      for (std::size_t k = 0; k < biases.size(); ++k) {
        std::vector<double> row{biases[k]};
        for (const auto& r : rows) row.push_back(r.scan.responses[k]);
        table.push_back(row);
      }
      std::vector<std::string> header{"bias"};
      for (const auto& r : rows) {
        header.push_back(to_string(r.metric));
        report.scalars["alpha_corr." + to_string(r.metric)] = r.alpha_corr;
        report.scalars["fit_converged." + to_string(r.metric)] = r.fit_converged ? 1.0 : 0.0;
      }
      write_table(out("defocus_scans.csv"), header, table);
    } else {
      std::ofstream log(out("ao_steps.jsonl"));
      int applied = 0;
      const CorrectionState result =
          modal_optimize(state, mode_list(cfg.ao.n_min, cfg.ao.n_max), biases, cfg.ao.iterations, cfg.ao.feedback,
                         [&](const ModeStep& step) {
                           log << step_record(step).dump() << '\n';
                           if (step.applied != 0.0) ++applied;
                         });
      std::vector<std::vector<double>> coeffs;
      for (const auto& [idx, value] : result.cumulative) coeffs.push_back({double(idx.n), double(idx.m), value});
      write_table(out("correction_coefficients.csv"), {"n", "m", "alpha"}, coeffs);
      write_csv(out("correction_phase.csv"), state.correction);
      write_phase_pgm(out("correction_phase.pgm"), state.correction);
      report.scalars["modes_applied"] = applied;
      report.scalars["c0_peak_corrected"] = evaluate_feedback(state, MetricKind::QAO_C0, zero);
      report.scalars["residual_rms_corrected"] = residual_rms(state.aberration + state.correction, radius);
    }
  }

  const Image pupil = state.aberration + state.correction;
  const TransferOperator2d op = build_transfer_2d(pupil);
  const Image image = state.depth ? depth_stack_intensity(*state.depth, state.aberration, state.correction, radius)
                                  : intensity_image(state.object, op);
  write_csv(out("image.csv"), image);
  write_pgm16(out("image.pgm"), image);
  const int window = cfg.window >= 0 ? cfg.window : std::min(cfg.size - 1, 8);
  export_projection(sum_projection_direct(state.object, op, state.envelope, window), out("projection.csv"));
  if (cfg.mode == MeasurementMode::Frames) {
    if (state.depth) throw ConfigError("measurement.mode: frame sampling of depth objects is not supported");
    record_frames(cfg, pair_tensor_2d(state.object, op, state.envelope), out, report);
  }
}

// ---------------------------------------------------------------------------------------------
// Experiment presets

void e1_gaussian_law(const ExperimentOptions&, Recorder& out, ExperimentReport& report) {
  constexpr int n = 257;
  const int c = center_pixel(n);
  const std::vector<double> sigmas{2.0, 3.0, 4.0, 6.0, 8.0};
  const Vec ones = Vec::Ones(n);
  Vec narrow = Vec::Zero(n), wide = Vec::Zero(n);
  narrow[c] = 1.0;
  wide[c] = wide[c + 1] = 1.0 / std::sqrt(2.0);
  // The Gaussian system is separable, so the 2D central value is the square of the 1D one.
  std::vector<std::vector<double>> rows;
  std::vector<double> log_s, log_c, ratios;
  for (double sigma : sigmas) {
    const TransferOperator1d op = build_transfer_1d(gaussian_apodized_pupil(n, sigma));
    const double c0 = std::pow(c0_direct(ones, op, narrow, 0), 2);
    const double c0_wide = std::pow(c0_direct(ones, op, wide, 0), 2);
    const double ratio = c0_wide / c0;
    rows.push_back({sigma, c0, gaussian_c0_analytic(sigma, 1.0), c0_wide, ratio});
    log_s.push_back(std::log(sigma));
    log_c.push_back(std::log(c0));
    ratios.push_back(ratio);
    report.scalars[key("c0", sigma)] = c0;
    report.scalars[key("width_ratio", sigma)] = ratio;
  }
  write_table(out("e1_gaussian_law.csv"), {"sigma", "c0", "c0_analytic", "c0_doubled_width", "width_ratio"}, rows);
  const double ms = mean_of(log_s), mc = mean_of(log_c);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < log_s.size(); ++k) {
    sxy += (log_s[k] - ms) * (log_c[k] - mc);
    sxx += (log_s[k] - ms) * (log_s[k] - ms);
  }
  report.scalars["loglog_slope"] = sxy / sxx;
  report.scalars["width_ratio_min"] = *std::min_element(ratios.begin(), ratios.end());
  report.scalars["width_ratio_max"] = *std::max_element(ratios.begin(), ratios.end());
}

void e2_object_independence(const ExperimentOptions& opt, Recorder& out, ExperimentReport& report) {
  constexpr int n = 1001;
  const int aberrations = opt.repeats > 0 ? opt.repeats : 20;
  const int objects = opt.repeats > 0 ? opt.repeats : 20;
  const Vec env = uniform_envelope(n);

  std::vector<double> sims;
  std::vector<std::vector<double>> rows;
  for (int k = 0; k < aberrations; ++k) {
    const TransferOperator1d op = build_transfer_1d(correlated_phase_screen(0.9, derive_seed(opt.seed, 1, k), n));
    std::vector<Vec> ts{Vec::Ones(n)};
    for (int j = 0; j < objects; ++j)
      ts.push_back(random_object_1d(n, derive_seed(opt.seed, 2, static_cast<std::uint64_t>(k * objects + j))));
    const std::vector<SumProjection> projs = sum_projection_direct(ts, op, env);
    for (int j = 0; j < objects; ++j) {
      const double s = projection_similarity(projs[static_cast<std::size_t>(j + 1)], projs[0]);
      sims.push_back(s);
      rows.push_back({double(k), double(j), s});
    }
  }
  write_table(out("e2_similarity.csv"), {"aberration", "object", "similarity"}, rows);
  report.scalars["similarity_mean"] = mean_of(sims);
  report.scalars["similarity_std"] = std_of(sims);
  report.scalars["similarity_min"] = *std::min_element(sims.begin(), sims.end());

  // Similarity of the with-object projection to the aberrated PSF |h|^2 as the aberration grows.
  const int draws = opt.repeats > 0 ? opt.repeats : 50;
  std::vector<std::vector<double>> curve;
  std::vector<double> means;
  std::vector<double> f_values;
  for (int step = 1; step <= 8; ++step) f_values.push_back(0.2 * step);
  for (double f : f_values) {
    std::vector<double> v;
    for (int k = 0; k < draws; ++k) {
      const TransferOperator1d op = build_transfer_1d(correlated_phase_screen(f, derive_seed(opt.seed, 3, k), n));
      const SumProjection proj = sum_projection_direct(random_object_1d(n, derive_seed(opt.seed, 4, k)), op, env);
      const Vec central = proj.values.col(0).segment((n - 1) / 2, n);
      v.push_back(pearson(central, psf_of(op).cwiseAbs2()));
    }
    means.push_back(mean_of(v));
    curve.push_back({f, means.back(), std_of(v)});
    report.scalars[key("proxy_similarity", f)] = means.back();
  }
  write_table(out("e2_psf_proxy.csv"), {"f_ab", "similarity_mean", "similarity_std"}, curve);
  bool monotone = true;
  for (std::size_t k = 1; k < means.size(); ++k) monotone = monotone && means[k] <= means[k - 1];
  double crossing = -1.0;
  for (std::size_t k = 1; k < means.size() && crossing < 0.0; ++k)
    if (means[k - 1] >= 0.8 && means[k] < 0.8)
      crossing = f_values[k - 1] + (f_values[k] - f_values[k - 1]) * (means[k - 1] - 0.8) / (means[k - 1] - means[k]);
  report.scalars["proxy_monotone"] = monotone ? 1.0 : 0.0;
  report.scalars["proxy_crossing_f_ab"] = crossing;
}

void e3_c0_decay(const ExperimentOptions& opt, Recorder& out, ExperimentReport& report) {
  constexpr int n = 1001;
  const int seeds = opt.repeats > 0 ? opt.repeats : 20;
  const std::vector<double> f_values{0.5, 1.0, 2.0, 4.0, 8.0};
  const Vec ones = Vec::Ones(n), env = uniform_envelope(n);
  std::vector<std::vector<double>> rows;
  std::vector<double> means;
  for (double f : f_values) {
    std::vector<double> v(static_cast<std::size_t>(seeds));
    parallel_for(seeds, [&](std::ptrdiff_t k) {
      const TransferOperator1d op =
          build_transfer_1d(correlated_phase_screen(f, derive_seed(opt.seed, 5, static_cast<std::uint64_t>(k)), n));
      v[static_cast<std::size_t>(k)] = c0_direct(ones, op, env, 0);
    });
    means.push_back(mean_of(v));
    rows.push_back({f, means.back(), std_of(v)});
    report.scalars[key("c0_mean", f)] = means.back();
    report.scalars[key("c0_std", f)] = std_of(v);
  }
  write_table(out("e3_c0_decay.csv"), {"f_ab", "c0_mean", "c0_std"}, rows);
  double min_step = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < means.size(); ++k) min_step = std::min(min_step, (means[k - 1] - means[k]) / means[k - 1]);
  report.scalars["min_step_decrease"] = min_step;
}

void e4_modal_recovery(const ExperimentOptions& opt, Recorder& out, ExperimentReport& report) {
  constexpr int n = 64;
  constexpr double radius = 32.0;
  const std::vector<ZernikeIndex> modes = mode_list(2, 5);
  const std::vector<double> biases = linspace(-2.0, 2.0, 7);
  const Image zero = Image::Zero(n, n);
  SystemState clean = make_state(n, radius);
  const double c0_ref = evaluate_feedback(clean, MetricKind::QAO_C0, zero);
  report.scalars["c0_reference"] = c0_ref;

  std::vector<std::vector<double>> single_rows;
  int single_pass = 0;
  double worst = 0.0;
  for (const auto& mode : modes) {
    SystemState s = make_state(n, radius);
    s.aberration = 2.0 * zernike_mode_image(mode, n, radius);
    modal_optimize(s, modes, biases, 2);
    const double rms = residual_rms(s.aberration + s.correction, radius);
    const double ratio = evaluate_feedback(s, MetricKind::QAO_C0, zero) / c0_ref;
    single_pass += rms < 0.1 ? 1 : 0;
    worst = std::max(worst, rms);
    single_rows.push_back({double(mode.n), double(mode.m), residual_rms(s.aberration, radius), rms, ratio});
  }
  write_table(out("e4_single_modes.csv"), {"n", "m", "residual_before", "residual_after", "c0_ratio"}, single_rows);
  report.scalars["single_pass_count"] = single_pass;
  report.scalars["single_total"] = static_cast<double>(modes.size());
  report.scalars["single_residual_max"] = worst;

  const int seeds = opt.repeats > 0 ? opt.repeats : 10;
  std::vector<std::vector<double>> random_rows;
  std::vector<double> ratios;
  for (int k = 0; k < seeds; ++k) {
    SystemState s = make_state(n, radius);
    s.aberration = synthesize_mask(random_expansion(derive_seed(opt.seed, 6, k), 2, 5, 1.0), n, radius).phase;
    const double before = evaluate_feedback(s, MetricKind::QAO_C0, zero) / c0_ref;
    modal_optimize(s, modes, biases, 2);
    const double after = evaluate_feedback(s, MetricKind::QAO_C0, zero) / c0_ref;
    ratios.push_back(after);
    random_rows.push_back({double(k), before, after, residual_rms(s.aberration + s.correction, radius)});
  }
  write_table(out("e4_random.csv"), {"draw", "c0_ratio_before", "c0_ratio_after", "residual_after"}, random_rows);
  report.scalars["random_pass_count"] =
      static_cast<double>(std::count_if(ratios.begin(), ratios.end(), [](double r) { return r >= 0.95; }));
  report.scalars["random_total"] = seeds;
  report.scalars["random_ratio_mean"] = mean_of(ratios);
  report.scalars["random_ratio_std"] = std_of(ratios);
}

void e5_depth_ambiguity(const ExperimentOptions&, Recorder& out, ExperimentReport& report) {
  constexpr int n = 64;
  constexpr double radius = 32.0;
  const std::vector<double> biases = linspace(-5.0, 5.0, 41);
  const std::vector<MetricKind> metrics{MetricKind::QAO_C0, MetricKind::PIB, MetricKind::Contrast, MetricKind::LowFreq};
  std::vector<std::string> header{"bias"};
  std::vector<std::vector<double>> scans(biases.size());
  for (std::size_t k = 0; k < biases.size(); ++k) scans[k].push_back(biases[k]);
  std::vector<std::vector<double>> table;
  for (const std::string which : {"depth", "control"}) {
    SystemState s = make_state(n, radius);
    s.aberration = defocus_phase(-2.0, n, radius);
    s.depth = depth_wires_object(n, which == "depth" ? std::vector<double>{0.0, 2.0, 4.0} : std::vector<double>{0.0});
    const std::vector<DefocusRow> rows = defocus_comparison(s, biases, metrics);
    std::vector<double> line{which == "depth" ? 0.0 : 1.0};
    for (const auto& r : rows) {
      report.scalars["alpha_corr." + which + "." + to_string(r.metric)] = r.alpha_corr;
      line.push_back(r.alpha_corr);
      header.push_back(which + "_" + to_string(r.metric));
      for (std::size_t k = 0; k < biases.size(); ++k) scans[k].push_back(r.scan.responses[k]);
    }
    table.push_back(line);
  }
  write_table(out("e5_alpha_corr.csv"), {"control", "qao", "pib", "contrast", "lowfreq"}, table);
  write_table(out("e5_scans.csv"), header, scans);
}

struct QuantumImage {
  Image r;
  Image conditional;
  double snr = 0.0;
  double peak_ratio = 0.0;
};

QuantumImage measure_quantum_image(const Image& object, const Image& pupil, const Image& r_truth,
                                   const DetectorConfig& det, std::uint64_t seed, int ay, int ax,
                                   FrameStack* keep = nullptr) {
  const int n = static_cast<int>(object.rows());
  const CorrelationTensor g2 = pair_tensor_2d(object, build_transfer_2d(pupil), uniform_envelope_2d(n));
  FrameStack stack = sample_frames(g2, det, seed);
  const CorrelationEstimate est = estimate_g2(stack, 2);
  if (keep) *keep = std::move(stack);
  QuantumImage q;
  q.r = anti_correlation_image(est.gamma);
  const double top = r_truth.maxCoeff();
  q.snr = snr(q.r, r_truth > 0.5 * top, r_truth < 0.01 * top);
  q.conditional = conditional_image(est.gamma, ay, ax);
  // Peak: 3x3 neighbourhood of the twin pixel; background: mean |value| elsewhere (A excluded).
  const int py = static_cast<int>(mirror_index(ay, n)), px = static_cast<int>(mirror_index(ax, n));
  double peak = -std::numeric_limits<double>::infinity(), background = 0.0;
  int count = 0;
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      if (std::abs(y - py) <= 1 && std::abs(x - px) <= 1) {
        peak = std::max(peak, q.conditional(y, x));
      } else if (y != ay || x != ax) {
        background += std::abs(q.conditional(y, x));
        ++count;
      }
    }
  background /= count;
  q.peak_ratio = background > 0.0 ? peak / background : std::numeric_limits<double>::infinity();
  return q;
}

void e6_quantum_imaging(const ExperimentOptions& opt, Recorder& out, ExperimentReport& report) {
  constexpr int n = 16;
  constexpr double radius = 8.0;
  constexpr double f_ab = 2.0;
  const int seeds = opt.repeats > 0 ? opt.repeats : 10;
  const Image object = half_plane_object(n, 4.0);
  const Image zero = Image::Zero(n, n);
  const Image r_truth = anti_correlation_image(pair_tensor_2d(object, build_transfer_2d(zero), uniform_envelope_2d(n)));
  DetectorConfig det;
  det.lambda_pairs = 16.0;  // about 0.04 clicks per pixel per frame on 16 x 16
  det.frames = 100000;
  // A in the reference half; its twin lands on a transmissive row of the pattern half.
  const int ay = n / 2 - 1, ax = n / 4;
  // Screens carry tip and tilt, so the loop starts at n = 1.
  const std::vector<ZernikeIndex> modes = mode_list(1, 5);
  const std::vector<double> biases = linspace(-2.0, 2.0, 7);

  std::vector<std::vector<double>> rows;
  std::vector<double> gains, snr_before, snr_after, peak_before, peak_after;
  for (int k = 0; k < seeds; ++k) {
    SystemState s = make_state(n, radius);
    s.object = object;
    s.aberration = correlated_phase_screen_2d(f_ab, derive_seed(opt.seed, 7, k), n, radius);
    const double c0_before = evaluate_feedback(s, MetricKind::QAO_C0, zero);
    modal_optimize(s, modes, biases, 2);
    const double c0_after = evaluate_feedback(s, MetricKind::QAO_C0, zero);
    const std::uint64_t frame_seed = derive_seed(opt.seed, 8, k);
    FrameStack stack;
    const QuantumImage before = measure_quantum_image(object, s.aberration, r_truth, det, frame_seed, ay, ax);
    const QuantumImage after = measure_quantum_image(object, s.aberration + s.correction, r_truth, det, frame_seed, ay,
                                                     ax, k == 0 ? &stack : nullptr);
    if (k == 0) {
      write_csv(out("e6_R_aberrated.csv"), before.r);
      write_csv(out("e6_R_corrected.csv"), after.r);
      write_pgm16(out("e6_R_aberrated.pgm"), before.r.max(0.0));
      write_pgm16(out("e6_R_corrected.pgm"), after.r.max(0.0));
      write_csv(out("e6_conditional_aberrated.csv"), before.conditional);
      write_csv(out("e6_conditional_corrected.csv"), after.conditional);
      write_qaof(out("frames.qaof"), stack);
    }
    snr_before.push_back(before.snr);
    snr_after.push_back(after.snr);
    gains.push_back(after.snr / before.snr);
    peak_before.push_back(before.peak_ratio);
    peak_after.push_back(after.peak_ratio);
    rows.push_back({double(k), c0_before, c0_after, before.snr, after.snr, before.peak_ratio, after.peak_ratio});
  }
  write_table(out("e6_quantum_imaging.csv"),
              {"draw", "c0_aberrated", "c0_corrected", "snr_aberrated", "snr_corrected", "peak_ratio_aberrated",
               "peak_ratio_corrected"},
              rows);
  report.scalars["snr_aberrated_mean"] = mean_of(snr_before);
  report.scalars["snr_aberrated_std"] = std_of(snr_before);
  report.scalars["snr_corrected_mean"] = mean_of(snr_after);
  report.scalars["snr_corrected_std"] = std_of(snr_after);
  report.scalars["snr_gain_median"] = median_of(gains);
  report.scalars["peak_ratio_aberrated_median"] = median_of(peak_before);
  report.scalars["peak_ratio_corrected_median"] = median_of(peak_after);
}

}  // namespace

// -----------------------------------------------------------------------------------------------

ScenarioConfig parse_config(const json& doc) {
  ConfigReader rd;
  ScenarioConfig cfg;
  if (!doc.is_object()) throw ConfigError("config: expected a JSON object");
  rd.check_keys(doc, "", {"grid", "object", "aberration", "measurement", "ao", "seed", "output"});

  const json& grid = rd.section(doc, "grid");
  rd.check_keys(grid, "grid", {"dim", "size", "aperture_radius"});
  cfg.dim = rd.get(grid, "dim", "grid", cfg.dim);
  cfg.size = rd.get(grid, "size", "grid", cfg.size);
  cfg.aperture_radius = rd.get(grid, "aperture_radius", "grid", cfg.aperture_radius);
  rd.require(cfg.dim == 1 || cfg.dim == 2, "grid.dim", "must be 1 or 2");
  rd.require(cfg.size >= 8, "grid.size", "must be >= 8");
  rd.require(cfg.dim != 1 || cfg.size % 2 == 1, "grid.size", "must be odd in 1D");
  rd.require(cfg.aperture_radius >= 0.0 && 2.0 * cfg.aperture_radius <= cfg.size, "grid.aperture_radius",
             "must lie in [0, size / 2]");

  const json& obj = rd.section(doc, "object");
  rd.check_keys(obj, "object", {"kind", "period", "path", "slice_defocus"});
  cfg.object.kind = rd.get(obj, "kind", "object", cfg.object.kind);
  cfg.object.period = rd.get(obj, "period", "object", cfg.object.period);
  cfg.object.path = rd.get(obj, "path", "object", cfg.object.path);
  if (obj.contains("slice_defocus")) {
    if (obj["slice_defocus"].is_array() && !obj["slice_defocus"].empty() &&
        std::all_of(obj["slice_defocus"].begin(), obj["slice_defocus"].end(), [](const json& v) { return v.is_number(); }))
      cfg.object.slice_defocus = obj["slice_defocus"].get<std::vector<double>>();
    else
      rd.fail("object.slice_defocus", "expected a non-empty array of numbers");
  }
  rd.require(one_of(cfg.object.kind, {"none", "bars", "grid_target", "half_plane", "depth_wires", "random", "custom"}),
             "object.kind", "unknown kind '" + cfg.object.kind + "'");
  rd.require(cfg.dim == 2 || !one_of(cfg.object.kind, {"grid_target", "depth_wires"}), "object.kind",
             "'" + cfg.object.kind + "' requires grid.dim = 2");
  rd.require(cfg.dim == 1 || cfg.object.kind != "random", "object.kind", "'random' requires grid.dim = 1");
  rd.require(cfg.object.period > 0.0, "object.period", "must be positive");
  rd.require(cfg.object.kind != "custom" || !cfg.object.path.empty(), "object.path", "required for kind 'custom'");

  const json& ab = rd.section(doc, "aberration");
  rd.check_keys(ab, "aberration", {"kind", "f_ab", "alpha", "coefficients", "random"});
  cfg.aberration.kind = rd.get(ab, "kind", "aberration", cfg.aberration.kind);
  cfg.aberration.f_ab = rd.get(ab, "f_ab", "aberration", cfg.aberration.f_ab);
  cfg.aberration.alpha = rd.get(ab, "alpha", "aberration", cfg.aberration.alpha);
  if (ab.contains("coefficients")) {
    if (!ab["coefficients"].is_array()) rd.fail("aberration.coefficients", "expected an array");
    else
      for (std::size_t k = 0; k < ab["coefficients"].size(); ++k) {
        const json& term = ab["coefficients"][k];
        const std::string path = "aberration.coefficients[" + std::to_string(k) + "]";
        if (!term.is_object()) {
          rd.fail(path, "expected an object {n, m, value}");
          continue;
        }
        rd.check_keys(term, path, {"n", "m", "value"});
        ZernikeTerm t{rd.get(term, "n", path, 0), rd.get(term, "m", path, 0), rd.get(term, "value", path, 0.0)};
        try {
          ZernikeIndex(t.n, t.m);
        } catch (const ArgumentError& e) {
          rd.fail(path, e.what());
        }
        cfg.aberration.coefficients.push_back(t);
      }
  }
  if (ab.contains("random")) {
    const json& r = rd.section(ab, "random");
    rd.check_keys(r, "aberration.random", {"n_min", "n_max", "amplitude"});
    cfg.aberration.random_n_min = rd.get(r, "n_min", "aberration.random", cfg.aberration.random_n_min);
    cfg.aberration.random_n_max = rd.get(r, "n_max", "aberration.random", cfg.aberration.random_n_max);
    cfg.aberration.random_amplitude = rd.get(r, "amplitude", "aberration.random", cfg.aberration.random_amplitude);
    rd.require(0 <= cfg.aberration.random_n_min && cfg.aberration.random_n_min <= cfg.aberration.random_n_max,
               "aberration.random", "require 0 <= n_min <= n_max");
    rd.require(cfg.aberration.random_amplitude >= 0.0, "aberration.random.amplitude", "must be >= 0");
  }
  rd.require(one_of(cfg.aberration.kind, {"none", "zernike", "screen", "defocus"}), "aberration.kind",
             "unknown kind '" + cfg.aberration.kind + "'");
  rd.require(cfg.dim == 2 || cfg.aberration.kind != "zernike", "aberration.kind", "'zernike' requires grid.dim = 2");
  rd.require(cfg.aberration.f_ab >= 0.0, "aberration.f_ab", "must be >= 0");

  const json& ms = rd.section(doc, "measurement");
  rd.check_keys(ms, "measurement", {"mode", "eta", "lambda_pairs", "p_dark", "frames", "bin", "window"});
  const std::string mode = rd.get(ms, "mode", "measurement", std::string("exact"));
  rd.require(one_of(mode, {"exact", "frames"}), "measurement.mode", "must be 'exact' or 'frames'");
  cfg.mode = mode == "frames" ? MeasurementMode::Frames : MeasurementMode::Exact;
  cfg.detector.eta = rd.get(ms, "eta", "measurement", cfg.detector.eta);
  cfg.detector.lambda_pairs = rd.get(ms, "lambda_pairs", "measurement", cfg.detector.lambda_pairs);
  cfg.detector.p_dark = rd.get(ms, "p_dark", "measurement", cfg.detector.p_dark);
  cfg.detector.frames = rd.get(ms, "frames", "measurement", cfg.detector.frames);
  cfg.bin = rd.get(ms, "bin", "measurement", cfg.bin);
  cfg.window = rd.get(ms, "window", "measurement", cfg.window);
  try {
    cfg.detector.validate();
  } catch (const ArgumentError& e) {
    rd.fail("measurement", e.what());
  }
  rd.require(cfg.bin >= 0, "measurement.bin", "must be >= 0");
  rd.require(cfg.window >= -1, "measurement.window", "must be >= -1");

  const json& ao = rd.section(doc, "ao");
  rd.check_keys(ao, "ao", {"enabled", "modes", "biases", "iterations", "feedback", "compare"});
  cfg.ao.enabled = rd.get(ao, "enabled", "ao", cfg.ao.enabled);
  const json& modes = rd.section(ao, "modes");
  rd.check_keys(modes, "ao.modes", {"n_min", "n_max"});
  cfg.ao.n_min = rd.get(modes, "n_min", "ao.modes", cfg.ao.n_min);
  cfg.ao.n_max = rd.get(modes, "n_max", "ao.modes", cfg.ao.n_max);
  rd.require(0 <= cfg.ao.n_min && cfg.ao.n_min <= cfg.ao.n_max, "ao.modes", "require 0 <= n_min <= n_max");
  const json& biases = rd.section(ao, "biases");
  rd.check_keys(biases, "ao.biases", {"min", "max", "count"});
  cfg.ao.bias_min = rd.get(biases, "min", "ao.biases", cfg.ao.bias_min);
  cfg.ao.bias_max = rd.get(biases, "max", "ao.biases", cfg.ao.bias_max);
  cfg.ao.bias_count = rd.get(biases, "count", "ao.biases", cfg.ao.bias_count);
  rd.require(cfg.ao.bias_min < cfg.ao.bias_max, "ao.biases", "require min < max");
  rd.require(cfg.ao.bias_count >= 3, "ao.biases.count", "must be >= 3");
  cfg.ao.iterations = rd.get(ao, "iterations", "ao", cfg.ao.iterations);
  rd.require(cfg.ao.iterations >= 1, "ao.iterations", "must be >= 1");
  try {
    cfg.ao.feedback = metric_from_string(rd.get(ao, "feedback", "ao", std::string("qao")));
  } catch (const ArgumentError& e) {
    rd.fail("ao.feedback", e.what());
  }
  if (ao.contains("compare")) {
    if (!ao["compare"].is_array()) rd.fail("ao.compare", "expected an array of metric names");
    else
      for (const json& name : ao["compare"]) {
        try {
          cfg.ao.compare.push_back(metric_from_string(name.is_string() ? name.get<std::string>() : name.dump()));
        } catch (const ArgumentError& e) {
          rd.fail("ao.compare", e.what());
        }
      }
  }
  rd.require(!cfg.ao.enabled || cfg.dim == 2, "ao.enabled", "the modal loop requires grid.dim = 2");

  cfg.seed = rd.get(doc, "seed", "", cfg.seed);
  cfg.output = rd.get(doc, "output", "", cfg.output.string());

  if (!rd.errors.empty()) {
    std::string msg = "invalid config";
    for (const auto& e : rd.errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  return cfg;
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + assignment + "'");
  const std::string path = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  json* node = &doc;
  std::stringstream ss(path);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    if (parts[k].empty()) throw ConfigError("--set: empty path component in '" + path + "'");
    if (node->is_null()) *node = json::object();
    if (!node->is_object()) throw ConfigError("--set: '" + path + "' descends into a non-object");
    if (k + 1 == parts.size())
      (*node)[parts[k]] = value;
    else
      node = &(*node)[parts[k]];
  }
}

json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw ConfigError("config '" + path.string() + "' is not valid JSON");
  return doc;
}

double ExperimentReport::at(const std::string& name) const {
  const auto it = scalars.find(name);
  if (it == scalars.end()) throw ArgumentError("report '" + id + "' has no scalar '" + name + "'");
  return it->second;
}

json ExperimentReport::to_json() const {
  json j;
  j["id"] = id;
  j["seed"] = seed;
  j["scalars"] = json::object();
  for (const auto& [k, v] : scalars) j["scalars"][k] = std::isfinite(v) ? json(v) : json(nullptr);
  j["files"] = files;
  return j;
}

void write_report(const ExperimentReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "report.json") << report.to_json().dump(2) << '\n';
  std::ofstream(dir / "timing.json") << json{{"runtime_seconds", report.runtime_seconds}}.dump(2) << '\n';
}

ExperimentReport run_scenario(const ScenarioConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  ExperimentReport report;
  report.id = "scenario";
  report.seed = config.seed;
  Recorder out(config.output, report);
  if (config.dim == 1)
    run_1d(config, out, report);
  else
    run_2d(config, out, report);
  report.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_report(report, config.output);
  return report;
}

std::vector<std::string> experiment_ids() { return {"E1", "E2", "E3", "E4", "E5", "E6"}; }

ExperimentReport run_experiment(const std::string& id, const ExperimentOptions& options) {
  using Preset = void (*)(const ExperimentOptions&, Recorder&, ExperimentReport&);
  static const std::map<std::string, Preset> presets{{"E1", e1_gaussian_law},     {"E2", e2_object_independence},
                                                     {"E3", e3_c0_decay},         {"E4", e4_modal_recovery},
                                                     {"E5", e5_depth_ambiguity},  {"E6", e6_quantum_imaging}};
  const auto it = presets.find(id);
  if (it == presets.end()) throw ArgumentError("unknown experiment '" + id + "' (expected E1..E6)");
  if (options.repeats < 0) throw ArgumentError("run_experiment: repeats must be >= 0");
  const auto start = std::chrono::steady_clock::now();
  ExperimentReport report;
  report.id = id;
  report.seed = options.seed;
  Recorder out(options.output, report);
  it->second(options, out, report);
  report.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_report(report, options.output);
  return report;
}

Vec random_object_1d(int size, std::uint64_t seed) {
  if (size < 1) throw ArgumentError("random_object_1d: size must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> length(20, 120);
  std::uniform_real_distribution<double> level(0.0, 1.0);
  std::bernoulli_distribution open(0.8);
  Vec t(size);
  for (int i = 0; i < size;) {
    const int len = std::min(length(rng), size - i);
    const double v = open(rng) ? level(rng) : 0.0;
    t.segment(i, len).setConstant(v);
    i += len;
  }
  return t;
}

Image half_plane_object(int size, double period) {
  if (size < 2 || !(period > 0.0)) throw ArgumentError("half_plane_object: require size >= 2 and period > 0");
  Image t = Image::Ones(size, size);
  const double band = 0.5 * period;
  for (int y = 0; y < size; ++y) {
    const auto index = static_cast<long>(std::floor((y - size / 2) / band));
    const double v = index % 2 == 0 ? 1.0 : 0.0;
    t.block(y, size / 2, 1, size - size / 2).setConstant(v);
  }
  return t;
}

DepthObject depth_wires_object(int size, const std::vector<double>& slice_defocus) {
  if (slice_defocus.empty()) throw ArgumentError("depth_wires_object: at least one slice required");
  if (size < 16) throw ArgumentError("depth_wires_object: size must be >= 16");
  const double c = 0.5 * (size - 1);
  const double beam = 0.375 * size;
  const double spacing = 0.156 * size;
  const double half_width = 0.5 * std::max(1.0, std::round(0.047 * size));
  const double scale = 1.0 / std::sqrt(static_cast<double>(slice_defocus.size()));
  DepthObject obj;
  const auto k_count = static_cast<int>(slice_defocus.size());
  for (int k = 0; k < k_count; ++k) {
    // Wires sit side by side about the centre column: x = c + (k - (K-1)/2) * spacing, rounded.
    const double x0 = std::round(c + (k - 0.5 * (k_count - 1)) * spacing);
    Image t = Image::Zero(size, size);
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x)
        if (std::hypot(y - c, x - c) <= beam && std::abs(x - x0) > half_width) t(y, x) = scale;
    obj.slices.push_back({t, slice_defocus[static_cast<std::size_t>(k)]});
  }
  return obj;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1) + 0xBF58476D1CE4E5B9ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace qao
