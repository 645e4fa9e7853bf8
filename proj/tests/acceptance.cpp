// Acceptance runner: one PASS/FAIL line per criterion, then a summary line.
// Exit status is 0 unless --strict is given and a criterion fails.

#include "qao/acquisition.hpp"
#include "qao/biphoton.hpp"
#include "qao/harness.hpp"
#include "qao/optics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace qao;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

class Runner {
 public:
  explicit Runner(std::filesystem::path root) : root_(std::move(root)) {}

  const ExperimentReport& experiment(const std::string& id) {
    for (const auto& r : cache_)
      if (r.id == id) return r;
    ExperimentOptions opt;
    opt.output = root_ / id;
    cache_.push_back(run_experiment(id, opt));
    return cache_.back();
  }

  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path root_;
  std::vector<ExperimentReport> cache_;
};

Outcome criterion1(Runner& run) {
  const ExperimentReport& r = run.experiment("E1");
  const double slope = r.at("loglog_slope");
  // The doubling law holds where the illumination is much narrower than the PSF; the widest PSF is checked.
  const double ratio = r.at("width_ratio@8");
  std::ostringstream ratios;
  for (int s : {2, 3, 4, 6, 8}) ratios << (s == 2 ? "" : ",") << fmt("%.3f", r.at("width_ratio@" + std::to_string(s)));
  return {std::abs(slope + 2.0) <= 0.1 && std::abs(ratio - 4.0) <= 0.2 && r.runtime_seconds < 60.0,
          fmt("slope=%.4f width_ratio(sigma=8)=%.3f [sigma 2..8: %s] t=%.1fs", slope, ratio, ratios.str().c_str(),
              r.runtime_seconds)};
}

Outcome criterion2(Runner& run) {
  const ExperimentReport& r = run.experiment("E2");
  const double mean = r.at("similarity_mean");
  return {mean > 0.97 && r.runtime_seconds < 600.0,
          fmt("mean similarity=%.4f min=%.4f t=%.1fs", mean, r.at("similarity_min"), r.runtime_seconds)};
}

Outcome criterion3(Runner& run) {
  const ExperimentReport& r = run.experiment("E2");
  const bool monotone = r.at("proxy_monotone") == 1.0;
  const double crossing = r.at("proxy_crossing_f_ab");
  return {monotone && crossing > 0.0 && std::abs(crossing - 1.0) <= 0.3,
          fmt("monotone=%s crossing f_ab=%.3f sim(0.2)=%.3f sim(1.6)=%.3f", monotone ? "yes" : "no", crossing,
              r.at("proxy_similarity@0.2"), r.at("proxy_similarity@1.6"))};
}

Outcome criterion4(Runner& run) {
  const ExperimentReport& r = run.experiment("E3");
  const double step = r.at("min_step_decrease");
  std::ostringstream means;
  for (const char* f : {"0.5", "1", "2", "4", "8"}) means << fmt("%.3f ", r.at(std::string("c0_mean@") + f));
  return {step >= 0.05, fmt("c0 means: %smin step decrease=%.1f%%", means.str().c_str(), 100.0 * step)};
}

Outcome criterion5(Runner& run) {
  const ExperimentReport& r = run.experiment("E4");
  const double single = r.at("single_pass_count"), total = r.at("single_total");
  const double random = r.at("random_pass_count"), draws = r.at("random_total");
  return {single == total && random >= 9.0 && r.runtime_seconds < 900.0,
          fmt("single modes %.0f/%.0f (worst residual %.3f rad); random %.0f/%.0f (c0 ratio %.3f +- %.3f) t=%.1fs",
              single, total, r.at("single_residual_max"), random, draws, r.at("random_ratio_mean"),
              r.at("random_ratio_std"), r.runtime_seconds)};
}

Outcome criterion6(Runner& run) {
  const ExperimentReport& r = run.experiment("E5");
  const double qao = r.at("alpha_corr.depth.qao");
  bool classical_fails = false;
  for (const char* m : {"pib", "contrast", "lowfreq"})
    classical_fails = classical_fails || std::abs(r.at(std::string("alpha_corr.depth.") + m) - 2.0) > 0.5;
  std::vector<double> control;
  for (const char* m : {"qao", "pib", "contrast", "lowfreq"}) control.push_back(r.at(std::string("alpha_corr.control.") + m));
  const auto [lo, hi] = std::minmax_element(control.begin(), control.end());
  return {std::abs(qao - 2.0) <= 0.2 && classical_fails && *hi - *lo <= 0.3,
          fmt("depth: qao=%.3f pib=%.3f contrast=%.3f lowfreq=%.3f; control spread=%.3f", qao,
              r.at("alpha_corr.depth.pib"), r.at("alpha_corr.depth.contrast"), r.at("alpha_corr.depth.lowfreq"),
              *hi - *lo)};
}

Mat normalized_off_diagonal(Mat m) {
  m.diagonal().setZero();
  return m / m.sum();
}

double worst_top10_error(const CorrelationTensor& g2, const DetectorConfig& det, int stacks) {
  const Mat truth = normalized_off_diagonal(g2.values);
  Mat average = Mat::Zero(truth.rows(), truth.cols());
  for (int s = 0; s < stacks; ++s)
    average += normalized_off_diagonal(estimate_g2(sample_frames(g2, det, 1000 + s), 2).gamma.values) / stacks;
  std::vector<std::pair<double, Eigen::Index>> entries;
  for (Eigen::Index k = 0; k < truth.size(); ++k)
    if (k % (truth.rows() + 1) != 0) entries.emplace_back(truth.data()[k], k);
  std::partial_sort(entries.begin(), entries.begin() + 10, entries.end(), std::greater<>());
  double worst = 0.0;
  for (int k = 0; k < 10; ++k)
    worst = std::max(worst, std::abs(average.data()[entries[k].second] / entries[k].first - 1.0));
  return worst;
}

Outcome criterion7() {
  const auto t0 = std::chrono::steady_clock::now();
  constexpr int n = 8;
  const TwoPhotonField input = ideal_input(uniform_envelope_2d(n));
  const CorrelationTensor clean = g2_of(propagate_pair(input, Image(Image::Ones(n, n)), build_transfer_2d(Image(Image::Zero(n, n)))));
  DetectorConfig det;
  det.lambda_pairs = 4.0;
  det.frames = 100000;
  const double worst = worst_top10_error(clean, det, 5);
  const double projection = projection_similarity(sum_projection(estimate_g2(sample_frames(clean, det, 77), 2).gamma),
                                                  sum_projection(clean));
  // Reported, not gated: an aberrated pair distribution spreads the ten largest entries over fewer counts.
  const CorrelationTensor aberrated =
      g2_of(propagate_pair(input, Image(Image::Ones(n, n)), build_transfer_2d(correlated_phase_screen_2d(1.0, 3, n, n / 2.0))));
  const double worst_aberrated = worst_top10_error(aberrated, det, 5);

  DetectorConfig dark = det;
  dark.lambda_pairs = 0.0;
  const Mat gamma = estimate_g2(sample_frames(clean, dark, 7), 2).gamma.values;
  std::vector<double> off;
  for (Eigen::Index k = 0; k < gamma.size(); ++k)
    if (k % (gamma.rows() + 1) != 0) off.push_back(gamma.data()[k]);
  double mean = 0.0, var = 0.0;
  for (double v : off) mean += v;
  mean /= static_cast<double>(off.size());
  for (double v : off) var += (v - mean) * (v - mean);
  var /= static_cast<double>(off.size() - 1);
  const double z = mean / std::sqrt(var / static_cast<double>(off.size()));
  const double t = seconds_since(t0);
  return {worst < 0.05 && std::abs(z) < 3.0 && t < 600.0,
          fmt("top-10 worst rel error=%.2f%% (screen f_ab=1: %.2f%%), projection similarity=%.4f, dark |mean|/se=%.2f "
              "t=%.1fs",
              100.0 * worst, 100.0 * worst_aberrated, projection, std::abs(z), t)};
}

Outcome criterion8() {
  constexpr int n = 16;
  const Image object = half_plane_object(n, 4.0);
  const CorrelationTensor g2 = g2_of(propagate_pair(ideal_input(uniform_envelope_2d(n)), object,
                                                    build_transfer_2d(Image(Image::Zero(n, n)))));
  const Image truth = anti_correlation_image(g2);
  const double top = truth.maxCoeff();
  const Mask signal = truth > 0.5 * top, noise = truth < 0.01 * top;
  DetectorConfig det;
  det.lambda_pairs = 16.0;
  const std::vector<long> budgets{1000, 4000, 16000, 64000};
  constexpr int stacks = 5;
  std::vector<double> lx, ly;
  std::ostringstream values;
  for (long m : budgets) {
    det.frames = m;
    double total = 0.0;
    for (int s = 0; s < stacks; ++s)
      total += snr(anti_correlation_image(estimate_g2(sample_frames(g2, det, derive_seed(8, m, s)), 2).gamma), signal, noise);
    lx.push_back(std::log(static_cast<double>(m)));
    ly.push_back(std::log(total / stacks));
    values << fmt("%.1f ", total / stacks);
  }
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / lx.size();
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / ly.size();
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < lx.size(); ++k) {
    sxy += (lx[k] - mx) * (ly[k] - my);
    sxx += (lx[k] - mx) * (lx[k] - mx);
  }
  const double slope = sxy / sxx;
  return {std::abs(slope - 0.5) <= 0.1, fmt("SNR at M=1e3..6.4e4: %sslope=%.3f", values.str().c_str(), slope)};
}

Outcome criterion9(Runner& run) {
  const ExperimentReport& r = run.experiment("E6");
  const double gain = r.at("snr_gain_median");
  const double before = r.at("peak_ratio_aberrated_median"), after = r.at("peak_ratio_corrected_median");
  return {gain >= 3.0 && after >= 5.0 && before < 2.0,
          fmt("SNR gain median=%.2f (%.2f -> %.2f); conditional peak/background median %.1f -> %.1f", gain,
              r.at("snr_aberrated_mean"), r.at("snr_corrected_mean"), before, after)};
}

double relative(const Image& a, const Image& b) { return (a - b).abs().maxCoeff() / a.abs().maxCoeff(); }

Outcome criterion10() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst_1d = 0.0, worst_2d = 0.0, worst_invariant = 0.0;
  for (int k = 0; k < 10; ++k) {
    {
      constexpr int n = 257;
      const Vec t = Vec::NullaryExpr(n, [&] { return u(rng); });
      const TransferOperator1d op = build_transfer_1d(correlated_phase_screen(0.5 + 0.2 * k, derive_seed(10, 1, k), n));
      const Vec env = uniform_envelope(n);
      const TwoPhotonField out = propagate_pair(ideal_input(env), t, op);
      const SumProjection dense = sum_projection(g2_of(out));
      worst_1d = std::max(worst_1d, relative(dense.values, sum_projection_direct(t, op, env).values));
      const double pass = (env.array() * t.array() * t.reverse().array()).abs2().sum() / env.squaredNorm();
      worst_invariant = std::max(worst_invariant, std::abs(out.phi.squaredNorm() - pass));
      worst_invariant = std::max(worst_invariant, std::abs(dense.values.sum() - pass));
      const CMat tm = transfer_matrix(op);
      worst_invariant = std::max(worst_invariant, (tm.adjoint() * tm - CMat::Identity(n, n)).cwiseAbs().maxCoeff());
    }
    {
      constexpr int n = 16;
      const Image t = Image::NullaryExpr(n, n, [&] { return u(rng); });
      const TransferOperator2d op =
          build_transfer_2d(correlated_phase_screen_2d(0.5 + 0.2 * k, derive_seed(10, 2, k), n, n / 2.0));
      const Image env = uniform_envelope_2d(n);
      const TwoPhotonField out = propagate_pair(ideal_input(env), t, op);
      const SumProjection dense = sum_projection(g2_of(out));
      worst_2d = std::max(worst_2d, relative(dense.values, sum_projection_direct(t, op, env).values));
      const double pass = (env * t * t.reverse()).abs2().sum() / env.abs2().sum();
      worst_invariant = std::max(worst_invariant, std::abs(out.phi.squaredNorm() - pass));
      worst_invariant = std::max(worst_invariant, std::abs(dense.values.sum() - pass));
      worst_invariant = std::max(worst_invariant, std::abs(psf_of(op).abs2().sum() - 1.0));
    }
  }
  const double t = seconds_since(t0);
  return {worst_1d < 1e-8 && worst_2d < 1e-8 && worst_invariant < 1e-8 && t < 120.0,
          fmt("dense vs streaming: 1D %.2e, 2D %.2e; invariants %.2e t=%.1fs", worst_1d, worst_2d, worst_invariant, t)};
}

}  // namespace

int main(int argc, char** argv) {
  bool strict = false;
  std::filesystem::path root = "acceptance_out";
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--strict") == 0) strict = true;
    else root = argv[i];
  }
  Runner run(root);
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, [&] { return criterion1(run); }}, {2, [&] { return criterion2(run); }},
      {3, [&] { return criterion3(run); }}, {4, [&] { return criterion4(run); }},
      {5, [&] { return criterion5(run); }}, {6, [&] { return criterion6(run); }},
      {7, criterion7},                      {8, criterion8},
      {9, [&] { return criterion9(run); }}, {10, criterion10}};
  int passed = 0;
  for (const auto& [id, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    passed += o.pass;
    std::printf("criterion %2d: %s  %s\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/10 passed\n", passed);
  return strict && passed != 10 ? 1 : 0;
}
