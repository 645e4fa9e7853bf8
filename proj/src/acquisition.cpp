#include "qao/acquisition.hpp"

#include "qao/fft.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace qao {

namespace {

using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

// Bernoulli(p) clicks over all pixels of one frame by geometric gap skipping.
template <typename Rng>
void add_dark_clicks(FrameStack& stack, long frame, double p_dark, Rng& rng) {
  if (p_dark <= 0.0) return;
  const int np = stack.pixel_count();
  if (p_dark >= 1.0) {
    for (int k = 0; k < np; ++k) stack.set(frame, k);
    return;
  }
  std::geometric_distribution<int> gap(p_dark);
  for (long k = gap(rng); k < np; k += 1 + gap(rng)) stack.set(frame, static_cast<int>(k));
}

void mark_occupancy(FrameStack& stack, const DetectorConfig& cfg) {
  const double per_pixel = 2.0 * cfg.lambda_pairs * cfg.eta / stack.pixel_count() + cfg.p_dark;
  stack.high_occupancy = per_pixel > 0.5;
}

}  // namespace

void DetectorConfig::validate() const {
  if (!is_probability(eta)) throw ArgumentError("DetectorConfig: eta must lie in [0, 1]");
  if (!is_probability(p_dark)) throw ArgumentError("DetectorConfig: p_dark must lie in [0, 1]");
  if (!(lambda_pairs >= 0.0)) throw ArgumentError("DetectorConfig: lambda_pairs must be >= 0");
  if (frames < 2) throw ArgumentError("DetectorConfig: frames (M) must be >= 2");
}

long FrameStack::frame_count() const {
  const auto per = bytes_per_frame();
  return per == 0 ? 0 : static_cast<long>(bits.size() / per);
}

bool FrameStack::at(long frame, int pixel) const {
  const auto byte = bits[static_cast<std::size_t>(frame) * bytes_per_frame() + static_cast<std::size_t>(pixel) / 8];
  return (byte >> (pixel % 8)) & 1U;
}

void FrameStack::set(long frame, int pixel) {
  bits[static_cast<std::size_t>(frame) * bytes_per_frame() + static_cast<std::size_t>(pixel) / 8] |=
      static_cast<std::uint8_t>(1U << (pixel % 8));
}

std::vector<int> FrameStack::active(long frame) const {
  std::vector<int> on;
  const std::size_t per = bytes_per_frame();
  const std::uint8_t* row = bits.data() + static_cast<std::size_t>(frame) * per;
  for (std::size_t b = 0; b < per; ++b) {
    if (row[b] == 0) continue;
    for (int k = 0; k < 8; ++k)
      if ((row[b] >> k) & 1U) on.push_back(static_cast<int>(b * 8) + k);
  }
  return on;
}

FrameStack FrameStack::zeros(int width, int height, long count) {
  FrameStack s;
  s.width = width;
  s.height = height;
  s.bits.assign(static_cast<std::size_t>(count) * s.bytes_per_frame(), 0);
  return s;
}

FrameStack sample_frames(const CorrelationTensor& g2, const DetectorConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if ((g2.values.array() < 0.0).any()) throw ArgumentError("sample_frames: G^2 must be non-negative");
  const double total = g2.values.sum();
  if (!(total > 0.0)) throw ArgumentError("sample_frames: G^2 must have positive mass");
  const int n = g2.size;
  FrameStack stack = FrameStack::zeros(n, g2.dim == 1 ? 1 : n, cfg.frames + 1);
  stack.seed = seed;
  mark_occupancy(stack, cfg);

  const Eigen::Index np = g2.values.rows();
  std::mt19937_64 rng(seed);
  std::discrete_distribution<Eigen::Index> pair(g2.values.data(), g2.values.data() + g2.values.size());
  std::poisson_distribution<long> pairs(cfg.lambda_pairs > 0.0 ? cfg.lambda_pairs : 1.0);
  std::bernoulli_distribution detect(cfg.eta);
  for (long l = 0; l <= cfg.frames; ++l) {
    const long count = cfg.lambda_pairs > 0.0 ? pairs(rng) : 0;
    for (long k = 0; k < count; ++k) {
      // Column-major storage: flat index = photon1 + photon2 * np.
      const Eigen::Index flat = pair(rng);
      const bool first = detect(rng), second = detect(rng);
      if (first) stack.set(l, static_cast<int>(flat % np));
      if (second) stack.set(l, static_cast<int>(flat / np));
    }
    add_dark_clicks(stack, l, cfg.p_dark, rng);
  }
  return stack;
}

FrameStack sample_frames_factorized(const Image& envelope, const Image& transmission, const TransferOperator2d& op,
                                    const DetectorConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const int n = op.size();
  if (envelope.rows() != n || transmission.rows() != n) throw ArgumentError("sample_frames_factorized: shape mismatch");
  FrameStack stack = FrameStack::zeros(n, n, cfg.frames + 1);
  stack.seed = seed;
  mark_occupancy(stack, cfg);

  const Image source = (envelope * transmission * transmission.reverse()).abs2();
  const Image spread = op.kernel.abs2();
  std::mt19937_64 rng(seed);
  std::discrete_distribution<Eigen::Index> pick_source(source.data(), source.data() + source.size());
  std::discrete_distribution<Eigen::Index> pick_offset(spread.data(), spread.data() + spread.size());
  std::poisson_distribution<long> pairs(cfg.lambda_pairs > 0.0 ? cfg.lambda_pairs : 1.0);
  std::bernoulli_distribution detect(cfg.eta);
  const int span = 2 * n - 1;
  // T[p][i] = g(p + i - (N-1)): a photon leaving pixel i lands at p = m - i + (N-1) for kernel offset m.
  auto land = [&](int iy, int ix) -> int {
    const Eigen::Index m = pick_offset(rng);
    const int my = static_cast<int>(m % span) - (n - 1), mx = static_cast<int>(m / span) - (n - 1);
    const int py = my - iy + (n - 1), px = mx - ix + (n - 1);
    if (py < 0 || py >= n || px < 0 || px >= n) return -1;
    return static_cast<int>(pixel_index(py, px, n));
  };
  for (long l = 0; l <= cfg.frames; ++l) {
    const long count = cfg.lambda_pairs > 0.0 ? pairs(rng) : 0;
    for (long k = 0; k < count; ++k) {
      const Eigen::Index s = pick_source(rng);
      const int sy = static_cast<int>(s % n), sx = static_cast<int>(s / n);
      const int a = land(sy, sx);
      const int b = land(static_cast<int>(mirror_index(sy, n)), static_cast<int>(mirror_index(sx, n)));
      if (a >= 0 && detect(rng)) stack.set(l, a);
      if (b >= 0 && detect(rng)) stack.set(l, b);
    }
    add_dark_clicks(stack, l, cfg.p_dark, rng);
  }
  return stack;
}

CorrelationEstimate estimate_g2(const FrameStack& stack, int dim) {
  const long total = stack.frame_count();
  const long m = total - 1;
  if (m < 2) throw ArgumentError("estimate_g2: at least M = 2 frame pairs required");
  const int np = stack.pixel_count();

  // Integer counts make the accumulation exact, so any frame partition gives the same result.
  const long batches = std::min<long>(worker_count(), 8);
  std::vector<CountMatrix> partial(static_cast<std::size_t>(batches));
  parallel_for(batches, [&](std::ptrdiff_t b) {
    CountMatrix acc = CountMatrix::Zero(np, np);
    const long begin = m * b / batches, end = m * (b + 1) / batches;
    std::vector<int> current = stack.active(begin);
    for (long l = begin; l < end; ++l) {
      const std::vector<int> next = stack.active(l + 1);
      for (int i : current) {
        for (int j : current) ++acc(i, j);
        for (int j : next) --acc(i, j);
      }
      current = next;
    }
    partial[static_cast<std::size_t>(b)] = std::move(acc);
  });
  CountMatrix sum = CountMatrix::Zero(np, np);
  for (const auto& p : partial) sum += p;

  CorrelationEstimate est;
  est.gamma.dim = dim;
  est.gamma.size = stack.width;
  est.gamma.values = sum.cast<double>() / static_cast<double>(m);
  est.gamma.values.diagonal().setZero();
  est.same_pixel_zeroed = true;
  return est;
}

double snr(const Image& image, const Mask& signal_region, const Mask& noise_region) {
  if (signal_region.rows() != image.rows() || signal_region.cols() != image.cols() ||
      noise_region.rows() != image.rows() || noise_region.cols() != image.cols())
    throw ArgumentError("snr: region shape mismatch");
  const auto ns = signal_region.count();
  const auto nn = noise_region.count();
  if (ns == 0 || nn == 0) throw ArgumentError("snr: regions must be non-empty");
  const double signal = signal_region.select(image, 0.0).sum() / static_cast<double>(ns);
  const double noise_mean = noise_region.select(image, 0.0).sum() / static_cast<double>(nn);
  const double var =
      noise_region.select((image - noise_mean).square(), 0.0).sum() / static_cast<double>(nn);
  if (!(var > 0.0)) throw DomainError("snr: noise region has zero standard deviation");
  return signal / std::sqrt(var);
}

}  // namespace qao
