#pragma once

#include "qao/ao_engine.hpp"
#include "qao/metrics.hpp"
#include "qao/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace qao {

struct ObjectSpec {
  std::string kind = "none";  // none | bars | grid_target | half_plane | depth_wires | random | custom
  double period = 4.0;        // bars, grid lines and half-plane pattern, in pixels
  std::string path;           // custom: CSV transmission (one row in 1D)
  std::vector<double> slice_defocus{0.0, 2.0, 4.0};  // depth_wires: Z_2^0 coefficient per wire
};

struct ZernikeTerm {
  int n = 0;
  int m = 0;
  double value = 0.0;
};

struct AberrationSpec {
  std::string kind = "none";  // none | zernike | screen | defocus
  double f_ab = 0.0;          // screen
  double alpha = 0.0;         // defocus
  std::vector<ZernikeTerm> coefficients;  // zernike: explicit terms ...
  int random_n_min = 2;                   // ... plus optional random_expansion terms
  int random_n_max = 5;
  double random_amplitude = 0.0;
};

struct AoSpec {
  bool enabled = false;
  int n_min = 2;
  int n_max = 5;
  double bias_min = -2.0;
  double bias_max = 2.0;
  int bias_count = 7;
  int iterations = 2;
  MetricKind feedback = MetricKind::QAO_C0;
  // Non-empty: run a defocus comparison over these metrics instead of the modal loop.
  std::vector<MetricKind> compare;
};

struct ScenarioConfig {
  int dim = 1;
  int size = 257;
  double aperture_radius = 0.0;  // 2D only; 0 selects size / 2
  ObjectSpec object;
  AberrationSpec aberration;
  MeasurementMode mode = MeasurementMode::Exact;
  DetectorConfig detector;
  int bin = 1;
  int window = -1;  // exported projection half-width in 2D; -1 selects min(size - 1, 8)
  AoSpec ao;
  std::uint64_t seed = 1;
  std::filesystem::path output = "out";

  double radius() const { return aperture_radius > 0.0 ? aperture_radius : 0.5 * size; }
};

// Parses and validates a scenario document; unknown keys and invalid values are collected
// into one ConfigError listing every offending key.
ScenarioConfig parse_config(const nlohmann::json& doc);
// Applies "a.b.c=value" with value parsed as JSON, falling back to a plain string.
void apply_override(nlohmann::json& doc, const std::string& assignment);
nlohmann::json load_json(const std::filesystem::path& path);

struct ExperimentReport {
  std::string id;
  std::uint64_t seed = 0;
  std::map<std::string, double> scalars;
  std::vector<std::string> files;  // relative to the output directory
  double runtime_seconds = 0.0;

  double at(const std::string& key) const;
  // Deterministic: runtime is excluded and written to timing.json instead.
  nlohmann::json to_json() const;
};

// Writes report.json and timing.json into `dir`.
void write_report(const ExperimentReport& report, const std::filesystem::path& dir);

ExperimentReport run_scenario(const ScenarioConfig& config);

struct ExperimentOptions {
  std::filesystem::path output = "out";
  std::uint64_t seed = 1;
  int repeats = 0;  // seeds / aberrations per point; 0 selects the preset default
};

// Presets E1..E6; an unknown id throws ArgumentError.
ExperimentReport run_experiment(const std::string& id, const ExperimentOptions& options);
std::vector<std::string> experiment_ids();

// Piecewise-constant 1D transmission: segments of 20..120 pixels, each U(0, 1) with probability 0.8, else opaque.
Vec random_object_1d(int size, std::uint64_t seed);
// Left half transparent reference, right half horizontal bars of the given period.
Image half_plane_object(int size, double period);
// Three (or more) opaque vertical wires inside a beam disk, one per slice, each slice scaled by 1/sqrt(K).
DepthObject depth_wires_object(int size, const std::vector<double>& slice_defocus);

// SplitMix64 mix of (seed, stream, index) for independent per-run seeds.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

}  // namespace qao
