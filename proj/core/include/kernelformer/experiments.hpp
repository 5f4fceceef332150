// Numerical studies over the constructed networks and the reference
// estimator: construction-vs-oracle agreement, error scaling in the sample
// count, smoothing bias in the bandwidth, sampling noise at fixed
// bandwidth, and ambient-dimension robustness. All studies are
// deterministic for a fixed config; wall-clock time is reported but sits
// outside the determinism contract.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kernelformer/manifold.hpp"

namespace kf {

struct ExperimentConfig {
  ManifoldKind manifold = ManifoldKind::Circle;
  double radius = 1.0;
  int ambient_dim = 3;       // embedding target for single-dimension studies
  double alpha = 1.0;        // smoothness of the task functions
  double holder_scale = 1.0;
  double value_bound = 1.0;
  int anchors = 5;           // pieces per task function
  uint64_t seed = 20260823;
  std::vector<int> n_grid = {16, 32, 64, 128, 256, 512, 1024, 2048};
  std::vector<double> h_grid = {0.4, 0.2, 0.1, 0.05};
  std::vector<int> d_grid = {3, 10, 30, 100};
  std::vector<int> variance_n_grid = {32, 64, 128, 256, 512, 1024, 2048, 4096};
  int tasks_per_point = 64;
  int queries_per_task = 16;
  int mc_samples = 100000;
  double fixed_h = 0.2;  // sampling-noise study
  int fixed_n = 256;     // ambient study
  double safety_factor = 2.0;
  std::string out_dir;   // empty: no files written
};

void validate(const ExperimentConfig& cfg);

struct SlopeFit {
  double slope = 0;
  double intercept = 0;
  double half_width = 0;  // 95% confidence half-width of the slope
};

// Least squares on (log x, log y); inputs must be positive, length >= 4.
SlopeFit fit_loglog_slope(const std::vector<double>& xs,
                          const std::vector<double>& ys);

struct ReportRow {
  std::string label;
  double x = 0;
  double value = 0;
  double stderr_value = 0;  // standard error of the mean across tasks
  double aux = 0;
};

struct ExperimentReport {
  std::string name;
  std::vector<ReportRow> rows;
  std::optional<SlopeFit> fit;
  bool pass = false;
  std::string detail;
  double wall_seconds = 0;  // excluded from the determinism contract
};

// Worst relative gap between the built network and the reference estimator
// per grid point; requires every build to validate against its canonical
// form. aux column: 1 if validated.
ExperimentReport run_equivalence_suite(const ExperimentConfig& cfg);

// Mean squared error against hidden labels per sample count; slope must
// match the smoothness-driven decay band.
ExperimentReport run_rate_suite(const ExperimentConfig& cfg);

// Population-estimator bias against the true function value per bandwidth;
// slope must match the smoothness exponent band.
ExperimentReport run_bias_suite(const ExperimentConfig& cfg);

// Finite-sample deviation from the population estimator at fixed
// bandwidth; slope in the sample count must match the square-root band.
ExperimentReport run_variance_suite(const ExperimentConfig& cfg);

// Error and weight magnitudes across ambient dimensions on shared base
// data, plus a rotation-invariance spot check. aux column: kappa.
ExperimentReport run_ambient_suite(const ExperimentConfig& cfg);

std::string report_csv(const ExperimentReport& report);
// Includes a config echo; wall time sits under "timing".
std::string report_json(const ExperimentConfig& cfg,
                        const ExperimentReport& report);

// Writes <name>.csv and <name>.json under cfg.out_dir when it is set.
void write_report_files(const ExperimentConfig& cfg,
                        const ExperimentReport& report);

}  // namespace kf
