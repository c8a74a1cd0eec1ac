#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fedsim/config.hpp"
#include "fedsim/engine.hpp"
#include "fedsim/metrics.hpp"
#include "fedsim/noise.hpp"

namespace fedsim {

struct TrialSummary {
  int trial = 0;
  bool failed = false;
  std::optional<long> failure_round;
  bool diverged = false;
  long rounds_executed = 0;
  double final_loss = 0.0;
  double final_grad_norm = 0.0;
  double final_accuracy = std::numeric_limits<double>::quiet_NaN();
  double weighted_output_loss = std::numeric_limits<double>::quiet_NaN();
  double weighted_average_loss = std::numeric_limits<double>::quiet_NaN();
  double clipped_fraction_mean = 0.0;
  double wall_clock_ms = 0.0;
};

struct RunOutputs {
  std::vector<Trajectory> trajectories;
  std::vector<TrialSummary> summaries;
};

// Executes manifest.trials trials; when out_dir is non-empty, writes
// trial_###.csv per trial (and norms_###.csv with emit.norms) plus a
// summary.jsonl with one JSON object per trial. Everything except the
// wall_clock_ms summary field is byte-deterministic.
RunOutputs run_manifest(const RunManifest& manifest, int threads,
                        const std::string& out_dir);

std::string trajectory_csv(const Trajectory& traj);
std::string norms_csv(const Trajectory& traj);
std::string summary_json_line(const RunManifest& manifest, const TrialSummary& s);

enum class SweepAxis { T, m, K, alpha, lambda };
SweepAxis sweep_axis_from_string(const std::string& name);
const char* to_string(SweepAxis axis);

struct SweepPoint {
  double value = 0.0;
  double median_error = 0.0;
  double success_rate = 0.0;
  int trials = 0;
};

struct SweepResult {
  SweepAxis axis{};
  std::vector<SweepPoint> points;
  std::optional<RateFit> fit;  // axes T/m/K only
};

// One run per axis value (theorem schedules are recomputed per point);
// the per-point error is the median over trials of the gap/stationarity
// metric, and a log-log rate fit is attached for the scaling axes.
SweepResult run_sweep(const RunManifest& manifest, SweepAxis axis,
                      const std::vector<double>& values, int threads,
                      const std::string& out_dir);

std::string sweep_csv(const SweepResult& result);

// Applies one sweep-axis value to a manifest (exposed for tests).
RunManifest apply_axis(const RunManifest& manifest, SweepAxis axis, double value);

// The per-trial scalar the sweep aggregates: optimality gap of the weighted
// output for strongly convex runs, min-over-rounds squared gradient norm
// otherwise.
double trial_error_metric(const Objective& obj, const Trajectory& traj);

struct AlphaReport {
  TailEstimate estimate;
  std::string source;  // "file" or "run"
  std::size_t requested_min = 0;
};

AlphaReport estimate_alpha_from_file(const std::string& path,
                                     std::size_t min_samples = 10000);

// Runs as many trials as needed to pool at least min_samples pseudo-gradient
// noise norms (per round, per client, centered by the cross-client mean).
AlphaReport estimate_alpha_from_run(const RunManifest& manifest, int threads,
                                    std::size_t min_samples = 10000);

}  // namespace fedsim
