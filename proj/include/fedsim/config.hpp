#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fedsim/engine.hpp"
#include "fedsim/metrics.hpp"
#include "fedsim/noise.hpp"
#include "fedsim/objectives.hpp"
#include "fedsim/schedules.hpp"

namespace fedsim {

enum class ObjectiveKind { quadratic, logistic };

struct DataSpec {
  int classes = 10;
  int features = 20;
  int per_class = 200;
  double separation = 3.0;
  std::string csv_path;  // non-empty: load instead of generating blobs

  bool operator==(const DataSpec&) const = default;
};

struct ScheduleRequest {
  ScheduleSetting setting{};
  double alpha = 2.0;
  double c = kAutoConstant;

  bool operator==(const ScheduleRequest&) const = default;
};

// Everything needed to reproduce a run: experiment parameters, objective and
// noise description, trial count and output knobs. Parsed from the flat
// `key = value` config format (see parse_config) or from a named preset.
struct RunManifest {
  std::string preset_name;

  Algorithm algorithm = Algorithm::gfedavg;
  ObjectiveKind objective = ObjectiveKind::quadratic;
  int clients = 1;       // m
  int participants = 1;  // n
  int local_steps = 1;   // K
  long rounds = 1;       // T
  double eta = 1.0;
  double eta_l = 0.1;
  // Constant clipping threshold; algorithm-conditional values allow a preset
  // to carry both per-iteration and per-round choices.
  std::optional<double> lambda;
  std::optional<double> lambda_pi;
  std::optional<double> lambda_pr;
  std::optional<ScheduleRequest> schedule;
  bool rates_explicit = false;  // eta/eta_l appeared in the config text
  double mu = 0.0;
  int dim = 1;
  ParamVector x0;  // empty = zeros
  NoiseSpec noise;
  std::uint64_t seed = 0;
  double divergence_cap = 1e12;
  AggregateDivisor divisor = AggregateDivisor::participants;

  // logistic-only
  DataSpec data;
  int partition_p = 0;  // 0 = i.i.d. (p = classes)
  int batch_size = 32;
  double l2_reg = 0.0;

  FailurePolicy failure;

  int trials = 1;
  std::string out_dir = "out";
  bool emit_rounds = true;
  bool emit_norms = false;
  bool emit_summary = true;

  bool operator==(const RunManifest&) const = default;
};

// Parses the flat UTF-8 `key = value` format: one pair per line, `#` starts
// a comment, dotted keys for nesting, vectors as bracketed comma lists.
// Unknown keys and invalid values are rejected with the offending line/key.
RunManifest parse_config(const std::string& text);
RunManifest load_config_file(const std::string& path);
std::string serialize_config(const RunManifest& manifest);

std::vector<std::string> preset_names();
std::string preset_text(const std::string& name);
RunManifest load_preset(const std::string& name);

struct ResolvedRun {
  FLConfig fl;
  std::optional<SchedulePlan> plan;
  LabeledDataset dataset;  // logistic runs share this across trials
  RunManifest manifest;

  // Builds the trial objective; logistic runs re-partition per trial from
  // the stream [trial, 0].
  std::unique_ptr<Objective> make_objective(std::uint64_t trial) const;
};

// Expands the manifest into an executable configuration: applies a theorem
// schedule if requested, picks the algorithm-appropriate lambda, builds the
// dataset for logistic runs.
ResolvedRun resolve_run(const RunManifest& manifest);

}  // namespace fedsim
