#include "fedsim/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace fedsim {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  out << content;
  if (!out) throw std::runtime_error("failed writing output file: " + path);
}

std::string trial_file_name(const char* stem, int trial) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%03d.csv", stem, trial);
  return buf;
}

}  // namespace

std::string trajectory_csv(const Trajectory& traj) {
  std::ostringstream out;
  out << "round,loss,grad_norm,max_delta_norm,mean_delta_norm,clipped_fraction,diverged\n";
  for (const auto& rec : traj.records) {
    double max_norm = 0.0;
    double mean_norm = 0.0;
    for (double d : rec.client_delta_norms) {
      max_norm = std::max(max_norm, d);
      mean_norm += d;
    }
    if (!rec.client_delta_norms.empty()) {
      mean_norm /= static_cast<double>(rec.client_delta_norms.size());
    }
    out << rec.t << ',' << fmt(rec.global_loss) << ',' << fmt(rec.global_grad_norm)
        << ',' << fmt(max_norm) << ',' << fmt(mean_norm) << ','
        << fmt(rec.clipped_fraction(traj.config.algorithm, traj.config.K)) << ','
        << (rec.diverged ? 1 : 0) << '\n';
  }
  return out.str();
}

std::string norms_csv(const Trajectory& traj) {
  std::ostringstream out;
  out << "round,client,delta_norm,sent_norm,noise_norm\n";
  for (const auto& rec : traj.records) {
    for (std::size_t i = 0; i < rec.participants.size(); ++i) {
      const double noise = i < rec.client_noise_norms.size()
                               ? rec.client_noise_norms[i]
                               : std::numeric_limits<double>::quiet_NaN();
      out << rec.t << ',' << rec.participants[i] << ','
          << fmt(rec.client_delta_norms[i]) << ',' << fmt(rec.client_sent_norms[i])
          << ',' << fmt(noise) << '\n';
    }
  }
  return out.str();
}

std::string summary_json_line(const RunManifest& manifest, const TrialSummary& s) {
  nlohmann::json j;
  j["algorithm"] = to_string(manifest.algorithm);
  j["preset"] = manifest.preset_name;
  j["seed"] = manifest.seed;
  j["trial"] = s.trial;
  j["rounds_executed"] = s.rounds_executed;
  j["failed"] = s.failed;
  if (s.failure_round) j["failure_round"] = *s.failure_round;
  j["diverged"] = s.diverged;
  j["final_loss"] = s.final_loss;
  j["final_grad_norm"] = s.final_grad_norm;
  if (std::isfinite(s.final_accuracy)) j["final_accuracy"] = s.final_accuracy;
  if (std::isfinite(s.weighted_output_loss)) j["weighted_output_loss"] = s.weighted_output_loss;
  if (std::isfinite(s.weighted_average_loss)) j["weighted_average_loss"] = s.weighted_average_loss;
  j["clipped_fraction_mean"] = s.clipped_fraction_mean;
  j["wall_clock_ms"] = s.wall_clock_ms;
  return j.dump();
}

RunOutputs run_manifest(const RunManifest& manifest, int threads,
                        const std::string& out_dir) {
  if (threads < 1) throw std::invalid_argument("threads must be >= 1");
  const ResolvedRun run = resolve_run(manifest);

  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);

  RunOutputs outputs;
  std::string summary_lines;
  for (int trial = 0; trial < manifest.trials; ++trial) {
    const auto t0 = std::chrono::steady_clock::now();
    auto objective = run.make_objective(static_cast<std::uint64_t>(trial));
    Trajectory traj =
        run_experiment(*objective, run.fl, static_cast<std::uint64_t>(trial), threads);
    const auto t1 = std::chrono::steady_clock::now();

    TrialSummary s;
    s.trial = trial;
    const auto failure = detect_failure(traj, manifest.failure);
    s.failed = failure.failed;
    s.failure_round = failure.round;
    s.diverged = traj.terminated_early;
    s.rounds_executed = static_cast<long>(traj.records.size());
    s.final_loss = objective->loss(traj.final_x);
    s.final_grad_norm = vec_norm(objective->gradient(traj.final_x));
    s.final_accuracy = objective->accuracy(traj.final_x);
    if (!traj.weighted_output.empty()) {
      s.weighted_output_loss = objective->loss(traj.weighted_output);
      s.weighted_average_loss = objective->loss(traj.weighted_average);
    }
    double frac = 0.0;
    for (const auto& rec : traj.records) {
      frac += rec.clipped_fraction(run.fl.algorithm, run.fl.K);
    }
    s.clipped_fraction_mean =
        traj.records.empty() ? 0.0 : frac / static_cast<double>(traj.records.size());
    s.wall_clock_ms =
        std::chrono::duration<double, std::milli>(t1 - t0).count();

    if (!out_dir.empty()) {
      namespace fs = std::filesystem;
      if (manifest.emit_rounds) {
        write_file((fs::path(out_dir) / trial_file_name("trial", trial)).string(),
                   trajectory_csv(traj));
      }
      if (manifest.emit_norms) {
        write_file((fs::path(out_dir) / trial_file_name("norms", trial)).string(),
                   norms_csv(traj));
      }
    }
    if (manifest.emit_summary) {
      summary_lines += summary_json_line(manifest, s);
      summary_lines += '\n';
    }
    outputs.trajectories.push_back(std::move(traj));
    outputs.summaries.push_back(std::move(s));
  }
  if (!out_dir.empty() && manifest.emit_summary) {
    write_file((std::filesystem::path(out_dir) / "summary.jsonl").string(),
               summary_lines);
  }
  return outputs;
}

SweepAxis sweep_axis_from_string(const std::string& name) {
  if (name == "T") return SweepAxis::T;
  if (name == "m") return SweepAxis::m;
  if (name == "K") return SweepAxis::K;
  if (name == "alpha") return SweepAxis::alpha;
  if (name == "lambda") return SweepAxis::lambda;
  throw std::invalid_argument("unknown sweep axis: " + name + " (use T, m, K, alpha, lambda)");
}

const char* to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::T: return "T";
    case SweepAxis::m: return "m";
    case SweepAxis::K: return "K";
    case SweepAxis::alpha: return "alpha";
    case SweepAxis::lambda: return "lambda";
  }
  return "T";
}

namespace {

long positive_integer_value(SweepAxis axis, double value) {
  const double r = std::round(value);
  if (!(r >= 1.0) || std::abs(value - r) > 1e-9) {
    throw std::invalid_argument(std::string("sweep axis ") + to_string(axis) +
                                " requires positive integer values");
  }
  return static_cast<long>(r);
}

}  // namespace

RunManifest apply_axis(const RunManifest& manifest, SweepAxis axis, double value) {
  RunManifest mf = manifest;
  switch (axis) {
    case SweepAxis::T:
      mf.rounds = positive_integer_value(axis, value);
      break;
    case SweepAxis::m: {
      const int m = static_cast<int>(positive_integer_value(axis, value));
      if (manifest.participants == manifest.clients) {
        mf.participants = m;  // full participation tracks the client count
      } else if (manifest.participants > m) {
        throw std::invalid_argument("sweep axis m: participants exceeds swept client count");
      }
      mf.clients = m;
      break;
    }
    case SweepAxis::K:
      mf.local_steps = static_cast<int>(positive_integer_value(axis, value));
      break;
    case SweepAxis::alpha:
      if (mf.noise.family != NoiseFamily::alpha_stable &&
          mf.noise.family != NoiseFamily::pareto_symmetric) {
        throw std::invalid_argument(
            "sweep axis alpha requires an alpha_stable or pareto_symmetric noise family");
      }
      if (!(value > 0.0) || value > 2.0) {
        throw std::invalid_argument("sweep axis alpha: values must lie in (0, 2]");
      }
      mf.noise.alpha = value;
      if (mf.schedule) mf.schedule->alpha = value;
      break;
    case SweepAxis::lambda:
      if (mf.schedule) {
        throw std::invalid_argument("sweep axis lambda conflicts with a theorem schedule");
      }
      if (!(value > 0.0)) throw std::invalid_argument("sweep axis lambda: values must be > 0");
      mf.lambda = value;
      mf.lambda_pi.reset();
      mf.lambda_pr.reset();
      break;
  }
  return mf;
}

double trial_error_metric(const Objective& obj, const Trajectory& traj) {
  if (traj.config.mu > 0.0 && !traj.weighted_output.empty()) {
    return obj.loss(traj.weighted_output);
  }
  double best = std::numeric_limits<double>::infinity();
  for (const auto& rec : traj.records) {
    const double g2 = rec.global_grad_norm * rec.global_grad_norm;
    if (std::isfinite(g2)) best = std::min(best, g2);
  }
  return best;
}

SweepResult run_sweep(const RunManifest& manifest, SweepAxis axis,
                      const std::vector<double>& values, int threads,
                      const std::string& out_dir) {
  if (values.size() < 3) {
    throw std::invalid_argument("sweep requires at least 3 axis values");
  }
  SweepResult result;
  result.axis = axis;
  for (double value : values) {
    RunManifest point_mf = apply_axis(manifest, axis, value);
    point_mf.emit_summary = false;
    const ResolvedRun run = resolve_run(point_mf);
    std::vector<double> errors;
    std::vector<Trajectory> trajs;
    for (int trial = 0; trial < point_mf.trials; ++trial) {
      auto objective = run.make_objective(static_cast<std::uint64_t>(trial));
      Trajectory traj =
          run_experiment(*objective, run.fl, static_cast<std::uint64_t>(trial), threads);
      errors.push_back(trial_error_metric(*objective, traj));
      trajs.push_back(std::move(traj));
    }
    SweepPoint point;
    point.value = value;
    point.median_error = median(errors);
    point.success_rate = success_rate(trajs, point_mf.failure);
    point.trials = point_mf.trials;
    result.points.push_back(point);
  }
  if (axis == SweepAxis::T || axis == SweepAxis::m || axis == SweepAxis::K) {
    std::vector<std::pair<double, double>> xy;
    for (const auto& p : result.points) {
      if (p.value > 0.0 && p.median_error > 0.0 && std::isfinite(p.median_error)) {
        xy.emplace_back(p.value, p.median_error);
      }
    }
    if (xy.size() >= 3) result.fit = fit_rate_exponent(xy);
  }
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_file((std::filesystem::path(out_dir) / "sweep.csv").string(),
               sweep_csv(result));
  }
  return result;
}

std::string sweep_csv(const SweepResult& result) {
  std::ostringstream out;
  out << "row_type,axis,value,median_error,success_rate,trials,fit_slope,fit_intercept,fit_r2\n";
  for (const auto& p : result.points) {
    out << "point," << to_string(result.axis) << ',' << fmt(p.value) << ','
        << fmt(p.median_error) << ',' << fmt(p.success_rate) << ',' << p.trials
        << ",,,\n";
  }
  if (result.fit) {
    out << "fit," << to_string(result.axis) << ",,,,," << fmt(result.fit->slope)
        << ',' << fmt(result.fit->intercept) << ',' << fmt(result.fit->r_squared)
        << '\n';
  }
  return out.str();
}

AlphaReport estimate_alpha_from_file(const std::string& path,
                                     std::size_t min_samples) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open samples file: " + path);
  std::vector<double> samples;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::size_t b = 0, e = line.size();
    while (b < e && std::isspace(static_cast<unsigned char>(line[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(line[e - 1]))) --e;
    if (b == e) continue;
    const std::string cell = line.substr(b, e - b);
    try {
      std::size_t pos = 0;
      const double v = std::stod(cell, &pos);
      if (pos != cell.size()) throw std::invalid_argument("trailing characters");
      samples.push_back(v);
    } catch (const std::exception&) {
      throw std::runtime_error("samples file " + path + " line " +
                               std::to_string(lineno) + ": not a number");
    }
  }
  if (samples.size() < min_samples) {
    throw std::runtime_error("insufficient samples: got " +
                             std::to_string(samples.size()) + ", need at least " +
                             std::to_string(min_samples));
  }
  AlphaReport report;
  report.estimate = estimate_tail_index(samples);
  report.source = "file";
  report.requested_min = min_samples;
  return report;
}

AlphaReport estimate_alpha_from_run(const RunManifest& manifest, int threads,
                                    std::size_t min_samples) {
  if (manifest.participants < 2) {
    throw std::invalid_argument(
        "estimate-alpha from a run needs at least 2 participants per round");
  }
  const ResolvedRun run = resolve_run(manifest);
  std::vector<double> samples;
  const std::size_t max_trials = 100000;
  for (std::size_t trial = 0; trial < max_trials && samples.size() < min_samples;
       ++trial) {
    auto objective = run.make_objective(trial);
    Trajectory traj = run_experiment(*objective, run.fl, trial, threads);
    for (const auto& rec : traj.records) {
      for (double v : rec.client_noise_norms) samples.push_back(v);
    }
  }
  if (samples.size() < min_samples) {
    throw std::runtime_error("insufficient samples from run: got " +
                             std::to_string(samples.size()));
  }
  AlphaReport report;
  report.estimate = estimate_tail_index(samples);
  report.source = "run";
  report.requested_min = min_samples;
  return report;
}

}  // namespace fedsim
