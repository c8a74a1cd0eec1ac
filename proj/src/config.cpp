#include "fedsim/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace fedsim {

namespace {

constexpr std::uint64_t kDatasetTag = 1ull << 63;
constexpr std::uint64_t kPartitionSlot = 0;  // round indices start at 1

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

struct RawValue {
  std::string value;
  int line = 0;
};

class KeyTable {
 public:
  explicit KeyTable(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw std::invalid_argument("config parse error at line " +
                                    std::to_string(lineno) + ": expected key = value");
      }
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (key.empty() || value.empty()) {
        throw std::invalid_argument("config parse error at line " +
                                    std::to_string(lineno) + ": empty key or value");
      }
      if (entries_.count(key)) {
        throw std::invalid_argument("config parse error at line " +
                                    std::to_string(lineno) + ": duplicate key '" + key + "'");
      }
      entries_[key] = RawValue{value, lineno};
    }
  }

  bool has(const std::string& key) const { return entries_.count(key) != 0; }

  std::optional<std::string> take(const std::string& key) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    std::string v = it->second.value;
    entries_.erase(it);
    return v;
  }

  void finish() const {
    if (!entries_.empty()) {
      const auto& [key, raw] = *entries_.begin();
      throw std::invalid_argument("unknown config key '" + key + "' (line " +
                                  std::to_string(raw.line) + ")");
    }
  }

 private:
  std::map<std::string, RawValue> entries_;
};

[[noreturn]] void bad_key(const std::string& key, const std::string& why) {
  throw std::invalid_argument("invalid value for key '" + key + "': " + why);
}

long parse_long(const std::string& key, const std::string& v, long lo, long hi) {
  std::size_t pos = 0;
  long out = 0;
  try {
    out = std::stol(v, &pos);
  } catch (const std::exception&) {
    bad_key(key, "not an integer");
  }
  if (pos != v.size()) bad_key(key, "not an integer");
  if (out < lo || out > hi) {
    bad_key(key, "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &pos);
  } catch (const std::exception&) {
    bad_key(key, "not a number");
  }
  if (pos != v.size()) bad_key(key, "not a number");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  bad_key(key, "expected true or false");
}

ParamVector parse_vector(const std::string& key, const std::string& v) {
  if (v.size() < 2 || v.front() != '[' || v.back() != ']') {
    bad_key(key, "expected a bracketed list like [1, 2, 3]");
  }
  ParamVector out;
  std::stringstream body(v.substr(1, v.size() - 2));
  std::string cell;
  while (std::getline(body, cell, ',')) {
    cell = trim(cell);
    if (cell.empty()) bad_key(key, "empty list element");
    out.push_back(parse_double(key, cell));
  }
  if (out.empty()) bad_key(key, "empty list");
  return out;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt(const ParamVector& v) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += fmt(v[i]);
  }
  return out + "]";
}

}  // namespace

RunManifest parse_config(const std::string& text) {
  KeyTable keys(text);
  RunManifest mf;

  if (auto v = keys.take("algorithm")) {
    try {
      mf.algorithm = algorithm_from_string(*v);
    } catch (const std::exception& e) {
      bad_key("algorithm", e.what());
    }
  }
  if (auto v = keys.take("objective")) {
    if (*v == "quadratic") mf.objective = ObjectiveKind::quadratic;
    else if (*v == "logistic") mf.objective = ObjectiveKind::logistic;
    else bad_key("objective", "expected quadratic or logistic");
  }

  if (auto v = keys.take("clients")) mf.clients = static_cast<int>(parse_long("clients", *v, 1, 1'000'000));
  if (auto v = keys.take("participants")) mf.participants = static_cast<int>(parse_long("participants", *v, 1, 1'000'000));
  else mf.participants = mf.clients;
  if (auto v = keys.take("local_steps")) mf.local_steps = static_cast<int>(parse_long("local_steps", *v, 1, 1'000'000));
  if (auto v = keys.take("rounds")) mf.rounds = parse_long("rounds", *v, 1, 100'000'000);

  const bool has_eta = keys.has("eta");
  const bool has_eta_l = keys.has("eta_l");
  const bool has_lambda = keys.has("lambda") || keys.has("lambda.pi") || keys.has("lambda.pr");
  if (auto v = keys.take("eta")) {
    mf.eta = parse_double("eta", *v);
    if (mf.eta < 0.0 || !std::isfinite(mf.eta)) bad_key("eta", "must be finite and >= 0");
  }
  if (auto v = keys.take("eta_l")) {
    mf.eta_l = parse_double("eta_l", *v);
    if (mf.eta_l < 0.0 || !std::isfinite(mf.eta_l)) bad_key("eta_l", "must be finite and >= 0");
  }
  if (auto v = keys.take("lambda")) {
    mf.lambda = parse_double("lambda", *v);
    if (!(*mf.lambda > 0.0)) bad_key("lambda", "must be > 0");
  }
  if (auto v = keys.take("lambda.pi")) {
    mf.lambda_pi = parse_double("lambda.pi", *v);
    if (!(*mf.lambda_pi > 0.0)) bad_key("lambda.pi", "must be > 0");
  }
  if (auto v = keys.take("lambda.pr")) {
    mf.lambda_pr = parse_double("lambda.pr", *v);
    if (!(*mf.lambda_pr > 0.0)) bad_key("lambda.pr", "must be > 0");
  }

  if (auto v = keys.take("schedule")) {
    ScheduleRequest req;
    try {
      req.setting = schedule_setting_from_string(*v);
    } catch (const std::exception& e) {
      bad_key("schedule", e.what());
    }
    if (auto a = keys.take("schedule.alpha")) {
      req.alpha = parse_double("schedule.alpha", *a);
      if (!(req.alpha > 1.0) || req.alpha > 2.0) bad_key("schedule.alpha", "must lie in (1, 2]");
    }
    if (auto c = keys.take("schedule.c")) {
      req.c = parse_double("schedule.c", *c);
      if (!(req.c >= 1.0)) bad_key("schedule.c", "must be >= 1");
    }
    mf.schedule = req;
    if (has_eta || has_eta_l || has_lambda) {
      bad_key("schedule", "cannot combine a theorem schedule with explicit eta/eta_l/lambda");
    }
  } else {
    if (keys.has("schedule.alpha")) bad_key("schedule.alpha", "requires the schedule key");
    if (keys.has("schedule.c")) bad_key("schedule.c", "requires the schedule key");
  }

  if (auto v = keys.take("mu")) {
    mf.mu = parse_double("mu", *v);
    if (mf.mu < 0.0) bad_key("mu", "must be >= 0");
  }
  if (auto v = keys.take("dim")) mf.dim = static_cast<int>(parse_long("dim", *v, 1, 100'000'000));
  if (auto v = keys.take("x0")) mf.x0 = parse_vector("x0", *v);
  if (auto v = keys.take("seed")) mf.seed = static_cast<std::uint64_t>(parse_long("seed", *v, 0, std::numeric_limits<long>::max()));
  if (auto v = keys.take("divergence_cap")) {
    mf.divergence_cap = parse_double("divergence_cap", *v);
    if (!(mf.divergence_cap > 0.0)) bad_key("divergence_cap", "must be > 0");
  }
  if (auto v = keys.take("aggregate_divisor")) {
    if (*v == "participants") mf.divisor = AggregateDivisor::participants;
    else if (*v == "total") mf.divisor = AggregateDivisor::total;
    else bad_key("aggregate_divisor", "expected participants or total");
  }

  if (auto v = keys.take("noise.family")) {
    try {
      mf.noise.family = noise_family_from_string(*v);
    } catch (const std::exception& e) {
      bad_key("noise.family", e.what());
    }
  }
  if (auto v = keys.take("noise.alpha")) {
    mf.noise.alpha = parse_double("noise.alpha", *v);
    if (!(mf.noise.alpha > 0.0) || mf.noise.alpha > 2.0) bad_key("noise.alpha", "must lie in (0, 2]");
  }
  if (auto v = keys.take("noise.scale")) {
    mf.noise.scale = parse_double("noise.scale", *v);
    if (!(mf.noise.scale > 0.0)) bad_key("noise.scale", "must be > 0");
  }
  if (auto v = keys.take("noise.location")) mf.noise.location = parse_double("noise.location", *v);

  const bool logistic = mf.objective == ObjectiveKind::logistic;
  auto logistic_only = [&](const std::string& key) {
    if (!logistic) bad_key(key, "only valid for the logistic objective");
  };
  if (auto v = keys.take("data.classes")) { logistic_only("data.classes"); mf.data.classes = static_cast<int>(parse_long("data.classes", *v, 2, 10'000)); }
  if (auto v = keys.take("data.features")) { logistic_only("data.features"); mf.data.features = static_cast<int>(parse_long("data.features", *v, 1, 1'000'000)); }
  if (auto v = keys.take("data.per_class")) { logistic_only("data.per_class"); mf.data.per_class = static_cast<int>(parse_long("data.per_class", *v, 1, 100'000'000)); }
  if (auto v = keys.take("data.separation")) {
    logistic_only("data.separation");
    mf.data.separation = parse_double("data.separation", *v);
    if (!(mf.data.separation >= 0.0)) bad_key("data.separation", "must be >= 0");
  }
  if (auto v = keys.take("data.csv")) { logistic_only("data.csv"); mf.data.csv_path = *v; }
  if (auto v = keys.take("partition.p")) { logistic_only("partition.p"); mf.partition_p = static_cast<int>(parse_long("partition.p", *v, 1, 10'000)); }
  if (auto v = keys.take("batch_size")) { logistic_only("batch_size"); mf.batch_size = static_cast<int>(parse_long("batch_size", *v, 1, 100'000'000)); }
  if (auto v = keys.take("l2_reg")) {
    logistic_only("l2_reg");
    mf.l2_reg = parse_double("l2_reg", *v);
    if (mf.l2_reg < 0.0) bad_key("l2_reg", "must be >= 0");
  }

  if (auto v = keys.take("failure.nonfinite")) mf.failure.nonfinite_fails = parse_bool("failure.nonfinite", *v);
  if (auto v = keys.take("failure.loss_blowup")) {
    mf.failure.loss_blowup_factor = parse_double("failure.loss_blowup", *v);
    if (!(mf.failure.loss_blowup_factor > 1.0)) bad_key("failure.loss_blowup", "must be > 1");
  }
  if (auto v = keys.take("failure.accuracy_drop")) {
    mf.failure.accuracy_drop = parse_double("failure.accuracy_drop", *v);
    if (!(mf.failure.accuracy_drop > 0.0) || !(mf.failure.accuracy_drop < 1.0)) {
      bad_key("failure.accuracy_drop", "must lie in (0, 1)");
    }
  }
  if (auto v = keys.take("failure.min_rounds")) {
    mf.failure.min_rounds_observed = static_cast<int>(parse_long("failure.min_rounds", *v, 0, 1'000'000'000));
  }

  if (auto v = keys.take("trials")) mf.trials = static_cast<int>(parse_long("trials", *v, 1, 1'000'000));
  if (auto v = keys.take("out")) mf.out_dir = *v;
  if (auto v = keys.take("emit.rounds")) mf.emit_rounds = parse_bool("emit.rounds", *v);
  if (auto v = keys.take("emit.norms")) mf.emit_norms = parse_bool("emit.norms", *v);
  if (auto v = keys.take("emit.summary")) mf.emit_summary = parse_bool("emit.summary", *v);

  keys.finish();

  if (mf.participants > mf.clients) {
    bad_key("participants", "must not exceed clients");
  }
  if (!mf.x0.empty()) {
    if (logistic) bad_key("x0", "not supported for the logistic objective (starts at zero)");
    if (static_cast<int>(mf.x0.size()) != mf.dim) bad_key("x0", "length must equal dim");
  }
  if (mf.schedule) {
    const auto s = mf.schedule->setting;
    const bool wants_pi = s == ScheduleSetting::pi_strongly_convex || s == ScheduleSetting::pi_nonconvex;
    if (wants_pi && mf.algorithm != Algorithm::fat_pi) {
      bad_key("schedule", "per-iteration schedule requires algorithm = fat_pi");
    }
    if (!wants_pi && mf.algorithm != Algorithm::fat_pr) {
      bad_key("schedule", "per-round schedule requires algorithm = fat_pr");
    }
    const bool strongly = s == ScheduleSetting::pr_strongly_convex ||
                          s == ScheduleSetting::pi_strongly_convex ||
                          s == ScheduleSetting::gaussian_pr_strongly_convex;
    if (strongly && !(mf.mu > 0.0)) bad_key("mu", "strongly convex schedules require mu > 0");
  }
  if (logistic && mf.partition_p != 0 && mf.partition_p > mf.data.classes) {
    bad_key("partition.p", "must not exceed data.classes");
  }
  return mf;
}

RunManifest load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string serialize_config(const RunManifest& mf) {
  std::ostringstream out;
  out << "algorithm = " << to_string(mf.algorithm) << "\n";
  out << "objective = " << (mf.objective == ObjectiveKind::quadratic ? "quadratic" : "logistic") << "\n";
  out << "clients = " << mf.clients << "\n";
  out << "participants = " << mf.participants << "\n";
  out << "local_steps = " << mf.local_steps << "\n";
  out << "rounds = " << mf.rounds << "\n";
  if (mf.schedule) {
    out << "schedule = " << to_string(mf.schedule->setting) << "\n";
    out << "schedule.alpha = " << fmt(mf.schedule->alpha) << "\n";
    if (mf.schedule->c != kAutoConstant) out << "schedule.c = " << fmt(mf.schedule->c) << "\n";
  } else {
    out << "eta = " << fmt(mf.eta) << "\n";
    out << "eta_l = " << fmt(mf.eta_l) << "\n";
    if (mf.lambda) out << "lambda = " << fmt(*mf.lambda) << "\n";
    if (mf.lambda_pi) out << "lambda.pi = " << fmt(*mf.lambda_pi) << "\n";
    if (mf.lambda_pr) out << "lambda.pr = " << fmt(*mf.lambda_pr) << "\n";
  }
  out << "mu = " << fmt(mf.mu) << "\n";
  if (mf.objective == ObjectiveKind::quadratic) {
    out << "dim = " << mf.dim << "\n";
    if (!mf.x0.empty()) out << "x0 = " << fmt(mf.x0) << "\n";
  }
  out << "seed = " << mf.seed << "\n";
  out << "divergence_cap = " << fmt(mf.divergence_cap) << "\n";
  out << "aggregate_divisor = "
      << (mf.divisor == AggregateDivisor::participants ? "participants" : "total") << "\n";
  out << "noise.family = " << to_string(mf.noise.family) << "\n";
  out << "noise.alpha = " << fmt(mf.noise.alpha) << "\n";
  out << "noise.scale = " << fmt(mf.noise.scale) << "\n";
  out << "noise.location = " << fmt(mf.noise.location) << "\n";
  if (mf.objective == ObjectiveKind::logistic) {
    out << "data.classes = " << mf.data.classes << "\n";
    out << "data.features = " << mf.data.features << "\n";
    out << "data.per_class = " << mf.data.per_class << "\n";
    out << "data.separation = " << fmt(mf.data.separation) << "\n";
    if (!mf.data.csv_path.empty()) out << "data.csv = " << mf.data.csv_path << "\n";
    if (mf.partition_p != 0) out << "partition.p = " << mf.partition_p << "\n";
    out << "batch_size = " << mf.batch_size << "\n";
    out << "l2_reg = " << fmt(mf.l2_reg) << "\n";
  }
  out << "failure.nonfinite = " << (mf.failure.nonfinite_fails ? "true" : "false") << "\n";
  out << "failure.loss_blowup = " << fmt(mf.failure.loss_blowup_factor) << "\n";
  out << "failure.accuracy_drop = " << fmt(mf.failure.accuracy_drop) << "\n";
  out << "failure.min_rounds = " << mf.failure.min_rounds_observed << "\n";
  out << "trials = " << mf.trials << "\n";
  out << "out = " << mf.out_dir << "\n";
  out << "emit.rounds = " << (mf.emit_rounds ? "true" : "false") << "\n";
  out << "emit.norms = " << (mf.emit_norms ? "true" : "false") << "\n";
  out << "emit.summary = " << (mf.emit_summary ? "true" : "false") << "\n";
  return out.str();
}

namespace {

constexpr const char* kCauchyConvex = R"(# Strongly convex quadratic with per-coordinate Cauchy gradient noise.
# The server coefficient eta*eta_l/clients equals 0.1: with eta_l = 0.1 and
# 5 clients that pins eta = 5. Thresholds: lambda 3 per-iteration, 5 per-round.
algorithm = fat_pi
objective = quadratic
dim = 3
x0 = [2, 1, 1.5]
clients = 5
participants = 5
local_steps = 2
rounds = 300
eta = 5
eta_l = 0.1
lambda.pi = 3
lambda.pr = 5
mu = 1
noise.family = cauchy
noise.scale = 2.1
noise.location = 0
seed = 1
)";

constexpr const char* kAlphaSweep = R"(# Same quadratic setup driven by symmetric alpha-stable noise of unit scale;
# sweep the tail index over {0.5, 1.0, 1.5} with `sweep --axis alpha`.
algorithm = fat_pi
objective = quadratic
dim = 3
x0 = [2, 1, 1.5]
clients = 5
participants = 5
local_steps = 2
rounds = 300
eta = 5
eta_l = 0.1
lambda.pi = 3
lambda.pr = 5
mu = 1
noise.family = alpha_stable
noise.alpha = 1.5
noise.scale = 1
noise.location = 0
seed = 1
)";

// Desk-scale heterogeneous classification run: synthetic Gaussian blobs split
// by label (p classes per client), five of ten clients sampled per round,
// heavy-tailed noise injected into every stochastic gradient. A "local epoch"
// of the full-scale protocol corresponds to ceil(N_i / batch_size) steps here.
constexpr const char* kNonIidLogistic = R"(algorithm = fat_pi
objective = logistic
clients = 10
participants = 5
local_steps = 5
rounds = 80
eta = 4
eta_l = 0.05
lambda.pi = 5
lambda.pr = 15
mu = 0
noise.family = alpha_stable
noise.alpha = 1.2
noise.scale = 0.6
data.classes = 10
data.features = 20
data.per_class = 200
data.separation = 3
partition.p = 2
batch_size = 32
l2_reg = 0
seed = 1
)";

}  // namespace

std::vector<std::string> preset_names() {
  return {"cauchy-convex", "alpha-sweep", "noniid-logistic"};
}

std::string preset_text(const std::string& name) {
  if (name == "cauchy-convex") return kCauchyConvex;
  if (name == "alpha-sweep") return kAlphaSweep;
  if (name == "noniid-logistic") return kNonIidLogistic;
  throw std::invalid_argument("unknown preset: " + name);
}

RunManifest load_preset(const std::string& name) {
  RunManifest mf = parse_config(preset_text(name));
  mf.preset_name = name;
  return mf;
}

ResolvedRun resolve_run(const RunManifest& mf) {
  ResolvedRun run;
  run.manifest = mf;

  FLConfig& fl = run.fl;
  fl.algorithm = mf.algorithm;
  fl.m = mf.clients;
  fl.n = mf.participants;
  fl.K = mf.local_steps;
  fl.T = mf.rounds;
  fl.mu = mf.mu;
  fl.root_seed = mf.seed;
  fl.divergence_cap = mf.divergence_cap;
  fl.divisor = mf.divisor;

  if (mf.schedule) {
    run.plan = make_plan(mf.schedule->setting, mf.clients, mf.local_steps, mf.rounds,
                         mf.schedule->alpha, mf.mu > 0.0 ? mf.mu : 1.0, mf.schedule->c);
    fl.eta = run.plan->eta;
    fl.eta_l = run.plan->eta_l;
    fl.lambda_seq = run.plan->lambda_seq;
  } else {
    fl.eta = mf.eta;
    fl.eta_l = mf.eta_l;
    if (mf.algorithm != Algorithm::gfedavg) {
      std::optional<double> lambda = mf.lambda;
      if (!lambda) {
        lambda = mf.algorithm == Algorithm::fat_pi ? mf.lambda_pi : mf.lambda_pr;
      }
      if (!lambda) {
        throw std::invalid_argument(
            "invalid value for key 'lambda': required for clipping algorithms");
      }
      fl.lambda_seq.assign(static_cast<std::size_t>(mf.rounds), *lambda);
    }
  }

  if (mf.objective == ObjectiveKind::quadratic) {
    fl.dim = mf.dim;
    fl.x0 = mf.x0;
  } else {
    if (!mf.data.csv_path.empty()) {
      run.dataset = load_csv_dataset(mf.data.csv_path);
    } else {
      run.dataset = make_blob_dataset(mf.data.classes, mf.data.features,
                                      mf.data.per_class, mf.data.separation,
                                      RngStream(mf.seed).child(kDatasetTag));
    }
    fl.dim = run.dataset.class_count * run.dataset.feature_dim;
  }
  fl.validate();
  return run;
}

std::unique_ptr<Objective> ResolvedRun::make_objective(std::uint64_t trial) const {
  if (manifest.objective == ObjectiveKind::quadratic) {
    return std::make_unique<QuadraticObjective>(fl.dim, manifest.noise);
  }
  const int p = manifest.partition_p == 0 ? dataset.class_count : manifest.partition_p;
  PartitionSpec spec{fl.m, p};
  auto clients = partition_labels(dataset.labels, dataset.class_count, spec,
                                  RngStream(manifest.seed).child(trial).child(kPartitionSlot));
  return std::make_unique<FederatedLogistic>(dataset, std::move(clients),
                                             manifest.batch_size, manifest.l2_reg,
                                             manifest.noise);
}

}  // namespace fedsim
