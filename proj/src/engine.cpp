#include "fedsim/engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>

#include "fedsim/clipping.hpp"
#include "fedsim/metrics.hpp"

namespace fedsim {

const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::gfedavg: return "gfedavg";
    case Algorithm::fat_pr: return "fat_pr";
    case Algorithm::fat_pi: return "fat_pi";
  }
  return "gfedavg";
}

Algorithm algorithm_from_string(const std::string& name) {
  if (name == "gfedavg") return Algorithm::gfedavg;
  if (name == "fat_pr") return Algorithm::fat_pr;
  if (name == "fat_pi") return Algorithm::fat_pi;
  throw std::invalid_argument("unknown algorithm: " + name);
}

void FLConfig::validate() const {
  if (m < 1) throw std::invalid_argument("config: clients must be >= 1");
  if (n < 1 || n > m) throw std::invalid_argument("config: participants must lie in [1, clients]");
  if (K < 1) throw std::invalid_argument("config: local_steps must be >= 1");
  if (T < 1) throw std::invalid_argument("config: rounds must be >= 1");
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw std::invalid_argument("config: eta must be finite and >= 0");
  if (!(eta_l >= 0.0) || !std::isfinite(eta_l)) throw std::invalid_argument("config: eta_l must be finite and >= 0");
  if (dim < 1) throw std::invalid_argument("config: dim must be >= 1");
  if (!x0.empty() && static_cast<int>(x0.size()) != dim) {
    throw std::invalid_argument("config: x0 dimension must match dim");
  }
  if (!(divergence_cap > 0.0)) throw std::invalid_argument("config: divergence_cap must be > 0");
  if (algorithm != Algorithm::gfedavg) {
    if (static_cast<long>(lambda_seq.size()) != T) {
      throw std::invalid_argument("config: lambda sequence must have one entry per round");
    }
    for (double l : lambda_seq) {
      if (!(l > 0.0)) throw std::invalid_argument("config: clipping thresholds must be > 0");
    }
  }
}

double RoundRecord::clipped_fraction(Algorithm alg, int K) const {
  const std::size_t n = participants.size();
  std::size_t applications = 0;
  switch (alg) {
    case Algorithm::gfedavg: applications = 0; break;
    case Algorithm::fat_pr: applications = n; break;
    case Algorithm::fat_pi: applications = n * static_cast<std::size_t>(K); break;
  }
  if (applications == 0) return 0.0;
  return static_cast<double>(clipped_count) / static_cast<double>(applications);
}

namespace {

bool exceeds_cap(const ParamVector& v, double cap) {
  if (!vec_all_finite(v)) return true;
  return vec_norm(v) > cap;
}

enum class PassKind { unclipped, per_round, per_iteration };

LocalOutcome local_pass(const Objective& obj, int client, const ParamVector& x_t,
                        int K, double eta_l, double lambda, PassKind kind,
                        const RngStream& client_stream, double cap) {
  if (K < 1) throw std::invalid_argument("local pass: K must be >= 1");
  if (kind != PassKind::unclipped && !(lambda > 0.0)) {
    throw std::invalid_argument("local pass: lambda must be > 0");
  }
  LocalOutcome out;
  ParamVector x = x_t;
  ParamVector raw_sum(x_t.size(), 0.0);
  ParamVector sent_sum(x_t.size(), 0.0);
  for (int k = 1; k <= K; ++k) {
    RngStream step = client_stream.child(static_cast<std::uint64_t>(k));
    ParamVector g = obj.stoch_grad(client, x, step);
    if (exceeds_cap(g, cap)) {
      out.diverged = true;
      out.raw_norm = vec_norm(g);  // may be inf/nan; recorded as-is
      return out;
    }
    for (std::size_t i = 0; i < raw_sum.size(); ++i) raw_sum[i] += g[i];
    if (kind == PassKind::per_iteration) {
      ClipReport rep = clip(g, lambda);
      if (rep.was_clipped) ++out.clipped_steps;
      for (std::size_t i = 0; i < sent_sum.size(); ++i) sent_sum[i] += rep.output[i];
      vec_axpy(x, -eta_l, rep.output);
    } else {
      vec_axpy(x, -eta_l, g);
    }
    if (exceeds_cap(x, cap)) {
      out.diverged = true;
      out.raw_norm = vec_norm(raw_sum);
      return out;
    }
  }
  out.raw_norm = vec_norm(raw_sum);
  if (exceeds_cap(raw_sum, cap)) {
    out.diverged = true;
    return out;
  }
  switch (kind) {
    case PassKind::unclipped:
      out.sent = raw_sum;
      break;
    case PassKind::per_round: {
      ClipReport rep = clip(raw_sum, lambda);
      out.was_clipped = rep.was_clipped;
      if (rep.was_clipped) out.clipped_steps = 1;
      out.sent = std::move(rep.output);
      break;
    }
    case PassKind::per_iteration:
      out.sent = std::move(sent_sum);
      break;
  }
  out.raw = std::move(raw_sum);
  out.sent_norm = vec_norm(out.sent);
  return out;
}

}  // namespace

LocalOutcome local_pass_unclipped(const Objective& obj, int client,
                                  const ParamVector& x_t, int K, double eta_l,
                                  const RngStream& client_stream, double cap) {
  return local_pass(obj, client, x_t, K, eta_l, 0.0, PassKind::unclipped,
                    client_stream, cap);
}

LocalOutcome local_pass_pr(const Objective& obj, int client, const ParamVector& x_t,
                           int K, double eta_l, double lambda,
                           const RngStream& client_stream, double cap) {
  return local_pass(obj, client, x_t, K, eta_l, lambda, PassKind::per_round,
                    client_stream, cap);
}

LocalOutcome local_pass_pi(const Objective& obj, int client, const ParamVector& x_t,
                           int K, double eta_l, double lambda,
                           const RngStream& client_stream, double cap) {
  return local_pass(obj, client, x_t, K, eta_l, lambda, PassKind::per_iteration,
                    client_stream, cap);
}

std::vector<int> sample_clients(int m, int n, RngStream rng) {
  if (n < 1 || n > m) throw std::invalid_argument("sample_clients: need 1 <= n <= m");
  std::vector<int> pool(static_cast<std::size_t>(m));
  std::iota(pool.begin(), pool.end(), 0);
  // Partial Fisher-Yates: the first n entries are a uniform sample.
  for (int i = 0; i < n; ++i) {
    const auto j = i + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(m - i)));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(static_cast<std::size_t>(n));
  std::sort(pool.begin(), pool.end());
  return pool;
}

ParamVector server_aggregate(const ParamVector& x_t,
                             const std::vector<ParamVector>& deltas, double eta,
                             double eta_l, int divisor) {
  if (deltas.empty()) throw std::invalid_argument("server_aggregate: no deltas");
  if (divisor < 1) throw std::invalid_argument("server_aggregate: divisor must be >= 1");
  ParamVector sum(x_t.size(), 0.0);
  for (const auto& d : deltas) {
    check_same_dim(d, x_t);
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += d[i];
  }
  const double coef = eta * eta_l / static_cast<double>(divisor);
  ParamVector out = x_t;
  vec_axpy(out, -coef, sum);
  return out;
}

namespace {

constexpr std::uint64_t kSamplingSlot = 1;   // stream index m + kSamplingSlot
constexpr std::uint64_t kReservoirSlot = 2;  // stream index m + kReservoirSlot

void run_clients(const Objective& obj, const FLConfig& config,
                 const ParamVector& x_t, long t, const std::vector<int>& who,
                 const RngStream& round_stream, int threads,
                 std::vector<LocalOutcome>& out) {
  const double lambda =
      config.algorithm == Algorithm::gfedavg ? 0.0 : config.lambda_at(t);
  auto work = [&](std::size_t slot) {
    const int client = who[slot];
    RngStream cs = round_stream.child(static_cast<std::uint64_t>(client));
    switch (config.algorithm) {
      case Algorithm::gfedavg:
        out[slot] = local_pass_unclipped(obj, client, x_t, config.K, config.eta_l,
                                         cs, config.divergence_cap);
        break;
      case Algorithm::fat_pr:
        out[slot] = local_pass_pr(obj, client, x_t, config.K, config.eta_l, lambda,
                                  cs, config.divergence_cap);
        break;
      case Algorithm::fat_pi:
        out[slot] = local_pass_pi(obj, client, x_t, config.K, config.eta_l, lambda,
                                  cs, config.divergence_cap);
        break;
    }
  };
  const std::size_t n = who.size();
  const int workers = std::min<int>(threads, static_cast<int>(n));
  if (workers <= 1) {
    for (std::size_t s = 0; s < n; ++s) work(s);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t s = static_cast<std::size_t>(w); s < n;
           s += static_cast<std::size_t>(workers)) {
        work(s);
      }
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace

RoundResult run_round(const Objective& obj, const FLConfig& config,
                      const ParamVector& x_t, long t, const RngStream& trial_stream,
                      int threads) {
  RngStream round_stream = trial_stream.child(static_cast<std::uint64_t>(t));
  const std::vector<int> who = sample_clients(
      config.m, config.n,
      round_stream.child(static_cast<std::uint64_t>(config.m) + kSamplingSlot));

  std::vector<LocalOutcome> locals(who.size());
  run_clients(obj, config, x_t, t, who, round_stream, threads, locals);

  RoundRecord rec;
  rec.t = t;
  rec.participants = who;
  rec.client_delta_norms.reserve(who.size());
  rec.client_sent_norms.reserve(who.size());
  for (const auto& lo : locals) {
    rec.client_delta_norms.push_back(lo.raw_norm);
    rec.client_sent_norms.push_back(lo.diverged ? std::numeric_limits<double>::quiet_NaN()
                                                : lo.sent_norm);
    rec.clipped_count += lo.clipped_steps;
    rec.diverged = rec.diverged || lo.diverged;
  }

  ParamVector x_next = x_t;
  if (!rec.diverged) {
    if (who.size() >= 2) {
      std::vector<ParamVector> raws;
      raws.reserve(locals.size());
      for (const auto& lo : locals) raws.push_back(lo.raw);
      rec.client_noise_norms = pseudo_gradient_noise_norms(raws);
    }
    std::vector<ParamVector> sent;
    sent.reserve(locals.size());
    for (auto& lo : locals) sent.push_back(std::move(lo.sent));
    const int divisor = config.divisor == AggregateDivisor::participants
                            ? static_cast<int>(who.size())
                            : config.m;
    ParamVector candidate = server_aggregate(x_t, sent, config.eta, config.eta_l, divisor);
    if (exceeds_cap(candidate, config.divergence_cap)) {
      rec.diverged = true;  // iterate left at its last finite value
    } else {
      x_next = std::move(candidate);
    }
  }

  rec.global_loss = obj.loss(x_next);
  rec.global_grad_norm = vec_norm(obj.gradient(x_next));
  rec.accuracy = obj.accuracy(x_next);
  return RoundResult{std::move(x_next), std::move(rec)};
}

void WeightedIteratePicker::offer(const ParamVector& x, RngStream& rng) {
  const double u = rng.uniform();
  if (first_) {
    ratio_ = 1.0;
    pick_ = x;
    average_ = x;
    first_ = false;
    return;
  }
  // w_{t-1}/w_t = base, so  w_t / W_t = 1 / (1 + base / r_{t-1}).
  ratio_ = 1.0 / (1.0 + base_ / ratio_);
  if (u < ratio_) pick_ = x;
  for (std::size_t i = 0; i < average_.size(); ++i) {
    average_[i] = (1.0 - ratio_) * average_[i] + ratio_ * x[i];
  }
}

Trajectory run_experiment(const Objective& obj, const FLConfig& config,
                          std::uint64_t trial, int threads) {
  config.validate();

  Trajectory traj;
  traj.config = config;
  ParamVector x = config.x0.empty()
                      ? ParamVector(static_cast<std::size_t>(config.dim), 0.0)
                      : config.x0;
  traj.initial_loss = obj.loss(x);

  RngStream root(config.root_seed);
  RngStream trial_stream = root.child(trial);

  const bool strongly_convex = config.mu > 0.0;
  const double base = 1.0 - 0.5 * config.mu * config.eta * config.eta_l *
                                static_cast<double>(config.K);
  WeightedIteratePicker picker(base);

  traj.records.reserve(static_cast<std::size_t>(config.T));
  for (long t = 1; t <= config.T; ++t) {
    if (strongly_convex) {
      RngStream rs = trial_stream.child(static_cast<std::uint64_t>(t))
                         .child(static_cast<std::uint64_t>(config.m) + kReservoirSlot);
      picker.offer(x, rs);
    }
    RoundResult rr = run_round(obj, config, x, t, trial_stream, threads);
    x = std::move(rr.x);
    const bool diverged = rr.record.diverged;
    traj.records.push_back(std::move(rr.record));
    if (diverged) {
      traj.terminated_early = true;
      break;
    }
  }
  traj.final_x = std::move(x);
  if (strongly_convex) {
    traj.weighted_output = picker.pick();
    traj.weighted_average = picker.average();
  }
  return traj;
}

}  // namespace fedsim
