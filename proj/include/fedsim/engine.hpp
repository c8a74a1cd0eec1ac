#pragma once

#include <cstdint>
#include <vector>

#include "fedsim/objectives.hpp"
#include "fedsim/rng.hpp"
#include "fedsim/vec.hpp"

namespace fedsim {

enum class Algorithm { gfedavg, fat_pr, fat_pi };
enum class AggregateDivisor { participants, total };

const char* to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& name);

struct FLConfig {
  Algorithm algorithm = Algorithm::gfedavg;
  int m = 1;           // total clients
  int n = 1;           // participating clients per round
  int K = 1;           // local steps
  long T = 1;          // communication rounds
  double eta = 1.0;    // server rate
  double eta_l = 0.1;  // client rate
  std::vector<double> lambda_seq;  // per-round thresholds, length T (clipping only)
  int dim = 1;
  ParamVector x0;
  std::uint64_t root_seed = 0;
  double mu = 0.0;  // strong-convexity constant; 0 = unknown/nonconvex
  double divergence_cap = 1e12;
  AggregateDivisor divisor = AggregateDivisor::participants;

  void validate() const;
  double lambda_at(long t) const { return lambda_seq[static_cast<std::size_t>(t - 1)]; }
};

struct RoundRecord {
  long t = 0;
  double global_loss = 0.0;
  double global_grad_norm = 0.0;
  double accuracy = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> client_delta_norms;  // ||Delta_i|| before any clipping
  std::vector<double> client_sent_norms;   // ||transmitted update||
  std::vector<double> client_noise_norms;  // ||Delta_i - mean_j Delta_j|| (n >= 2)
  std::vector<int> participants;
  int clipped_count = 0;
  bool diverged = false;

  double clipped_fraction(Algorithm alg, int K) const;
};

struct Trajectory {
  FLConfig config;
  double initial_loss = 0.0;
  std::vector<RoundRecord> records;
  ParamVector final_x;
  // Random iterate pick with weights w_t = (1 - mu*eta*eta_l*K/2)^(1-t);
  // populated only for strongly convex runs (mu > 0).
  ParamVector weighted_output;
  // Deterministic weighted average over the same weights (diagnostic).
  ParamVector weighted_average;
  bool terminated_early = false;
};

struct LocalOutcome {
  ParamVector sent;       // update transmitted to the server
  ParamVector raw;        // sum of unclipped stochastic gradients
  double raw_norm = 0.0;  // ||raw||
  double sent_norm = 0.0;
  int clipped_steps = 0;  // per-iteration clipping events
  bool was_clipped = false;  // per-round clipping event
  bool diverged = false;
};

// K local SGD steps from x_t; returns the sum of the K stochastic gradients
// (so the local end state is x_t - eta_l * Delta). Draws for step k come from
// client_stream.child(k).
LocalOutcome local_pass_unclipped(const Objective& obj, int client,
                                  const ParamVector& x_t, int K, double eta_l,
                                  const RngStream& client_stream,
                                  double divergence_cap = 1e12);

// Same local trajectory as the unclipped pass; only the transmitted sum is
// clipped, once.
LocalOutcome local_pass_pr(const Objective& obj, int client, const ParamVector& x_t,
                           int K, double eta_l, double lambda,
                           const RngStream& client_stream,
                           double divergence_cap = 1e12);

// Every stochastic gradient is clipped before both the local update and the
// transmitted sum.
LocalOutcome local_pass_pi(const Objective& obj, int client, const ParamVector& x_t,
                           int K, double eta_l, double lambda,
                           const RngStream& client_stream,
                           double divergence_cap = 1e12);

// n distinct indices from [0, m), uniform without replacement, ascending.
std::vector<int> sample_clients(int m, int n, RngStream rng);

// x_t - (eta*eta_l/divisor) * sum(deltas).
ParamVector server_aggregate(const ParamVector& x_t,
                             const std::vector<ParamVector>& deltas, double eta,
                             double eta_l, int divisor);

struct RoundResult {
  ParamVector x;
  RoundRecord record;
};

RoundResult run_round(const Objective& obj, const FLConfig& config,
                      const ParamVector& x_t, long t, const RngStream& trial_stream,
                      int threads = 1);

// Full experiment for one trial. Client passes within a round may execute on
// up to `threads` workers; results are bit-identical for any thread count.
Trajectory run_experiment(const Objective& obj, const FLConfig& config,
                          std::uint64_t trial = 0, int threads = 1);

// Sequential one-item weighted reservoir over geometrically growing weights
// w_t = base^(1-t), evaluated with ratios so no weight is ever materialized.
class WeightedIteratePicker {
 public:
  explicit WeightedIteratePicker(double base) : base_(base < 0.0 ? 0.0 : base) {}

  // Offer the round-t candidate; one uniform draw decides replacement.
  void offer(const ParamVector& x, RngStream& rng);

  bool has_pick() const { return !pick_.empty(); }
  const ParamVector& pick() const { return pick_; }
  const ParamVector& average() const { return average_; }

 private:
  double base_;
  double ratio_ = 1.0;  // w_t / sum_{j<=t} w_j for the last offered t
  bool first_ = true;
  ParamVector pick_;
  ParamVector average_;
};

}  // namespace fedsim
