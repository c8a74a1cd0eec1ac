#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <map>
#include <set>

#include "fedsim/engine.hpp"
#include "fedsim/metrics.hpp"
#include "fedsim/objectives.hpp"

using namespace fedsim;

namespace {

QuadraticObjective noiseless(int dim) { return QuadraticObjective(dim, NoiseSpec{}); }

FLConfig basic_quad_config() {
  FLConfig c;
  c.algorithm = Algorithm::gfedavg;
  c.m = 1;
  c.n = 1;
  c.K = 1;
  c.T = 1;
  c.eta = 1.0;
  c.eta_l = 0.1;
  c.dim = 1;
  c.x0 = {2.0};
  c.mu = 1.0;
  return c;
}

bool trajectories_identical(const Trajectory& a, const Trajectory& b) {
  if (a.final_x != b.final_x) return false;
  if (a.weighted_output != b.weighted_output) return false;
  if (a.records.size() != b.records.size()) return false;
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    const auto& ra = a.records[i];
    const auto& rb = b.records[i];
    if (ra.global_loss != rb.global_loss) return false;
    if (ra.global_grad_norm != rb.global_grad_norm) return false;
    if (ra.client_delta_norms != rb.client_delta_norms) return false;
    if (ra.client_sent_norms != rb.client_sent_norms) return false;
    if (ra.participants != rb.participants) return false;
    if (ra.clipped_count != rb.clipped_count) return false;
    if (ra.diverged != rb.diverged) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("local_pass_unclipped single exact gradient step") {
  const auto obj = noiseless(1);
  const auto out = local_pass_unclipped(obj, 0, {2.0}, 1, 0.1, RngStream(1).child(0));
  CHECK(out.sent == ParamVector{2.0});
  CHECK_FALSE(out.diverged);
}

TEST_CASE("local_pass_unclipped two-step hand iteration") {
  const auto obj = noiseless(1);
  // x1 = 1, grad 1; x2 = 1 - 0.5 = 0.5, grad 0.5; delta = 1.5
  const auto out = local_pass_unclipped(obj, 0, {1.0}, 2, 0.5, RngStream(1).child(0));
  CHECK(out.sent[0] == doctest::Approx(1.5).epsilon(1e-15));
}

TEST_CASE("local_pass_unclipped with zero step size freezes the iterate") {
  const auto obj = noiseless(2);
  const auto out = local_pass_unclipped(obj, 0, {2.0, -1.0}, 3, 0.0, RngStream(1).child(0));
  CHECK(out.sent[0] == doctest::Approx(6.0).epsilon(1e-15));
  CHECK(out.sent[1] == doctest::Approx(-3.0).epsilon(1e-15));
}

TEST_CASE("local_pass_pr clips only the transmitted sum") {
  const auto obj = noiseless(1);
  const auto out = local_pass_pr(obj, 0, {2.0}, 1, 0.1, 1.0, RngStream(1).child(0));
  CHECK(out.sent[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(out.was_clipped);
  CHECK(out.raw_norm == doctest::Approx(2.0).epsilon(1e-15));

  // passthrough when the threshold is generous
  const auto big = local_pass_pr(obj, 0, {2.0}, 1, 0.1, 100.0, RngStream(1).child(0));
  CHECK(big.sent == ParamVector{2.0});
  CHECK_FALSE(big.was_clipped);
  CHECK(big.sent_norm <= 100.0);
}

TEST_CASE("local_pass_pi clips each gradient before the update and the sum") {
  const auto obj = noiseless(1);
  const auto out = local_pass_pi(obj, 0, {2.0}, 1, 0.1, 1.0, RngStream(1).child(0));
  CHECK(out.sent[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(out.clipped_steps == 1);

  // K clipped summands obey the triangle bound K * lambda
  QuadraticObjective noisy(3, NoiseSpec{NoiseFamily::cauchy, 1.0, 2.0, 0.0});
  for (int i = 0; i < 200; ++i) {
    const auto o = local_pass_pi(noisy, 0, {1.0, 2.0, 3.0}, 4, 0.05, 1.5,
                                 RngStream(7).child(i));
    REQUIRE(o.sent_norm <= 4 * 1.5 + 1e-9);
  }
}

TEST_CASE("pi with huge lambda reproduces the unclipped pass bit-exactly") {
  QuadraticObjective noisy(2, NoiseSpec{NoiseFamily::cauchy, 1.0, 1.0, 0.0});
  for (int i = 0; i < 100; ++i) {
    const auto a = local_pass_unclipped(noisy, 0, {0.5, -0.25}, 3, 0.1, RngStream(9).child(i));
    const auto b = local_pass_pi(noisy, 0, {0.5, -0.25}, 3, 0.1, 1e18, RngStream(9).child(i));
    REQUIRE(a.sent == b.sent);
  }
}

TEST_CASE("sample_clients basics") {
  const auto all = sample_clients(5, 5, RngStream(1).child(0));
  CHECK(all == std::vector<int>{0, 1, 2, 3, 4});

  for (int i = 0; i < 200; ++i) {
    const auto s = sample_clients(10, 4, RngStream(2).child(i));
    std::set<int> uniq(s.begin(), s.end());
    REQUIRE(uniq.size() == 4);
    for (int c : s) {
      REQUIRE(c >= 0);
      REQUIRE(c < 10);
    }
  }
  CHECK_THROWS_AS(sample_clients(3, 4, RngStream(1)), std::invalid_argument);
}

TEST_CASE("sample_clients uniformity at n=1") {
  std::map<int, int> counts;
  const int reps = 100000;
  for (int i = 0; i < reps; ++i) {
    const auto s = sample_clients(10, 1, RngStream(3).child(i));
    counts[s[0]] += 1;
  }
  for (const auto& [idx, count] : counts) {
    (void)idx;
    CHECK(static_cast<double>(count) / reps == doctest::Approx(0.1).epsilon(0.1));
  }
  CHECK(counts.size() == 10);
}

TEST_CASE("server_aggregate hand values") {
  const auto out = server_aggregate({1.0}, {{2.0}, {4.0}}, 1.0, 0.1, 2);
  CHECK(out[0] == doctest::Approx(0.7).epsilon(1e-15));

  const auto fix = server_aggregate({1.5, -2.0}, {{0.0, 0.0}, {0.0, 0.0}}, 3.0, 0.2, 2);
  CHECK(fix == ParamVector{1.5, -2.0});

  const auto sub = server_aggregate({1.0, 1.0}, {{0.25, -0.5}}, 1.0, 1.0, 1);
  CHECK(sub[0] == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(sub[1] == doctest::Approx(1.5).epsilon(1e-15));

  CHECK_THROWS_AS(server_aggregate({1.0}, {}, 1.0, 1.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(server_aggregate({1.0}, {{1.0, 2.0}}, 1.0, 1.0, 1), std::invalid_argument);
}

TEST_CASE("full-participation aggregation equals the mean-update form exactly") {
  RngStream rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    RngStream it = rng.child(trial);
    const int m = 1 + static_cast<int>(it.uniform_index(6));
    const int d = 1 + static_cast<int>(it.uniform_index(4));
    ParamVector x(d);
    for (double& v : x) v = it.uniform();
    std::vector<ParamVector> deltas(m, ParamVector(d));
    for (auto& dv : deltas) {
      for (double& v : dv) v = 4.0 * (it.uniform() - 0.5);
    }
    const double eta = it.uniform() * 2.0;
    const double eta_l = it.uniform();

    const auto ours = server_aggregate(x, deltas, eta, eta_l, m);
    // Alg-style oracle: same coefficient and the same index-order summation.
    ParamVector sum(d, 0.0);
    for (const auto& dv : deltas) {
      for (int j = 0; j < d; ++j) sum[j] += dv[j];
    }
    const double coef = eta * eta_l / static_cast<double>(m);
    ParamVector expect = x;
    for (int j = 0; j < d; ++j) expect[j] += -coef * sum[j];
    REQUIRE(ours == expect);
  }
}

TEST_CASE("run_round single gradient-descent step") {
  const auto obj = noiseless(1);
  FLConfig c = basic_quad_config();
  const auto rr = run_round(obj, c, {2.0}, 1, RngStream(c.root_seed).child(0));
  CHECK(rr.x[0] == doctest::Approx(1.8).epsilon(1e-15));
  CHECK(rr.record.global_loss == doctest::Approx(1.62).epsilon(1e-12));
  CHECK(rr.record.client_delta_norms.size() == 1);
  CHECK_FALSE(rr.record.diverged);
}

TEST_CASE("record has one delta norm per participant") {
  QuadraticObjective obj(2, NoiseSpec{NoiseFamily::gaussian, 2.0, 1.0, 0.0});
  FLConfig c = basic_quad_config();
  c.m = 8;
  c.n = 3;
  c.dim = 2;
  c.x0 = {1.0, 1.0};
  const auto rr = run_round(obj, c, c.x0, 1, RngStream(5).child(0));
  CHECK(rr.record.client_delta_norms.size() == 3);
  CHECK(rr.record.participants.size() == 3);
  CHECK(rr.record.client_noise_norms.size() == 3);
}

TEST_CASE("fat_pi with huge lambda reproduces gfedavg bit-exactly") {
  QuadraticObjective obj(3, NoiseSpec{NoiseFamily::cauchy, 1.0, 0.5, 0.0});
  FLConfig base = basic_quad_config();
  base.m = 4;
  base.n = 2;
  base.K = 3;
  base.T = 20;
  base.dim = 3;
  base.x0 = {2, 1, 1.5};
  base.eta = 1.0;
  base.eta_l = 0.05;
  base.root_seed = 77;

  FLConfig pi = base;
  pi.algorithm = Algorithm::fat_pi;
  pi.lambda_seq.assign(20, 1e15);

  const auto t_g = run_experiment(obj, base, 0);
  const auto t_pi = run_experiment(obj, pi, 0);
  CHECK(t_g.final_x == t_pi.final_x);
  for (std::size_t i = 0; i < t_g.records.size(); ++i) {
    REQUIRE(t_g.records[i].global_loss == t_pi.records[i].global_loss);
  }
}

TEST_CASE("degeneracy chain: all three algorithms identical when clipping is inactive") {
  for (int trial = 0; trial < 5; ++trial) {
    RngStream it = RngStream(2000).child(trial);
    FLConfig base;
    base.m = 1 + static_cast<int>(it.uniform_index(5));
    base.n = 1 + static_cast<int>(it.uniform_index(base.m));
    base.K = 1 + static_cast<int>(it.uniform_index(3));
    base.T = 5 + static_cast<int>(it.uniform_index(10));
    base.dim = 1 + static_cast<int>(it.uniform_index(3));
    base.eta = 0.5 + it.uniform();
    base.eta_l = 0.2 / (base.K * base.eta);  // keep eta*eta_l*K <= 0.2, bounded run
    base.x0.assign(base.dim, 0.0);
    for (double& v : base.x0) v = 4.0 * (it.uniform() - 0.5);
    base.root_seed = it.next_u64();
    base.mu = 1.0;

    const QuadraticObjective obj(base.dim, NoiseSpec{});
    FLConfig g = base;
    g.algorithm = Algorithm::gfedavg;
    FLConfig pr = base;
    pr.algorithm = Algorithm::fat_pr;
    pr.lambda_seq.assign(base.T, 1e12);
    FLConfig pi = base;
    pi.algorithm = Algorithm::fat_pi;
    pi.lambda_seq.assign(base.T, 1e12);

    const auto tg = run_experiment(obj, g, 0);
    const auto tpr = run_experiment(obj, pr, 0);
    const auto tpi = run_experiment(obj, pi, 0);
    REQUIRE(trajectories_identical(tg, tpr));
    REQUIRE(trajectories_identical(tg, tpi));
  }
}

TEST_CASE("noise-free contraction: loss_t = 3.625 * 0.81^t") {
  const QuadraticObjective obj(3, NoiseSpec{});
  FLConfig c = basic_quad_config();
  c.dim = 3;
  c.x0 = {2, 1, 1.5};
  c.T = 50;
  const auto traj = run_experiment(obj, c, 0);
  REQUIRE(traj.records.size() == 50);
  double expect = 3.625;
  for (const auto& rec : traj.records) {
    expect *= 0.81;
    REQUIRE(rec.global_loss == doctest::Approx(expect).epsilon(1e-9));
  }
}

TEST_CASE("noise-free gfedavg decreases the loss monotonically when eta*eta_l*K <= 1") {
  const QuadraticObjective obj(3, NoiseSpec{});
  FLConfig c = basic_quad_config();
  c.dim = 3;
  c.x0 = {2, 1, 1.5};
  c.K = 4;
  c.eta = 1.0;
  c.eta_l = 0.25 / c.K;  // eta*eta_l*K = 0.25
  c.T = 30;
  const auto traj = run_experiment(obj, c, 0);
  double prev = traj.initial_loss;
  for (const auto& rec : traj.records) {
    REQUIRE(rec.global_loss < prev);
    prev = rec.global_loss;
  }
}

TEST_CASE("degenerate zero server rate keeps x0") {
  const QuadraticObjective obj(3, NoiseSpec{});
  FLConfig c = basic_quad_config();
  c.dim = 3;
  c.x0 = {2, 1, 1.5};
  c.eta = 0.0;
  c.T = 1;
  const auto traj = run_experiment(obj, c, 0);
  CHECK(traj.final_x == c.x0);
}

TEST_CASE("clipping dominance per round") {
  QuadraticObjective obj(3, NoiseSpec{NoiseFamily::cauchy, 1.0, 2.1, 0.0});
  FLConfig c = basic_quad_config();
  c.m = 5;
  c.n = 5;
  c.K = 2;
  c.T = 40;
  c.dim = 3;
  c.x0 = {2, 1, 1.5};
  c.eta = 5.0;
  c.eta_l = 0.1;
  c.root_seed = 9;

  FLConfig pr = c;
  pr.algorithm = Algorithm::fat_pr;
  pr.lambda_seq.assign(40, 5.0);
  const auto tpr = run_experiment(obj, pr, 0);
  for (const auto& rec : tpr.records) {
    for (double s : rec.client_sent_norms) REQUIRE(s <= 5.0 + 1e-12);
  }

  FLConfig pi = c;
  pi.algorithm = Algorithm::fat_pi;
  pi.lambda_seq.assign(40, 3.0);
  const auto tpi = run_experiment(obj, pi, 0);
  for (const auto& rec : tpi.records) {
    for (double s : rec.client_sent_norms) REQUIRE(s <= 2 * 3.0 + 1e-12);
  }
}

TEST_CASE("seed determinism across thread counts") {
  QuadraticObjective obj(3, NoiseSpec{NoiseFamily::alpha_stable, 1.5, 1.0, 0.0});
  FLConfig c = basic_quad_config();
  c.algorithm = Algorithm::fat_pi;
  c.m = 8;
  c.n = 6;
  c.K = 2;
  c.T = 25;
  c.dim = 3;
  c.x0 = {2, 1, 1.5};
  c.eta = 5.0;
  c.eta_l = 0.1;
  c.lambda_seq.assign(25, 3.0);
  c.root_seed = 123;

  for (int rep = 0; rep < 10; ++rep) {
    const auto t1 = run_experiment(obj, c, rep, 1);
    const auto t2 = run_experiment(obj, c, rep, 2);
    const auto t8 = run_experiment(obj, c, rep, 8);
    REQUIRE(trajectories_identical(t1, t2));
    REQUIRE(trajectories_identical(t1, t8));
  }
}

TEST_CASE("weighted reservoir matches the theorem weights (chi^2 over 1e5 picks)") {
  // base = 1 - mu*eta*eta_l*K/2 = 0.5 gives w_t = 2^(t-1): selection
  // probabilities (1/7, 2/7, 4/7) over three offered iterates.
  std::map<int, int> counts;
  const int reps = 100000;
  for (int rep = 0; rep < reps; ++rep) {
    WeightedIteratePicker picker(0.5);  // w_t = 2^(t-1): 1, 2, 4
    RngStream rng = RngStream(31337).child(rep);
    const ParamVector x1{1.0}, x2{2.0}, x3{3.0};
    picker.offer(x1, rng);
    picker.offer(x2, rng);
    picker.offer(x3, rng);
    counts[static_cast<int>(picker.pick()[0])] += 1;
  }
  const double expected[3] = {reps / 7.0, 2.0 * reps / 7.0, 4.0 * reps / 7.0};
  double chi2 = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double diff = counts[i + 1] - expected[i];
    chi2 += diff * diff / expected[i];
  }
  // dof = 2; p > 0.01 <=> chi2 < 9.21034
  CHECK(chi2 < 9.21034);
}

TEST_CASE("engine reservoir picks candidate iterates x_1..x_T with the right law") {
  // Noise-free contraction x_{t+1} = 0.5 x_t with mu*eta*eta_l*K = 1 -> w = 2^(t-1).
  const QuadraticObjective obj(1, NoiseSpec{});
  FLConfig c = basic_quad_config();
  c.dim = 1;
  c.x0 = {1.0};
  c.T = 3;
  c.K = 1;
  c.eta = 1.0;
  c.eta_l = 0.5;  // x: 1, 0.5, 0.25; mu*eta*eta_l*K = 0.5 -> base 0.75, w = (1, 4/3, 16/9)
  c.mu = 2.0;     // now mu*eta*eta_l*K = 1 -> w = (1, 2, 4)
  std::map<double, int> counts;
  const int reps = 100000;
  for (int rep = 0; rep < reps; ++rep) {
    c.root_seed = 50000;
    const auto traj = run_experiment(obj, c, rep);
    counts[traj.weighted_output[0]] += 1;
  }
  REQUIRE(counts.size() == 3);
  // candidates are the pre-update iterates 1, 0.5, 0.25 with weights 1, 2, 4
  const double expected[3] = {4.0 * reps / 7.0, 2.0 * reps / 7.0, reps / 7.0};
  double chi2 = 0.0;
  int i = 0;
  for (const auto& [value, count] : counts) {
    (void)value;
    const double diff = count - expected[i];
    chi2 += diff * diff / expected[i];
    ++i;
  }
  CHECK(chi2 < 9.21034);
}

TEST_CASE("divergence guard stops the run and flags the round") {
  // Huge server step on the quadratic: ||x|| grows ~9x per round from 2, so it
  // crosses a tight cap quickly and the run must stop at that round.
  const QuadraticObjective obj(1, NoiseSpec{});
  FLConfig c = basic_quad_config();
  c.eta = 100.0;  // x <- x - 10*x = -9x
  c.T = 50;
  c.divergence_cap = 1e6;
  const auto traj = run_experiment(obj, c, 0);
  CHECK(traj.terminated_early);
  REQUIRE_FALSE(traj.records.empty());
  CHECK(traj.records.back().diverged);
  CHECK(traj.records.size() < 50);
  CHECK(vec_all_finite(traj.final_x));
  // failure detector counts divergence as failure
  const auto rep = detect_failure(traj, FailurePolicy{});
  CHECK(rep.failed);
}
