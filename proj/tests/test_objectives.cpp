#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "fedsim/objectives.hpp"

using namespace fedsim;

TEST_CASE("quad_loss") {
  CHECK(quad_loss({0, 0, 0}) == 0.0);
  CHECK(quad_loss({2, 1, 1.5}) == doctest::Approx(3.625).epsilon(1e-15));
  CHECK(quad_loss({1, -1}) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("quad_stoch_grad with no noise is the exact gradient, exactly") {
  QuadraticObjective obj(3, NoiseSpec{});
  RngStream rng(1);
  const ParamVector x{2, 1, 1.5};
  CHECK(quad_stoch_grad(obj, x, rng) == x);
  RngStream r2(7);
  for (int i = 0; i < 50; ++i) {
    RngStream it = r2.child(i);
    ParamVector y(3);
    for (double& v : y) v = 10 * (it.uniform() - 0.5);
    REQUIRE(quad_stoch_grad(obj, y, it) == y);
  }
}

TEST_CASE("quad_stoch_grad dimension mismatch") {
  QuadraticObjective obj(3, NoiseSpec{});
  RngStream rng(1);
  CHECK_THROWS_AS(quad_stoch_grad(obj, {1, 2}, rng), std::invalid_argument);
}

TEST_CASE("quad_stoch_grad is unbiased under gaussian noise") {
  QuadraticObjective obj(2, NoiseSpec{NoiseFamily::gaussian, 2.0, 1.0, 0.0});
  RngStream rng(11);
  const ParamVector x{1, 1};
  double s0 = 0.0, s1 = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    RngStream it = rng.child(i);
    const ParamVector g = quad_stoch_grad(obj, x, it);
    s0 += g[0];
    s1 += g[1];
  }
  CHECK(s0 / n == doctest::Approx(1.0).epsilon(0.02));
  CHECK(s1 / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("strong convexity holds with equality for the quadratic") {
  RngStream rng(13);
  for (int i = 0; i < 100; ++i) {
    RngStream it = rng.child(i);
    ParamVector x(4), y(4);
    for (double& v : x) v = 6 * (it.uniform() - 0.5);
    for (double& v : y) v = 6 * (it.uniform() - 0.5);
    const ParamVector grad = x;  // exact gradient
    const ParamVector d = vec_sub(y, x);
    const double rhs = quad_loss(x) + vec_dot(grad, d) + 0.5 * vec_dot(d, d);
    REQUIRE(quad_loss(y) == doctest::Approx(rhs).epsilon(1e-9));
  }
}

namespace {

LabeledDataset tiny_binary() {
  LabeledDataset d;
  d.feature_dim = 1;
  d.class_count = 2;
  d.features = {{1.0}, {-1.0}};
  d.labels = {0, 1};
  return d;
}

}  // namespace

TEST_CASE("logistic loss at zero weights on a balanced batch is ln 2") {
  const auto data = tiny_binary();
  LogisticObjective obj(data, 0.0);
  const std::vector<int> batch{0, 1};
  const auto [loss, grad] = logistic_loss_grad(obj, ParamVector(2, 0.0), batch);
  CHECK(loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(grad.size() == 2);
}

TEST_CASE("logistic zero-feature sample: gradient reduces to the regularizer") {
  LabeledDataset d;
  d.feature_dim = 1;
  d.class_count = 2;
  d.features = {{0.0}};
  d.labels = {0};
  LogisticObjective obj(d, 1.0);
  const ParamVector x{0.7, -0.3};
  const std::vector<int> batch{0};
  const auto [loss, grad] = logistic_loss_grad(obj, x, batch);
  CHECK(grad[0] == doctest::Approx(x[0]).epsilon(1e-12));
  CHECK(grad[1] == doctest::Approx(x[1]).epsilon(1e-12));
  CHECK(loss == doctest::Approx(std::log(2.0) + 0.5 * (0.49 + 0.09)).epsilon(1e-12));
}

TEST_CASE("logistic errors") {
  const auto data = tiny_binary();
  LogisticObjective obj(data, 0.0);
  CHECK_THROWS_AS(logistic_loss_grad(obj, ParamVector(2, 0.0), std::vector<int>{}),
                  std::invalid_argument);
  CHECK_THROWS_AS(logistic_loss_grad(obj, ParamVector(2, 0.0), std::vector<int>{5}),
                  std::out_of_range);
  CHECK_THROWS_AS(logistic_loss_grad(obj, ParamVector(3, 0.0), std::vector<int>{0}),
                  std::invalid_argument);
}

TEST_CASE("logistic gradient matches central finite differences") {
  RngStream rng(17);
  const LabeledDataset data =
      make_blob_dataset(3, 4, 10, 2.0, RngStream(500).child(0));
  LogisticObjective obj(data, 0.01);
  const int dim = 3 * 4;
  const double h = 1e-5;
  for (int trial = 0; trial < 50; ++trial) {
    RngStream it = rng.child(trial);
    ParamVector x(dim);
    for (double& v : x) v = 2.0 * (it.uniform() - 0.5);
    std::vector<int> batch;
    const int bs = 1 + static_cast<int>(it.uniform_index(8));
    for (int b = 0; b < bs; ++b) {
      batch.push_back(static_cast<int>(it.uniform_index(data.size())));
    }
    const auto [loss, grad] = obj.loss_grad(x, batch);
    (void)loss;
    double max_err = 0.0;
    for (int j = 0; j < dim; ++j) {
      ParamVector xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      const double fd = (obj.loss_grad(xp, batch).first - obj.loss_grad(xm, batch).first) / (2 * h);
      max_err = std::max(max_err, std::abs(fd - grad[j]));
    }
    REQUIRE(max_err < 1e-6);
  }
}

TEST_CASE("partition_labels: single-class clients at p=1") {
  std::vector<int> labels;
  for (int c = 0; c < 10; ++c) {
    for (int i = 0; i < 100; ++i) labels.push_back(c);
  }
  const auto clients =
      partition_labels(labels, 10, PartitionSpec{10, 1}, RngStream(3).child(0));
  REQUIRE(clients.size() == 10);
  std::set<int> classes_covered;
  for (const auto& idx : clients) {
    REQUIRE(idx.size() == 100);
    std::set<int> cls;
    for (int i : idx) cls.insert(labels[i]);
    REQUIRE(cls.size() == 1);
    classes_covered.insert(*cls.begin());
  }
  CHECK(classes_covered.size() == 10);
}

TEST_CASE("partition_labels: p=C is the i.i.d. split") {
  std::vector<int> labels;
  for (int c = 0; c < 10; ++c) {
    for (int i = 0; i < 40; ++i) labels.push_back(c);
  }
  const auto clients =
      partition_labels(labels, 10, PartitionSpec{10, 10}, RngStream(4).child(0));
  for (const auto& idx : clients) {
    std::set<int> cls;
    for (int i : idx) cls.insert(labels[i]);
    REQUIRE(cls.size() == 10);
    REQUIRE(idx.size() == 40);
  }
}

TEST_CASE("partition_labels: disjoint cover, exactly p classes, determinism") {
  RngStream rng(19);
  for (int trial = 0; trial < 30; ++trial) {
    RngStream it = rng.child(trial);
    const int C = 2 + static_cast<int>(it.uniform_index(6));
    const int m = 1 + static_cast<int>(it.uniform_index(8));
    std::vector<int> ps;
    for (int p = 1; p <= C; ++p) {
      if ((m * p) % C == 0) ps.push_back(p);
    }
    if (ps.empty()) continue;
    const int p = ps[it.uniform_index(ps.size())];
    const int per_class = 3 * m * p;  // divisible by shards per class
    std::vector<int> labels;
    for (int c = 0; c < C; ++c) {
      for (int i = 0; i < per_class; ++i) labels.push_back(c);
    }

    const auto a = partition_labels(labels, C, PartitionSpec{m, p}, RngStream(77).child(trial));
    const auto b = partition_labels(labels, C, PartitionSpec{m, p}, RngStream(77).child(trial));
    REQUIRE(a == b);

    std::vector<int> seen(labels.size(), 0);
    for (const auto& idx : a) {
      std::set<int> cls;
      for (int i : idx) {
        REQUIRE(i >= 0);
        REQUIRE(i < static_cast<int>(labels.size()));
        seen[i] += 1;
        cls.insert(labels[i]);
      }
      REQUIRE(static_cast<int>(cls.size()) == p);
      // balanced within +-1 of N/m on divisible inputs
      REQUIRE(std::abs(static_cast<long>(idx.size()) -
                       static_cast<long>(labels.size() / m)) <= 1);
    }
    for (int count : seen) REQUIRE(count == 1);
  }
}

TEST_CASE("partition_labels errors") {
  std::vector<int> labels{0, 0, 1, 1};
  CHECK_THROWS_AS(partition_labels(labels, 2, PartitionSpec{2, 3}, RngStream(1)),
                  std::invalid_argument);
  // m*p not divisible by C
  CHECK_THROWS_AS(partition_labels(labels, 2, PartitionSpec{3, 1}, RngStream(1)),
                  std::invalid_argument);
  // class shard supply exhausted: 1 sample in class 0, 2 shards wanted
  std::vector<int> skew{0, 1, 1, 1};
  CHECK_THROWS_AS(partition_labels(skew, 2, PartitionSpec{2, 2}, RngStream(1)),
                  std::invalid_argument);
}

TEST_CASE("blob dataset shape and determinism") {
  const auto d1 = make_blob_dataset(3, 5, 7, 2.0, RngStream(42).child(9));
  const auto d2 = make_blob_dataset(3, 5, 7, 2.0, RngStream(42).child(9));
  CHECK(d1.features == d2.features);
  CHECK(d1.labels == d2.labels);
  CHECK(d1.size() == 21);
  CHECK(d1.feature_dim == 5);
  CHECK(d1.class_count == 3);
}

TEST_CASE("federated logistic: client batches come from the client shard") {
  const auto data = make_blob_dataset(4, 3, 8, 3.0, RngStream(90).child(0));
  auto clients = partition_labels(data.labels, 4, PartitionSpec{4, 1}, RngStream(91));
  FederatedLogistic obj(data, clients, 4, 0.0, NoiseSpec{});
  CHECK(obj.dim() == 12);
  const ParamVector x(12, 0.0);
  CHECK(obj.loss(x) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK(obj.accuracy(x) >= 0.0);
  RngStream rng(92);
  const ParamVector g = obj.stoch_grad(0, x, rng);
  CHECK(g.size() == 12);
}
