#pragma once

#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedsim/noise.hpp"
#include "fedsim/rng.hpp"
#include "fedsim/vec.hpp"

namespace fedsim {

// A federated objective f(x) = (1/m) sum_i f_i(x). Immutable after
// construction; all methods are pure and safe to call concurrently.
class Objective {
 public:
  virtual ~Objective() = default;
  virtual int dim() const = 0;
  // Deterministic global loss f(x), used for telemetry.
  virtual double loss(const ParamVector& x) const = 0;
  // Exact global gradient of f.
  virtual ParamVector gradient(const ParamVector& x) const = 0;
  // One stochastic gradient of f_client at x.
  virtual ParamVector stoch_grad(int client, const ParamVector& x,
                                 RngStream& rng) const = 0;
  // Classification accuracy on the full dataset, or NaN when undefined.
  virtual double accuracy(const ParamVector&) const {
    return std::numeric_limits<double>::quiet_NaN();
  }
};

// f_i(x, xi) = 0.5 ||x||^2 + <xi, x>; stochastic gradient x + xi.
// Strongly convex and smooth with mu = L = 1; optimum f(0) = 0.
class QuadraticObjective final : public Objective {
 public:
  QuadraticObjective(int dim, NoiseSpec noise) : dim_(dim), noise_(noise) {
    noise_.validate();
  }

  int dim() const override { return dim_; }
  double loss(const ParamVector& x) const override;
  ParamVector gradient(const ParamVector& x) const override { return x; }
  ParamVector stoch_grad(int client, const ParamVector& x,
                         RngStream& rng) const override;
  const NoiseSpec& noise() const { return noise_; }

 private:
  int dim_;
  NoiseSpec noise_;
};

double quad_loss(const ParamVector& x);
ParamVector quad_stoch_grad(const QuadraticObjective& obj, const ParamVector& x,
                            RngStream& rng);

struct LabeledDataset {
  int feature_dim = 0;
  int class_count = 0;
  std::vector<ParamVector> features;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
};

// Gaussian blob classification set: class centers drawn N(0, separation^2 I),
// samples center + N(0, I). Deterministic given the stream.
LabeledDataset make_blob_dataset(int class_count, int feature_dim,
                                 int samples_per_class, double separation,
                                 RngStream rng);

// CSV with header "label,f0,f1,..."; labels are non-negative integers.
LabeledDataset load_csv_dataset(const std::string& path);

// Multinomial logistic regression; parameters x are the row-major C x F
// weight matrix, loss = mean cross-entropy + (l2_reg/2)||x||^2.
class LogisticObjective {
 public:
  LogisticObjective(const LabeledDataset& data, double l2_reg)
      : data_(&data), l2_reg_(l2_reg) {}

  int dim() const { return data_->class_count * data_->feature_dim; }
  int class_count() const { return data_->class_count; }
  const LabeledDataset& data() const { return *data_; }
  double l2_reg() const { return l2_reg_; }

  std::pair<double, ParamVector> loss_grad(const ParamVector& x,
                                           std::span<const int> batch) const;
  double accuracy(const ParamVector& x, std::span<const int> indices) const;

 private:
  const LabeledDataset* data_;
  double l2_reg_;
};

std::pair<double, ParamVector> logistic_loss_grad(const LogisticObjective& obj,
                                                  const ParamVector& x,
                                                  std::span<const int> batch);

struct PartitionSpec {
  int m = 1;  // client count
  int p = 1;  // distinct classes per client; p = C is the i.i.d. split
};

// Label-based shard partition: each class is cut into m*p/C shards (the last
// shard of a class absorbs any remainder) and every client receives p shards
// of p distinct classes. Requires C | m*p. Deterministic given the stream;
// the result is a disjoint cover of all indices.
std::vector<std::vector<int>> partition_labels(std::span<const int> labels,
                                               int class_count,
                                               const PartitionSpec& spec,
                                               RngStream rng);

// The federated logistic objective: clients hold label-partition shards and
// draw minibatches of batch_size with replacement; optionally each stochastic
// gradient is perturbed with injected noise to emulate fat tails.
class FederatedLogistic final : public Objective {
 public:
  FederatedLogistic(LabeledDataset data, std::vector<std::vector<int>> client_indices,
                    int batch_size, double l2_reg, NoiseSpec injected_noise);
  // logistic_ points into data_; pinning the object keeps that reference valid.
  FederatedLogistic(const FederatedLogistic&) = delete;
  FederatedLogistic& operator=(const FederatedLogistic&) = delete;

  int dim() const override { return logistic_.dim(); }
  double loss(const ParamVector& x) const override;
  ParamVector gradient(const ParamVector& x) const override;
  ParamVector stoch_grad(int client, const ParamVector& x,
                         RngStream& rng) const override;
  double accuracy(const ParamVector& x) const override;

  const LogisticObjective& local() const { return logistic_; }
  const std::vector<std::vector<int>>& client_indices() const {
    return client_indices_;
  }

 private:
  LabeledDataset data_;
  LogisticObjective logistic_;
  std::vector<std::vector<int>> client_indices_;
  std::vector<int> all_indices_;
  int batch_size_;
  NoiseSpec injected_noise_;
};

}  // namespace fedsim
