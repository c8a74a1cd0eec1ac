#include "fedsim/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace fedsim {

double quad_loss(const ParamVector& x) { return 0.5 * vec_dot(x, x); }

double QuadraticObjective::loss(const ParamVector& x) const { return quad_loss(x); }

ParamVector QuadraticObjective::stoch_grad(int /*client*/, const ParamVector& x,
                                           RngStream& rng) const {
  if (static_cast<int>(x.size()) != dim_) {
    throw std::invalid_argument("quad_stoch_grad: dimension mismatch");
  }
  if (noise_.family == NoiseFamily::none) return x;
  ParamVector g = sample_noise_vector(noise_, dim_, rng);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += x[i];
  return g;
}

ParamVector quad_stoch_grad(const QuadraticObjective& obj, const ParamVector& x,
                            RngStream& rng) {
  return obj.stoch_grad(0, x, rng);
}

LabeledDataset make_blob_dataset(int class_count, int feature_dim,
                                 int samples_per_class, double separation,
                                 RngStream rng) {
  if (class_count < 2 || feature_dim < 1 || samples_per_class < 1) {
    throw std::invalid_argument("make_blob_dataset: bad shape parameters");
  }
  std::vector<ParamVector> centers(class_count);
  for (int c = 0; c < class_count; ++c) {
    RngStream cs = rng.child(0).child(c);
    centers[c].resize(feature_dim);
    for (double& v : centers[c]) v = separation * cs.normal();
  }
  LabeledDataset out;
  out.feature_dim = feature_dim;
  out.class_count = class_count;
  out.features.reserve(static_cast<std::size_t>(class_count) * samples_per_class);
  out.labels.reserve(out.features.capacity());
  for (int c = 0; c < class_count; ++c) {
    for (int s = 0; s < samples_per_class; ++s) {
      RngStream ss = rng.child(1).child(c).child(s);
      ParamVector f(feature_dim);
      for (int j = 0; j < feature_dim; ++j) f[j] = centers[c][j] + ss.normal();
      out.features.push_back(std::move(f));
      out.labels.push_back(c);
    }
  }
  return out;
}

LabeledDataset load_csv_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty dataset file: " + path);
  if (line.rfind("label", 0) != 0) {
    throw std::runtime_error("dataset header must start with 'label': " + path);
  }
  LabeledDataset out;
  int max_label = -1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string cell;
    if (!std::getline(row, cell, ',')) continue;
    const int label = std::stoi(cell);
    if (label < 0) throw std::runtime_error("negative label in dataset: " + path);
    ParamVector f;
    while (std::getline(row, cell, ',')) f.push_back(std::stod(cell));
    if (out.feature_dim == 0) {
      out.feature_dim = static_cast<int>(f.size());
    } else if (static_cast<int>(f.size()) != out.feature_dim) {
      throw std::runtime_error("ragged feature row in dataset: " + path);
    }
    max_label = std::max(max_label, label);
    out.features.push_back(std::move(f));
    out.labels.push_back(label);
  }
  if (out.labels.empty()) throw std::runtime_error("dataset has no rows: " + path);
  out.class_count = max_label + 1;
  return out;
}

std::pair<double, ParamVector> LogisticObjective::loss_grad(
    const ParamVector& x, std::span<const int> batch) const {
  const int C = data_->class_count;
  const int F = data_->feature_dim;
  if (static_cast<int>(x.size()) != C * F) {
    throw std::invalid_argument("logistic_loss_grad: parameter dimension must be C*F");
  }
  if (batch.empty()) throw std::invalid_argument("logistic_loss_grad: empty batch");

  double loss = 0.0;
  ParamVector grad(x.size(), 0.0);
  std::vector<double> logits(C);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  for (int idx : batch) {
    if (idx < 0 || idx >= static_cast<int>(data_->size())) {
      throw std::out_of_range("logistic_loss_grad: sample index out of range");
    }
    const ParamVector& f = data_->features[idx];
    const int y = data_->labels[idx];
    for (int c = 0; c < C; ++c) {
      double z = 0.0;
      const double* w = x.data() + static_cast<std::size_t>(c) * F;
      for (int j = 0; j < F; ++j) z += w[j] * f[j];
      logits[c] = z;
    }
    const double zmax = *std::max_element(logits.begin(), logits.end());
    double denom = 0.0;
    for (int c = 0; c < C; ++c) denom += std::exp(logits[c] - zmax);
    loss += inv_b * (std::log(denom) - (logits[y] - zmax));
    for (int c = 0; c < C; ++c) {
      const double p = std::exp(logits[c] - zmax) / denom;
      const double coef = inv_b * (p - (c == y ? 1.0 : 0.0));
      double* g = grad.data() + static_cast<std::size_t>(c) * F;
      for (int j = 0; j < F; ++j) g[j] += coef * f[j];
    }
  }
  if (l2_reg_ != 0.0) {
    loss += 0.5 * l2_reg_ * vec_dot(x, x);
    vec_axpy(grad, l2_reg_, x);
  }
  return {loss, std::move(grad)};
}

double LogisticObjective::accuracy(const ParamVector& x,
                                   std::span<const int> indices) const {
  const int C = data_->class_count;
  const int F = data_->feature_dim;
  if (indices.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::size_t correct = 0;
  for (int idx : indices) {
    const ParamVector& f = data_->features[idx];
    int best = 0;
    double best_z = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < C; ++c) {
      double z = 0.0;
      const double* w = x.data() + static_cast<std::size_t>(c) * F;
      for (int j = 0; j < F; ++j) z += w[j] * f[j];
      if (z > best_z) { best_z = z; best = c; }
    }
    if (best == data_->labels[idx]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(indices.size());
}

std::pair<double, ParamVector> logistic_loss_grad(const LogisticObjective& obj,
                                                  const ParamVector& x,
                                                  std::span<const int> batch) {
  return obj.loss_grad(x, batch);
}

std::vector<std::vector<int>> partition_labels(std::span<const int> labels,
                                               int class_count,
                                               const PartitionSpec& spec,
                                               RngStream rng) {
  const int m = spec.m;
  const int p = spec.p;
  if (m < 1) throw std::invalid_argument("partition_labels: m must be >= 1");
  if (p < 1 || p > class_count) {
    throw std::invalid_argument("partition_labels: p must lie in [1, C]");
  }
  if ((static_cast<long long>(m) * p) % class_count != 0) {
    throw std::invalid_argument(
        "partition_labels: m*p must be divisible by the class count");
  }
  const int shards_per_class = static_cast<int>((static_cast<long long>(m) * p) / class_count);

  std::vector<std::vector<int>> by_class(class_count);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= class_count) {
      throw std::invalid_argument("partition_labels: label out of range");
    }
    by_class[labels[i]].push_back(static_cast<int>(i));
  }
  for (int c = 0; c < class_count; ++c) {
    if (static_cast<int>(by_class[c].size()) < shards_per_class) {
      throw std::invalid_argument(
          "partition_labels: class " + std::to_string(c) +
          " has fewer samples than shards (m exceeds the shard supply)");
    }
  }

  // Cut each class into equal shards; the last shard absorbs the remainder.
  struct Shard { int cls; std::vector<int> idx; };
  std::vector<std::vector<Shard>> shard_pool(class_count);
  for (int c = 0; c < class_count; ++c) {
    const auto& src = by_class[c];
    const std::size_t base = src.size() / shards_per_class;
    std::size_t pos = 0;
    for (int s = 0; s < shards_per_class; ++s) {
      const std::size_t take = (s == shards_per_class - 1) ? src.size() - pos : base;
      Shard sh;
      sh.cls = c;
      sh.idx.assign(src.begin() + pos, src.begin() + pos + take);
      pos += take;
      shard_pool[c].push_back(std::move(sh));
    }
    // Randomize which client ends up with which shard of the class.
    for (std::size_t i = shard_pool[c].size(); i > 1; --i) {
      const std::size_t j = rng.uniform_index(i);
      std::swap(shard_pool[c][i - 1], shard_pool[c][j]);
    }
  }

  // Assign p distinct classes to every client, always drawing from the
  // classes with the most undistributed shards. This keeps the assignment
  // feasible (max remaining count never exceeds the clients left) while the
  // random tie-breaking spreads class combinations across clients.
  std::vector<int> remaining(class_count, shards_per_class);
  std::vector<int> class_order(class_count);
  std::iota(class_order.begin(), class_order.end(), 0);
  std::vector<std::vector<int>> clients(m);
  for (int cl = 0; cl < m; ++cl) {
    for (std::size_t i = class_order.size(); i > 1; --i) {
      const std::size_t j = rng.uniform_index(i);
      std::swap(class_order[i - 1], class_order[j]);
    }
    std::stable_sort(class_order.begin(), class_order.end(),
                     [&](int a, int b) { return remaining[a] > remaining[b]; });
    for (int k = 0; k < p; ++k) {
      const int c = class_order[k];
      if (remaining[c] <= 0) {
        throw std::logic_error("partition_labels: shard assignment infeasible");
      }
      --remaining[c];
      const Shard& sh = shard_pool[c][remaining[c]];
      clients[cl].insert(clients[cl].end(), sh.idx.begin(), sh.idx.end());
    }
    std::sort(clients[cl].begin(), clients[cl].end());
  }
  return clients;
}

FederatedLogistic::FederatedLogistic(LabeledDataset data,
                                     std::vector<std::vector<int>> client_indices,
                                     int batch_size, double l2_reg,
                                     NoiseSpec injected_noise)
    : data_(std::move(data)),
      logistic_(data_, l2_reg),
      client_indices_(std::move(client_indices)),
      batch_size_(batch_size),
      injected_noise_(injected_noise) {
  if (batch_size_ < 1) throw std::invalid_argument("batch_size must be >= 1");
  injected_noise_.validate();
  all_indices_.resize(data_.size());
  std::iota(all_indices_.begin(), all_indices_.end(), 0);
  for (const auto& idx : client_indices_) {
    if (idx.empty()) throw std::invalid_argument("client with empty data shard");
  }
}

double FederatedLogistic::loss(const ParamVector& x) const {
  return logistic_.loss_grad(x, all_indices_).first;
}

ParamVector FederatedLogistic::gradient(const ParamVector& x) const {
  return logistic_.loss_grad(x, all_indices_).second;
}

ParamVector FederatedLogistic::stoch_grad(int client, const ParamVector& x,
                                          RngStream& rng) const {
  const auto& pool = client_indices_.at(static_cast<std::size_t>(client));
  std::vector<int> batch(static_cast<std::size_t>(batch_size_));
  for (int& b : batch) {
    b = pool[rng.uniform_index(pool.size())];
  }
  ParamVector g = logistic_.loss_grad(x, batch).second;
  if (injected_noise_.family != NoiseFamily::none) {
    ParamVector xi = sample_noise_vector(injected_noise_, dim(), rng);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += xi[i];
  }
  return g;
}

double FederatedLogistic::accuracy(const ParamVector& x) const {
  return logistic_.accuracy(x, all_indices_);
}

}  // namespace fedsim
