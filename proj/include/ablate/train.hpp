#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "ablate/classifier.hpp"
#include "ablate/corpus.hpp"

namespace ablate {

struct TrainConfig {
  int hidden_units = 160;
  int max_epochs = 200;
  int batch_size = 32;
  double learning_rate = 0.3;
  double lr_decay = 0.995;     // multiplicative, per epoch
  double weight_decay = 1e-4;  // L2 on the weight matrices
  double target_accuracy = 0.95;
  double min_accuracy = 0.90;
  double val_fraction = 0.2;
  uint64_t seed = 0;
};

struct TrainResult {
  MlpClassifier model;
  double val_accuracy = 0.0;
  int epochs_run = 0;
  std::vector<double> epoch_losses;  // mean training cross-entropy per epoch
};

namespace detail {

inline double accuracy(const MlpClassifier& model, const std::vector<const AnnotatedSample*>& set) {
  int hits = 0;
  for (const AnnotatedSample* s : set) {
    const std::vector<double> p = model.evaluate(s->image);
    const int pred = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
    if (pred == s->label) ++hits;
  }
  return set.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(set.size());
}

}  // namespace detail

// Mini-batch gradient descent on cross-entropy until the validation split
// reaches the target accuracy or the epoch budget runs out. Deterministic
// given the seed: the split, the initialization, and the batch order all
// derive from it. Fails if the budget is exhausted below min_accuracy.
inline TrainResult train_reference_model(const std::vector<AnnotatedSample>& corpus,
                                         const TrainConfig& config) {
  if (corpus.size() < 10) throw value_error("train_reference_model: corpus too small");
  int class_count = 0;
  for (const AnnotatedSample& s : corpus) class_count = std::max(class_count, s.label + 1);
  if (class_count < 2) throw value_error("train_reference_model: need at least two classes");
  const GridDomain domain = corpus[0].image.domain;
  const int channels = corpus[0].image.channels;
  for (const AnnotatedSample& s : corpus)
    if (!(s.image.domain == domain) || s.image.channels != channels)
      throw value_error("train_reference_model: inconsistent image shapes in corpus");

  Rng rng(Rng::mix(config.seed, 0x7261696eULL));
  std::vector<int> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  for (size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[rng.uniform_int(0, static_cast<int>(i) - 1)]);

  const size_t val_count =
      std::max<size_t>(1, static_cast<size_t>(config.val_fraction * corpus.size()));
  std::vector<const AnnotatedSample*> val_set, train_set;
  for (size_t i = 0; i < order.size(); ++i)
    (i < val_count ? val_set : train_set).push_back(&corpus[order[i]]);

  MlpClassifier model(domain, channels, config.hidden_units, class_count, config.seed);
  const int d = model.dim();
  const int hid = model.hidden;

  TrainResult result;
  // Batch gradients accumulate into a fixed number of shards (parallelizable)
  // that are always reduced in shard order, so training is deterministic for
  // any thread count.
  constexpr int kShards = 4;
  struct Shard {
    std::vector<double> dw1, db1, dw2, db2;
    double loss = 0.0;
  };
  std::vector<Shard> shards(kShards);
  for (Shard& s : shards) {
    s.dw1.assign(model.w1.size(), 0.0);
    s.db1.assign(hid, 0.0);
    s.dw2.assign(model.w2.size(), 0.0);
    s.db2.assign(class_count, 0.0);
  }
  std::vector<int> train_order(train_set.size());
  std::iota(train_order.begin(), train_order.end(), 0);
  double lr = config.learning_rate;
  const int threads = std::min<int>(kShards, std::max(1u, std::thread::hardware_concurrency()));

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    for (size_t i = train_order.size(); i > 1; --i)
      std::swap(train_order[i - 1], train_order[rng.uniform_int(0, static_cast<int>(i) - 1)]);

    double loss_sum = 0.0;
    size_t pos = 0;
    while (pos < train_order.size()) {
      const size_t batch_end = std::min(pos + config.batch_size, train_order.size());
      const double inv_batch = 1.0 / static_cast<double>(batch_end - pos);

      const auto accumulate_shard = [&](int shard_id) {
        Shard& s = shards[shard_id];
        std::fill(s.dw1.begin(), s.dw1.end(), 0.0);
        std::fill(s.db1.begin(), s.db1.end(), 0.0);
        std::fill(s.dw2.begin(), s.dw2.end(), 0.0);
        std::fill(s.db2.begin(), s.db2.end(), 0.0);
        s.loss = 0.0;
        std::vector<double> h(hid), z(class_count), dh(hid);
        for (size_t b = pos + shard_id; b < batch_end; b += kShards) {
          const AnnotatedSample& sample = *train_set[train_order[b]];
          const std::vector<double>& x = sample.image.values;
          for (int j = 0; j < hid; ++j) {
            double acc = model.b1[j];
            const double* row = &model.w1[static_cast<size_t>(j) * d];
            for (int i = 0; i < d; ++i) acc += row[i] * x[i];
            h[j] = std::tanh(acc);
          }
          for (int k = 0; k < class_count; ++k) {
            double acc = model.b2[k];
            const double* row = &model.w2[static_cast<size_t>(k) * hid];
            for (int j = 0; j < hid; ++j) acc += row[j] * h[j];
            z[k] = acc;
          }
          const std::vector<double> p = detail::softmax(z);
          s.loss += -std::log(std::max(p[sample.label], 1e-300));

          std::fill(dh.begin(), dh.end(), 0.0);
          for (int k = 0; k < class_count; ++k) {
            const double dz = p[k] - (k == sample.label ? 1.0 : 0.0);
            s.db2[k] += dz;
            double* w2row = &s.dw2[static_cast<size_t>(k) * hid];
            const double* row = &model.w2[static_cast<size_t>(k) * hid];
            for (int j = 0; j < hid; ++j) {
              w2row[j] += dz * h[j];
              dh[j] += dz * row[j];
            }
          }
          for (int j = 0; j < hid; ++j) {
            const double da = dh[j] * (1.0 - h[j] * h[j]);
            s.db1[j] += da;
            double* w1row = &s.dw1[static_cast<size_t>(j) * d];
            for (int i = 0; i < d; ++i) w1row[i] += da * x[i];
          }
        }
      };
      if (threads > 1) {
        std::vector<std::thread> pool;
        for (int t = 0; t < kShards; ++t) pool.emplace_back(accumulate_shard, t);
        for (std::thread& t : pool) t.join();
      } else {
        for (int t = 0; t < kShards; ++t) accumulate_shard(t);
      }

      const double step = lr * inv_batch;
      const double shrink = 1.0 - lr * config.weight_decay;
      for (size_t i = 0; i < model.w1.size(); ++i) {
        double g = shards[0].dw1[i];
        for (int t = 1; t < kShards; ++t) g += shards[t].dw1[i];
        model.w1[i] = shrink * model.w1[i] - step * g;
      }
      for (int j = 0; j < hid; ++j) {
        double g = shards[0].db1[j];
        for (int t = 1; t < kShards; ++t) g += shards[t].db1[j];
        model.b1[j] -= step * g;
      }
      for (size_t i = 0; i < model.w2.size(); ++i) {
        double g = shards[0].dw2[i];
        for (int t = 1; t < kShards; ++t) g += shards[t].dw2[i];
        model.w2[i] = shrink * model.w2[i] - step * g;
      }
      for (int k = 0; k < class_count; ++k) {
        double g = shards[0].db2[k];
        for (int t = 1; t < kShards; ++t) g += shards[t].db2[k];
        model.b2[k] -= step * g;
      }
      for (int t = 0; t < kShards; ++t) loss_sum += shards[t].loss;
      pos = batch_end;
    }

    result.epoch_losses.push_back(loss_sum / static_cast<double>(train_set.size()));
    result.epochs_run = epoch + 1;
    result.val_accuracy = detail::accuracy(model, val_set);
    lr *= config.lr_decay;
    if (result.val_accuracy >= config.target_accuracy) break;
  }

  model.val_accuracy = result.val_accuracy;
  if (result.val_accuracy < config.min_accuracy)
    throw training_error("train_reference_model: budget exhausted at validation accuracy " +
                             std::to_string(result.val_accuracy) + " after " +
                             std::to_string(result.epochs_run) + " epochs (required " +
                             std::to_string(config.min_accuracy) + ")",
                         result.val_accuracy);
  result.model = std::move(model);
  return result;
}

}  // namespace ablate
