#include "gradorth/trainer.hpp"

#include <cmath>
#include <numeric>

#include "gradorth/error.hpp"
#include "gradorth/rng.hpp"

namespace gradorth {

namespace {

constexpr std::uint64_t kShuffleStreamBase = 1000;

}  // namespace

double mean_loss(const Network& net, const Matrix& inputs, const Matrix& targets) {
  double total = 0.0;
  for (std::size_t i = 0; i < inputs.rows(); ++i) total += loss_value(net, inputs.row(i), targets.row(i));
  return inputs.rows() == 0 ? 0.0 : total / static_cast<double>(inputs.rows());
}

double accuracy(const Network& net, const DatasetSplit& data) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (argmax(forward(net, data.sample(i)).logits) == data.labels[i]) ++correct;
  }
  return data.size() == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(data.size());
}

Matrix one_hot_targets(const DatasetSplit& data) {
  Matrix t(data.size(), data.num_classes);
  for (std::size_t i = 0; i < data.size(); ++i) t(i, data.labels[i]) = 1.0;
  return t;
}

Network train_sgd(Network net, const Matrix& inputs, const Matrix& targets, const TrainOptions& options,
                  TrainLog* log) {
  if (net.frozen()) throw StateError("train_sgd: network is already frozen");
  if (options.batch == 0) throw ConfigError("train_sgd: batch must be >= 1");
  if (inputs.rows() != targets.rows()) {
    throw DimensionError("train_sgd: " + inputs.shape_string() + " inputs vs " +
                         targets.shape_string() + " targets");
  }
  const std::size_t n = inputs.rows();
  std::vector<double> history;
  history.push_back(mean_loss(net, inputs, targets));
  bool monotone = true;

  std::vector<std::size_t> order(n);
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    CounterRng rng(options.seed, kShuffleStreamBase + epoch);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.uniform_index(i)]);

    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < n; start += options.batch, ++batch_index) {
      const std::size_t end = std::min(n, start + options.batch);
      std::vector<Matrix> sums;
      for (std::size_t b = start; b < end; ++b) {
        GradientRecord rec = all_layer_gradients(net, inputs.row(order[b]), targets.row(order[b]));
        if (sums.empty()) {
          sums = std::move(rec.gradients);
        } else {
          for (std::size_t l = 0; l < sums.size(); ++l) sums[l] = sums[l] + rec.gradients[l];
        }
      }
      const double step = options.lr / static_cast<double>(end - start);
      for (std::size_t l = 0; l < sums.size(); ++l) {
        Matrix updated = net.layer(l).weights - step * sums[l];
        if (!updated.all_finite()) {
          throw NumericError("train_sgd: non-finite weights at epoch " + std::to_string(epoch) +
                             ", batch " + std::to_string(batch_index));
        }
        net.set_weights(l, std::move(updated));
      }
    }
    const double loss = mean_loss(net, inputs, targets);
    if (!std::isfinite(loss)) {
      throw NumericError("train_sgd: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                         std::to_string(batch_index));
    }
    if (loss > history.back()) monotone = false;
    history.push_back(loss);
  }
  net.freeze();
  if (log != nullptr) {
    log->epoch_loss = std::move(history);
    log->loss_monotone = monotone;
  }
  return net;
}

Network train_sgd(Network net, const DatasetSplit& data, const TrainOptions& options, TrainLog* log) {
  data.validate();
  if (data.num_classes != net.num_classes()) {
    throw DimensionError("train_sgd: data has " + std::to_string(data.num_classes) +
                         " classes, network outputs " + std::to_string(net.num_classes()));
  }
  Network trained = train_sgd(std::move(net), data.inputs, one_hot_targets(data), options, log);
  if (log != nullptr) log->train_accuracy = accuracy(trained, data);
  return trained;
}

}  // namespace gradorth
