#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "gradorth/dataset.hpp"
#include "gradorth/network.hpp"

namespace gradorth {

struct TrainOptions {
  double lr = 0.1;
  std::size_t epochs = 100;
  std::size_t batch = 16;
  std::uint64_t seed = 0;
};

struct TrainLog {
  // Mean per-sample loss over the full training set; entry 0 is before the first epoch.
  std::vector<double> epoch_loss;
  double train_accuracy = 0.0;
  // False when some epoch increased the whole-set loss.
  bool loss_monotone = true;
};

// Plain mini-batch SGD on the mean per-sample loss; samples are reshuffled
// every epoch from (seed, epoch). Returns the trained network frozen.
// Throws NumericError naming the epoch and batch if the loss stops being finite.
Network train_sgd(Network net, const Matrix& inputs, const Matrix& targets, const TrainOptions& options,
                  TrainLog* log = nullptr);

// Classification targets are one-hot labels.
Network train_sgd(Network net, const DatasetSplit& data, const TrainOptions& options,
                  TrainLog* log = nullptr);

double mean_loss(const Network& net, const Matrix& inputs, const Matrix& targets);
double accuracy(const Network& net, const DatasetSplit& data);
Matrix one_hot_targets(const DatasetSplit& data);

}  // namespace gradorth
