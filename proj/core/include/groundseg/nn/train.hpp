#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "groundseg/nn/models.hpp"
#include "groundseg/point_cloud.hpp"

namespace groundseg::nn {

using ClassWeights = std::array<double, kNumClasses>;

/// w[i] = (1 / f[i]) / mean_j(1 / f[j]). Throws when a class is absent.
ClassWeights class_weights_from_histogram(const ClassHistogram& hist);

struct TrainConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  int epochs = 40;
  int batch_size = 2;
  /// The learning rate is multiplied by lr_decay every lr_decay_every epochs.
  int lr_decay_every = 20;
  double lr_decay = 0.5;
  std::uint64_t seed = 1;

  void validate() const;
};

/// One training example: input [1, C, D, H, W] and one target code per
/// spatial location (255 = ignored).
struct Sample {
  Tensor input;
  std::vector<std::uint8_t> targets;
};

struct TrainResult {
  std::vector<double> epoch_loss;
  int epochs_run = 0;
};

/// Stacks samples of identical shape along the batch axis.
Tensor stack_inputs(std::span<const Sample* const> samples);

/// SGD with momentum: v = momentum * v + g; w -= lr * v.
void sgd_step(std::span<Parameter* const> params, double lr, double momentum);

/// Mini-batch training with a seed-determined batch order and dropout
/// stream. A non-finite loss throws NumericalError naming lr, epoch and batch.
TrainResult train(Model& model, std::span<const Sample> samples, std::span<const double> class_weights,
                  const TrainConfig& cfg, const std::function<void(int, double)>& on_epoch = {});

/// Eval-mode logits for one input.
Tensor predict_logits(Model& model, const Tensor& input);

/// Per-location argmax over the class axis of [1, K, D, H, W] logits;
/// ties go to the smaller class.
std::vector<std::uint8_t> argmax_classes(const Tensor& logits);

}  // namespace groundseg::nn
