#include "groundseg/nn/train.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "groundseg/error.hpp"
#include "groundseg/rng.hpp"

namespace groundseg::nn {

ClassWeights class_weights_from_histogram(const ClassHistogram& hist) {
  ClassWeights w{};
  double sum = 0.0;
  for (int i = 0; i < kNumClasses; ++i) {
    const double f = hist.frequencies[static_cast<std::size_t>(i)];
    if (!(f > 0.0)) {
      throw ArgumentError("class_weights_from_histogram: class '" + std::string(label_name(static_cast<MaterialLabel>(i))) +
                          "' has zero frequency; smooth the label histogram or remove the class");
    }
    w[static_cast<std::size_t>(i)] = 1.0 / f;
    sum += 1.0 / f;
  }
  const double mean = sum / kNumClasses;
  for (auto& x : w) x /= mean;
  return w;
}

void TrainConfig::validate() const {
  std::vector<std::string> problems;
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) problems.emplace_back("learning_rate must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) problems.emplace_back("momentum must be in [0, 1)");
  if (epochs < 0) problems.emplace_back("epochs must be >= 0");
  if (batch_size <= 0) problems.emplace_back("batch_size must be positive");
  if (lr_decay_every <= 0) problems.emplace_back("lr_decay_every must be positive");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) problems.emplace_back("lr_decay must be in (0, 1]");
  if (!problems.empty()) {
    std::string msg = "invalid training config:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ConfigError(msg);
  }
}

Tensor stack_inputs(std::span<const Sample* const> samples) {
  if (samples.empty()) throw ArgumentError("stack_inputs: no samples");
  const auto& first = samples.front()->input;
  if (first.rank() != 5 || first.dim(0) != 1) {
    throw ArgumentError("stack_inputs: samples must be [1,C,D,H,W], got " + first.shape_string());
  }
  auto shape = first.shape();
  shape[0] = static_cast<int>(samples.size());
  Tensor out(shape);
  std::size_t off = 0;
  for (const auto* s : samples) {
    if (!s->input.same_shape(first)) {
      throw ArgumentError("stack_inputs: shape " + s->input.shape_string() + " differs from " + first.shape_string());
    }
    std::copy(s->input.values().begin(), s->input.values().end(), out.data() + off);
    off += s->input.size();
  }
  return out;
}

void sgd_step(std::span<Parameter* const> params, double lr, double momentum) {
  for (auto* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      p->velocity[i] = momentum * p->velocity[i] + p->grad[i];
      p->value[i] -= lr * p->velocity[i];
    }
  }
}

TrainResult train(Model& model, std::span<const Sample> samples, std::span<const double> class_weights,
                  const TrainConfig& cfg, const std::function<void(int, double)>& on_epoch) {
  cfg.validate();
  if (samples.empty()) throw ArgumentError("train: empty dataset");
  const auto params = model.parameters();
  Rng order_rng(derive_seed(cfg.seed, 1));
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result;
  std::uint64_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.learning_rate * std::pow(cfg.lr_decay, epoch / cfg.lr_decay_every);
    order_rng.shuffle(order);
    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<const Sample*> batch;
      std::vector<std::uint8_t> targets;
      for (std::size_t i = start; i < end; ++i) {
        const Sample& s = samples[order[i]];
        batch.push_back(&s);
        targets.insert(targets.end(), s.targets.begin(), s.targets.end());
      }
      const Tensor x = stack_inputs(batch);
      model.reseed_dropout(derive_seed(cfg.seed, 2 + step++));
      model.zero_grad();
      const Tensor logits = model.forward(x, Mode::Train);
      const LossResult loss = softmax_cross_entropy(logits, targets, class_weights);
      const int batch_index = static_cast<int>(start / static_cast<std::size_t>(cfg.batch_size));
      if (!std::isfinite(loss.loss)) {
        std::ostringstream msg;
        msg << "non-finite training loss (lr=" << lr << ", epoch=" << epoch << ", batch=" << batch_index << ")";
        throw NumericalError(msg.str());
      }
      if (loss.count == 0) continue;
      model.backward(loss.grad);
      sgd_step(params, lr, cfg.momentum);
      loss_sum += loss.loss;
      ++batches;
    }
    const double mean = batches ? loss_sum / batches : 0.0;
    result.epoch_loss.push_back(mean);
    result.epochs_run = epoch + 1;
    if (on_epoch) on_epoch(epoch, mean);
  }
  return result;
}

Tensor predict_logits(Model& model, const Tensor& input) { return model.forward(input, Mode::Eval); }

std::vector<std::uint8_t> argmax_classes(const Tensor& logits) {
  if (logits.rank() != 5) throw ArgumentError("argmax_classes: expected rank-5 logits, got " + logits.shape_string());
  const int n = logits.dim(0), k = logits.dim(1);
  const std::size_t P = logits.plane();
  std::vector<std::uint8_t> out(static_cast<std::size_t>(n) * P);
  for (int i = 0; i < n; ++i) {
    const std::size_t base = static_cast<std::size_t>(i) * k * P;
    for (std::size_t s = 0; s < P; ++s) {
      int best = 0;
      for (int c = 1; c < k; ++c) {
        if (logits[base + c * P + s] > logits[base + best * P + s]) best = c;
      }
      out[static_cast<std::size_t>(i) * P + s] = static_cast<std::uint8_t>(best);
    }
  }
  return out;
}

}  // namespace groundseg::nn
