#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "explattack/errors.h"
#include "explattack/victim.h"

namespace explattack {

double LossAndGradient(const LinearModel& model, std::span<const LabeledFeatures> batch,
                       LinearModel* gradient) {
  if (gradient != nullptr) *gradient = LinearModel::Zeros(model.feature_dim);
  if (batch.empty()) return 0.0;
  const double scale = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (const auto& ex : batch) {
    const auto out = LinearClassify(model, ex.features);
    const std::size_t y = LabelIndex(ex.label);
    loss -= std::log(std::max(out.probs[y], std::numeric_limits<double>::min()));
    if (gradient == nullptr) continue;
    for (std::size_t k = 0; k < 3; ++k) {
      const double delta = (out.probs[k] - (k == y ? 1.0 : 0.0)) * scale;
      gradient->bias[k] += delta;
      double* row = gradient->weights.data() + k * model.feature_dim;
      for (std::size_t f = 0; f < model.feature_dim; ++f) row[f] += delta * ex.features[f];
    }
  }
  return loss * scale;
}

namespace {

double Accuracy(const LinearModel& model, std::span<const LabeledFeatures> data) {
  if (data.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& ex : data) {
    if (LinearClassify(model, ex.features).label == ex.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace

TrainResult TrainLinearOnFeatures(std::span<const LabeledFeatures> data,
                                  std::size_t feature_dim, const TrainOptions& options) {
  if (options.epochs < 0) throw UsageError("epochs must be >= 0");
  if (!(options.learning_rate > 0.0)) throw UsageError("learning rate must be > 0");

  TrainResult result;
  result.model = LinearModel::Zeros(feature_dim);
  std::array<std::size_t, 3> per_class = {0, 0, 0};
  for (const auto& ex : data) ++per_class[LabelIndex(ex.label)];
  for (Label l : kAllLabels) {
    if (per_class[LabelIndex(l)] == 0) {
      result.warnings.push_back("no training example with label " + std::string(LabelName(l)));
    }
  }

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(options.seed);
  const std::size_t batch_size =
      options.batch_size == 0 ? std::max<std::size_t>(data.size(), 1) : options.batch_size;

  std::vector<LabeledFeatures> batch;
  LinearModel grad;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    // Fisher-Yates with raw engine output keeps the order identical across
    // standard library implementations.
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng() % i]);
    }
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      batch.clear();
      for (std::size_t i = start; i < std::min(order.size(), start + batch_size); ++i) {
        batch.push_back(data[order[i]]);
      }
      const double loss = LossAndGradient(result.model, batch, &grad);
      if (!std::isfinite(loss)) {
        throw DivergenceError("training diverged (non-finite loss) in epoch " +
                              std::to_string(epoch + 1) + "; try a smaller learning rate");
      }
      for (std::size_t i = 0; i < grad.weights.size(); ++i) {
        result.model.weights[i] -= options.learning_rate * grad.weights[i];
      }
      for (std::size_t k = 0; k < 3; ++k) result.model.bias[k] -= options.learning_rate * grad.bias[k];
      const bool finite =
          std::all_of(result.model.weights.begin(), result.model.weights.end(),
                      [](double w) { return std::isfinite(w); }) &&
          std::all_of(result.model.bias.begin(), result.model.bias.end(),
                      [](double b) { return std::isfinite(b); });
      if (!finite) {
        throw DivergenceError("training diverged (non-finite weights) in epoch " +
                              std::to_string(epoch + 1) + "; try a smaller learning rate");
      }
    }
    const double epoch_loss = LossAndGradient(result.model, data, nullptr);
    if (!std::isfinite(epoch_loss)) {
      throw DivergenceError("training diverged (non-finite loss) after epoch " +
                            std::to_string(epoch + 1) + "; try a smaller learning rate");
    }
    result.loss_trace.push_back(epoch_loss);
  }
  result.train_accuracy = Accuracy(result.model, data);
  return result;
}

TrainResult TrainLinear(std::span<const NliExample> examples, const EmbeddingTable& table,
                        const TrainOptions& options) {
  std::vector<LabeledFeatures> data;
  std::vector<std::string> skipped;
  for (const auto& ex : examples) {
    try {
      data.push_back({Featurize(Tokenize(ex.premise), Tokenize(ex.hypothesis), table),
                      ex.gold_label});
    } catch (const FeaturizationError& e) {
      skipped.push_back("skipped example " + ex.id + ": " + e.what());
    }
  }
  auto result = TrainLinearOnFeatures(data, 4 * table.dim(), options);
  result.warnings.insert(result.warnings.begin(), skipped.begin(), skipped.end());
  return result;
}

}  // namespace explattack
