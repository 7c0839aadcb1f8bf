#include "deceptkit/backends/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <spdlog/spdlog.h>

#include "deceptkit/analysis/metrics.hpp"
#include "deceptkit/common/error.hpp"
#include "deceptkit/common/hash.hpp"
#include "deceptkit/nn/layers.hpp"
#include "deceptkit/nn/optim.hpp"

namespace deceptkit::backends {

TrainedModel::TrainedModel(BackendConfig config, std::shared_ptr<Classifier> classifier,
                           std::vector<EpochRecord> history, std::string corpus_fingerprint, int best_epoch)
    : config_(std::move(config)),
      classifier_(std::move(classifier)),
      history_(std::move(history)),
      fingerprint_(std::move(corpus_fingerprint)),
      best_epoch_(best_epoch) {
  if (!classifier_) throw TrainingError("trained model without a network");
  if (classifier_->kind() != config_.kind) throw ConfigError("network kind does not match its configuration");
}

std::string corpus_fingerprint(std::span<const corpus::TextSample> train, std::span<const corpus::TextSample> val) {
  std::vector<std::string> lines;
  auto add = [&lines](std::span<const corpus::TextSample> samples, const char* role) {
    for (const auto& s : samples) {
      lines.push_back(std::string(role) + "\t" + s.id + "\t" + std::string(to_string(s.label)) + "\t" +
                      sha256_hex(s.text));
    }
  };
  add(train, "train");
  add(val, "val");
  std::sort(lines.begin(), lines.end());
  Sha256 digest;
  for (const auto& line : lines) {
    digest.update(line);
    digest.update("\n");
  }
  return digest.hex_digest();
}

namespace {

double accuracy_of(const PredictionBatch& batch, std::span<const corpus::TextSample> gold) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) correct += batch.predictions[i].argmax() == gold[i].label ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(gold.size());
}

double f1_of(const PredictionBatch& batch, std::span<const corpus::TextSample> gold) {
  analysis::ConfusionCounts c;
  for (std::size_t i = 0; i < gold.size(); ++i) c.add(batch.predictions[i].argmax(), gold[i].label);
  return analysis::metrics_from_counts(c).f1;
}

}  // namespace

TrainedModel train_backend(const BackendConfig& config, std::span<const corpus::TextSample> train,
                           std::span<const corpus::TextSample> val) {
  if (train.empty()) throw TrainingError(std::string(to_string(config.kind)) + ": empty training set");
  std::set<std::string> train_ids;
  for (const auto& s : train) train_ids.insert(s.id);
  for (const auto& s : val) {
    if (train_ids.count(s.id) != 0) throw SplitError("training and validation sets share sample '" + s.id + "'");
  }

  Rng init_rng(derive_seed(config.seed, "init"));
  Rng order_rng(derive_seed(config.seed, "order"));
  Rng dropout_rng(derive_seed(config.seed, "dropout"));
  std::shared_ptr<Classifier> net = make_classifier(config, train, init_rng);
  nn::ParameterStore& store = net->parameters();

  const int epochs = config.get<int>("epochs");
  const auto batch_size = config.get<std::size_t>("batch_size");
  const double base_lr = config.get<double>("learning_rate");
  const bool linear_decay = config.get<std::string>("lr_schedule") == "linear";
  const double clip = config.get<double>("clip_norm");
  const int patience = config.get<int>("patience");
  const bool stop_on_perfect = config.get<bool>("stop_on_perfect_train");
  nn::Adam optimizer(store, nn::AdamOptions{0.9, 0.999, 1e-8, config.get<double>("weight_decay")});

  const std::size_t steps_per_epoch = (train.size() + batch_size - 1) / batch_size;
  const double total_steps = static_cast<double>(steps_per_epoch) * epochs;
  const auto kind_name = std::string(to_string(config.kind));
  spdlog::info("{}: training on {} samples ({} validation), {} trainable parameters", kind_name, train.size(),
               val.size(), store.count(true));

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<EpochRecord> history;
  std::vector<nn::Matrix> best_weights;
  double best_f1 = -1.0;
  int best_epoch = 0;
  int stale = 0;

  for (int epoch = 1; epoch <= epochs; ++epoch) {
    order_rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    std::size_t correct = 0;
    double lr = base_lr;
    for (std::size_t step = 0; step < steps_per_epoch; ++step) {
      const std::size_t begin = step * batch_size;
      const std::size_t end = std::min(begin + batch_size, train.size());
      store.zero_grad();
      const double scale = 1.0 / static_cast<double>(end - begin);
      for (std::size_t i = begin; i < end; ++i) {
        const auto& sample = train[order[i]];
        int predicted = 0;
        const double loss = net->accumulate(sample.text, static_cast<int>(class_index(sample.label)), scale, dropout_rng, &predicted);
        if (!std::isfinite(loss)) {
          throw DivergenceError(kind_name + ": loss became " + std::to_string(loss) + " at epoch " +
                                std::to_string(epoch) + ", batch " + std::to_string(step + 1) + ", sample '" +
                                sample.id + "' (learning rate " + std::to_string(lr) + ")");
        }
        loss_sum += loss;
        correct += static_cast<std::size_t>(predicted) == class_index(sample.label) ? 1 : 0;
      }
      if (!nn::gradients_finite(store)) {
        throw DivergenceError(kind_name + ": non-finite gradient at epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(step + 1));
      }
      nn::clip_grad_norm(store, clip);
      const double done = static_cast<double>(optimizer.steps());
      lr = linear_decay ? base_lr * std::max(0.0, 1.0 - done / total_steps) : base_lr;
      optimizer.step(lr);
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss_sum / static_cast<double>(train.size());
    record.train_accuracy = static_cast<double>(correct) / static_cast<double>(train.size());
    record.learning_rate = lr;
    if (!val.empty()) record.val_f1 = f1_of(predict_proba(*net, val), val);
    if (stop_on_perfect) record.eval_train_accuracy = accuracy_of(predict_proba(*net, train), train);
    history.push_back(record);
    spdlog::debug("{}: epoch {} loss {:.4f} train acc {:.4f}{}", kind_name, epoch, record.train_loss,
                  record.train_accuracy, record.val_f1 ? fmt::format(" val F1 {:.4f}", *record.val_f1) : "");

    if (!val.empty()) {
      if (*record.val_f1 > best_f1) {
        best_f1 = *record.val_f1;
        best_epoch = epoch;
        best_weights = store.snapshot();
        stale = 0;
      } else if (++stale >= patience) {
        spdlog::debug("{}: early stop after epoch {}", kind_name, epoch);
        break;
      }
    } else {
      best_epoch = epoch;
    }
    if (stop_on_perfect && record.eval_train_accuracy == 1.0) break;
  }
  if (!best_weights.empty()) store.restore(best_weights);
  spdlog::info("{}: kept epoch {} of {}", kind_name, best_epoch, history.size());
  return TrainedModel(config, std::move(net), std::move(history), corpus_fingerprint(train, val), best_epoch);
}

PredictionBatch predict_proba(const Classifier& classifier, std::span<const corpus::TextSample> samples) {
  if (samples.empty()) throw DataError("predict_proba needs at least one sample");
  PredictionBatch out;
  out.predictions.reserve(samples.size());
  for (const auto& s : samples) {
    bool truncated = false;
    const nn::RowVector z = classifier.logits(s.text, &truncated);
    const nn::Matrix p = nn::softmax_rows(z);
    out.predictions.push_back({s.id, {p(0, 0), p(0, 1)}, classifier.kind()});
    out.truncated += truncated ? 1 : 0;
  }
  return out;
}

PredictionBatch predict_proba(const TrainedModel& model, std::span<const corpus::TextSample> samples) {
  return predict_proba(model.classifier(), samples);
}

}  // namespace deceptkit::backends
