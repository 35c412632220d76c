#include "cgdetect/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "cgdetect/sgd.hpp"

namespace cgd {

std::string format_log_row(const EpochRecord& r) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%d,%s,%.6f,%.6f", r.epoch, format_number(r.lr).c_str(),
                r.train_loss, r.val_acc);
  return buf;
}

TrainResult train_network(Net& net, const RunConfig& cfg, const Dataset& train, const Dataset* val,
                          const std::function<void(const EpochRecord&)>& on_epoch) {
  cfg.validate();
  if (train.crop() != static_cast<std::size_t>(net.config().crop)) {
    throw ConfigError("training data crop does not match the model crop");
  }
  const auto batch_size = static_cast<std::size_t>(cfg.sgd.batch_size);
  TrainResult result;
  net.params().zero_grad();
  for (int epoch = 0; epoch < cfg.sgd.epochs; ++epoch) {
    BatchIterator it(train, batch_size, cfg.seed, epoch);
    Batch batch;
    double loss_sum = 0.0;
    std::size_t seen = 0;
    std::size_t index = 0;
    while (it.next(batch)) {
      try {
        const Tensor4<float> logits = net.forward(batch.pixels, Mode::train);
        const LossResult<float> loss = softmax_cross_entropy(logits, std::span<const int>(batch.labels));
        net.backward(loss.grad_logits);
        sgd_step(net.params(), epoch, cfg.sgd);
        loss_sum += loss.loss * static_cast<double>(batch.labels.size());
        seen += batch.labels.size();
      } catch (const NumericError& e) {
        throw NumericError("epoch " + std::to_string(epoch) + ", batch " + std::to_string(index) +
                           ": " + e.what());
      }
      ++index;
    }

    EpochRecord rec{epoch, learning_rate(cfg.sgd, epoch), loss_sum / static_cast<double>(seen),
                    std::numeric_limits<double>::quiet_NaN()};
    if (val != nullptr) {
      rec.val_acc = evaluate(net, *val, batch_size).metrics.acc;
      if (result.best_epoch < 0 || rec.val_acc > result.best_val_acc) {
        result.best_epoch = epoch;
        result.best_val_acc = rec.val_acc;
        result.best = make_checkpoint(net, cfg);
      }
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

Evaluation evaluate(const Net& net, const Dataset& data, std::size_t batch_size) {
  if (data.crop() != static_cast<std::size_t>(net.config().crop)) {
    throw ConfigError("evaluation data crop does not match the model crop");
  }
  Evaluation ev;
  std::vector<int> labels;
  BatchIterator it(data, batch_size, 0, 0, /*shuffle=*/false);
  Batch batch;
  while (it.next(batch)) {
    const Tensor4<float> probs = softmax(net.predict(batch.pixels));
    for (std::size_t i = 0; i < batch.labels.size(); ++i) {
      const double cg = probs(i, 0, 0, 0);
      const double pg = probs(i, 1, 0, 0);
      ev.probabilities.push_back({cg, pg});
      ev.predictions.push_back(pg > cg ? 1 : 0);
      labels.push_back(batch.labels[i]);
    }
  }
  ev.metrics = accuracy(ev.predictions, labels);
  return ev;
}

Checkpoint make_checkpoint(const Net& net, const RunConfig& cfg) {
  RunConfig stored = cfg;
  stored.model = net.config();
  return checkpoint_from_store(net.params(), run_config_to_json(stored));
}

LoadedModel model_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.config_json.empty()) throw DataError("checkpoint has no configuration entry");
  LoadedModel m{run_config_from_json(ckpt.config_json), nullptr};
  m.net = std::make_unique<Net>(m.config.model, m.config.seed);
  restore_store(m.net->params(), ckpt);
  return m;
}

LoadedModel load_model(const std::filesystem::path& path) {
  try {
    return model_from_checkpoint(read_checkpoint_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::filesystem::path best_checkpoint_path(const std::filesystem::path& final_path) {
  std::filesystem::path p = final_path;
  p.replace_filename(final_path.stem().string() + ".best" + final_path.extension().string());
  return p;
}

}  // namespace cgd
