#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "cgdetect/checkpoint.hpp"
#include "cgdetect/data.hpp"
#include "cgdetect/model.hpp"
#include "cgdetect/run_config.hpp"

namespace cgd {

using Net = DualStreamNet<float>;

inline constexpr const char* kLogColumns = "epoch,lr,train_loss,val_acc";

/// One log row. Epochs are 0-based, matching the learning-rate schedule;
/// val_acc is a fraction, NaN when no validation set was given.
struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_acc = 0.0;
};

std::string format_log_row(const EpochRecord& r);

struct TrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = -1;  // -1 without a validation set
  double best_val_acc = 0.0;
  Checkpoint best;  // parameters at best_epoch; empty without validation
};

/// Runs cfg.sgd.epochs epochs of minibatch SGD on `net` in place.
/// on_epoch fires after every epoch. A non-finite loss or activation throws
/// NumericError naming the epoch and batch.
TrainResult train_network(Net& net, const RunConfig& cfg, const Dataset& train,
                          const Dataset* val,
                          const std::function<void(const EpochRecord&)>& on_epoch = {});

struct Evaluation {
  std::vector<int> predictions;
  std::vector<std::array<double, 2>> probabilities;  // (cg, pg) per sample
  Metrics metrics;
};

Evaluation evaluate(const Net& net, const Dataset& data, std::size_t batch_size);

Checkpoint make_checkpoint(const Net& net, const RunConfig& cfg);

struct LoadedModel {
  RunConfig config;
  std::unique_ptr<Net> net;
};

LoadedModel model_from_checkpoint(const Checkpoint& ckpt);
LoadedModel load_model(const std::filesystem::path& path);

/// "<stem>.best<ext>" next to the final checkpoint.
std::filesystem::path best_checkpoint_path(const std::filesystem::path& final_path);

}  // namespace cgd
