#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "prism/embeddings.hpp"
#include "prism/evaluation.hpp"
#include "prism/interactions.hpp"
#include "prism/losses.hpp"
#include "prism/types.hpp"

namespace prism {

struct InitSpec {
  enum class Strategy : uint8_t { xavier, prism };
  enum class ApplyTo : uint8_t { items, users, both };
  Strategy strategy = Strategy::xavier;
  double alpha = 0.0;
  ApplyTo apply_to = ApplyTo::both;
  LogBase log_base = LogBase::natural;
};

struct TrainConfig {
  LossSpec loss;
  InitSpec init;
  int64_t dim = 64;
  double learning_rate = 0.01;
  int64_t batch_size = 1024;
  int64_t max_epochs = 1000;
  int64_t patience = 10;
  int64_t eval_k = 20;
  uint64_t seed = 1;
  // 0 evaluates on all users each epoch; otherwise a fixed deterministic
  // subsample of this many users with validation items (the subsample
  // depends only on the data shape, not on the training seed, so runs
  // being compared share it).
  int64_t val_user_sample = 0;
  NdcgWindow window = NdcgWindow::user_truncated;
};

struct EpochRecord {
  int64_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_ndcg_dot = 0.0;
  double val_ndcg_cos = 0.0;
  double mag_popular = 0.0;
  double mag_neutral = 0.0;
  double mag_unpopular = 0.0;
  double seconds = 0.0;
};

struct TrainedModel {
  Mat U, I;
  MarginTable margins;
  int64_t best_epoch = 0;
  double best_val_ndcg = 0.0;  // dot scorer, the model-selection metric
  int64_t epochs_run = 0;
};

struct TrainResult {
  TrainedModel model;
  std::vector<EpochRecord> log;
};

// Mini-batch SGD over the train split. Per epoch: shuffle, iterate batches,
// gradient step, then weight decay per mode. Validation NDCG@K under the dot
// scorer selects the best snapshot; the cosine-scored curve is logged as a
// diagnostic. Stops after `patience` epochs without improvement.
TrainResult train(const TrainConfig& config, const Splits& data, const PopularityIndex& pop,
                  const std::vector<Stratum>& strata, std::ostream* progress = nullptr);

// 1-based epoch of the best validation NDCG (first epoch achieving it).
int64_t epochs_to_convergence(const std::vector<EpochRecord>& log);

struct GridCell {
  double learning_rate = 0.0;
  double lambda = 0.0;
  bool failed = false;
  std::string error;
  double val_ndcg = 0.0;
  int64_t best_epoch = 0;
};

struct GridSearchResult {
  std::vector<GridCell> cells;
  int64_t best_index = -1;  // by validation NDCG, ties to the earlier cell
  TrainResult best;
};

GridSearchResult grid_search(const TrainConfig& base, const std::vector<double>& lr_grid,
                             const std::vector<double>& lambda_grid, const Splits& data,
                             const PopularityIndex& pop, const std::vector<Stratum>& strata,
                             int jobs = 1, std::ostream* progress = nullptr);

// The fixed validation-user subsample used when val_user_sample > 0.
std::vector<int32_t> validation_user_subset(const std::vector<std::vector<int32_t>>& val_lists,
                                            int64_t sample);

}  // namespace prism
