#include "prism/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <mutex>
#include <ostream>
#include <thread>

namespace prism {

namespace {

constexpr double kHalfPi = 1.5707963267948966;

void validate_config(const TrainConfig& c) {
  if (c.learning_rate <= 0.0) throw config_error("learning_rate must be positive");
  if (c.dim < 1) throw config_error("dim must be >= 1");
  if (c.batch_size < 1) throw config_error("batch_size must be >= 1");
  if (c.max_epochs < 0) throw config_error("max_epochs must be >= 0");
  if (c.patience < 1) throw config_error("patience must be >= 1");
  if (c.eval_k < 1) throw config_error("eval_k must be >= 1");
  if (c.loss.decay.lambda < 0.0) throw config_error("lambda must be >= 0");
  if (c.init.alpha < 0.0 || c.init.alpha > 1.0) throw config_error("alpha must lie in [0, 1]");
  if ((c.loss.kind == LossKind::bpr || c.loss.kind == LossKind::ssm) &&
      c.loss.n_negatives < 1) {
    throw config_error("bpr and ssm need n_negatives >= 1");
  }
  if (c.val_user_sample < 0) throw config_error("val_user_sample must be >= 0");
}

bool needs_pairs(LossKind kind) {
  return kind == LossKind::directau || kind == LossKind::mawu;
}

std::vector<double> stratum_mean_magnitudes(const Mat& I, const std::vector<Stratum>& strata) {
  double sum[3] = {0, 0, 0};
  int64_t cnt[3] = {0, 0, 0};
  for (int64_t i = 0; i < I.rows(); ++i) {
    const auto s = static_cast<size_t>(strata[static_cast<size_t>(i)]);
    sum[s] += I.row(i).norm();
    ++cnt[s];
  }
  std::vector<double> out(3);
  for (size_t s = 0; s < 3; ++s) {
    out[s] = cnt[s] > 0 ? sum[s] / static_cast<double>(cnt[s]) : std::nan("");
  }
  return out;
}

}  // namespace

std::vector<int32_t> validation_user_subset(const std::vector<std::vector<int32_t>>& val_lists,
                                            int64_t sample) {
  std::vector<int32_t> evaluable;
  for (size_t u = 0; u < val_lists.size(); ++u) {
    if (!val_lists[u].empty()) evaluable.push_back(static_cast<int32_t>(u));
  }
  if (sample <= 0 || static_cast<int64_t>(evaluable.size()) <= sample) return evaluable;
  // seeded only by the data shape so every run on the same data agrees
  Rng rng(derive_seed(0x76616c7573657273ULL, static_cast<uint64_t>(evaluable.size())));
  rng.shuffle(evaluable);
  evaluable.resize(static_cast<size_t>(sample));
  std::sort(evaluable.begin(), evaluable.end());
  return evaluable;
}

TrainResult train(const TrainConfig& config, const Splits& data, const PopularityIndex& pop,
                  const std::vector<Stratum>& strata, std::ostream* progress) {
  validate_config(config);
  if (data.train.edges.empty()) throw config_error("empty train split");
  const int64_t n_users = data.train.n_users;
  const int64_t n_items = data.train.n_items;

  TrainResult result;
  Mat U = init_xavier(n_users, config.dim, derive_seed(config.seed, 100));
  Mat I = init_xavier(n_items, config.dim, derive_seed(config.seed, 101));
  if (config.init.strategy == InitSpec::Strategy::prism) {
    if (config.init.apply_to != InitSpec::ApplyTo::users) {
      I = prism_init(I, pop.degree, config.init.alpha, config.init.log_base);
    }
    if (config.init.apply_to != InitSpec::ApplyTo::items) {
      U = prism_init(U, pop.user_degree, config.init.alpha, config.init.log_base);
    }
  }
  MarginTable margins;
  const bool with_margins = config.loss.kind == LossKind::mawu;
  if (with_margins) {
    margins.user = Vec::Zero(n_users);
    margins.item = Vec::Zero(n_items);
  }

  const auto val_lists = user_item_lists(data.val);
  const auto train_lists = user_item_lists(data.train);
  const auto val_subset = validation_user_subset(val_lists, config.val_user_sample);
  const bool has_val = !val_subset.empty();

  TrainedModel best;
  best.U = U;
  best.I = I;
  best.margins = margins;
  double best_val = -1.0;

  if (config.max_epochs == 0) {
    result.model = std::move(best);
    return result;
  }

  EpochSampler sampler(data.train);
  Rng rng_shuffle(derive_seed(config.seed, 1));
  Rng rng_neg(derive_seed(config.seed, 2));
  GradientBuffer grads;
  grads.resize(n_users, n_items, config.dim, with_margins);
  const int gamma =
      (config.loss.kind == LossKind::bpr || config.loss.kind == LossKind::ssm)
          ? config.loss.n_negatives
          : 0;
  const bool merge_tail = needs_pairs(config.loss.kind);
  const double lr = config.learning_rate;

  Batch batch;
  for (int64_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    sampler.start_epoch(rng_shuffle);
    double loss_sum = 0.0;
    int64_t n_pos = 0;
    while (sampler.next(config.batch_size, gamma, rng_neg, batch, merge_tail)) {
      grads.clear();
      const double loss = compute_loss(config.loss, batch, U, I, margins, &grads);
      if (!std::isfinite(loss)) {
        throw runtime_failure("non-finite loss at epoch " + std::to_string(epoch));
      }
      loss_sum += loss;
      n_pos += static_cast<int64_t>(batch.positives.size());
      for (int32_t u : grads.touched_users) U.row(u) -= lr * grads.user_grad.row(u);
      for (int32_t i : grads.touched_items) I.row(i) -= lr * grads.item_grad.row(i);
      if (with_margins) {
        for (int32_t u : grads.touched_users) {
          margins.user[u] =
              std::clamp(margins.user[u] - lr * grads.margin_user_grad[u], 0.0, kHalfPi);
        }
        for (int32_t i : grads.touched_items) {
          margins.item[i] =
              std::clamp(margins.item[i] - lr * grads.margin_item_grad[i], 0.0, kHalfPi);
        }
      }
      apply_weight_decay(U, I, lr, config.loss.decay.lambda, config.loss.decay.mode, &batch);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = n_pos > 0 ? loss_sum / static_cast<double>(n_pos) : 0.0;
    if (has_val) {
      const auto metrics = evaluate_dual(U, I, val_lists, train_lists, strata, config.eval_k,
                                         config.window, &val_subset);
      rec.val_ndcg_dot = metrics.first.overall;
      rec.val_ndcg_cos = metrics.second.overall;
    }
    const auto mags = stratum_mean_magnitudes(I, strata);
    rec.mag_popular = mags[0];
    rec.mag_neutral = mags[1];
    rec.mag_unpopular = mags[2];
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.push_back(rec);

    const bool improved = has_val ? rec.val_ndcg_dot > best_val : true;
    if (improved) {
      best_val = has_val ? rec.val_ndcg_dot : 0.0;
      best.U = U;
      best.I = I;
      best.margins = margins;
      best.best_epoch = epoch;
      best.best_val_ndcg = has_val ? rec.val_ndcg_dot : 0.0;
    }
    best.epochs_run = epoch;
    if (progress != nullptr) {
      (*progress) << "epoch " << epoch << " loss " << rec.train_loss << " val_dot "
                  << rec.val_ndcg_dot << " val_cos " << rec.val_ndcg_cos << " ("
                  << rec.seconds << "s)\n";
    }
    if (has_val && epoch - best.best_epoch >= config.patience) break;
  }

  result.model = std::move(best);
  return result;
}

int64_t epochs_to_convergence(const std::vector<EpochRecord>& log) {
  if (log.empty()) return 0;
  int64_t best = 1;
  double best_val = log.front().val_ndcg_dot;
  for (const auto& rec : log) {
    if (rec.val_ndcg_dot > best_val) {
      best_val = rec.val_ndcg_dot;
      best = rec.epoch;
    }
  }
  return best;
}

GridSearchResult grid_search(const TrainConfig& base, const std::vector<double>& lr_grid,
                             const std::vector<double>& lambda_grid, const Splits& data,
                             const PopularityIndex& pop, const std::vector<Stratum>& strata,
                             int jobs, std::ostream* progress) {
  if (lr_grid.empty() || lambda_grid.empty()) throw config_error("empty grid");
  GridSearchResult result;
  for (double lr : lr_grid) {
    for (double lambda : lambda_grid) {
      GridCell cell;
      cell.learning_rate = lr;
      cell.lambda = lambda;
      result.cells.push_back(cell);
    }
  }

  std::mutex mu;
  std::atomic<size_t> next{0};
  const auto worker = [&]() {
    for (;;) {
      const size_t k = next.fetch_add(1);
      if (k >= result.cells.size()) return;
      TrainConfig c = base;
      c.learning_rate = result.cells[k].learning_rate;
      c.loss.decay.lambda = result.cells[k].lambda;
      try {
        TrainResult r = train(c, data, pop, strata, nullptr);
        std::lock_guard<std::mutex> lock(mu);
        result.cells[k].val_ndcg = r.model.best_val_ndcg;
        result.cells[k].best_epoch = r.model.best_epoch;
        const bool better =
            result.best_index < 0 ||
            r.model.best_val_ndcg > result.cells[static_cast<size_t>(result.best_index)].val_ndcg ||
            (r.model.best_val_ndcg ==
                 result.cells[static_cast<size_t>(result.best_index)].val_ndcg &&
             static_cast<int64_t>(k) < result.best_index);
        if (better) {
          result.best_index = static_cast<int64_t>(k);
          result.best = std::move(r);
        }
        if (progress != nullptr) {
          (*progress) << "grid cell lr=" << result.cells[k].learning_rate
                      << " lambda=" << result.cells[k].lambda
                      << " val_ndcg=" << result.cells[k].val_ndcg << "\n";
        }
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(mu);
        result.cells[k].failed = true;
        result.cells[k].error = e.what();
      }
    }
  };

  const int n_threads = std::max(1, std::min<int>(jobs, static_cast<int>(result.cells.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(n_threads));
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (result.best_index < 0) throw runtime_failure("every grid cell failed");
  return result;
}

}  // namespace prism
