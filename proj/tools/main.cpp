#include <CLI11.hpp>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "prism/csv.hpp"
#include "prism/embeddings.hpp"
#include "prism/rng.hpp"
#include "prism/evaluation.hpp"
#include "prism/interactions.hpp"
#include "prism/losses.hpp"
#include "prism/theory.hpp"
#include "prism/trainer.hpp"
#include "prism/types.hpp"

namespace fs = std::filesystem;
using namespace prism;

namespace {

// ---- enum <-> flag spellings -------------------------------------------

LossKind parse_loss(const std::string& s) {
  if (s == "bpr") return LossKind::bpr;
  if (s == "ssm") return LossKind::ssm;
  if (s == "directau") return LossKind::directau;
  if (s == "mawu") return LossKind::mawu;
  throw config_error("unknown loss: " + s);
}

DecayMode parse_wd_mode(const std::string& s) {
  if (s == "none") return DecayMode::none;
  if (s == "full") return DecayMode::full;
  if (s == "batched") return DecayMode::batched;
  throw config_error("unknown wd-mode: " + s);
}

InitSpec::Strategy parse_init(const std::string& s) {
  if (s == "xavier") return InitSpec::Strategy::xavier;
  if (s == "prism") return InitSpec::Strategy::prism;
  throw config_error("unknown init: " + s);
}

InitSpec::ApplyTo parse_apply_to(const std::string& s) {
  if (s == "items") return InitSpec::ApplyTo::items;
  if (s == "users") return InitSpec::ApplyTo::users;
  if (s == "both") return InitSpec::ApplyTo::both;
  throw config_error("unknown apply-to: " + s);
}

LogBase parse_log_base(const std::string& s) {
  if (s == "natural") return LogBase::natural;
  if (s == "base2") return LogBase::base2;
  if (s == "base10") return LogBase::base10;
  throw config_error("unknown log-base: " + s);
}

NdcgWindow parse_window(const std::string& s) {
  if (s == "user-truncated") return NdcgWindow::user_truncated;
  if (s == "fixed-k") return NdcgWindow::fixed_k;
  throw config_error("unknown window: " + s);
}

// ---- shared option groups ----------------------------------------------

struct DataOpts {
  std::string dataset;
  std::string delimiter = "\t";
  std::vector<double> synth;  // users items edges exponent [seed]
  std::vector<double> ratios = {0.8, 0.1, 0.1};
  uint64_t split_seed = 42;
};

void add_data_opts(CLI::App* cmd, DataOpts& d) {
  cmd->add_option("--dataset", d.dataset,
                  "interaction file: one 'user<delim>item' pair per line");
  cmd->add_option("--delimiter", d.delimiter, "field delimiter in the dataset file")
      ->capture_default_str();
  cmd->add_option("--synth", d.synth,
                  "generate data instead: USERS ITEMS EDGES EXPONENT [SEED]")
      ->expected(4, 5);
  cmd->add_option("--split", d.ratios, "train/val/test ratios")
      ->expected(3)
      ->capture_default_str();
  cmd->add_option("--split-seed", d.split_seed, "seed of the random split")
      ->capture_default_str();
}

InteractionSet load_data(const DataOpts& d) {
  if (!d.dataset.empty() && !d.synth.empty()) {
    throw config_error("--dataset and --synth are mutually exclusive");
  }
  if (!d.dataset.empty()) return load_interactions(d.dataset, d.delimiter);
  if (!d.synth.empty()) {
    const auto seed = d.synth.size() > 4 ? static_cast<uint64_t>(d.synth[4]) : 1ULL;
    return generate_synthetic(static_cast<int64_t>(d.synth[0]),
                              static_cast<int64_t>(d.synth[1]),
                              static_cast<int64_t>(d.synth[2]), d.synth[3], seed);
  }
  throw config_error("need --dataset or --synth");
}

struct TrainOpts {
  std::string loss = "bpr";
  double lambda = 0.0;
  std::string wd_mode = "none";
  std::string init = "xavier";
  double alpha = 0.0;
  std::string apply_to = "both";
  std::string log_base = "natural";
  double lr = 0.01;
  int64_t batch_size = 1024;
  int64_t dim = 64;
  int64_t max_epochs = 1000;
  int64_t patience = 10;
  int64_t eval_k = 20;
  int64_t val_user_sample = 0;
  std::string window = "user-truncated";
  int n_negatives = 1;
  double temperature = 1.0;
  double gamma_uniformity = 1.0;
  double gamma_user = 1.0;
  double gamma_item = 1.0;
  uint64_t seed = 1;
};

void add_train_opts(CLI::App* cmd, TrainOpts& t) {
  cmd->add_option("--loss", t.loss, "training loss")
      ->check(CLI::IsMember({"bpr", "ssm", "directau", "mawu"}))
      ->capture_default_str();
  cmd->add_option("--lambda", t.lambda, "weight decay strength")->capture_default_str();
  cmd->add_option("--wd-mode", t.wd_mode, "weight decay application mode")
      ->check(CLI::IsMember({"none", "full", "batched"}))
      ->capture_default_str();
  cmd->add_option("--init", t.init, "embedding initialization")
      ->check(CLI::IsMember({"xavier", "prism"}))
      ->capture_default_str();
  cmd->add_option("--alpha", t.alpha, "popularity-magnitude blend of the prism init")
      ->capture_default_str();
  cmd->add_option("--apply-to", t.apply_to, "which tables the prism init rescales")
      ->check(CLI::IsMember({"items", "users", "both"}))
      ->capture_default_str();
  cmd->add_option("--log-base", t.log_base, "log base of the prism magnitude schedule")
      ->check(CLI::IsMember({"natural", "base2", "base10"}))
      ->capture_default_str();
  cmd->add_option("--lr", t.lr, "SGD learning rate")->capture_default_str();
  cmd->add_option("--batch-size", t.batch_size, "positives per batch")->capture_default_str();
  cmd->add_option("--dim", t.dim, "embedding dimension")->capture_default_str();
  cmd->add_option("--max-epochs", t.max_epochs, "epoch budget")->capture_default_str();
  cmd->add_option("--patience", t.patience, "early-stopping patience in epochs")
      ->capture_default_str();
  cmd->add_option("--eval-k", t.eval_k, "NDCG cutoff K")->capture_default_str();
  cmd->add_option("--val-user-sample", t.val_user_sample,
                  "validate on this many users per epoch (0 = all)")
      ->capture_default_str();
  cmd->add_option("--window", t.window, "NDCG truncation window rule")
      ->check(CLI::IsMember({"user-truncated", "fixed-k"}))
      ->capture_default_str();
  cmd->add_option("--neg", t.n_negatives, "negatives per positive (bpr, ssm)")
      ->capture_default_str();
  cmd->add_option("--temperature", t.temperature, "softmax temperature (ssm)")
      ->capture_default_str();
  cmd->add_option("--gamma-uniformity", t.gamma_uniformity, "uniformity weight (directau)")
      ->capture_default_str();
  cmd->add_option("--gamma-user", t.gamma_user, "user uniformity weight (mawu)")
      ->capture_default_str();
  cmd->add_option("--gamma-item", t.gamma_item, "item uniformity weight (mawu)")
      ->capture_default_str();
  cmd->add_option("--seed", t.seed, "master seed of the run")->capture_default_str();
}

TrainConfig to_config(const TrainOpts& t) {
  TrainConfig c;
  c.loss.kind = parse_loss(t.loss);
  c.loss.decay.mode = parse_wd_mode(t.wd_mode);
  c.loss.decay.lambda = t.lambda;
  c.loss.n_negatives = t.n_negatives;
  c.loss.temperature = t.temperature;
  c.loss.gamma_uniformity = t.gamma_uniformity;
  c.loss.gamma_user = t.gamma_user;
  c.loss.gamma_item = t.gamma_item;
  c.init.strategy = parse_init(t.init);
  c.init.alpha = t.alpha;
  c.init.apply_to = parse_apply_to(t.apply_to);
  c.init.log_base = parse_log_base(t.log_base);
  c.learning_rate = t.lr;
  c.batch_size = t.batch_size;
  c.dim = t.dim;
  c.max_epochs = t.max_epochs;
  c.patience = t.patience;
  c.eval_k = t.eval_k;
  c.val_user_sample = t.val_user_sample;
  c.window = parse_window(t.window);
  c.seed = t.seed;
  if (c.loss.decay.lambda > 0.0 && c.loss.decay.mode == DecayMode::none) {
    throw config_error("--lambda > 0 has no effect with --wd-mode none");
  }
  return c;
}

// ---- artifact writers ----------------------------------------------------

constexpr const char* kEpochHeader =
    "epoch,train_loss,val_ndcg_dot,val_ndcg_cos,mag_popular,mag_neutral,mag_unpopular,"
    "seconds";
constexpr const char* kMetricsHeader =
    "loss,lambda,wd_mode,alpha,lr,batch_size,dim,seed,scorer,ndcg_overall,ndcg_popular,"
    "ndcg_neutral,ndcg_unpopular,debias_ratio,n_users_evaluated,best_epoch";
constexpr const char* kEvalHeader =
    "scorer,ndcg_overall,ndcg_popular,ndcg_neutral,ndcg_unpopular,debias_ratio,"
    "n_users_evaluated";
constexpr const char* kSweepHeader =
    "axis,value,seed,ndcg_overall,ndcg_popular,ndcg_neutral,ndcg_unpopular,debias_ratio,"
    "epochs_to_convergence,pearson_log,spearman,status";
constexpr const char* kCorrelateHeader = "n_items,log_base,pearson_log,spearman,defined";
constexpr const char* kHeatmapHeader = "degree,batch_fraction,closed_form";
constexpr const char* kOracleHeader = "degree,batch_fraction,closed_form,mc_mean,mc_stderr";

void write_epoch_log(const std::string& path, const std::vector<EpochRecord>& log) {
  AtomicFile f;
  f.stream() << kEpochHeader << '\n';
  for (const auto& r : log) {
    f.stream() << r.epoch << ',' << format_double(r.train_loss) << ','
               << format_double(r.val_ndcg_dot) << ',' << format_double(r.val_ndcg_cos) << ','
               << format_double(r.mag_popular) << ',' << format_double(r.mag_neutral) << ','
               << format_double(r.mag_unpopular) << ',' << format_double(r.seconds) << '\n';
  }
  f.commit(path);
}

std::string metrics_row(const TrainOpts& t, const char* scorer, const MetricsReport& m,
                        int64_t best_epoch) {
  return join_csv({t.loss, format_double(t.lambda), t.wd_mode, format_double(t.alpha),
                   format_double(t.lr), std::to_string(t.batch_size), std::to_string(t.dim),
                   std::to_string(t.seed), scorer, format_double(m.overall),
                   format_double(m.popular), format_double(m.neutral),
                   format_double(m.unpopular), format_double(m.debias_ratio),
                   std::to_string(m.n_users), std::to_string(best_epoch)});
}

void dump_vector(const Vec& v, const std::string& path) {
  Mat col(v.size(), 1);
  col.col(0) = v;
  dump_table(col, path);
}

// ---- subcommand bodies -----------------------------------------------------

int cmd_synth(const std::vector<double>& spec, const std::string& out) {
  if (spec.size() < 4) throw config_error("--spec needs USERS ITEMS EDGES EXPONENT [SEED]");
  const auto seed = spec.size() > 4 ? static_cast<uint64_t>(spec[4]) : 1ULL;
  const auto set = generate_synthetic(static_cast<int64_t>(spec[0]),
                                      static_cast<int64_t>(spec[1]),
                                      static_cast<int64_t>(spec[2]), spec[3], seed);
  save_interactions(set, out);
  std::cerr << "wrote " << set.edges.size() << " edges (" << set.n_users << " users, "
            << set.n_items << " items) to " << out << "\n";
  return 0;
}

int cmd_train(const DataOpts& d, const TrainOpts& t, const std::string& out_dir, bool quiet) {
  const auto set = load_data(d);
  const auto splits = split(set, d.ratios[0], d.ratios[1], d.ratios[2], d.split_seed);
  const auto pop = item_popularity(splits.train);
  const auto strata = stratify(pop);
  const TrainConfig cfg = to_config(t);
  if ((cfg.loss.kind == LossKind::bpr || cfg.loss.kind == LossKind::ssm) &&
      !negsample_approx_valid(cfg.batch_size, cfg.loss.n_negatives, set.n_items)) {
    std::cerr << "note: neg-sample volume per batch exceeds the item count; the "
                 "closed-form inclusion probability saturates at 1 in this regime\n";
  }

  fs::create_directories(out_dir);
  const auto result = train(cfg, splits, pop, strata, quiet ? nullptr : &std::cerr);

  dump_table(result.model.U, out_dir + "/users.prsm");
  dump_table(result.model.I, out_dir + "/items.prsm");
  if (cfg.loss.kind == LossKind::mawu) {
    dump_vector(result.model.margins.user, out_dir + "/margins_user.prsm");
    dump_vector(result.model.margins.item, out_dir + "/margins_item.prsm");
  }
  write_epoch_log(out_dir + "/epochs.csv", result.log);
  save_id_maps(set, out_dir + "/user_ids.tsv", out_dir + "/item_ids.tsv");

  if (!splits.test.edges.empty()) {
    const auto test_lists = user_item_lists(splits.test);
    const auto excluded =
        merge_user_lists(user_item_lists(splits.train), user_item_lists(splits.val));
    const auto both = evaluate_dual(result.model.U, result.model.I, test_lists, excluded,
                                    strata, cfg.eval_k, cfg.window);
    AtomicFile mf;
    mf.stream() << kMetricsHeader << '\n'
                << metrics_row(t, "dot", both.first, result.model.best_epoch) << '\n'
                << metrics_row(t, "cosine", both.second, result.model.best_epoch) << '\n';
    mf.commit(out_dir + "/metrics.csv");
  } else {
    std::cerr << "note: empty test split, metrics.csv not written\n";
  }

  AtomicFile meta;
  meta.stream() << "loss=" << t.loss << "\nlambda=" << format_double(t.lambda)
                << "\nwd_mode=" << t.wd_mode << "\ninit=" << t.init
                << "\nalpha=" << format_double(t.alpha) << "\napply_to=" << t.apply_to
                << "\nlog_base=" << t.log_base << "\nlr=" << format_double(t.lr)
                << "\nbatch_size=" << t.batch_size << "\ndim=" << t.dim
                << "\nseed=" << t.seed << "\nmax_epochs=" << t.max_epochs
                << "\npatience=" << t.patience << "\neval_k=" << t.eval_k
                << "\nval_user_sample=" << t.val_user_sample << "\nwindow=" << t.window
                << "\nneg=" << t.n_negatives
                << "\ntemperature=" << format_double(t.temperature)
                << "\ngamma_uniformity=" << format_double(t.gamma_uniformity)
                << "\ngamma_user=" << format_double(t.gamma_user)
                << "\ngamma_item=" << format_double(t.gamma_item)
                << "\nn_users=" << set.n_users << "\nn_items=" << set.n_items
                << "\nn_edges=" << set.edges.size()
                << "\ntrain_edges=" << splits.train.edges.size()
                << "\nval_edges=" << splits.val.edges.size()
                << "\ntest_edges=" << splits.test.edges.size()
                << "\nsplit_seed=" << d.split_seed
                << "\nbest_epoch=" << result.model.best_epoch
                << "\nepochs_run=" << result.model.epochs_run
                << "\nbest_val_ndcg=" << format_double(result.model.best_val_ndcg) << '\n';
  meta.commit(out_dir + "/model.meta");
  return 0;
}

int cmd_evaluate(const DataOpts& d, const std::string& model_dir, const std::string& scorer,
                 int64_t eval_k, const std::string& window, const std::string& out) {
  const auto set = load_data(d);
  const auto splits = split(set, d.ratios[0], d.ratios[1], d.ratios[2], d.split_seed);
  const auto pop = item_popularity(splits.train);
  const auto strata = stratify(pop);
  const Mat U = load_table(model_dir + "/users.prsm");
  const Mat I = load_table(model_dir + "/items.prsm");
  if (U.rows() != set.n_users || I.rows() != set.n_items) {
    throw config_error("model tables do not match the dataset shape");
  }
  if (splits.test.edges.empty()) throw config_error("empty test split");
  const auto test_lists = user_item_lists(splits.test);
  const auto excluded =
      merge_user_lists(user_item_lists(splits.train), user_item_lists(splits.val));
  const NdcgWindow w = parse_window(window);

  AtomicFile f;
  f.stream() << kEvalHeader << '\n';
  const auto emit = [&](const char* name, const MetricsReport& m) {
    f.stream() << join_csv({name, format_double(m.overall), format_double(m.popular),
                            format_double(m.neutral), format_double(m.unpopular),
                            format_double(m.debias_ratio), std::to_string(m.n_users)})
               << '\n';
  };
  if (scorer == "both") {
    const auto both = evaluate_dual(U, I, test_lists, excluded, strata, eval_k, w);
    emit("dot", both.first);
    emit("cosine", both.second);
  } else if (scorer == "dot") {
    emit("dot", evaluate(U, I, test_lists, excluded, strata, Scorer::dot, eval_k, w));
  } else {
    emit("cosine", evaluate(U, I, test_lists, excluded, strata, Scorer::cosine, eval_k, w));
  }
  f.commit(out);
  return 0;
}

int cmd_correlate(const DataOpts& d, const std::string& model_dir, const std::string& table,
                  const std::string& log_base, const std::string& out) {
  if (model_dir.empty() == table.empty()) {
    throw config_error("need exactly one of --model-dir or --table");
  }
  const auto set = load_data(d);
  const auto splits = split(set, d.ratios[0], d.ratios[1], d.ratios[2], d.split_seed);
  const auto pop = item_popularity(splits.train);
  const Mat I = load_table(table.empty() ? model_dir + "/items.prsm" : table);
  if (I.rows() != set.n_items) {
    throw config_error("item table does not match the dataset shape");
  }
  // Pearson on log degree is invariant under a base change, so the base is
  // recorded in the report but never affects the numbers.
  parse_log_base(log_base);
  const auto rep = magnitude_popularity_correlation(I, pop.degree);
  AtomicFile f;
  f.stream() << kCorrelateHeader << '\n'
             << join_csv({std::to_string(I.rows()), log_base, format_double(rep.pearson_log),
                          format_double(rep.spearman), rep.defined ? "1" : "0"})
             << '\n';
  f.commit(out);
  return 0;
}

struct TheoryOpts {
  double eta = 0.01;
  double lambda = 1e-6;
  double cos_sq = 0.81;
  double exp_sq_mag = 1.0;
  std::vector<double> degrees = {1, 2, 5, 10, 20, 50, 100, 200, 500, 1000};
  std::vector<double> bfracs = {0.001, 0.002, 0.005, 0.01, 0.02, 0.05};
  int64_t trials = 100000;
  int64_t dim = 64;
  uint64_t seed = 1;
};

int cmd_theory(const TheoryOpts& o, bool oracle, const std::string& out) {
  AtomicFile f;
  f.stream() << (oracle ? kOracleHeader : kHeatmapHeader) << '\n';
  TheoryParams p;
  p.eta = o.eta;
  p.lambda = o.lambda;
  p.cos_sq = o.cos_sq;
  p.exp_sq_mag = o.exp_sq_mag;
  p.total_edges = 1.0;
  uint64_t cell = 0;
  for (double deg : o.degrees) {
    for (double bf : o.bfracs) {
      p.degree = deg;
      p.batch_size = bf;
      const double closed = theorem1_expected_change(p);
      f.stream() << format_double(deg) << ',' << format_double(bf) << ','
                 << format_double(closed);
      if (oracle) {
        const auto trace =
            monte_carlo_magnitude(p, o.dim, o.trials, derive_seed(o.seed, cell));
        f.stream() << ',' << format_double(trace.mean) << ','
                   << format_double(trace.stderr_mean);
      }
      f.stream() << '\n';
      ++cell;
    }
  }
  f.commit(out);
  return 0;
}

struct SweepOpts {
  std::string axis;
  std::vector<double> values;
  std::vector<uint64_t> seeds = {1};
  int jobs = 1;
  bool quiet = false;
};

int cmd_sweep(const DataOpts& d, const TrainOpts& t, const SweepOpts& s,
              const std::string& out_dir) {
  if (s.values.empty()) throw config_error("--values must be nonempty");
  if (s.seeds.empty()) throw config_error("--seeds must be nonempty");
  const bool lambda_axis = s.axis == "lambda";
  if (lambda_axis) {
    for (double v : s.values) {
      if (v > 0.0 && parse_wd_mode(t.wd_mode) == DecayMode::none) {
        throw config_error("a lambda sweep with positive values needs --wd-mode full or "
                           "batched");
      }
      if (v < 0.0) throw config_error("lambda values must be >= 0");
    }
  } else {
    for (double v : s.values) {
      if (v < 0.0 || v > 1.0) throw config_error("alpha values must lie in [0, 1]");
    }
  }

  const auto set = load_data(d);
  const auto splits = split(set, d.ratios[0], d.ratios[1], d.ratios[2], d.split_seed);
  const auto pop = item_popularity(splits.train);
  const auto strata = stratify(pop);
  const auto test_lists = user_item_lists(splits.test);
  const auto excluded =
      merge_user_lists(user_item_lists(splits.train), user_item_lists(splits.val));
  if (splits.test.edges.empty()) throw config_error("empty test split");

  struct Row {
    double value = 0.0;
    uint64_t seed = 0;
    MetricsReport metrics;
    int64_t convergence = 0;
    MagnitudeReport corr{};
    bool failed = false;
    std::string error;
  };
  std::vector<Row> rows;
  for (double v : s.values) {
    for (uint64_t seed : s.seeds) {
      Row r;
      r.value = v;
      r.seed = seed;
      rows.push_back(r);
    }
  }

  std::mutex mu;
  std::atomic<size_t> cursor{0};
  const auto worker = [&]() {
    for (;;) {
      const size_t k = cursor.fetch_add(1);
      if (k >= rows.size()) return;
      Row& row = rows[k];
      try {
        TrainConfig cfg = to_config(t);
        cfg.seed = row.seed;
        if (lambda_axis) {
          cfg.init.strategy = InitSpec::Strategy::xavier;  // raw magnitudes on this axis
          cfg.loss.decay.lambda = row.value;
          if (row.value == 0.0) cfg.loss.decay.mode = DecayMode::none;
        } else {
          cfg.loss.decay.lambda = 0.0;  // the alpha axis replaces decay entirely
          cfg.loss.decay.mode = DecayMode::none;
          cfg.init.strategy = InitSpec::Strategy::prism;
          cfg.init.alpha = row.value;
        }
        const auto result = train(cfg, splits, pop, strata, nullptr);
        row.metrics = evaluate(result.model.U, result.model.I, test_lists, excluded, strata,
                               Scorer::dot, cfg.eval_k, cfg.window);
        row.convergence = epochs_to_convergence(result.log);
        row.corr = magnitude_popularity_correlation(result.model.I, pop.degree);
        if (!s.quiet) {
          std::lock_guard<std::mutex> lock(mu);
          std::cerr << "sweep " << s.axis << "=" << row.value << " seed=" << row.seed
                    << " ndcg=" << row.metrics.overall << "\n";
        }
      } catch (const std::exception& e) {
        row.failed = true;
        row.error = e.what();
        if (!s.quiet) {
          std::lock_guard<std::mutex> lock(mu);
          std::cerr << "sweep " << s.axis << "=" << row.value << " seed=" << row.seed
                    << " failed: " << e.what() << "\n";
        }
      }
    }
  };
  const int n_threads =
      std::max(1, std::min<int>(s.jobs, static_cast<int>(rows.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  fs::create_directories(out_dir);
  AtomicFile f;
  f.stream() << kSweepHeader << '\n';
  const double nan = std::nan("");
  for (const auto& row : rows) {
    std::string status = "ok";
    if (row.failed) {
      status = "failed:" + row.error;
      for (auto& c : status) {
        if (c == ',' || c == '\n') c = ';';
      }
    }
    const auto& m = row.metrics;
    f.stream() << join_csv(
                      {s.axis, format_double(row.value), std::to_string(row.seed),
                       format_double(row.failed ? nan : m.overall),
                       format_double(row.failed ? nan : m.popular),
                       format_double(row.failed ? nan : m.neutral),
                       format_double(row.failed ? nan : m.unpopular),
                       format_double(row.failed ? nan : m.debias_ratio),
                       std::to_string(row.convergence),
                       format_double(row.failed ? nan : row.corr.pearson_log),
                       format_double(row.failed ? nan : row.corr.spearman), status})
               << '\n';
  }
  f.commit(out_dir + "/sweep.csv");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"matrix-factorization trainer and embedding-magnitude analysis toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key = value file with [subcommand] sections");

  int rc = 0;

  // synth
  auto* synth = app.add_subcommand("synth", "generate a power-law interaction file");
  static std::vector<double> synth_spec;
  static std::string synth_out;
  synth->add_option("--spec", synth_spec, "USERS ITEMS EDGES EXPONENT [SEED]")
      ->expected(4, 5)
      ->required();
  synth->add_option("--out", synth_out, "output TSV path")->required();
  synth->callback([&]() { rc = cmd_synth(synth_spec, synth_out); });

  // train
  auto* train_cmd = app.add_subcommand("train", "train one model and write its artifacts");
  static DataOpts train_data;
  static TrainOpts train_opts;
  static std::string train_out;
  static bool train_quiet = false;
  add_data_opts(train_cmd, train_data);
  add_train_opts(train_cmd, train_opts);
  train_cmd->add_option("--out-dir", train_out, "artifact directory")->required();
  train_cmd->add_flag("--quiet", train_quiet, "suppress per-epoch progress on stderr");
  train_cmd->callback([&]() { rc = cmd_train(train_data, train_opts, train_out, train_quiet); });

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "train across lambda or alpha values");
  static DataOpts sweep_data;
  static TrainOpts sweep_opts;
  static SweepOpts sweep_axis;
  static std::string sweep_out;
  add_data_opts(sweep_cmd, sweep_data);
  add_train_opts(sweep_cmd, sweep_opts);
  sweep_cmd->add_option("--axis", sweep_axis.axis, "sweep axis")
      ->check(CLI::IsMember({"lambda", "alpha"}))
      ->required();
  sweep_cmd->add_option("--values", sweep_axis.values, "axis values")->required();
  sweep_cmd->add_option("--seeds", sweep_axis.seeds, "one run per (value, seed)")
      ->capture_default_str();
  sweep_cmd->add_option("--jobs", sweep_axis.jobs, "parallel cells")->capture_default_str();
  sweep_cmd->add_flag("--quiet", sweep_axis.quiet, "suppress per-cell progress on stderr");
  sweep_cmd->add_option("--out-dir", sweep_out, "directory for sweep.csv")->required();
  sweep_cmd->callback(
      [&]() { rc = cmd_sweep(sweep_data, sweep_opts, sweep_axis, sweep_out); });

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "score a stored model on the test split");
  static DataOpts eval_data;
  static std::string eval_model, eval_scorer = "both", eval_window = "user-truncated",
                     eval_out;
  static int64_t eval_k = 20;
  add_data_opts(eval_cmd, eval_data);
  eval_cmd->add_option("--model-dir", eval_model, "directory with users.prsm and items.prsm")
      ->required();
  eval_cmd->add_option("--scorer", eval_scorer, "similarity used for ranking")
      ->check(CLI::IsMember({"dot", "cosine", "both"}))
      ->capture_default_str();
  eval_cmd->add_option("--eval-k", eval_k, "NDCG cutoff K")->capture_default_str();
  eval_cmd->add_option("--window", eval_window, "NDCG truncation window rule")
      ->check(CLI::IsMember({"user-truncated", "fixed-k"}))
      ->capture_default_str();
  eval_cmd->add_option("--out", eval_out, "metrics CSV path")->required();
  eval_cmd->callback([&]() {
    rc = cmd_evaluate(eval_data, eval_model, eval_scorer, eval_k, eval_window, eval_out);
  });

  // correlate
  auto* corr_cmd =
      app.add_subcommand("correlate", "magnitude-popularity correlation of an item table");
  static DataOpts corr_data;
  static std::string corr_model, corr_table, corr_base = "natural", corr_out;
  add_data_opts(corr_cmd, corr_data);
  corr_cmd->add_option("--model-dir", corr_model, "directory with items.prsm");
  corr_cmd->add_option("--table", corr_table, "path to a bare item table");
  corr_cmd->add_option("--log-base", corr_base, "log base for the pearson column")
      ->check(CLI::IsMember({"natural", "base2", "base10"}))
      ->capture_default_str();
  corr_cmd->add_option("--out", corr_out, "report CSV path")->required();
  corr_cmd->callback(
      [&]() { rc = cmd_correlate(corr_data, corr_model, corr_table, corr_base, corr_out); });

  // theory
  auto* theory_cmd = app.add_subcommand("theory", "expected magnitude-change calculators");
  theory_cmd->require_subcommand(1);
  static TheoryOpts theory_opts;
  static std::string heatmap_out, oracle_out;
  auto* heatmap = theory_cmd->add_subcommand("heatmap", "closed-form grid CSV");
  auto* oracle =
      theory_cmd->add_subcommand("oracle", "closed form vs simulation on the same grid");
  for (auto* cmd : {heatmap, oracle}) {
    cmd->add_option("--eta", theory_opts.eta, "learning rate")->capture_default_str();
    cmd->add_option("--lambda", theory_opts.lambda, "weight decay")->capture_default_str();
    cmd->add_option("--cos-sq", theory_opts.cos_sq, "fixed squared cosine")
        ->capture_default_str();
    cmd->add_option("--exp-sq-mag", theory_opts.exp_sq_mag, "fixed squared magnitude")
        ->capture_default_str();
    cmd->add_option("--degrees", theory_opts.degrees, "item degree axis")
        ->capture_default_str();
    cmd->add_option("--bfracs", theory_opts.bfracs, "batch fraction axis")
        ->capture_default_str();
  }
  oracle->add_option("--trials", theory_opts.trials, "simulation draws per cell")
      ->capture_default_str();
  oracle->add_option("--dim", theory_opts.dim, "simulation dimension")->capture_default_str();
  oracle->add_option("--seed", theory_opts.seed, "simulation seed")->capture_default_str();
  heatmap->add_option("--out", heatmap_out, "grid CSV path")->required();
  oracle->add_option("--out", oracle_out, "grid CSV path")->required();
  heatmap->callback([&]() { rc = cmd_theory(theory_opts, false, heatmap_out); });
  oracle->callback([&]() { rc = cmd_theory(theory_opts, true, oracle_out); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const runtime_failure& e) {
    std::cerr << "runtime failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << "\n";
    return 2;
  }
  return rc;
}
