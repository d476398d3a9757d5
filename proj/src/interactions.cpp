#include "prism/interactions.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "prism/csv.hpp"

namespace prism {

namespace {

uint64_t pair_key(int64_t user, int64_t item, int64_t n_items) {
  return static_cast<uint64_t>(user) * static_cast<uint64_t>(n_items) +
         static_cast<uint64_t>(item);
}

}  // namespace

InteractionSet load_interactions(const std::string& path, const std::string& delimiter) {
  if (delimiter.empty()) throw config_error("empty delimiter");
  std::ifstream f(path);
  if (!f) throw runtime_failure("cannot open interactions file: " + path);

  auto user_ids = std::make_shared<std::vector<std::string>>();
  auto item_ids = std::make_shared<std::vector<std::string>>();
  std::unordered_map<std::string, int32_t> user_index, item_index;
  std::unordered_set<uint64_t> seen;
  InteractionSet set;

  std::string line;
  int64_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;

    const size_t d1 = line.find(delimiter);
    if (d1 == std::string::npos || d1 == 0) {
      throw runtime_failure(path + ":" + std::to_string(lineno) +
                            ": malformed line (need at least two fields)");
    }
    const size_t start2 = d1 + delimiter.size();
    size_t d2 = line.find(delimiter, start2);
    if (d2 == std::string::npos) d2 = line.size();
    if (d2 == start2) {
      throw runtime_failure(path + ":" + std::to_string(lineno) + ": empty item field");
    }
    const std::string raw_user = line.substr(0, d1);
    const std::string raw_item = line.substr(start2, d2 - start2);

    auto [uit, uinserted] = user_index.try_emplace(raw_user, static_cast<int32_t>(user_ids->size()));
    if (uinserted) user_ids->push_back(raw_user);
    auto [iit, iinserted] = item_index.try_emplace(raw_item, static_cast<int32_t>(item_ids->size()));
    if (iinserted) item_ids->push_back(raw_item);

    const uint64_t key = (static_cast<uint64_t>(uit->second) << 32) |
                         static_cast<uint32_t>(iit->second);
    if (seen.insert(key).second) {
      set.edges.push_back({uit->second, iit->second});
    }
  }
  if (set.edges.empty()) throw runtime_failure(path + ": zero interactions");
  set.n_users = static_cast<int64_t>(user_ids->size());
  set.n_items = static_cast<int64_t>(item_ids->size());
  set.user_ids = std::move(user_ids);
  set.item_ids = std::move(item_ids);
  return set;
}

void save_id_maps(const InteractionSet& set, const std::string& users_path,
                  const std::string& items_path) {
  const auto dump = [](const std::vector<std::string>& ids, const std::string& path) {
    AtomicFile out;
    for (size_t i = 0; i < ids.size(); ++i) {
      out.stream() << ids[i] << '\t' << i << '\n';
    }
    out.commit(path);
  };
  if (set.user_ids) dump(*set.user_ids, users_path);
  if (set.item_ids) dump(*set.item_ids, items_path);
}

void save_interactions(const InteractionSet& set, const std::string& path,
                       const std::string& delimiter) {
  AtomicFile out;
  const auto raw = [](const std::shared_ptr<const std::vector<std::string>>& ids, int32_t idx) {
    return ids ? (*ids)[static_cast<size_t>(idx)] : std::to_string(idx);
  };
  for (const auto& e : set.edges) {
    out.stream() << raw(set.user_ids, e.user) << delimiter << raw(set.item_ids, e.item) << '\n';
  }
  out.commit(path);
}

Splits split(const InteractionSet& set, double r_train, double r_val, double r_test,
             uint64_t seed) {
  if (r_train < 0 || r_val < 0 || r_test < 0) throw config_error("negative split ratio");
  if (std::abs(r_train + r_val + r_test - 1.0) > 1e-9) {
    throw config_error("split ratios must sum to 1");
  }
  const int64_t n = static_cast<int64_t>(set.edges.size());
  const auto n_train = static_cast<int64_t>(std::floor(r_train * static_cast<double>(n)));
  const auto n_val = static_cast<int64_t>(std::floor(r_val * static_cast<double>(n)));

  std::vector<int64_t> perm(static_cast<size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(derive_seed(seed, 17));
  rng.shuffle(perm);

  Splits s;
  for (InteractionSet* part : {&s.train, &s.val, &s.test}) {
    part->n_users = set.n_users;
    part->n_items = set.n_items;
    part->user_ids = set.user_ids;
    part->item_ids = set.item_ids;
  }
  for (int64_t k = 0; k < n; ++k) {
    const Interaction& e = set.edges[static_cast<size_t>(perm[static_cast<size_t>(k)])];
    if (k < n_train) {
      s.train.edges.push_back(e);
    } else if (k < n_train + n_val) {
      s.val.edges.push_back(e);
    } else {
      s.test.edges.push_back(e);
    }
  }
  return s;
}

PopularityIndex item_popularity(const InteractionSet& train) {
  if (train.edges.empty()) throw config_error("empty train split");
  PopularityIndex pop;
  pop.degree.assign(static_cast<size_t>(train.n_items), 0);
  pop.user_degree.assign(static_cast<size_t>(train.n_users), 0);
  for (const auto& e : train.edges) {
    ++pop.degree[static_cast<size_t>(e.item)];
    ++pop.user_degree[static_cast<size_t>(e.user)];
  }
  return pop;
}

std::vector<Stratum> stratify(const PopularityIndex& pop) {
  const int64_t m = static_cast<int64_t>(pop.degree.size());
  if (m < 1) throw config_error("stratify needs at least one item");
  std::vector<int32_t> idx(static_cast<size_t>(m));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int32_t a, int32_t b) {
    if (pop.degree[static_cast<size_t>(a)] != pop.degree[static_cast<size_t>(b)]) {
      return pop.degree[static_cast<size_t>(a)] > pop.degree[static_cast<size_t>(b)];
    }
    return a < b;
  });
  const auto n_pop = static_cast<int64_t>(std::ceil(0.05 * static_cast<double>(m)));
  const auto n_cum = static_cast<int64_t>(std::ceil(0.20 * static_cast<double>(m)));
  std::vector<Stratum> out(static_cast<size_t>(m), Stratum::unpopular);
  for (int64_t r = 0; r < m; ++r) {
    const auto i = static_cast<size_t>(idx[static_cast<size_t>(r)]);
    if (r < n_pop) {
      out[i] = Stratum::popular;
    } else if (r < n_cum) {
      out[i] = Stratum::neutral;
    }
  }
  return out;
}

Batch sample_batch(const InteractionSet& train, int64_t batch_size, int gamma, Rng& rng) {
  if (batch_size < 1) throw config_error("batch_size must be >= 1");
  if (gamma < 0) throw config_error("gamma must be >= 0");
  EpochSampler sampler(train);
  sampler.start_epoch(rng);
  Batch b;
  sampler.next(batch_size, gamma, rng, b, false);
  return b;
}

EpochSampler::EpochSampler(const InteractionSet& train) : train_(&train) {
  order_.resize(train.edges.size());
  std::iota(order_.begin(), order_.end(), 0);
}

void EpochSampler::start_epoch(Rng& rng) {
  rng.shuffle(order_);
  pos_ = 0;
}

bool EpochSampler::next(int64_t batch_size, int gamma, Rng& rng, Batch& out, bool merge_tail) {
  if (pos_ >= order_.size()) return false;
  size_t take = std::min(static_cast<size_t>(batch_size), order_.size() - pos_);
  if (merge_tail && order_.size() - pos_ == static_cast<size_t>(batch_size) + 1) {
    take = static_cast<size_t>(batch_size) + 1;
  }
  out.positives.clear();
  out.negatives.clear();
  out.gamma = gamma;
  out.positives.reserve(take);
  for (size_t k = 0; k < take; ++k) {
    out.positives.push_back(train_->edges[static_cast<size_t>(order_[pos_ + k])]);
  }
  pos_ += take;
  if (gamma > 0) {
    out.negatives.reserve(take * static_cast<size_t>(gamma));
    const auto n_items = static_cast<uint64_t>(train_->n_items);
    for (size_t k = 0; k < take * static_cast<size_t>(gamma); ++k) {
      out.negatives.push_back(static_cast<int32_t>(rng.uniform_int(n_items)));
    }
  }
  return true;
}

double batch_inclusion_probability(int64_t degree, int64_t batch_size, int64_t total_edges) {
  if (total_edges == 0) throw config_error("total_edges must be positive");
  if (degree < 0 || batch_size < 0 || batch_size > total_edges) {
    throw config_error("need 0 <= batch_size <= total_edges and degree >= 0");
  }
  const double bfrac = static_cast<double>(batch_size) / static_cast<double>(total_edges);
  return 1.0 - std::pow(1.0 - bfrac, static_cast<double>(degree));
}

bool negsample_approx_valid(int64_t batch_size, double gamma, int64_t n_items) {
  return gamma * static_cast<double>(batch_size) <= static_cast<double>(n_items);
}

double negsample_inclusion_probability(int64_t degree, int64_t batch_size, int64_t total_edges,
                                       double gamma, int64_t n_items) {
  if (n_items == 0) throw config_error("n_items must be positive");
  const double miss_pos = 1.0 - batch_inclusion_probability(degree, batch_size, total_edges);
  double miss_neg =
      1.0 - gamma * static_cast<double>(batch_size) / static_cast<double>(n_items);
  if (miss_neg < 0.0) miss_neg = 0.0;
  return 1.0 - miss_pos * miss_neg;
}

InteractionSet generate_synthetic(int64_t n_users, int64_t n_items, int64_t n_edges,
                                  double popularity_exponent, uint64_t seed) {
  if (n_users < 1 || n_items < 1 || n_edges < 1) {
    throw config_error("synthetic sizes must be positive");
  }
  if (static_cast<double>(n_edges) >
      static_cast<double>(n_users) * static_cast<double>(n_items)) {
    throw config_error("infeasible edge count: n_edges > n_users * n_items");
  }

  std::vector<double> cum(static_cast<size_t>(n_items));
  double total = 0.0;
  for (int64_t i = 0; i < n_items; ++i) {
    total += std::pow(static_cast<double>(i + 1), -popularity_exponent);
    cum[static_cast<size_t>(i)] = total;
  }

  Rng rng(derive_seed(seed, 23));
  std::unordered_set<uint64_t> seen;
  seen.reserve(static_cast<size_t>(n_edges) * 2);
  InteractionSet set;
  set.n_users = n_users;
  set.n_items = n_items;
  set.edges.reserve(static_cast<size_t>(n_edges));
  while (static_cast<int64_t>(set.edges.size()) < n_edges) {
    const auto user = static_cast<int32_t>(rng.uniform_int(static_cast<uint64_t>(n_users)));
    const double x = rng.uniform() * total;
    const auto it = std::upper_bound(cum.begin(), cum.end(), x);
    const auto item = static_cast<int32_t>(std::min<int64_t>(
        n_items - 1, static_cast<int64_t>(it - cum.begin())));
    if (seen.insert(pair_key(user, item, n_items)).second) {
      set.edges.push_back({user, item});
    }
  }
  return set;
}

}  // namespace prism
