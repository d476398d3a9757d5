#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "prism/rng.hpp"
#include "prism/types.hpp"

namespace prism {

struct Interaction {
  int32_t user;
  int32_t item;
};

// Deduplicated implicit-feedback edge list over contiguous 0-based ids.
// The id tables map contiguous index -> raw id as read from the input file;
// they are shared between a parent set and its splits.
struct InteractionSet {
  int64_t n_users = 0;
  int64_t n_items = 0;
  std::vector<Interaction> edges;
  std::shared_ptr<const std::vector<std::string>> user_ids;
  std::shared_ptr<const std::vector<std::string>> item_ids;
};

struct Splits {
  InteractionSet train;
  InteractionSet val;
  InteractionSet test;
};

struct PopularityIndex {
  std::vector<int64_t> degree;       // per item, train interactions
  std::vector<int64_t> user_degree;  // per user, train interactions
};

enum class Stratum : uint8_t { popular = 0, neutral = 1, unpopular = 2 };

struct Batch {
  std::vector<Interaction> positives;
  std::vector<int32_t> negatives;  // flattened, gamma per positive
  int gamma = 0;
};

// Lines starting with '#' and empty lines are skipped. The first two fields
// of every other line are the raw user and item ids; extra fields are
// ignored. Exact duplicate (user, item) pairs are collapsed.
InteractionSet load_interactions(const std::string& path, const std::string& delimiter = "\t");

void save_id_maps(const InteractionSet& set, const std::string& users_path,
                  const std::string& items_path);

// Uniform random partition of the edges. Sizes are floor(r0*|E|) and
// floor(r1*|E|), remainder to the third split. Same seed, same partition.
Splits split(const InteractionSet& set, double r_train, double r_val, double r_test,
             uint64_t seed);

PopularityIndex item_popularity(const InteractionSet& train);

// Ranks items by descending degree (ties by ascending index): the top
// ceil(5%) are popular, the next up to ceil(20%) cumulative are neutral,
// the rest unpopular.
std::vector<Stratum> stratify(const PopularityIndex& pop);

// One batch drawn as the head of a freshly shuffled epoch; negatives drawn
// uniformly with replacement from all items (false negatives allowed).
Batch sample_batch(const InteractionSet& train, int64_t batch_size, int gamma, Rng& rng);

// Streams consecutive batches of one shuffled pass over the train edges.
class EpochSampler {
 public:
  explicit EpochSampler(const InteractionSet& train);
  void start_epoch(Rng& rng);
  // Returns false when the epoch is exhausted. When merge_tail is set, a
  // final batch of size 1 is folded into the previous one (pairwise losses
  // need at least two positions).
  bool next(int64_t batch_size, int gamma, Rng& rng, Batch& out, bool merge_tail);

 private:
  const InteractionSet* train_;
  std::vector<int64_t> order_;
  size_t pos_ = 0;
};

// 1 - (1 - |B|/|E|)^d: the chance an item with degree d has at least one of
// its interactions in a uniformly drawn batch of |B| of the |E| edges.
double batch_inclusion_probability(int64_t degree, int64_t batch_size, int64_t total_edges);

// Extends the above with uniform negative sampling of gamma items per
// positive: 1 - (1 - |B|/|E|)^d * (1 - gamma|B|/|I|). The second factor is
// an independence approximation; it is clamped at 0 when gamma|B| > |I|.
double negsample_inclusion_probability(int64_t degree, int64_t batch_size, int64_t total_edges,
                                       double gamma, int64_t n_items);
bool negsample_approx_valid(int64_t batch_size, double gamma, int64_t n_items);

// Power-law test fixture: item weights proportional to (index+1)^-exponent,
// users uniform, pairs deduplicated until n_edges distinct edges exist.
InteractionSet generate_synthetic(int64_t n_users, int64_t n_items, int64_t n_edges,
                                  double popularity_exponent, uint64_t seed);

void save_interactions(const InteractionSet& set, const std::string& path,
                       const std::string& delimiter = "\t");

}  // namespace prism
