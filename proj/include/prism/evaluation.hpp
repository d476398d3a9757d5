#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "prism/interactions.hpp"
#include "prism/types.hpp"

namespace prism {

enum class Scorer : uint8_t { dot, cosine };

// Window rule for NDCG truncation. user_truncated sums ranked positions
// 1..min(K_cap, N(u)) for both DCG and IDCG (the default). fixed_k sums DCG
// over positions 1..K_cap while IDCG still uses min(K_cap, N(u)) positions.
enum class NdcgWindow : uint8_t { user_truncated, fixed_k };

struct MetricsReport {
  double overall = 0.0;
  double popular = 0.0;
  double neutral = 0.0;
  double unpopular = 0.0;
  double debias_ratio = 0.0;  // unpopular / popular
  int64_t n_users = 0;
};

// Per-user sorted item lists from an edge list.
std::vector<std::vector<int32_t>> user_item_lists(const InteractionSet& set);

// Union of two per-user sorted lists, for candidate exclusion.
std::vector<std::vector<int32_t>> merge_user_lists(
    const std::vector<std::vector<int32_t>>& a, const std::vector<std::vector<int32_t>>& b);

// Top-K item ids for one user, best first; excluded items never appear and
// score ties break by ascending item index.
std::vector<int32_t> rank_items(const RowVec& user_row, const Mat& I, Scorer scorer,
                                const std::vector<int32_t>& excluded, int64_t k);

double ndcg_from_ranked(const std::vector<int32_t>& ranked,
                        const std::vector<int32_t>& relevant_sorted, int64_t k_cap,
                        NdcgWindow window);

struct StratifiedNdcg {
  double popular = 0.0;
  double neutral = 0.0;
  double unpopular = 0.0;
};

// Shares the ranked list and the IDCG of the overall metric; relevance of
// items outside each stratum is masked to zero, so the parts always sum to
// the overall value.
StratifiedNdcg stratified_ndcg_from_ranked(const std::vector<int32_t>& ranked,
                                           const std::vector<int32_t>& relevant_sorted,
                                           const std::vector<Stratum>& strata, int64_t k_cap,
                                           NdcgWindow window);

// Mean NDCG@K over users with nonempty relevant lists. Enforces the
// per-user decomposition identity (popular+neutral+unpopular == overall
// within 1e-9) on every user and aborts if it is ever violated.
MetricsReport evaluate(const Mat& U, const Mat& I,
                       const std::vector<std::vector<int32_t>>& relevant,
                       const std::vector<std::vector<int32_t>>& excluded,
                       const std::vector<Stratum>& strata, Scorer scorer, int64_t k_cap,
                       NdcgWindow window, const std::vector<int32_t>* user_subset = nullptr);

// Same, but computes the score matrix once and returns (dot, cosine).
std::pair<MetricsReport, MetricsReport> evaluate_dual(
    const Mat& U, const Mat& I, const std::vector<std::vector<int32_t>>& relevant,
    const std::vector<std::vector<int32_t>>& excluded, const std::vector<Stratum>& strata,
    int64_t k_cap, NdcgWindow window, const std::vector<int32_t>* user_subset = nullptr);

// Process-wide count of per-user decomposition-identity checks performed.
// Every evaluated (user, scorer) pair increments it once; a violation throws
// before the offending result can be aggregated.
int64_t decomposition_checks() noexcept;

}  // namespace prism
