#include "prism/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>

namespace prism {

namespace {

constexpr double kDecompositionTol = 1e-9;

std::atomic<int64_t> g_decomposition_checks{0};

struct ScoredItem {
  double score;
  int32_t item;
};

// a ranks ahead of b
bool better(const ScoredItem& a, const ScoredItem& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.item < b.item;
}

// Fixed-size selection: scan once keeping the k best in a heap whose top is
// the current worst of the kept set.
std::vector<int32_t> top_k(const double* scores, int64_t n,
                           const std::vector<int32_t>& excluded, int64_t k) {
  std::vector<ScoredItem> heap;
  heap.reserve(static_cast<size_t>(k) + 1);
  const auto worst_first = [](const ScoredItem& a, const ScoredItem& b) {
    return better(a, b);  // std heap keeps the "largest" on top; invert
  };
  size_t ex = 0;
  for (int64_t j = 0; j < n; ++j) {
    while (ex < excluded.size() && excluded[ex] < j) ++ex;
    if (ex < excluded.size() && excluded[ex] == j) continue;
    const ScoredItem cand{scores[j], static_cast<int32_t>(j)};
    if (static_cast<int64_t>(heap.size()) < k) {
      heap.push_back(cand);
      std::push_heap(heap.begin(), heap.end(), worst_first);
    } else if (!heap.empty() && better(cand, heap.front())) {
      std::pop_heap(heap.begin(), heap.end(), worst_first);
      heap.back() = cand;
      std::push_heap(heap.begin(), heap.end(), worst_first);
    }
  }
  std::sort_heap(heap.begin(), heap.end(), worst_first);  // best first
  std::vector<int32_t> out;
  out.reserve(heap.size());
  for (const auto& s : heap) out.push_back(s.item);
  return out;
}

double ideal_dcg(int64_t n_relevant, int64_t k_cap) {
  const int64_t k = std::min(n_relevant, k_cap);
  double v = 0.0;
  for (int64_t p = 1; p <= k; ++p) v += 1.0 / std::log2(static_cast<double>(p) + 1.0);
  return v;
}

struct UserNdcg {
  double overall, popular, neutral, unpopular;
};

UserNdcg user_ndcg(const std::vector<int32_t>& ranked,
                   const std::vector<int32_t>& relevant_sorted,
                   const std::vector<Stratum>* strata, int64_t k_cap, NdcgWindow window) {
  const auto n_rel = static_cast<int64_t>(relevant_sorted.size());
  const int64_t dcg_window =
      window == NdcgWindow::fixed_k ? k_cap : std::min(k_cap, n_rel);
  double parts[3] = {0.0, 0.0, 0.0};
  const int64_t limit = std::min<int64_t>(dcg_window, static_cast<int64_t>(ranked.size()));
  for (int64_t p = 1; p <= limit; ++p) {
    const int32_t item = ranked[static_cast<size_t>(p - 1)];
    if (std::binary_search(relevant_sorted.begin(), relevant_sorted.end(), item)) {
      const double gain = 1.0 / std::log2(static_cast<double>(p) + 1.0);
      const size_t s =
          strata != nullptr ? static_cast<size_t>((*strata)[static_cast<size_t>(item)]) : 0;
      parts[s] += gain;
    }
  }
  const double idcg = ideal_dcg(n_rel, k_cap);
  UserNdcg out;
  out.popular = parts[0] / idcg;
  out.neutral = parts[1] / idcg;
  out.unpopular = parts[2] / idcg;
  out.overall = (parts[0] + parts[1] + parts[2]) / idcg;
  return out;
}

}  // namespace

std::vector<std::vector<int32_t>> user_item_lists(const InteractionSet& set) {
  std::vector<std::vector<int32_t>> lists(static_cast<size_t>(set.n_users));
  for (const auto& e : set.edges) lists[static_cast<size_t>(e.user)].push_back(e.item);
  for (auto& l : lists) std::sort(l.begin(), l.end());
  return lists;
}

std::vector<std::vector<int32_t>> merge_user_lists(
    const std::vector<std::vector<int32_t>>& a, const std::vector<std::vector<int32_t>>& b) {
  std::vector<std::vector<int32_t>> out(a.size());
  for (size_t u = 0; u < a.size(); ++u) {
    out[u].resize(a[u].size() + b[u].size());
    auto end = std::set_union(a[u].begin(), a[u].end(), b[u].begin(), b[u].end(),
                              out[u].begin());
    out[u].erase(end, out[u].end());
  }
  return out;
}

std::vector<int32_t> rank_items(const RowVec& user_row, const Mat& I, Scorer scorer,
                                const std::vector<int32_t>& excluded, int64_t k) {
  Vec scores = I * user_row.transpose();
  if (scorer == Scorer::cosine) {
    const double un = user_row.norm();
    if (un == 0.0) throw runtime_failure("cosine scorer: zero-magnitude user row");
    for (int64_t j = 0; j < I.rows(); ++j) {
      const double nn = I.row(j).norm();
      if (nn == 0.0) {
        throw runtime_failure("cosine scorer: zero-magnitude item row " + std::to_string(j));
      }
      scores[j] /= un * nn;
    }
  }
  return top_k(scores.data(), I.rows(), excluded, k);
}

double ndcg_from_ranked(const std::vector<int32_t>& ranked,
                        const std::vector<int32_t>& relevant_sorted, int64_t k_cap,
                        NdcgWindow window) {
  return user_ndcg(ranked, relevant_sorted, nullptr, k_cap, window).overall;
}

StratifiedNdcg stratified_ndcg_from_ranked(const std::vector<int32_t>& ranked,
                                           const std::vector<int32_t>& relevant_sorted,
                                           const std::vector<Stratum>& strata, int64_t k_cap,
                                           NdcgWindow window) {
  const UserNdcg r = user_ndcg(ranked, relevant_sorted, &strata, k_cap, window);
  return {r.popular, r.neutral, r.unpopular};
}

namespace {

MetricsReport finalize(double overall, double pop, double neu, double unp, int64_t n) {
  MetricsReport rep;
  if (n == 0) throw runtime_failure("no evaluable users (all relevant lists empty)");
  const double dn = static_cast<double>(n);
  rep.overall = overall / dn;
  rep.popular = pop / dn;
  rep.neutral = neu / dn;
  rep.unpopular = unp / dn;
  rep.debias_ratio =
      rep.popular > 0.0 ? rep.unpopular / rep.popular : std::nan("");
  rep.n_users = n;
  return rep;
}

}  // namespace

namespace {

// want[0] = dot, want[1] = cosine; skipping a scorer leaves its report empty
std::pair<MetricsReport, MetricsReport> evaluate_impl(
    const Mat& U, const Mat& I, const std::vector<std::vector<int32_t>>& relevant,
    const std::vector<std::vector<int32_t>>& excluded, const std::vector<Stratum>& strata,
    int64_t k_cap, NdcgWindow window, const std::vector<int32_t>* user_subset,
    const bool want[2]) {
  if (static_cast<int64_t>(relevant.size()) != U.rows() ||
      static_cast<int64_t>(excluded.size()) != U.rows() ||
      static_cast<int64_t>(strata.size()) != I.rows()) {
    throw config_error("evaluation inputs do not match table shapes");
  }
  if (k_cap < 1) throw config_error("K must be >= 1");
  Vec inv_item_norm;
  if (want[1]) {
    inv_item_norm.resize(I.rows());
    for (int64_t j = 0; j < I.rows(); ++j) {
      const double nn = I.row(j).norm();
      if (nn == 0.0) {
        throw runtime_failure("cosine scorer: zero-magnitude item row " + std::to_string(j));
      }
      inv_item_norm[j] = 1.0 / nn;
    }
  }

  std::vector<int32_t> users;
  if (user_subset != nullptr) {
    users = *user_subset;
  } else {
    users.reserve(relevant.size());
    for (int64_t u = 0; u < U.rows(); ++u) users.push_back(static_cast<int32_t>(u));
  }

  double acc[2][4] = {{0, 0, 0, 0}, {0, 0, 0, 0}};
  int64_t n_eval = 0;
  const int64_t block = 256;
  Mat scores;  // block x n_items
  Vec cos_row(I.rows());

  for (size_t b0 = 0; b0 < users.size(); b0 += static_cast<size_t>(block)) {
    const size_t b1 = std::min(users.size(), b0 + static_cast<size_t>(block));
    Mat ublk(static_cast<int64_t>(b1 - b0), U.cols());
    for (size_t k = b0; k < b1; ++k) ublk.row(static_cast<int64_t>(k - b0)) = U.row(users[k]);
    scores.resize(ublk.rows(), I.rows());
    scores.noalias() = ublk * I.transpose();

    for (size_t k = b0; k < b1; ++k) {
      const int32_t u = users[k];
      const auto& rel = relevant[static_cast<size_t>(u)];
      if (rel.empty()) continue;
      if (want[1] && U.row(u).norm() == 0.0) {
        throw runtime_failure("cosine scorer: zero-magnitude user row " + std::to_string(u));
      }
      ++n_eval;
      const auto n_rel = static_cast<int64_t>(rel.size());
      const int64_t dcg_window =
          window == NdcgWindow::fixed_k ? k_cap : std::min(k_cap, n_rel);
      const double* dot_row = scores.data() + (static_cast<int64_t>(k - b0)) * scores.cols();

      for (int scorer = 0; scorer < 2; ++scorer) {
        if (!want[scorer]) continue;
        const double* row = dot_row;
        if (scorer == 1) {
          // dividing by the (constant) user norm cannot change that user's
          // ranking, so cosine order needs only the item-norm rescale
          for (int64_t j = 0; j < I.rows(); ++j) cos_row[j] = dot_row[j] * inv_item_norm[j];
          row = cos_row.data();
        }
        const auto ranked = top_k(row, I.rows(), excluded[static_cast<size_t>(u)], dcg_window);
        const UserNdcg r = user_ndcg(ranked, rel, &strata, k_cap, window);
        g_decomposition_checks.fetch_add(1, std::memory_order_relaxed);
        if (std::abs((r.popular + r.neutral + r.unpopular) - r.overall) > kDecompositionTol) {
          throw runtime_failure("stratified NDCG decomposition violated for user " +
                                std::to_string(u));
        }
        acc[scorer][0] += r.overall;
        acc[scorer][1] += r.popular;
        acc[scorer][2] += r.neutral;
        acc[scorer][3] += r.unpopular;
      }
    }
  }
  std::pair<MetricsReport, MetricsReport> out;
  if (want[0]) out.first = finalize(acc[0][0], acc[0][1], acc[0][2], acc[0][3], n_eval);
  if (want[1]) out.second = finalize(acc[1][0], acc[1][1], acc[1][2], acc[1][3], n_eval);
  return out;
}

}  // namespace

std::pair<MetricsReport, MetricsReport> evaluate_dual(
    const Mat& U, const Mat& I, const std::vector<std::vector<int32_t>>& relevant,
    const std::vector<std::vector<int32_t>>& excluded, const std::vector<Stratum>& strata,
    int64_t k_cap, NdcgWindow window, const std::vector<int32_t>* user_subset) {
  const bool want[2] = {true, true};
  return evaluate_impl(U, I, relevant, excluded, strata, k_cap, window, user_subset, want);
}

MetricsReport evaluate(const Mat& U, const Mat& I,
                       const std::vector<std::vector<int32_t>>& relevant,
                       const std::vector<std::vector<int32_t>>& excluded,
                       const std::vector<Stratum>& strata, Scorer scorer, int64_t k_cap,
                       NdcgWindow window, const std::vector<int32_t>* user_subset) {
  const bool want[2] = {scorer == Scorer::dot, scorer == Scorer::cosine};
  const auto both =
      evaluate_impl(U, I, relevant, excluded, strata, k_cap, window, user_subset, want);
  return scorer == Scorer::dot ? both.first : both.second;
}

int64_t decomposition_checks() noexcept {
  return g_decomposition_checks.load(std::memory_order_relaxed);
}

}  // namespace prism
