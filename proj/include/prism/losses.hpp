#pragma once

#include <cstdint>
#include <vector>

#include "prism/interactions.hpp"
#include "prism/types.hpp"

namespace prism {

enum class LossKind : uint8_t { bpr, ssm, directau, mawu };
enum class DecayMode : uint8_t { none, full, batched };

struct DecaySpec {
  DecayMode mode = DecayMode::none;
  double lambda = 0.0;
};

struct LossSpec {
  LossKind kind = LossKind::bpr;
  double gamma_uniformity = 1.0;  // DirectAU
  double gamma_user = 1.0;        // MAWU
  double gamma_item = 1.0;        // MAWU
  int n_negatives = 1;            // BPR / SSM
  double temperature = 1.0;       // SSM
  DecaySpec decay;
};

struct MarginTable {
  Vec user;
  Vec item;
};

// Sparse gradient accumulator backed by dense scratch tables; only rows in
// the touched lists are nonzero. clear() zeroes exactly those rows, so the
// buffer is cheap to reuse across batches.
struct GradientBuffer {
  Mat user_grad, item_grad;
  Vec margin_user_grad, margin_item_grad;
  std::vector<int32_t> touched_users, touched_items;
  std::vector<uint8_t> user_seen, item_seen;
  bool with_margins = false;

  void resize(int64_t n_users, int64_t n_items, int64_t dim, bool margins);
  void clear();

  template <typename Expr>
  void add_user(int32_t u, const Expr& g) {
    if (!user_seen[static_cast<size_t>(u)]) {
      user_seen[static_cast<size_t>(u)] = 1;
      touched_users.push_back(u);
    }
    user_grad.row(u) += g;
  }
  template <typename Expr>
  void add_item(int32_t i, const Expr& g) {
    if (!item_seen[static_cast<size_t>(i)]) {
      item_seen[static_cast<size_t>(i)] = 1;
      touched_items.push_back(i);
    }
    item_grad.row(i) += g;
  }
};

// Each returns the batch loss; when grads is non-null the exact analytic
// gradients of that value are accumulated into it.
double bpr_loss(const Batch& batch, const Mat& U, const Mat& I, GradientBuffer* grads);
double ssm_loss(const Batch& batch, const Mat& U, const Mat& I, double temperature,
                GradientBuffer* grads);
double directau_loss(const Batch& batch, const Mat& U, const Mat& I, double gamma,
                     GradientBuffer* grads);
double mawu_loss(const Batch& batch, const Mat& U, const Mat& I, const MarginTable& margins,
                 double gamma_user, double gamma_item, GradientBuffer* grads);

double compute_loss(const LossSpec& spec, const Batch& batch, const Mat& U, const Mat& I,
                    const MarginTable& margins, GradientBuffer* grads);

// mode=full scales every row of both tables by (1 - eta*lambda); mode=batched
// scales only rows of entities present in the batch (negatives included).
void apply_weight_decay(Mat& U, Mat& I, double eta, double lambda, DecayMode mode,
                        const Batch* batch);

bool is_angle_based(LossKind kind);

// |L(scaled U, scaled I) - L(U, I)| under per-row positive rescaling.
double check_scale_invariance(const LossSpec& spec, const Batch& batch, const Mat& U,
                              const Mat& I, const MarginTable& margins,
                              const Vec& user_scales, const Vec& item_scales);

}  // namespace prism
