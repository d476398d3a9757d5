#include "prism/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace prism {

namespace {

constexpr double kCosClamp = 1.0 - 1e-12;

double softplus(double z) {
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

// sigmoid(-x), computed without overflow on either tail
double sigmoid_neg(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(x));
}

double checked_norm(const RowVec& row, const char* table, int32_t idx) {
  const double n = row.norm();
  if (n == 0.0) {
    throw runtime_failure(std::string("zero-magnitude ") + table + " row " +
                          std::to_string(idx));
  }
  return n;
}

// Normalized batch rows plus bookkeeping to push normalized-space gradients
// back onto the raw table rows.
struct NormalizedBlock {
  Mat n;          // B x d, unit rows
  Vec norm;       // raw row norms
  std::vector<int32_t> ids;
};

NormalizedBlock gather_normalized(const Mat& table, const std::vector<int32_t>& ids,
                                  const char* name) {
  NormalizedBlock blk;
  const auto B = static_cast<int64_t>(ids.size());
  blk.n.resize(B, table.cols());
  blk.norm.resize(B);
  blk.ids = ids;
  for (int64_t b = 0; b < B; ++b) {
    const int32_t id = ids[static_cast<size_t>(b)];
    const double nn = checked_norm(table.row(id), name, id);
    blk.norm[b] = nn;
    blk.n.row(b) = table.row(id) / nn;
  }
  return blk;
}

// log sum over position pairs p<q of exp(-2||n_p - n_q||^2); identical
// positions contribute exp(0). Returns 0 (and no gradient) for B < 2: the
// pair set is empty.
double uniformity(const NormalizedBlock& blk, double weight, Mat* grad_n) {
  const int64_t B = blk.n.rows();
  if (B < 2 || weight == 0.0) return 0.0;
  Mat W(B, B);
  W.noalias() = blk.n * blk.n.transpose();
  // exp(-2 d^2) = exp(4(g - 1)) for unit rows with gram entry g
  W = ((W.array() - 1.0) * 4.0).exp().matrix();
  W.diagonal().setOnes();
  const double S = (W.sum() - static_cast<double>(B)) / 2.0;
  if (grad_n != nullptr) {
    Mat M(B, blk.n.cols());
    M.noalias() = W * blk.n;
    grad_n->noalias() += (weight * 4.0 / S) * (M - blk.n);
  }
  return weight * std::log(S);
}

// d cos / d raw_row = (other_hat - cos * self_hat) / ||raw_row||
// d n_hat backprop: g_raw = (g_n - (g_n . n_hat) n_hat) / ||raw_row||
void scatter_normalized_grad(const NormalizedBlock& blk, const Mat& grad_n, bool users,
                             GradientBuffer& out) {
  for (int64_t b = 0; b < blk.n.rows(); ++b) {
    const RowVec g =
        (grad_n.row(b) - grad_n.row(b).dot(blk.n.row(b)) * blk.n.row(b)) / blk.norm[b];
    if (users) {
      out.add_user(blk.ids[static_cast<size_t>(b)], g);
    } else {
      out.add_item(blk.ids[static_cast<size_t>(b)], g);
    }
  }
}

void require_negatives(const Batch& batch, const char* loss) {
  if (batch.gamma < 1 ||
      batch.negatives.size() != batch.positives.size() * static_cast<size_t>(batch.gamma)) {
    throw config_error(std::string(loss) + " needs gamma >= 1 negatives per positive");
  }
}

}  // namespace

void GradientBuffer::resize(int64_t n_users, int64_t n_items, int64_t dim, bool margins) {
  user_grad.setZero(n_users, dim);
  item_grad.setZero(n_items, dim);
  user_seen.assign(static_cast<size_t>(n_users), 0);
  item_seen.assign(static_cast<size_t>(n_items), 0);
  touched_users.clear();
  touched_items.clear();
  with_margins = margins;
  if (margins) {
    margin_user_grad.setZero(n_users);
    margin_item_grad.setZero(n_items);
  }
}

void GradientBuffer::clear() {
  for (int32_t u : touched_users) {
    user_grad.row(u).setZero();
    user_seen[static_cast<size_t>(u)] = 0;
    if (with_margins) margin_user_grad[u] = 0.0;
  }
  for (int32_t i : touched_items) {
    item_grad.row(i).setZero();
    item_seen[static_cast<size_t>(i)] = 0;
    if (with_margins) margin_item_grad[i] = 0.0;
  }
  touched_users.clear();
  touched_items.clear();
}

double bpr_loss(const Batch& batch, const Mat& U, const Mat& I, GradientBuffer* grads) {
  require_negatives(batch, "bpr");
  double loss = 0.0;
  const auto gamma = static_cast<size_t>(batch.gamma);
  for (size_t p = 0; p < batch.positives.size(); ++p) {
    const int32_t u = batch.positives[p].user;
    const int32_t i = batch.positives[p].item;
    const double pos_score = U.row(u).dot(I.row(i));
    for (size_t k = 0; k < gamma; ++k) {
      const int32_t j = batch.negatives[p * gamma + k];
      const double x = pos_score - U.row(u).dot(I.row(j));
      loss += softplus(-x);
      if (grads != nullptr) {
        const double s = sigmoid_neg(x);  // -dL/dx
        grads->add_user(u, -s * (I.row(i) - I.row(j)));
        grads->add_item(i, -s * U.row(u));
        grads->add_item(j, s * U.row(u));
      }
    }
  }
  return loss;
}

double ssm_loss(const Batch& batch, const Mat& U, const Mat& I, double temperature,
                GradientBuffer* grads) {
  require_negatives(batch, "ssm");
  if (temperature <= 0.0) throw config_error("temperature must be positive");
  double loss = 0.0;
  const auto gamma = static_cast<size_t>(batch.gamma);
  const size_t n_cand = gamma + 1;
  std::vector<int32_t> cand(n_cand);
  std::vector<double> cosv(n_cand), prob(n_cand);
  Vec inv_norm(static_cast<int64_t>(n_cand));

  for (size_t p = 0; p < batch.positives.size(); ++p) {
    const int32_t u = batch.positives[p].user;
    const double u_norm = checked_norm(U.row(u), "user", u);
    const RowVec u_hat = U.row(u) / u_norm;

    cand[0] = batch.positives[p].item;
    for (size_t k = 0; k < gamma; ++k) cand[k + 1] = batch.negatives[p * gamma + k];

    double max_s = -std::numeric_limits<double>::infinity();
    for (size_t c = 0; c < n_cand; ++c) {
      const double nn = checked_norm(I.row(cand[c]), "item", cand[c]);
      inv_norm[static_cast<int64_t>(c)] = 1.0 / nn;
      cosv[c] = u_hat.dot(I.row(cand[c])) / nn;
      max_s = std::max(max_s, cosv[c] / temperature);
    }
    double z = 0.0;
    for (size_t c = 0; c < n_cand; ++c) {
      prob[c] = std::exp(cosv[c] / temperature - max_s);
      z += prob[c];
    }
    loss += -cosv[0] / temperature + max_s + std::log(z);

    if (grads != nullptr) {
      RowVec gu = RowVec::Zero(U.cols());
      for (size_t c = 0; c < n_cand; ++c) {
        prob[c] /= z;
        const double dc = (prob[c] - (c == 0 ? 1.0 : 0.0)) / temperature;
        const RowVec i_hat = I.row(cand[c]) * inv_norm[static_cast<int64_t>(c)];
        gu += dc * (i_hat - cosv[c] * u_hat);
        grads->add_item(cand[c],
                        dc * (u_hat - cosv[c] * i_hat) * inv_norm[static_cast<int64_t>(c)]);
      }
      grads->add_user(u, gu / u_norm);
    }
  }
  return loss;
}

double directau_loss(const Batch& batch, const Mat& U, const Mat& I, double gamma,
                     GradientBuffer* grads) {
  const auto B = static_cast<int64_t>(batch.positives.size());
  if (B < 1) throw config_error("directau needs a nonempty batch");
  std::vector<int32_t> users(static_cast<size_t>(B)), items(static_cast<size_t>(B));
  for (int64_t b = 0; b < B; ++b) {
    users[static_cast<size_t>(b)] = batch.positives[static_cast<size_t>(b)].user;
    items[static_cast<size_t>(b)] = batch.positives[static_cast<size_t>(b)].item;
  }
  const NormalizedBlock bu = gather_normalized(U, users, "user");
  const NormalizedBlock bi = gather_normalized(I, items, "item");

  const Mat diff = bu.n - bi.n;
  double loss = diff.squaredNorm();

  Mat gu, gi;
  Mat* gu_p = nullptr;
  Mat* gi_p = nullptr;
  if (grads != nullptr) {
    gu = 2.0 * diff;
    gi = -2.0 * diff;
    gu_p = &gu;
    gi_p = &gi;
  }
  loss += uniformity(bu, gamma, gu_p);
  loss += uniformity(bi, gamma, gi_p);
  if (grads != nullptr) {
    scatter_normalized_grad(bu, gu, true, *grads);
    scatter_normalized_grad(bi, gi, false, *grads);
  }
  return loss;
}

double mawu_loss(const Batch& batch, const Mat& U, const Mat& I, const MarginTable& margins,
                 double gamma_user, double gamma_item, GradientBuffer* grads) {
  const auto B = static_cast<int64_t>(batch.positives.size());
  if (B < 1) throw config_error("mawu needs a nonempty batch");
  if (margins.user.size() != U.rows() || margins.item.size() != I.rows()) {
    throw config_error("margin table does not cover all entities");
  }
  if (grads != nullptr && !grads->with_margins) {
    throw config_error("gradient buffer lacks margin storage");
  }
  std::vector<int32_t> users(static_cast<size_t>(B)), items(static_cast<size_t>(B));
  for (int64_t b = 0; b < B; ++b) {
    users[static_cast<size_t>(b)] = batch.positives[static_cast<size_t>(b)].user;
    items[static_cast<size_t>(b)] = batch.positives[static_cast<size_t>(b)].item;
  }
  const NormalizedBlock bu = gather_normalized(U, users, "user");
  const NormalizedBlock bi = gather_normalized(I, items, "item");

  double loss = 0.0;
  Mat gu, gi;
  if (grads != nullptr) {
    gu.setZero(B, U.cols());
    gi.setZero(B, I.cols());
  }
  for (int64_t b = 0; b < B; ++b) {
    const int32_t u = users[static_cast<size_t>(b)];
    const int32_t i = items[static_cast<size_t>(b)];
    double c = bu.n.row(b).dot(bi.n.row(b));
    c = std::clamp(c, -kCosClamp, kCosClamp);
    const double theta = std::acos(c);
    const double phase = theta + margins.user[u] + margins.item[i];
    loss += -std::cos(phase);
    if (grads != nullptr) {
      const double dphase = std::sin(phase);
      const double dcos = -dphase / std::sqrt(1.0 - c * c);
      gu.row(b) += dcos * (bi.n.row(b) - c * bu.n.row(b));
      gi.row(b) += dcos * (bu.n.row(b) - c * bi.n.row(b));
      grads->margin_user_grad[u] += dphase;
      grads->margin_item_grad[i] += dphase;
    }
  }
  loss += uniformity(bu, gamma_user, grads != nullptr ? &gu : nullptr);
  loss += uniformity(bi, gamma_item, grads != nullptr ? &gi : nullptr);
  if (grads != nullptr) {
    // the per-pair term above is already in normalized coordinates, so the
    // same normalization backprop covers alignment and uniformity together
    scatter_normalized_grad(bu, gu, true, *grads);
    scatter_normalized_grad(bi, gi, false, *grads);
  }
  return loss;
}

double compute_loss(const LossSpec& spec, const Batch& batch, const Mat& U, const Mat& I,
                    const MarginTable& margins, GradientBuffer* grads) {
  switch (spec.kind) {
    case LossKind::bpr:
      return bpr_loss(batch, U, I, grads);
    case LossKind::ssm:
      return ssm_loss(batch, U, I, spec.temperature, grads);
    case LossKind::directau:
      return directau_loss(batch, U, I, spec.gamma_uniformity, grads);
    case LossKind::mawu:
      return mawu_loss(batch, U, I, margins, spec.gamma_user, spec.gamma_item, grads);
  }
  throw config_error("unknown loss kind");
}

void apply_weight_decay(Mat& U, Mat& I, double eta, double lambda, DecayMode mode,
                        const Batch* batch) {
  if (eta < 0.0 || lambda < 0.0) throw config_error("eta and lambda must be >= 0");
  if (eta * lambda >= 1.0) throw config_error("eta*lambda >= 1 would destroy the tables");
  if (mode == DecayMode::none || lambda == 0.0 || eta == 0.0) return;
  const double f = 1.0 - eta * lambda;
  if (mode == DecayMode::full) {
    U *= f;
    I *= f;
    return;
  }
  if (batch == nullptr) throw config_error("batched decay needs a batch");
  std::vector<int32_t> us, is;
  us.reserve(batch->positives.size());
  is.reserve(batch->positives.size() + batch->negatives.size());
  for (const auto& e : batch->positives) {
    us.push_back(e.user);
    is.push_back(e.item);
  }
  is.insert(is.end(), batch->negatives.begin(), batch->negatives.end());
  std::sort(us.begin(), us.end());
  us.erase(std::unique(us.begin(), us.end()), us.end());
  std::sort(is.begin(), is.end());
  is.erase(std::unique(is.begin(), is.end()), is.end());
  for (int32_t u : us) U.row(u) *= f;
  for (int32_t i : is) I.row(i) *= f;
}

bool is_angle_based(LossKind kind) { return kind != LossKind::bpr; }

double check_scale_invariance(const LossSpec& spec, const Batch& batch, const Mat& U,
                              const Mat& I, const MarginTable& margins,
                              const Vec& user_scales, const Vec& item_scales) {
  if (user_scales.size() != U.rows() || item_scales.size() != I.rows()) {
    throw config_error("scale vectors must cover all rows");
  }
  if (user_scales.minCoeff() <= 0.0 || item_scales.minCoeff() <= 0.0) {
    throw config_error("scale factors must be positive");
  }
  const double base = compute_loss(spec, batch, U, I, margins, nullptr);
  const Mat Us = user_scales.asDiagonal() * U;
  const Mat Is = item_scales.asDiagonal() * I;
  const double scaled = compute_loss(spec, batch, Us, Is, margins, nullptr);
  return std::abs(scaled - base);
}

}  // namespace prism
