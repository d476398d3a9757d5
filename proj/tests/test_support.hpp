#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "prism/interactions.hpp"
#include "prism/losses.hpp"
#include "prism/rng.hpp"
#include "prism/types.hpp"

namespace prism_test {

using namespace prism;

inline std::string write_temp(const std::string& name, const std::string& content) {
  const std::string path = std::string("test_tmp_") + name;
  std::ofstream f(path, std::ios::trunc | std::ios::binary);
  f << content;
  return path;
}

// Random embedding tables with rows bounded away from zero magnitude so
// cosine-based losses stay well defined.
inline Mat random_table(int64_t rows, int64_t dim, Rng& rng) {
  Mat t(rows, dim);
  for (int64_t r = 0; r < rows; ++r) {
    do {
      for (int64_t c = 0; c < dim; ++c) t(r, c) = rng.normal();
    } while (t.row(r).norm() < 0.3);
  }
  return t;
}

inline Batch random_batch(int64_t n_users, int64_t n_items, int64_t n_pos, int gamma,
                          Rng& rng) {
  Batch b;
  b.gamma = gamma;
  for (int64_t p = 0; p < n_pos; ++p) {
    b.positives.push_back({static_cast<int32_t>(rng.uniform_int(static_cast<uint64_t>(n_users))),
                           static_cast<int32_t>(rng.uniform_int(static_cast<uint64_t>(n_items)))});
    for (int g = 0; g < gamma; ++g) {
      b.negatives.push_back(static_cast<int32_t>(rng.uniform_int(static_cast<uint64_t>(n_items))));
    }
  }
  return b;
}

// Central finite differences against the analytic gradients already in
// `grads`.  Worst relative |analytic - fd| / scale over components with
// scale = max(|analytic|, |fd|) above floor_mag.  Components at or below the
// floor sit inside the central-difference noise band (|L|*eps/2h absolute),
// where a relative comparison measures rounding, not the gradient; when
// worst_abs_small is given, those components instead report their worst
// absolute disagreement, which must stay at the noise floor.
template <typename EvalFn>
double max_fd_rel_error(EvalFn&& eval, Mat& U, Mat& I, MarginTable* margins,
                        const GradientBuffer& grads, double h = 1e-6,
                        double floor_mag = 1e-8, double* worst_abs_small = nullptr) {
  double worst = 0.0;
  const auto check = [&](double& slot, double analytic) {
    const double saved = slot;
    slot = saved + h;
    const double fp = eval();
    slot = saved - h;
    const double fm = eval();
    slot = saved;
    const double fd = (fp - fm) / (2.0 * h);
    const double scale = std::max(std::abs(analytic), std::abs(fd));
    if (scale > floor_mag) {
      worst = std::max(worst, std::abs(analytic - fd) / scale);
    } else if (worst_abs_small != nullptr) {
      *worst_abs_small = std::max(*worst_abs_small, std::abs(analytic - fd));
    }
  };
  for (int32_t u : grads.touched_users) {
    for (int64_t k = 0; k < U.cols(); ++k) check(U(u, k), grads.user_grad(u, k));
  }
  for (int32_t i : grads.touched_items) {
    for (int64_t k = 0; k < I.cols(); ++k) check(I(i, k), grads.item_grad(i, k));
  }
  if (margins != nullptr && grads.with_margins) {
    for (int32_t u : grads.touched_users) check(margins->user[u], grads.margin_user_grad[u]);
    for (int32_t i : grads.touched_items) check(margins->item[i], grads.margin_item_grad[i]);
  }
  return worst;
}

}  // namespace prism_test
