#include "prism/theory.hpp"

#include <cmath>

#include "prism/rng.hpp"

namespace prism {

namespace {

void validate(const TheoryParams& p) {
  if (p.eta < 0.0 || p.lambda < 0.0) throw config_error("eta and lambda must be >= 0");
  if (p.cos_sq < 0.0 || p.cos_sq > 1.0) throw config_error("cos_sq must lie in [0, 1]");
  if (p.exp_sq_mag <= 0.0) throw config_error("exp_sq_mag must be positive");
  if (p.total_edges <= 0.0) throw config_error("total_edges must be positive");
  if (p.batch_size < 0.0 || p.batch_size > p.total_edges) {
    throw config_error("need 0 <= batch_size <= total_edges");
  }
  if (p.degree < 0.0) throw config_error("degree must be >= 0");
}

double decay_term(const TheoryParams& p) {
  const double el = p.eta * p.lambda;
  return p.exp_sq_mag * el * (el - 2.0);
}

double ranking_term(const TheoryParams& p) {
  return (p.eta * p.eta / p.exp_sq_mag) * (1.0 - p.cos_sq);
}

}  // namespace

double inclusion_probability(const TheoryParams& p) {
  validate(p);
  return 1.0 - std::pow(1.0 - p.batch_size / p.total_edges, p.degree);
}

double negsample_probability(const TheoryParams& p) {
  validate(p);
  if (p.n_items <= 0.0) throw config_error("n_items must be positive");
  double miss_neg = 1.0 - p.gamma * p.batch_size / p.n_items;
  if (miss_neg < 0.0) miss_neg = 0.0;
  return 1.0 - std::pow(1.0 - p.batch_size / p.total_edges, p.degree) * miss_neg;
}

double theorem1_expected_change(const TheoryParams& p) {
  return decay_term(p) + inclusion_probability(p) * ranking_term(p);
}

double corollary1_expected_change(const TheoryParams& p) {
  return inclusion_probability(p) * (decay_term(p) + ranking_term(p));
}

double corollary2_expected_change(const TheoryParams& p) {
  return decay_term(p) + negsample_probability(p) * ranking_term(p);
}

double dot_update_expected_change(const TheoryParams& p, double exp_dot, double exp_u_sq) {
  const double el = p.eta * p.lambda;
  const double decay = p.exp_sq_mag * (el * el - 2.0 * el);
  const double ranking =
      2.0 * (p.eta - p.eta * p.eta * p.lambda) * exp_dot + p.eta * p.eta * exp_u_sq;
  return decay + inclusion_probability(p) * ranking;
}

Vec euclidean_step(const Vec& i_vec, const Vec& u_vec, double eta, double lambda,
                   bool in_batch) {
  if (in_batch) {
    return i_vec * (1.0 - 2.0 * eta - eta * lambda) + 2.0 * eta * u_vec;
  }
  return i_vec * (1.0 - eta * lambda);
}

MagnitudeTrace monte_carlo_magnitude(const TheoryParams& p, int64_t dim, int64_t trials,
                                     uint64_t seed) {
  validate(p);
  if (trials < 1000) throw config_error("need at least 1000 trials");
  if (dim < 2 && p.cos_sq < 1.0) {
    throw config_error("dim < 2 cannot realize cos_sq < 1");
  }
  const double prob = inclusion_probability(p);
  const double mag = std::sqrt(p.exp_sq_mag);
  const double decay = 1.0 - p.eta * p.lambda;

  Rng rng(derive_seed(seed, 71));
  MagnitudeTrace trace;
  trace.deltas.resize(static_cast<size_t>(trials));

  Vec u_hat(dim), v(dim), v_hat(dim), i_vec(dim);
  for (int64_t t = 0; t < trials; ++t) {
    // unit direction for u
    double nn = 0.0;
    do {
      for (int64_t k = 0; k < dim; ++k) u_hat[k] = rng.normal();
      nn = u_hat.norm();
    } while (nn == 0.0);
    u_hat /= nn;

    // unit direction orthogonal to u_hat; unused (and unreachable at
    // dim 1) when cos_sq pins i onto the u axis
    if (p.cos_sq < 1.0) {
      do {
        for (int64_t k = 0; k < dim; ++k) v[k] = rng.normal();
        v_hat = v - v.dot(u_hat) * u_hat;
        nn = v_hat.norm();
      } while (nn < 1e-12);
      v_hat /= nn;
    } else {
      v_hat.setZero();
    }

    const double c = (rng.uniform() < 0.5 ? 1.0 : -1.0) * std::sqrt(p.cos_sq);
    const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
    i_vec = mag * (c * u_hat + s * v_hat);

    const bool in_batch = rng.uniform() < prob;
    Vec next;
    if (in_batch) {
      // ascent step on cos(u, i) with the decay factor on the old vector;
      // the gradient is orthogonal to i, so it changes only the magnitude
      const Vec grad = (u_hat - c * (i_vec / mag)) / mag;
      next = decay * i_vec + p.eta * grad;
    } else {
      next = decay * i_vec;
    }
    trace.deltas[static_cast<size_t>(t)] = next.squaredNorm() - p.exp_sq_mag;
  }

  double sum = 0.0;
  for (double d : trace.deltas) sum += d;
  trace.mean = sum / static_cast<double>(trials);
  double ss = 0.0;
  for (double d : trace.deltas) ss += (d - trace.mean) * (d - trace.mean);
  trace.stderr_mean =
      std::sqrt(ss / (static_cast<double>(trials) - 1.0) / static_cast<double>(trials));
  return trace;
}

HeatmapGrid heatmap_grid(const std::vector<double>& degrees,
                         const std::vector<double>& batch_fractions, double eta,
                         double lambda, double cos_sq, double exp_sq_mag) {
  if (degrees.empty() || batch_fractions.empty()) throw config_error("empty grid ranges");
  HeatmapGrid g;
  g.degrees = degrees;
  g.batch_fractions = batch_fractions;
  g.values.resize(static_cast<int64_t>(degrees.size()),
                  static_cast<int64_t>(batch_fractions.size()));
  TheoryParams p;
  p.eta = eta;
  p.lambda = lambda;
  p.cos_sq = cos_sq;
  p.exp_sq_mag = exp_sq_mag;
  p.total_edges = 1.0;
  for (size_t r = 0; r < degrees.size(); ++r) {
    for (size_t c = 0; c < batch_fractions.size(); ++c) {
      p.degree = degrees[r];
      p.batch_size = batch_fractions[c];
      g.values(static_cast<int64_t>(r), static_cast<int64_t>(c)) =
          theorem1_expected_change(p);
    }
  }
  return g;
}

}  // namespace prism
