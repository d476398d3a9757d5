#pragma once

#include <cstdint>
#include <vector>

#include "prism/types.hpp"

namespace prism {

// Symbol set for the expected-magnitude-change formulas. batch_size and
// total_edges are doubles so grids can be driven directly by the batch
// fraction (batch_size = f, total_edges = 1).
struct TheoryParams {
  double eta = 0.01;
  double lambda = 0.0;
  double batch_size = 0.0;
  double total_edges = 1.0;
  double degree = 0.0;
  double n_items = 0.0;    // corollary with negative sampling only
  double gamma = 0.0;      // negatives per positive
  double exp_sq_mag = 1.0; // E[||i||^2]
  double cos_sq = 0.0;     // E[cos^2(u, i)]
};

double inclusion_probability(const TheoryParams& p);
double negsample_probability(const TheoryParams& p);

// Expected one-step change of ||i||^2 under full decay: the decay term
// applies always, the ranking term only with the batch-inclusion
// probability. All expectation factors evaluate at the supplied point
// values.
double theorem1_expected_change(const TheoryParams& p);

// Batched decay: both the decay and ranking terms gate on inclusion.
double corollary1_expected_change(const TheoryParams& p);

// Full decay with negative sampling: theorem form with the inclusion
// probability extended by the uniform-negative union bound.
double corollary2_expected_change(const TheoryParams& p);

// Dot-product similarity step, where the ranking term's sign follows
// E[u . i] instead of being nonnegative.
double dot_update_expected_change(const TheoryParams& p, double exp_dot, double exp_u_sq);

// One squared-Euclidean-distance descent step on item i (with decay);
// out-of-batch rows receive decay only.
Vec euclidean_step(const Vec& i_vec, const Vec& u_vec, double eta, double lambda,
                   bool in_batch);

struct MagnitudeTrace {
  std::vector<double> deltas;  // per-trial change of ||i||^2
  double mean = 0.0;
  double stderr_mean = 0.0;
};

// Simulation oracle for the closed forms: every trial pins ||i||^2 and
// cos^2(u, i) to their supplied values exactly (random direction, random
// orthogonal complement, random cosine sign), draws batch inclusion from
// the inclusion probability, and applies the decayed cosine-ascent step.
MagnitudeTrace monte_carlo_magnitude(const TheoryParams& p, int64_t dim, int64_t trials,
                                     uint64_t seed);

struct HeatmapGrid {
  std::vector<double> degrees;
  std::vector<double> batch_fractions;
  Mat values;  // degrees x batch_fractions
};

HeatmapGrid heatmap_grid(const std::vector<double>& degrees,
                         const std::vector<double>& batch_fractions, double eta,
                         double lambda, double cos_sq = 0.81, double exp_sq_mag = 1.0);

}  // namespace prism
