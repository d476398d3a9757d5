#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "prism/types.hpp"

namespace prism {

enum class LogBase : uint8_t { natural = 0, base2 = 1, base10 = 2 };

struct MagnitudeReport {
  Vec magnitude;       // per-entity L2 norm
  double pearson_log;  // corr(log(d+2), magnitude)
  double spearman;     // rank corr(d, magnitude)
  bool defined;        // false when the degree vector is constant
};

// Entries i.i.d. uniform on [-b, b], b = sqrt(6 / (rows + dim)).
Mat init_xavier(int64_t rows, int64_t dim, uint64_t seed);

// Rescales each base row to magnitude alpha*log(degree+2) + (1-alpha),
// keeping its direction. log is natural by default.
Mat prism_init(const Mat& base, const std::vector<int64_t>& degree, double alpha,
               LogBase log_base = LogBase::natural);

Vec magnitudes(const Mat& table);

MagnitudeReport magnitude_popularity_correlation(const Mat& table,
                                                 const std::vector<int64_t>& degree);

// Binary table file: "PRSM", version byte 1, endianness byte (0 = little),
// two reserved zero bytes, u64 rows, u64 dim, then rows*dim little-endian
// f64 values row-major. Written atomically.
void dump_table(const Mat& table, const std::string& path);
Mat load_table(const std::string& path);

double pearson(const Vec& x, const Vec& y);
double spearman(const Vec& x, const Vec& y);

}  // namespace prism
