#include "prism/embeddings.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <vector>

#include "prism/rng.hpp"

namespace prism {

namespace {

double apply_log(double x, LogBase base) {
  switch (base) {
    case LogBase::base2:
      return std::log2(x);
    case LogBase::base10:
      return std::log10(x);
    default:
      return std::log(x);
  }
}

// Average ranks, ties share the mean of their rank range.
Vec average_ranks(const Vec& v) {
  const auto n = static_cast<size_t>(v.size());
  std::vector<int64_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int64_t a, int64_t b) { return v[a] < v[b]; });
  Vec ranks(v.size());
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

Mat init_xavier(int64_t rows, int64_t dim, uint64_t seed) {
  if (rows < 1 || dim < 1) throw config_error("table must have rows >= 1 and dim >= 1");
  const double b = std::sqrt(6.0 / static_cast<double>(rows + dim));
  Mat t(rows, dim);
  Rng rng(seed);
  for (int64_t r = 0; r < rows; ++r) {
    for (int64_t c = 0; c < dim; ++c) {
      t(r, c) = (2.0 * rng.uniform() - 1.0) * b;
    }
  }
  return t;
}

Mat prism_init(const Mat& base, const std::vector<int64_t>& degree, double alpha,
               LogBase log_base) {
  if (alpha < 0.0 || alpha > 1.0) throw config_error("alpha must lie in [0, 1]");
  if (static_cast<int64_t>(degree.size()) != base.rows()) {
    throw config_error("degree vector length must match table rows");
  }
  Mat out(base.rows(), base.cols());
  for (int64_t r = 0; r < base.rows(); ++r) {
    const double norm = base.row(r).norm();
    if (norm == 0.0) {
      throw runtime_failure("cannot normalize zero row " + std::to_string(r));
    }
    const double target =
        alpha * apply_log(static_cast<double>(degree[static_cast<size_t>(r)] + 2), log_base) +
        (1.0 - alpha);
    out.row(r) = base.row(r) * (target / norm);
  }
  return out;
}

Vec magnitudes(const Mat& table) { return table.rowwise().norm(); }

double pearson(const Vec& x, const Vec& y) {
  const double n = static_cast<double>(x.size());
  const double mx = x.mean(), my = y.mean();
  const Vec dx = x.array() - mx;
  const Vec dy = y.array() - my;
  const double sxx = dx.squaredNorm(), syy = dy.squaredNorm();
  if (sxx == 0.0 || syy == 0.0 || n < 2) return std::nan("");
  return dx.dot(dy) / std::sqrt(sxx * syy);
}

double spearman(const Vec& x, const Vec& y) {
  return pearson(average_ranks(x), average_ranks(y));
}

MagnitudeReport magnitude_popularity_correlation(const Mat& table,
                                                 const std::vector<int64_t>& degree) {
  if (static_cast<int64_t>(degree.size()) != table.rows()) {
    throw config_error("degree vector length must match table rows");
  }
  MagnitudeReport rep;
  rep.magnitude = magnitudes(table);
  Vec d(table.rows()), dl(table.rows());
  for (int64_t r = 0; r < table.rows(); ++r) {
    d[r] = static_cast<double>(degree[static_cast<size_t>(r)]);
    dl[r] = std::log(d[r] + 2.0);
  }
  const bool constant_degree =
      table.rows() < 3 || (d.maxCoeff() == d.minCoeff());
  if (constant_degree) {
    rep.pearson_log = std::nan("");
    rep.spearman = std::nan("");
    rep.defined = false;
    return rep;
  }
  rep.pearson_log = pearson(dl, rep.magnitude);
  rep.spearman = spearman(d, rep.magnitude);
  rep.defined = !(std::isnan(rep.pearson_log) || std::isnan(rep.spearman));
  return rep;
}

void dump_table(const Mat& table, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw runtime_failure("cannot open for writing: " + tmp);
    const char magic[4] = {'P', 'R', 'S', 'M'};
    const uint8_t version = 1, endian = 0, reserved[2] = {0, 0};
    const auto rows = static_cast<uint64_t>(table.rows());
    const auto dim = static_cast<uint64_t>(table.cols());
    f.write(magic, 4);
    f.write(reinterpret_cast<const char*>(&version), 1);
    f.write(reinterpret_cast<const char*>(&endian), 1);
    f.write(reinterpret_cast<const char*>(reserved), 2);
    f.write(reinterpret_cast<const char*>(&rows), 8);
    f.write(reinterpret_cast<const char*>(&dim), 8);
    f.write(reinterpret_cast<const char*>(table.data()),
            static_cast<std::streamsize>(rows * dim * sizeof(double)));
    if (!f.flush()) throw runtime_failure("write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw runtime_failure("rename failed: " + tmp + " -> " + path);
  }
}

Mat load_table(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw runtime_failure("cannot open table file: " + path);
  char magic[4];
  uint8_t version = 0, endian = 0, reserved[2];
  uint64_t rows = 0, dim = 0;
  f.read(magic, 4);
  f.read(reinterpret_cast<char*>(&version), 1);
  f.read(reinterpret_cast<char*>(&endian), 1);
  f.read(reinterpret_cast<char*>(reserved), 2);
  f.read(reinterpret_cast<char*>(&rows), 8);
  f.read(reinterpret_cast<char*>(&dim), 8);
  if (!f || std::memcmp(magic, "PRSM", 4) != 0) {
    throw runtime_failure(path + ": bad table header");
  }
  if (version != 1) throw runtime_failure(path + ": unsupported table version");
  if (endian != 0) throw runtime_failure(path + ": big-endian tables unsupported");
  if (rows == 0 || dim == 0) throw runtime_failure(path + ": empty table");
  Mat t(static_cast<int64_t>(rows), static_cast<int64_t>(dim));
  f.read(reinterpret_cast<char*>(t.data()),
         static_cast<std::streamsize>(rows * dim * sizeof(double)));
  if (static_cast<uint64_t>(f.gcount()) != rows * dim * sizeof(double)) {
    throw runtime_failure(path + ": truncated table payload");
  }
  return t;
}

}  // namespace prism
