#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "prism/embeddings.hpp"
#include "prism/rng.hpp"
#include "test_support.hpp"

using namespace prism;

TEST_CASE("xavier init stays inside the bound and is deterministic") {
  const int64_t rows = 400, dim = 8;
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + dim));
  const auto a = init_xavier(rows, dim, 42);
  const auto b = init_xavier(rows, dim, 42);
  const auto c = init_xavier(rows, dim, 43);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a - c).cwiseAbs().maxCoeff() > 0.0);
  CHECK(a.maxCoeff() <= bound);
  CHECK(a.minCoeff() >= -bound);
  // mean of a uniform on [-b, b] is 0; check within 3 standard errors
  const double se = bound / std::sqrt(3.0 * static_cast<double>(rows * dim));
  CHECK(std::abs(a.mean()) < 3.0 * se);
}

TEST_CASE("xavier init rejects bad shapes") {
  CHECK_THROWS_AS(init_xavier(0, 4, 1), config_error);
  CHECK_THROWS_AS(init_xavier(4, 0, 1), config_error);
}

TEST_CASE("magnitude targets follow the popularity schedule") {
  Mat table(3, 4);
  table << 1, 0, 0, 0, 0, 2, 0, 0, 0, 0, 0, 3;
  std::vector<int64_t> degree = {0, 8, 100};

  SUBCASE("alpha zero gives unit magnitudes") {
    const Mat t = prism_init(table, degree, 0.0, LogBase::natural);
    for (int r = 0; r < 3; ++r) CHECK(t.row(r).norm() == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("alpha one, degree zero gives log 2") {
    const Mat t = prism_init(table, degree, 1.0, LogBase::natural);
    CHECK(t.row(0).norm() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("interpolation at alpha one half") {
    const Mat t = prism_init(table, degree, 0.5, LogBase::natural);
    const double want = 0.5 * std::log(10.0) + 0.5;  // 1.6512925464970228
    CHECK(t.row(1).norm() == doctest::Approx(1.6512925464970228).epsilon(1e-12));
    CHECK(t.row(1).norm() == doctest::Approx(want).epsilon(1e-12));
  }
  SUBCASE("base-2 and base-10 logs are honored") {
    const Mat t2 = prism_init(table, degree, 1.0, LogBase::base2);
    CHECK(t2.row(1).norm() == doctest::Approx(std::log2(10.0)).epsilon(1e-12));
    const Mat t10 = prism_init(table, degree, 1.0, LogBase::base10);
    CHECK(t10.row(1).norm() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("rescaling preserves direction") {
  Rng rng(7);
  Mat table(50, 16);
  for (int r = 0; r < table.rows(); ++r)
    for (int c = 0; c < table.cols(); ++c) table(r, c) = rng.normal();
  std::vector<int64_t> degree(50);
  for (size_t i = 0; i < degree.size(); ++i) degree[i] = static_cast<int64_t>(i * 3);
  const Mat after = prism_init(table, degree, 0.7, LogBase::natural);
  for (int r = 0; r < table.rows(); ++r) {
    const double cos =
        after.row(r).dot(table.row(r)) / (after.row(r).norm() * table.row(r).norm());
    CHECK(cos == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("target magnitude is affine in alpha and monotone in degree") {
  Mat base(4, 3);
  base << 1, 1, 1, 2, 0, 0, 0, 3, 0, 1, 2, 2;
  std::vector<int64_t> degree = {1, 5, 25, 125};

  auto norms_at = [&](double alpha) {
    const Mat t = prism_init(base, degree, alpha, LogBase::natural);
    Vec n(4);
    for (int r = 0; r < 4; ++r) n[r] = t.row(r).norm();
    return n;
  };
  const Vec n0 = norms_at(0.0), n1 = norms_at(1.0), nh = norms_at(0.5);
  for (int r = 0; r < 4; ++r) {
    CHECK(nh[r] == doctest::Approx(0.5 * (n0[r] + n1[r])).epsilon(1e-12));
  }
  for (int r = 1; r < 4; ++r) CHECK(n1[r] > n1[r - 1]);
}

TEST_CASE("prism init validates inputs") {
  Mat t(2, 2);
  t << 1, 0, 0, 0;  // second row is all zero: no direction to rescale
  std::vector<int64_t> degree = {1, 1};
  CHECK_THROWS_AS((void)prism_init(t, degree, 0.5, LogBase::natural), runtime_failure);
  Mat ok(2, 2);
  ok << 1, 0, 0, 1;
  CHECK_THROWS_AS((void)prism_init(ok, degree, -0.1, LogBase::natural), config_error);
  CHECK_THROWS_AS((void)prism_init(ok, degree, 1.1, LogBase::natural), config_error);
  std::vector<int64_t> wrong = {1};
  CHECK_THROWS_AS((void)prism_init(ok, wrong, 0.5, LogBase::natural), config_error);
}

TEST_CASE("row magnitudes") {
  Mat t(2, 2);
  t << 3, 4, 0, 0;
  const auto m = magnitudes(t);
  CHECK(m[0] == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(m[1] == 0.0);
}

TEST_CASE("pearson and spearman on hand cases") {
  Vec x(4), y(4);
  x << 1, 2, 3, 4;
  y << 10, 20, 30, 40;
  CHECK(pearson(x, y) == doctest::Approx(1.0).epsilon(1e-12));
  y << 40, 30, 20, 10;
  CHECK(pearson(x, y) == doctest::Approx(-1.0).epsilon(1e-12));
  y << 1, 4, 9, 16;  // monotone but curved
  CHECK(spearman(x, y) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(pearson(x, y) < 1.0);

  Vec cx(3), cy(3);
  cx << 1, 1, 1;
  cy << 1, 2, 3;
  CHECK(std::isnan(pearson(cx, cy)));
}

TEST_CASE("spearman averages tied ranks") {
  Vec x(4), y(4);
  x << 1, 2, 2, 3;
  y << 1, 2, 3, 4;
  // ranks of x: 1, 2.5, 2.5, 4 against 1,2,3,4
  const double got = spearman(x, y);
  CHECK(got == doctest::Approx(0.9486832980505138).epsilon(1e-12));
}

TEST_CASE("prism init at alpha one makes log-degree correlation exactly one") {
  Rng rng(3);
  Mat table(300, 12);
  for (int r = 0; r < table.rows(); ++r)
    for (int c = 0; c < table.cols(); ++c) table(r, c) = rng.normal() + 0.01;
  // Distinct degrees: with ties, the realized magnitudes of equally popular
  // rows differ by a final rounding ulp, which splits rank ties arbitrarily
  // and pulls Spearman fractionally below one.
  std::vector<int64_t> degree(300);
  for (size_t i = 0; i < degree.size(); ++i) degree[i] = static_cast<int64_t>(i) * 3;
  rng.shuffle(degree);
  const Mat scaled = prism_init(table, degree, 1.0, LogBase::natural);
  const auto rep = magnitude_popularity_correlation(scaled, degree);
  REQUIRE(rep.defined);
  CHECK(rep.pearson_log == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(rep.spearman == doctest::Approx(1.0).epsilon(1e-9));

  // Tied degrees still correlate near-perfectly, just not bit-exactly.
  std::vector<int64_t> tied(300);
  for (size_t i = 0; i < tied.size(); ++i) tied[i] = static_cast<int64_t>(i / 10);
  const Mat scaled_tied = prism_init(table, tied, 1.0, LogBase::natural);
  CHECK(magnitude_popularity_correlation(scaled_tied, tied).spearman > 0.999);
}

TEST_CASE("xavier magnitudes carry no popularity signal") {
  const auto table = init_xavier(2000, 32, 11);
  std::vector<int64_t> degree(2000);
  Rng rng(5);
  for (auto& d : degree) d = static_cast<int64_t>(rng.uniform_int(1000));
  const auto rep = magnitude_popularity_correlation(table, degree);
  REQUIRE(rep.defined);
  CHECK(std::abs(rep.spearman) < 0.2);
  CHECK(std::abs(rep.pearson_log) < 0.2);
}

TEST_CASE("correlation report is undefined for degenerate inputs") {
  Mat t(2, 2);
  t << 1, 0, 0, 1;
  std::vector<int64_t> d2 = {1, 2};
  CHECK_FALSE(magnitude_popularity_correlation(t, d2).defined);

  Mat t3(3, 2);
  t3 << 1, 0, 0, 1, 1, 1;
  std::vector<int64_t> same = {4, 4, 4};
  const auto rep = magnitude_popularity_correlation(t3, same);
  CHECK_FALSE(rep.defined);
  CHECK(std::isnan(rep.pearson_log));
}

TEST_CASE("embedding tables round-trip bitwise through disk") {
  Rng rng(9);
  Mat table(17, 5);
  for (int r = 0; r < table.rows(); ++r)
    for (int c = 0; c < table.cols(); ++c) table(r, c) = rng.normal() * 1e3;
  table(0, 0) = 0.1 + 0.2;  // not exactly representable
  const std::string path = "test_tmp_table.prsm";
  dump_table(table, path);

  std::ifstream f(path, std::ios::binary | std::ios::ate);
  CHECK(static_cast<size_t>(f.tellg()) == 24 + 17 * 5 * 8);
  f.close();

  const auto back = load_table(path);
  REQUIRE(back.rows() == table.rows());
  REQUIRE(back.cols() == table.cols());
  CHECK((back - table).cwiseAbs().maxCoeff() == 0.0);
  std::remove(path.c_str());
}

TEST_CASE("table loader rejects corrupt files") {
  Mat table(3, 2);
  table.setOnes();
  const std::string path = "test_tmp_corrupt.prsm";
  dump_table(table, path);

  SUBCASE("truncated payload") {
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
    in.close();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 4));
    out.close();
    CHECK_THROWS_AS(load_table(path), runtime_failure);
  }
  SUBCASE("bad magic") {
    std::fstream io(path, std::ios::binary | std::ios::in | std::ios::out);
    io.write("XXXX", 4);
    io.close();
    CHECK_THROWS_AS(load_table(path), runtime_failure);
  }
  std::remove(path.c_str());
}

TEST_CASE("missing table file raises a runtime failure") {
  CHECK_THROWS_AS(load_table("definitely_not_here.prsm"), runtime_failure);
}
