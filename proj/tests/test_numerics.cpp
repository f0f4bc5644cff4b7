#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "srank/numerics.hpp"

namespace {

using srank::Matrix;
using srank::Rng;

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c) {
  Matrix m(r, c);
  for (double& x : m.flat()) x = rng.normal();
  return m;
}

Matrix naive_product(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  return out;
}

TEST(Matmul, IdentityLeavesColumnUnchanged) {
  const Matrix id = Matrix::from_rows({{1, 0}, {0, 1}});
  const Matrix v = Matrix::from_rows({{3}, {4}});
  EXPECT_EQ(srank::matmul(id, v), v);
}

TEST(Matmul, RowTimesColumn) {
  const Matrix c = srank::matmul(Matrix::from_rows({{1, 2}}), Matrix::from_rows({{3}, {4}}));
  ASSERT_EQ(c.rows(), 1u);
  ASSERT_EQ(c.cols(), 1u);
  EXPECT_EQ(c(0, 0), 11.0);
}

TEST(Matmul, MatchesTripleLoop) {
  Rng rng(11);
  for (int t = 0; t < 20; ++t) {
    const Matrix a = random_matrix(rng, 5, 7);
    const Matrix b = random_matrix(rng, 7, 3);
    const Matrix got = srank::matmul(a, b);
    const Matrix want = naive_product(a, b);
    for (std::size_t i = 0; i < got.flat().size(); ++i) EXPECT_NEAR(got.flat()[i], want.flat()[i], 1e-12);
  }
}

TEST(Matmul, ShapeMismatchThrows) {
  EXPECT_THROW(srank::matmul(Matrix(2, 3), Matrix(2, 3)), srank::ShapeError);
}

TEST(Matmul, Associative) {
  Rng rng(12);
  for (int t = 0; t < 50; ++t) {
    const std::size_t p = rng.uniform_int(1, 6), q = rng.uniform_int(1, 6), r = rng.uniform_int(1, 6),
                      s = rng.uniform_int(1, 6);
    const Matrix a = random_matrix(rng, p, q), b = random_matrix(rng, q, r), c = random_matrix(rng, r, s);
    const Matrix left = srank::matmul(srank::matmul(a, b), c);
    const Matrix right = srank::matmul(a, srank::matmul(b, c));
    for (std::size_t i = 0; i < left.flat().size(); ++i) EXPECT_NEAR(left.flat()[i], right.flat()[i], 1e-9);
  }
}

TEST(Matrix, StorageMatchesShape) {
  const Matrix m(4, 9);
  EXPECT_EQ(m.flat().size(), 36u);
  EXPECT_TRUE(m.all_finite());
  EXPECT_EQ(srank::transpose(srank::transpose(Matrix::from_rows({{1, 2, 3}, {4, 5, 6}}))),
            Matrix::from_rows({{1, 2, 3}, {4, 5, 6}}));
}

TEST(Softmax, UniformRow) {
  const Matrix s = srank::softmax_rows(Matrix::from_rows({{0, 0}}));
  EXPECT_DOUBLE_EQ(s(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(s(0, 1), 0.5);
}

TEST(Softmax, LargeLogitsStayFinite) {
  const Matrix s = srank::softmax_rows(Matrix::from_rows({{1000, 1000, 999}}));
  EXPECT_TRUE(s.all_finite());
  EXPECT_NEAR(s(0, 0) + s(0, 1) + s(0, 2), 1.0, 1e-12);
}

TEST(Softmax, MatchesDirectFormula) {
  const Matrix s = srank::softmax_rows(Matrix::from_rows({{1, 2, 3}}));
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(s(0, j), std::exp(j + 1.0) / z, 1e-12);
}

TEST(Softmax, RowsSumToOneAndIgnoreShift) {
  Rng rng(13);
  for (int t = 0; t < 100; ++t) {
    Matrix m = random_matrix(rng, 3, rng.uniform_int(1, 30));
    for (double& x : m.flat()) x *= 10.0;
    const Matrix s = srank::softmax_rows(m);
    Matrix shifted = m;
    const double c = rng.uniform(-100, 100);
    for (double& x : shifted.row(1)) x += c;
    const Matrix s2 = srank::softmax_rows(shifted);
    for (std::size_t r = 0; r < m.rows(); ++r) {
      const auto row = s.row(r);
      EXPECT_NEAR(std::accumulate(row.begin(), row.end(), 0.0), 1.0, 1e-12);
      for (double x : row) EXPECT_GE(x, 0.0);
    }
    for (std::size_t j = 0; j < m.cols(); ++j) EXPECT_NEAR(s(1, j), s2(1, j), 1e-12);
  }
}

TEST(Logsumexp, TwoZeros) { EXPECT_NEAR(srank::logsumexp(std::vector<double>{0, 0}), std::log(2.0), 1e-15); }

TEST(Logsumexp, Singleton) { EXPECT_EQ(srank::logsumexp(std::vector<double>{-3.25}), -3.25); }

TEST(Logsumexp, MatchesNaive) {
  EXPECT_NEAR(srank::logsumexp(std::vector<double>{1, 2, 3}),
              std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0)), 1e-12);
}

TEST(Logsumexp, EmptyThrows) { EXPECT_THROW(srank::logsumexp(std::vector<double>{}), srank::ShapeError); }

TEST(Logsumexp, BoundedByMaxAndMaxPlusLogN) {
  Rng rng(14);
  for (int t = 0; t < 500; ++t) {
    std::vector<double> v(rng.uniform_int(1, 50));
    for (double& x : v) x = 50.0 * rng.normal();
    const double mx = *std::max_element(v.begin(), v.end());
    const double l = srank::logsumexp(v);
    EXPECT_GE(l, mx);
    EXPECT_LE(l, mx + std::log(static_cast<double>(v.size())) + 1e-12);
  }
}

TEST(Softplus, StableAndAccurate) {
  EXPECT_NEAR(srank::softplus(0.0), std::log(2.0), 1e-15);
  EXPECT_NEAR(srank::softplus(-2.0), std::log1p(std::exp(-2.0)), 1e-15);
  EXPECT_EQ(srank::softplus(1000.0), 1000.0);
  EXPECT_GE(srank::softplus(-1000.0), 0.0);
  EXPECT_NEAR(srank::sigmoid(1.0), 1.0 / (1.0 + std::exp(-1.0)), 1e-15);
  EXPECT_NEAR(srank::sigmoid(-800.0), 0.0, 1e-300);
}

TEST(CheckGradient, QuadraticIsExact) {
  const double err = srank::check_gradient([](std::span<const double> x) { return x[0] * x[0]; },
                                           std::vector<double>{3.0}, std::vector<double>{6.0}, 1e-5);
  EXPECT_LE(err, 1e-8);
}

TEST(CheckGradient, DetectsWrongGradient) {
  const double err = srank::check_gradient([](std::span<const double> x) { return x[0] * x[0] + x[1]; },
                                           std::vector<double>{1.0, 2.0}, std::vector<double>{2.0, 0.5}, 1e-5);
  EXPECT_NEAR(err, 0.5 / 1.5, 1e-6);
}

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 1000; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    differs = differs || x != c.next_u64();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, KnownSplitMix64Output) {
  // First outputs of SplitMix64 seeded with 0.
  Rng r(0);
  EXPECT_EQ(r.next_u64(), 0xE220A8397B1DCDAFULL);
  EXPECT_EQ(r.next_u64(), 0x6E789E6AA1B965F4ULL);
}

TEST(Rng, RangesAndMoments) {
  Rng r(5);
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    const auto k = r.uniform_int(3, 7);
    ASSERT_GE(k, 3u);
    ASSERT_LE(k, 7u);
    const double z = r.normal();
    sum += z;
    sq += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sq / n, 1.0, 0.02);
}

TEST(Rng, ShuffleIsPermutation) {
  Rng r(6);
  std::vector<int> v(100);
  std::iota(v.begin(), v.end(), 0);
  auto w = v;
  r.shuffle(w);
  EXPECT_NE(v, w);
  std::sort(w.begin(), w.end());
  EXPECT_EQ(v, w);
}

TEST(Fnv1a, EmptyAndKnownDigest) {
  srank::Fnv1a h;
  EXPECT_EQ(h.digest(), 0xcbf29ce484222325ULL);
  const char* s = "a";
  h.update(std::as_bytes(std::span(s, 1)));
  EXPECT_EQ(h.digest(), 0xaf63dc4c8601ec8cULL);
}

}  // namespace
