#include <doctest.h>

#include <cmath>
#include <set>

#include "ludvae/rng.hpp"
#include "ludvae/tensor.hpp"

using namespace ludvae;

TEST_CASE("tensor indexing and shape") {
  TensorF t(2, 3, 4);
  CHECK(t.size() == 24);
  t.at(1, 2, 3) = 5.f;
  CHECK(t[(1 * 3 + 2) * 4 + 3] == 5.f);
  CHECK(t.plane(1)[2 * 4 + 3] == 5.f);
  CHECK(t.shape_str() == "3x4x2");
  TensorF u = t;
  CHECK(t == u);
  u.at(0, 0, 0) = 1.f;
  CHECK_FALSE(t == u);
  CHECK_THROWS_AS(TensorF(-1, 2, 2), DimensionError);
}

TEST_CASE("tensor arithmetic helpers") {
  TensorD a(1, 2, 2, 1.0), b(1, 2, 2, 2.0);
  a.add(b);
  CHECK(a.at(0, 1, 1) == doctest::Approx(3.0));
  CHECK(a.sum() == doctest::Approx(12.0));
  CHECK(a.sum_squares() == doctest::Approx(36.0));
  a.scale(0.5);
  CHECK(a.sum() == doctest::Approx(6.0));
  TensorD c(1, 3, 3);
  CHECK_THROWS_AS(a.add(c), DimensionError);
  a[0] = std::nan("");
  CHECK_FALSE(a.all_finite());
}

TEST_CASE("rng determinism and stream derivation") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c(43);
  CHECK(Rng(42).next_u64() != c.next_u64());

  Rng parent(7);
  Rng c1 = parent.child(1);
  Rng c2 = parent.child(2);
  Rng c1_again = parent.child(1);
  CHECK(c1.next_u64() == c1_again.next_u64());
  CHECK(c1.next_u64() != c2.next_u64());
}

TEST_CASE("rng normal moments") {
  Rng rng(123);
  const int n = 200000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = rng.normal();
    sum += v;
    sumsq += v * v;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(std::fabs(mean) < 3.0 / std::sqrt(static_cast<double>(n)));
  CHECK(std::fabs(var - 1.0) < 3.0 * std::sqrt(2.0 / n));
}

TEST_CASE("rng uniform_index range and coverage") {
  Rng rng(5);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 1000; ++i) {
    const auto v = rng.uniform_index(8);
    CHECK(v < 8);
    seen.insert(v);
  }
  CHECK(seen.size() == 8);
}

TEST_CASE("rng string hash is stable") {
  CHECK(Rng::hash("abc") == Rng::hash("abc"));
  CHECK(Rng::hash("abc") != Rng::hash("abd"));
}
