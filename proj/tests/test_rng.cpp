#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "fasc/rng.hpp"

TEST_SUITE("rng") {

TEST_CASE("same seed reproduces the stream exactly") {
  fasc::Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    CHECK(a.uniform() == b.uniform());
    CHECK(a.normal() == b.normal());
  }
}

TEST_CASE("different seeds give different streams") {
  fasc::Rng a(1), b(2);
  int same = 0;
  for (int i = 0; i < 100; ++i)
    if (a.uniform() == b.uniform()) ++same;
  CHECK(same == 0);
}

TEST_CASE("uniform stays in [0, 1)") {
  fasc::Rng rng(7);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("normal moments match the standard distribution") {
  fasc::Rng rng(3);
  const int n = 200000;
  double sum = 0, sumsq = 0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sumsq += z * z;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("index covers the whole range") {
  fasc::Rng rng(11);
  std::set<std::size_t> seen;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t v = rng.index(8);
    CHECK(v < 8);
    seen.insert(v);
  }
  CHECK(seen.size() == 8);
}

TEST_CASE("derived streams are independent of each other and the parent") {
  fasc::Rng parent(5);
  fasc::Rng child0 = parent.derive(0);
  fasc::Rng child1 = parent.derive(1);
  CHECK(child0.seed() != child1.seed());
  CHECK(child0.seed() != parent.seed());
  // deriving twice with the same stream id gives the same stream
  fasc::Rng again = fasc::Rng(5).derive(0);
  CHECK(again.seed() == child0.seed());
  for (int i = 0; i < 100; ++i) CHECK(again.uniform() == child0.uniform());
}

TEST_CASE("derivation does not disturb the parent stream") {
  fasc::Rng a(9), b(9);
  (void)a.derive(3);
  for (int i = 0; i < 50; ++i) CHECK(a.uniform() == b.uniform());
}

}  // TEST_SUITE
