#include <cmath>
#include <random>

#include "doctest.h"
#include "ecgtda/tda.hpp"
#include "support/oracles.hpp"

using namespace ecgtda;
using oracle::Bar;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (const double d : v) x[i++] = d;
  return x;
}

int local_minima(const Eigen::VectorXd& x) {
  // Plateaus collapse to one vertex.
  std::vector<double> v;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (v.empty() || v.back() != x[i]) v.push_back(x[i]);
  int count = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const bool left = i == 0 || v[i - 1] > v[i];
    const bool right = i + 1 == v.size() || v[i + 1] > v[i];
    count += left && right;
  }
  return count;
}

}  // namespace

TEST_CASE("sublevel barcode examples") {
  CHECK(oracle::bars_of(tda::sublevel_barcode(vec({0, 2, 1, 3}))) == std::vector<Bar>{{0, 3, true}, {1, 2, false}});
  CHECK(oracle::bars_of(tda::sublevel_barcode(vec({1, 2, 3, 4}))) == std::vector<Bar>{{1, 4, true}});
  CHECK(oracle::bars_of(tda::sublevel_barcode(vec({5, 5, 5}))) == std::vector<Bar>{{5, 5, true}});
  CHECK(oracle::bars_of(tda::sublevel_barcode(vec({7}))) == std::vector<Bar>{{7, 7, true}});
}

TEST_CASE("superlevel barcode is stored in negated coordinates") {
  const auto bc = tda::superlevel_barcode(vec({0, 2, 1, 3}));
  CHECK(bc.kind == tda::Filtration::superlevel);
  CHECK(oracle::bars_of(bc) == std::vector<Bar>{{-3, 0, true}, {-2, -1, false}});
  CHECK(oracle::bars_of(tda::superlevel_barcode(vec({1, 2, 3, 4}))) == std::vector<Bar>{{-4, -1, true}});
  CHECK(oracle::bars_of(tda::superlevel_barcode(vec({5, 5, 5}))) == std::vector<Bar>{{-5, -5, true}});
}

TEST_CASE("invalid signals are rejected") {
  CHECK_THROWS_AS(tda::sublevel_barcode(Eigen::VectorXd()), InvalidInput);
  CHECK_THROWS_AS(tda::sublevel_barcode(vec({0, NAN, 1})), InvalidInput);
  CHECK_THROWS_AS(tda::superlevel_barcode(vec({0, INFINITY})), InvalidInput);
}

TEST_CASE("plateau minima contribute one interval") {
  const auto bc = tda::sublevel_barcode(vec({3, 1, 1, 1, 4, 0, 2}));
  CHECK(oracle::bars_of(bc) == std::vector<Bar>{{0, 4, true}, {1, 4, false}});
  const auto tie = tda::sublevel_barcode(vec({1, 3, 1}));
  CHECK(oracle::bars_of(tie) == std::vector<Bar>{{1, 3, false}, {1, 3, true}});
}

TEST_CASE("barcode matches the threshold-sweep oracle") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 40);
    const auto x = oracle::random_distinct(rng, n);
    REQUIRE(oracle::bars_of(tda::sublevel_barcode(x)) == oracle::brute_force_barcode(x));
  }
}

TEST_CASE("interval count equals local minima and the elder rule holds") {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> level(0, 4);
  for (int trial = 0; trial < 300; ++trial) {
    Eigen::VectorXd x(2 + static_cast<int>(rng() % 30));
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = level(rng);
    const auto bc = tda::sublevel_barcode(x);
    CHECK(static_cast<int>(bc.size()) == local_minima(x));
    int essential = 0;
    for (const auto& iv : bc.intervals) {
      CHECK(iv.birth <= iv.death);
      CHECK(iv.birth >= x.minCoeff());
      essential += iv.essential;
      if (iv.essential) CHECK(iv.death == x.maxCoeff());
    }
    CHECK(essential == 1);
  }
}

TEST_CASE("barcode invariances") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    const auto x = oracle::random_distinct(rng, 2 + static_cast<int>(rng() % 50));
    const auto base = oracle::bars_of(tda::sublevel_barcode(x));

    SUBCASE("time reversal") {
      const Eigen::VectorXd r = x.reverse();
      CHECK(oracle::bars_of(tda::sublevel_barcode(r)) == base);
      const auto a = tda::betti_pair(x, 20), b = tda::betti_pair(r, 20);
      CHECK(a.sublevel.counts == b.sublevel.counts);
      CHECK(a.superlevel.counts == b.superlevel.counts);
    }
    SUBCASE("upsampling") {
      for (const int a : {2, 3, 5}) {
        const auto up = oracle::bars_of(tda::sublevel_barcode(oracle::upsample(x, a)));
        REQUIRE(up.size() == base.size());
        for (std::size_t i = 0; i < up.size(); ++i) {
          CHECK(std::abs(up[i].birth - base[i].birth) <= 1e-9);
          CHECK(std::abs(up[i].death - base[i].death) <= 1e-9);
        }
      }
    }
    SUBCASE("shift") {
      const double c = 0.375;
      const auto shifted = oracle::bars_of(tda::sublevel_barcode(Eigen::VectorXd(x.array() + c)));
      REQUIRE(shifted.size() == base.size());
      for (std::size_t i = 0; i < base.size(); ++i) {
        CHECK(shifted[i].birth == doctest::Approx(base[i].birth + c).epsilon(1e-12));
        CHECK(shifted[i].death == doctest::Approx(base[i].death + c).epsilon(1e-12));
      }
      CHECK(tda::betti_curve(tda::sublevel_barcode(Eigen::VectorXd(x.array() + c)), 16).counts ==
            tda::betti_curve(tda::sublevel_barcode(x), 16).counts);
    }
  }
}

TEST_CASE("betti curve examples") {
  const auto bc = tda::sublevel_barcode(vec({0, 2, 1, 3}));
  CHECK(tda::betti_number(bc, 1.5) == 2);
  CHECK(tda::betti_number(bc, 2.5) == 1);
  CHECK(tda::betti_number(bc, -0.5) == 0);
  CHECK(tda::betti_number(bc, 3.0) == 1);

  const auto pair = tda::betti_pair(vec({0, 2, 1, 3}), 4);
  CHECK(pair.sublevel.grid == vec({0, 1, 2, 3}));
  CHECK(pair.sublevel.counts == Eigen::Vector4i(1, 2, 1, 1));

  const auto single = tda::betti_curve(tda::sublevel_barcode(vec({0, 1, 2, 3})), 7);
  CHECK((single.counts.array() == 1).all());
}

TEST_CASE("betti curve of a constant signal") {
  const auto pair = tda::betti_pair(vec({5, 5, 5}), 10);
  CHECK((pair.sublevel.grid.array() == 5).all());
  CHECK((pair.sublevel.counts.array() == 1).all());
  CHECK((pair.superlevel.grid.array() == -5).all());
  CHECK((pair.superlevel.counts.array() == 1).all());
}

TEST_CASE("betti curve argument checks") {
  CHECK_THROWS_AS(tda::betti_curve(tda::Barcode<double>{}, 10), InvalidInput);
  CHECK_THROWS_AS(tda::betti_curve(tda::sublevel_barcode(vec({0, 1})), 1), InvalidInput);
}

TEST_CASE("betti counts equal component counts off the sample values") {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 200; ++trial) {
    const auto x = oracle::random_distinct(rng, 2 + static_cast<int>(rng() % 40));
    const auto curve = tda::betti_curve(tda::sublevel_barcode(x), 37);
    CHECK(curve.grid[0] == x.minCoeff());
    CHECK(curve.grid[curve.grid.size() - 1] == x.maxCoeff());
    for (Eigen::Index i = 0; i < curve.grid.size(); ++i) {
      const double a = curve.grid[i];
      if ((x.array() == a).any()) continue;
      CHECK(curve.counts[i] == oracle::component_count(x, a));
    }
    for (Eigen::Index i = 1; i < curve.grid.size(); ++i) CHECK(curve.grid[i] > curve.grid[i - 1]);
  }
}

TEST_CASE("value scaling scales endpoints and keeps counts") {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 100; ++trial) {
    const auto x = oracle::random_distinct(rng, 2 + static_cast<int>(rng() % 60));
    const auto bc = tda::sublevel_barcode(x);
    for (const double b : {0.5, 3.0}) {
      const Eigen::VectorXd y = b * x;
      const auto scaled = tda::sublevel_barcode(y);
      REQUIRE(scaled.size() == bc.size());
      for (std::size_t i = 0; i < bc.size(); ++i) {
        CHECK(scaled.intervals[i].birth == b * bc.intervals[i].birth);
        CHECK(scaled.intervals[i].death == b * bc.intervals[i].death);
      }
      CHECK(tda::betti_curve(scaled, 50).counts == tda::betti_curve(bc, 50).counts);
    }
  }
}

TEST_CASE("float scalar instantiation") {
  Eigen::VectorXf x(4);
  x << 0.f, 2.f, 1.f, 3.f;
  const auto bc = tda::sublevel_barcode(x);
  REQUIRE(bc.size() == 2);
  CHECK(bc.intervals[0].death == 3.f);
  CHECK(tda::betti_curve(bc, 4).counts == Eigen::Vector4i(1, 2, 1, 1));
}

TEST_CASE("sort keys preserve the order of doubles") {
  const std::vector<double> v = {-INFINITY, -1e300, -2.5, -1.0, -4.9e-324, 0.0, 4.9e-324, 1.0, 2.5, 1e300, INFINITY};
  for (std::size_t i = 0; i + 1 < v.size(); ++i) CHECK(tda::detail::monotone_key(v[i]) < tda::detail::monotone_key(v[i + 1]));
  CHECK(tda::detail::monotone_key(-0.0) == tda::detail::monotone_key(0.0));

  // Signed zeros tie, so the smaller index is the elder component.
  const auto bc = tda::sublevel_barcode(vec({0.0, 1.0, -0.0, 2.0}));
  REQUIRE(bc.size() == 2);
  CHECK(bc.intervals[1].birth == 0.0);
  CHECK(bc.intervals[1].death == 1.0);
  CHECK_FALSE(bc.intervals[1].essential);
}
