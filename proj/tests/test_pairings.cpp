#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "ncrough/pairings.hpp"

using namespace ncrough;

TEST_SUITE_BEGIN("pairings");

TEST_CASE("pairing counts follow the double factorial") {
  CHECK(pairing_count(0) == 1);
  CHECK(pairing_count(1) == 0);
  CHECK(pairing_count(2) == 1);
  CHECK(pairing_count(3) == 0);
  CHECK(pairing_count(4) == 3);
  CHECK(pairing_count(6) == 15);
  CHECK(pairing_count(8) == 105);
  CHECK(pairing_count(10) == 945);
  for (int r : {2, 4, 6, 8, 10})
    CHECK(enumerate_pairings(r).size() == static_cast<std::size_t>(pairing_count(r)));
  CHECK(enumerate_pairings(5).empty());
}

TEST_CASE("enumeration is canonical and covers every index once") {
  for (int r : {2, 4, 6, 8}) {
    for (const Pairing& p : enumerate_pairings(r)) {
      REQUIRE(p.blocks.size() == static_cast<std::size_t>(r / 2));
      std::vector<int> seen;
      int prev_first = 0;
      for (auto [a, b] : p.blocks) {
        CHECK(a < b);
        CHECK(a > prev_first);
        prev_first = a;
        seen.push_back(a);
        seen.push_back(b);
      }
      std::sort(seen.begin(), seen.end());
      for (int i = 0; i < r; ++i) CHECK(seen[static_cast<std::size_t>(i)] == i + 1);
    }
  }
}

TEST_CASE("enumeration refuses budgets past the cap") {
  CHECK_THROWS_AS(for_each_pairing(kMaxPairingPoints + 2, [](const Pairing&) {}),
                  SizeError);
}

TEST_CASE("crossing numbers on hand-checked configurations") {
  CHECK(crossing_number(Pairing{{{1, 2}, {3, 4}}}) == 0);
  CHECK(crossing_number(Pairing{{{1, 4}, {2, 3}}}) == 0);
  CHECK(crossing_number(Pairing{{{1, 3}, {2, 4}}}) == 1);
  CHECK(crossing_number(Pairing{{{1, 4}, {2, 5}, {3, 6}}}) == 3);
  CHECK(crossing_number(Pairing{{{1, 6}, {2, 4}, {3, 5}}}) == 1);
}

TEST_CASE("crossing histograms match the classical moment polynomials") {
  // 2 points: single pairing, no crossing.
  CHECK(crossing_histogram(2) == std::vector<long long>{1});
  // 4 points: 2 noncrossing + 1 crossing.
  CHECK(crossing_histogram(4) == std::vector<long long>{2, 1});
  // 6 points: 5 + 6q + 3q^2 + q^3.
  CHECK(crossing_histogram(6) == std::vector<long long>{5, 6, 3, 1});
  // 8 points: 14 + 28q + 28q^2 + 20q^3 + 10q^4 + 4q^5 + q^6.
  CHECK(crossing_histogram(8) == std::vector<long long>{14, 28, 28, 20, 10, 4, 1});

  for (int r : {10, 12}) {
    const auto h = crossing_histogram(r);
    CHECK(std::accumulate(h.begin(), h.end(), 0LL) == pairing_count(r));
    // Leading entry counts the noncrossing pairings: the Catalan numbers.
    CHECK(h[0] == (r == 10 ? 42 : 132));
    CHECK(h.back() == 1);
  }
}

TEST_CASE("joint moments at the classical endpoints") {
  MomentQuery query;
  query.times = {1.0, 1.0, 1.0, 1.0};

  query.q = 0.0;  // free case: Catalan
  CHECK(q_joint_moment(query) == doctest::Approx(2.0).epsilon(1e-14));
  query.q = 1.0;  // commutative gaussian: Wick without crossing penalty
  CHECK(q_joint_moment(query) == doctest::Approx(3.0).epsilon(1e-14));

  query.times = {1.0, 1.0, 1.0, 1.0, 1.0, 1.0};
  CHECK(q_joint_moment(query) == doctest::Approx(15.0).epsilon(1e-14));
  query.q = -1.0;
  CHECK(q_joint_moment(query) == doctest::Approx(1.0).epsilon(1e-14));

  query.times = {1.0, 1.0, 1.0};  // odd length vanishes
  query.q = 0.7;
  CHECK(q_joint_moment(query) == 0.0);
}

TEST_CASE("mixed-time moments weight crossings by q") {
  // Times (1,2,1,2): the only crossing pairing carries covariance 1*2.
  MomentQuery query;
  query.times = {1.0, 2.0, 1.0, 2.0};
  query.q = 0.0;
  CHECK(q_joint_moment(query) == doctest::Approx(2.0).epsilon(1e-14));
  query.q = 0.5;
  CHECK(q_joint_moment(query) == doctest::Approx(3.0).epsilon(1e-14));

  const Rational exact = q_joint_moment_exact(
      {Rational(1), Rational(2), Rational(1), Rational(2)}, Rational(1, 2));
  CHECK(exact == Rational(3));
}

TEST_CASE("a supplied gram matrix overrides the min-time covariance") {
  MomentQuery query;
  query.times = {1.0, 1.0};
  Eigen::MatrixXd gram(2, 2);
  gram << 1.0, 7.0, 7.0, 1.0;
  query.gram = gram;
  CHECK(q_joint_moment(query) == doctest::Approx(7.0).epsilon(1e-14));

  // Min-time gram reproduces the default path.
  MomentQuery by_times;
  by_times.times = {0.5, 2.0, 1.0, 2.0};
  by_times.q = 0.3;
  Eigen::MatrixXd min_gram(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      min_gram(i, j) = std::min(by_times.times[static_cast<std::size_t>(i)],
                                by_times.times[static_cast<std::size_t>(j)]);
  MomentQuery by_gram = by_times;
  by_gram.gram = min_gram;
  CHECK(q_joint_moment(by_gram) == doctest::Approx(q_joint_moment(by_times)).epsilon(1e-14));
}

TEST_CASE("exact moment polynomial in q at equal times") {
  const auto poly = q_moment_polynomial(
      {Rational(1), Rational(1), Rational(1), Rational(1)});
  REQUIRE(poly.size() == 2);
  CHECK(poly[0] == Rational(2));
  CHECK(poly[1] == Rational(1));

  // Coefficient sum over all crossings is the pairing count.
  const auto poly8 = q_moment_polynomial(std::vector<Rational>(8, Rational(1)));
  Rational sum = 0;
  for (const auto& c : poly8) sum += c;
  CHECK(sum == Rational(105));
}

TEST_CASE("density moments match the pairing sum") {
  // q = 0 integrates the semicircle: Catalan moments.
  CHECK(density_moment(0.0, 0) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(density_moment(0.0, 2) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(density_moment(0.0, 4) == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(density_moment(0.0, 6) == doctest::Approx(5.0).epsilon(1e-10));
  CHECK(density_moment(0.0, 8) == doctest::Approx(14.0).epsilon(1e-10));

  for (double q : {-0.5, 0.5, 0.8}) {
    for (int order : {2, 4, 6, 8}) {
      MomentQuery query;
      query.times.assign(static_cast<std::size_t>(order), 1.0);
      query.q = q;
      CHECK(std::abs(density_moment(q, order) - q_joint_moment(query)) < 1e-8);
    }
    CHECK(std::abs(density_moment(q, 5)) < 1e-10);
  }
}

TEST_CASE("density moment guards") {
  CHECK_THROWS_AS(density_moment(0.95, 2), UsageError);
  CHECK_THROWS_AS(density_moment(0.0, kDensityMaxOrder + 1), UsageError);
}

TEST_CASE("moment sums stay inside the support bound") {
  const MomentBound b = moment_bound_check(2, 2, 0.5);
  CHECK(b.sum == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(b.bound == doctest::Approx(256.0).epsilon(1e-12));
  CHECK(b.ok());

  for (double q : {-0.9, -0.5, 0.0, 0.5, 0.9})
    for (int n : {1, 2, 5, 64})
      for (int p : {1, 2, 3, 4})
        CHECK(moment_bound_check(n, p, q).ok());

  CHECK_THROWS_AS(moment_bound_check(65, 2, 0.0), SizeError);
  CHECK_THROWS_AS(moment_bound_check(2, 9, 0.0), SizeError);
  CHECK_THROWS_AS(moment_bound_check(2, 2, 1.0), UsageError);
}

TEST_SUITE_END();
