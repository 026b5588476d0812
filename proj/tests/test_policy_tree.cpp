#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "aqt/policy_tree.hpp"
#include "aqt/rng.hpp"

using namespace aqt;

TEST_CASE("prescribes follows t mod 2^l == c") {
  CHECK(prescribes(Schedule{3, 2}, 7));
  CHECK(prescribes(Schedule{3, 2}, 3));
  CHECK(prescribes(Schedule{3, 2}, 11));
  CHECK_FALSE(prescribes(Schedule{3, 2}, 5));
  for (std::uint64_t t = 0; t < 100; ++t) CHECK(prescribes(Schedule{0, 0}, t));
  CHECK(prescribes(Schedule{2, 3}, 10));
  CHECK_FALSE(prescribes(Schedule{2, 3}, 11));
}

TEST_CASE("children split the parent's slots disjointly") {
  const auto [left, right] = children(Schedule{3, 2}, 3);
  CHECK(left == Schedule{3, 3});
  CHECK(right == Schedule{7, 3});
  const auto [l0, r0] = children(Schedule{0, 0}, 5);
  CHECK(l0 == Schedule{0, 1});
  CHECK(r0 == Schedule{1, 1});
  CHECK_THROWS_AS(children(Schedule{1, 3}, 3), std::out_of_range);

  // disjoint-union property over one full period
  const Schedule p{2, 2};
  const auto [a, b] = children(p, 4);
  for (std::uint64_t t = 0; t < 16; ++t) {
    CHECK(prescribes(p, t) == (prescribes(a, t) || prescribes(b, t)));
    CHECK_FALSE((prescribes(a, t) && prescribes(b, t)));
  }
}

TEST_CASE("conflicts is lineage, equivalently slot-set intersection") {
  CHECK(conflicts(Schedule{3, 2}, Schedule{7, 3}));
  CHECK(conflicts(Schedule{7, 3}, Schedule{3, 2}));
  CHECK_FALSE(conflicts(Schedule{0, 2}, Schedule{1, 2}));
  CHECK(conflicts(Schedule{1, 1}, Schedule{1, 1}));

  // brute force over all pairs with levels <= 4
  for (std::uint32_t la = 0; la <= 4; ++la)
    for (std::uint32_t ca = 0; ca < (1u << la); ++ca)
      for (std::uint32_t lb = 0; lb <= 4; ++lb)
        for (std::uint32_t cb = 0; cb < (1u << lb); ++cb) {
          const Schedule a{ca, la}, b{cb, lb};
          bool intersect = false;
          for (std::uint64_t t = 0; t < (1u << std::max(la, lb)); ++t)
            intersect |= prescribes(a, t) && prescribes(b, t);
          CHECK(conflicts(a, b) == intersect);
          CHECK(conflicts(a, b) == conflicts(b, a));
        }
}

TEST_CASE("active_set is the root-to-leaf path through slot t") {
  const auto path = active_set(3, 2);
  REQUIRE(path.size() == 3);
  CHECK(path[0] == Schedule{0, 0});
  CHECK(path[1] == Schedule{1, 1});
  CHECK(path[2] == Schedule{3, 2});

  CHECK(active_set(12345, 0) == std::vector<Schedule>{Schedule{0, 0}});

  const auto p6 = active_set(6, 3);
  REQUIRE(p6.size() == 4);
  for (std::size_t i = 0; i + 1 < p6.size(); ++i) {
    const auto [l, r] = children(p6[i], 3);
    CHECK((p6[i + 1] == l || p6[i + 1] == r));
  }

  for (std::uint64_t t : {0ull, 7ull, 100ull, 12345ull})
    for (std::uint32_t depth : {0u, 1u, 4u}) {
      const auto p = active_set(t, depth);
      CHECK(p.size() == depth + 1);
      for (const Schedule& s : p) CHECK(prescribes(s, t));
      for (std::size_t i = 0; i + 1 < p.size(); ++i) CHECK(conflicts(p[i], p[i + 1]));
    }
}

TEST_CASE("schedule-shift equivalence") {
  RngStream rng(11);
  for (int iter = 0; iter < 200; ++iter) {
    const std::uint32_t l = rng.next_u64() % 5;
    const std::uint32_t c = rng.next_u64() % (1u << l);
    const std::uint64_t s = rng.next_u64() % 100;
    const std::uint64_t t = rng.next_u64() % 1000;
    const Schedule orig{c, l};
    const Schedule shifted{static_cast<std::uint32_t>((c + s) % (1u << l)), l};
    CHECK(prescribes(orig, t) == prescribes(shifted, t + s));
  }
}

TEST_CASE("weight table size and indexing") {
  for (std::uint32_t depth = 0; depth <= 10; ++depth)
    CHECK(WeightTable(depth).size() == (1u << (depth + 1)) - 1);
  for (std::size_t i = 0; i < 63; ++i)
    CHECK(WeightTable::index_of(WeightTable::schedule_at(i)) == i);
}

TEST_CASE("init_weights matches the closed form") {
  AgentParams p;

  SECTION("gamma0 = 0 is deterministic") {
    p.gamma0 = 0.0;
    RngStream rng(1);
    const WeightTable w = init_weights(3, p, rng);
    for (std::uint32_t l = 0; l <= 3; ++l)
      for (std::uint32_t c = 0; c < (1u << l); ++c)
        CHECK(w.get(Schedule{c, l}) == Catch::Approx(0.25 / std::pow(1.8, l)).epsilon(1e-12));
  }

  SECTION("level-0 weight stays in [w_init(1-gamma0), w_init]") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      RngStream rng(seed);
      const WeightTable w = init_weights(4, p, rng);
      const double w0 = w.get(Schedule{0, 0});
      CHECK(w0 >= 0.225);
      CHECK(w0 <= 0.25);
    }
  }

  SECTION("all weights strictly positive for gamma0 < 1") {
    RngStream rng(3);
    const WeightTable w = init_weights(5, p, rng);
    for (std::size_t i = 0; i < w.size(); ++i) CHECK(w.get(i) > 0.0);
  }

  SECTION("empirical level-2 mean matches w_init/gamma1^2 * (1 - gamma0/2)") {
    RngStream rng(42);
    double sum = 0.0;
    std::size_t count = 0;
    for (int rep = 0; rep < 10000 / 4; ++rep) {
      const WeightTable w = init_weights(5, p, rng);
      for (std::uint32_t c = 0; c < 4; ++c) {
        sum += w.get(Schedule{c, 2});
        ++count;
      }
    }
    const double expected = 0.25 / (1.8 * 1.8) * 0.95;
    CHECK(sum / static_cast<double>(count) == Catch::Approx(expected).epsilon(0.02));
  }
}

TEST_CASE("multiplicative_update touches only the active path") {
  AgentParams p;
  RngStream rng(5);
  WeightTable w = init_weights(3, p, rng);
  const auto actives = active_set(6, 3);

  SECTION("alpha = 0 leaves the table unchanged") {
    WeightTable before = w;
    multiplicative_update(w, actives, 0.0, rng);
    for (std::size_t i = 0; i < w.size(); ++i) CHECK(w.get(i) == before.get(i));
  }

  SECTION("negative alpha strictly decreases active weights") {
    WeightTable before = w;
    multiplicative_update(w, actives, -0.5, rng);
    for (const Schedule& s : actives) CHECK(w.get(s) < before.get(s));
  }

  SECTION("inactive weights are bit-identical") {
    WeightTable before = w;
    multiplicative_update(w, actives, 0.2, rng);
    std::set<std::size_t> touched;
    for (const Schedule& s : actives) touched.insert(WeightTable::index_of(s));
    for (std::size_t i = 0; i < w.size(); ++i)
      if (!touched.count(i)) CHECK(w.get(i) == before.get(i));
  }
}

TEST_CASE("normalize_weights redistributes lost mass") {
  AgentParams p;
  RngStream rng(9);

  SECTION("no loss, no change") {
    WeightTable w = init_weights(2, p, rng);
    WeightTable before = w;
    normalize_weights(w.sum() - 0.1, w, p.w_init, rng);  // delta < 0
    for (std::size_t i = 0; i < w.size(); ++i) CHECK(w.get(i) == before.get(i));
  }

  SECTION("gate: no redistribution when the sum is already above w_init*|S|") {
    WeightTable w(2);
    for (std::size_t i = 0; i < w.size(); ++i) w.set(i, 0.9);  // sum 6.3 > 0.25*7
    WeightTable before = w;
    normalize_weights(w.sum() + 0.5, w, p.w_init, rng);
    for (std::size_t i = 0; i < w.size(); ++i) CHECK(w.get(i) == before.get(i));
  }

  SECTION("sum restored exactly, increments nonnegative") {
    WeightTable w = init_weights(2, p, rng);
    const double target = w.sum() + 0.3;  // pretend 0.3 was lost this slot
    WeightTable before = w;
    normalize_weights(target, w, p.w_init, rng);
    double sum = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      CHECK(w.get(i) >= before.get(i));
      sum += w.get(i);
    }
    CHECK(sum == Catch::Approx(target).margin(1e-9));
  }
}

TEST_CASE("enforce_bounds clamps to 1 and is idempotent") {
  RngStream rng(13);
  WeightTable w(3);
  for (std::size_t i = 0; i < w.size(); ++i) w.set(i, 2.0 * rng.next_unit());
  w.set(std::size_t{0}, 1.37);
  enforce_bounds(w);
  CHECK(w.get(std::size_t{0}) == 1.0);
  WeightTable once = w;
  enforce_bounds(w);
  for (std::size_t i = 0; i < w.size(); ++i) {
    CHECK(w.get(i) <= 1.0);
    CHECK(w.get(i) == once.get(i));
  }
}

TEST_CASE("argmax tie-break prefers lowest level, then lowest offset") {
  WeightTable w(3);
  for (std::size_t i = 0; i < w.size(); ++i) w.set(i, 0.5);
  CHECK(w.argmax() == Schedule{0, 0});
  w.set(Schedule{2, 2}, 0.9);
  w.set(Schedule{1, 2}, 0.9);
  w.set(Schedule{5, 3}, 0.9);
  CHECK(w.argmax() == Schedule{1, 2});
}
