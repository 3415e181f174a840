#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>

#include "spnc/oracle.hpp"
#include "test_util.hpp"

using namespace spnc;
using namespace spnc::test;

TEST_CASE("enumerate_joint recovers the canonical parameters") {
  const auto theta = fixed_theta();
  const JointTable source = theta_table(theta);
  const JointTable table = enumerate_joint(full_joint_circuit(source));
  REQUIRE(table.states() == 8);
  for (std::size_t s = 0; s < 8; ++s)
    CHECK(table.probs[s] == doctest::Approx(source.probs[s]).epsilon(1e-12));
  CHECK(table.is_normalized());
}

TEST_CASE("enumerate_joint on the uniform circuit") {
  const Circuit u = full_joint_circuit(make_table(vars(2), {0.25, 0.25, 0.25, 0.25}));
  const JointTable table = enumerate_joint(u);
  for (double p : table.probs) CHECK(p == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("enumerate_joint of a random mixture circuit is normalized") {
  Rng rng(99);
  const Circuit c = naive_bayes_circuit(3, 4, rng);
  CHECK(std::abs(enumerate_joint(c).sum() - 1.0) < 1e-9);
}

TEST_CASE("table_marginal and table_conditional") {
  const JointTable t = pair_table();
  CHECK(table_marginal(t, asgn({{0, 1}})) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(table_marginal(t, PartialAssignment{}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(table_conditional(t, asgn({{0, 1}}), PartialAssignment{}) ==
        doctest::Approx(table_marginal(t, asgn({{0, 1}}))).epsilon(1e-15));
  CHECK(table_conditional(t, asgn({{0, 1}}), asgn({{1, 1}})) ==
        doctest::Approx(0.8).epsilon(1e-14));
  CHECK_THROWS_AS(table_conditional(t, asgn({{0, 1}}), asgn({{0, 1}})),
                  std::invalid_argument);
}

TEST_CASE("circuit queries agree with the table oracle") {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 2 + static_cast<int>(rng.next_below(4));
    const Circuit c = (trial % 2 == 0) ? full_joint_circuit(random_table(n, rng))
                                       : naive_bayes_circuit(n, 3, rng);
    const JointTable t = enumerate_joint(c);
    // all marginal masks: each variable absent / 0 / 1
    std::vector<int> choice(n, 0);
    std::size_t total = 1;
    for (int i = 0; i < n; ++i) total *= 3;
    for (std::size_t code = 0; code < total; ++code) {
      std::size_t rem = code;
      PartialAssignment q;
      for (int i = 0; i < n; ++i) {
        const int pick = static_cast<int>(rem % 3);
        rem /= 3;
        if (pick > 0) q.set(i, pick == 2);
      }
      CHECK(std::abs(c.marginal(q) - table_marginal(t, q)) < 1e-9);
    }
  }
}

TEST_CASE("table_do with empty parents equals conditioning") {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const JointTable t = random_table(3, rng);
    const int a = static_cast<int>(rng.next_below(3));
    const bool value = rng.next_below(2);
    const JointTable post = table_do(t, a, value, {});
    PartialAssignment ev;
    ev.set(a, value);
    for (std::size_t r = 0; r < post.states(); ++r) {
      // expand the reduced state back into the original variable order
      PartialAssignment orig;
      std::size_t bit = 0;
      for (int i = 0; i < 3; ++i) {
        if (i == a) continue;
        orig.set(i, (r >> bit) & 1);
        ++bit;
      }
      CHECK(std::abs(post.probs[r] - table_conditional(t, orig, ev)) < 1e-12);
    }
  }
}

TEST_CASE("intervening on a child leaves the parent untouched") {
  const JointTable t = chain_table();
  const int parents[] = {0};
  const JointTable post = table_do(t, 1, true, parents);
  REQUIRE(post.states() == 2);
  CHECK(post.probs[1] == doctest::Approx(0.6).epsilon(1e-12));  // Pr(X1=1)
}

TEST_CASE("table_do output is normalized for any declared parent set") {
  Rng rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng.next_below(3));
    const JointTable t = random_table(n, rng);
    const int a = static_cast<int>(rng.next_below(n));
    std::vector<int> parents;
    for (int i = 0; i < n; ++i)
      if (i != a && rng.next_below(2)) parents.push_back(i);
    const JointTable post = table_do(t, a, rng.next_below(2), parents);
    CHECK(std::abs(post.sum() - 1.0) < 1e-9);
  }
}

TEST_CASE("table_do rejects a zero divisor on a positive-mass parent context") {
  // Pr(X2=1 | X1=0) = 0 while Pr(X1=0) > 0
  const JointTable t = make_table(vars(2), {0.5, 0.1, 0.0, 0.4});
  const int parents[] = {0};
  CHECK_THROWS_WITH_AS(table_do(t, 1, true, parents), doctest::Contains("zero"),
                       std::runtime_error);
}

TEST_CASE("check_constraint on independence") {
  SUBCASE("uniform table satisfies everything") {
    const JointTable u = make_table(vars(2), {0.25, 0.25, 0.25, 0.25});
    const auto r = check_constraint(u, Independence{0, 1, {}, {}}, 1e-9);
    CHECK(r.satisfied);
    CHECK(r.max_violation == doctest::Approx(0.0).epsilon(1e-15));
  }

  SUBCASE("dependent pair violates by |Pr(1,1) - Pr(1)Pr(1)|") {
    const auto r = check_constraint(pair_table(), Independence{0, 1, {}, {}}, 1e-6);
    CHECK_FALSE(r.satisfied);
    CHECK(r.max_violation == doctest::Approx(0.15).epsilon(1e-12));
  }
}

TEST_CASE("check_constraint on conditional equality skips impossible contexts") {
  // context X3=1 has probability zero; the constraint is vacuous there
  std::vector<double> probs(8, 0.0);
  probs[0] = 0.4;  // (0,0,0)
  probs[1] = 0.1;  // (1,0,0)
  probs[2] = 0.1;  // (0,1,0)
  probs[3] = 0.4;  // (1,1,0)
  const JointTable t = make_table(vars(3), probs);
  PartialAssignment ctx;
  ctx.set(2, true);
  const auto r = check_constraint(t, ConditionalEquality{0, 1, ctx, false}, 1e-9);
  CHECK(r.satisfied);
  CHECK(r.max_violation == 0.0);
}

TEST_CASE("check_constraint on interventional equality") {
  SUBCASE("chain: intervening on the child is equality-satisfying for the parent") {
    const auto r = check_constraint(
        chain_table(), InterventionalEquality{1, {0}, {0}}, 1e-9);
    CHECK(r.satisfied);
  }

  SUBCASE("chain: intervening on the parent moves the child") {
    const auto r = check_constraint(
        chain_table(), InterventionalEquality{0, {}, {1}}, 1e-9);
    CHECK_FALSE(r.satisfied);
    // Pr(X2=1|do(X1=1)) - Pr(X2=1|do(X1=0)) = 0.9 - 0.2
    CHECK(r.max_violation == doctest::Approx(0.7).epsilon(1e-12));
  }
}

TEST_CASE("sample_dataset is deterministic and follows the table") {
  const JointTable t = pair_table();

  SUBCASE("identical seeds give identical rows") {
    const Dataset a = sample_dataset(t, 4, 123);
    const Dataset b = sample_dataset(t, 4, 123);
    CHECK(a.rows == b.rows);
    const Dataset c = sample_dataset(t, 4, 124);
    CHECK(a.rows != c.rows);  // overwhelmingly likely
  }

  SUBCASE("empirical frequencies approach the table") {
    const Dataset d = sample_dataset(t, 100000, 42);
    std::array<std::size_t, 4> counts{};
    for (std::uint64_t row : d.rows) ++counts[row];
    for (std::size_t s = 0; s < 4; ++s)
      CHECK(std::abs(static_cast<double>(counts[s]) / 100000.0 - t.probs[s]) < 0.01);
  }

  SUBCASE("point mass repeats one row") {
    const JointTable point = make_table(vars(2), {0.0, 0.0, 1.0, 0.0});
    const Dataset d = sample_dataset(point, 50, 7);
    for (std::uint64_t row : d.rows) CHECK(row == 2);
  }
}
