#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "eqvar/error.hpp"
#include "eqvar/rng.hpp"
#include "eqvar/search.hpp"

using namespace eqvar;

namespace {

Dag edges(int p, std::vector<Edge> e) { return Dag::from_edges(p, e); }

Dataset random_sem_data(int p, int n, std::uint64_t seed) {
  const SemSpec spec = random_sem(random_dag(p, 0.5, seed), 0.5, 2.0, 1.0, ErrorFamily::Gaussian, seed);
  return simulate(spec, n, seed);
}

}  // namespace

TEST_CASE("single node") {
  Eigen::MatrixXd v(3, 1);
  v << 1, -2, 0.5;
  const NodeScoreTable t = NodeScoreTable::build(Dataset(v));
  const SearchResult dp = exact_dp_bic(t);
  REQUIRE(dp.best_dags.size() == 1);
  CHECK(dp.best_dags[0] == Dag(1));
  CHECK(dp.best_score == doctest::Approx(3 * t.at(0, 0)));
  const SearchResult ex = exhaustive_best(t, Criterion::log_marginal(3.0));
  CHECK(ex.best_dags[0] == Dag(1));
}

TEST_CASE("near-noiseless two-node chain") {
  const Dag truth = edges(2, {{0, 1}});
  const Dag reversed = edges(2, {{1, 0}});
  const Dataset d = simulate(SemSpec::uniform_weights(truth, 1.0, 1e-6), 500, 3);
  const NodeScoreTable t = NodeScoreTable::build(d);
  CHECK(bic_score(t, truth) < bic_score(t, reversed));
  // n R_n carries the scale of the data while |dag| log n does not, so at
  // sigma2 = 1e-6 the penalty dominates and the empty graph is optimal.
  CHECK(exact_dp_bic(t).best_dags[0] == Dag(2));
  // Rescaling to unit error variance restores the true graph as optimum.
  const NodeScoreTable unit = NodeScoreTable::build(Dataset(d.values() / std::sqrt(1e-6)));
  const SearchResult ex = exhaustive_best(unit, Criterion::bic());
  REQUIRE(ex.best_dags.size() == 1);
  CHECK(ex.best_dags[0] == truth);
}

TEST_CASE("exact DP agrees with exhaustive BIC search") {
  for (std::uint64_t seed = 0; seed < 15; ++seed) {
    const int p = 2 + static_cast<int>(seed % 4);
    const Dataset d = random_sem_data(p, 300, seed);
    const NodeScoreTable t = NodeScoreTable::build(d);
    const SearchResult ex = exhaustive_best(t, Criterion::bic());
    const SearchResult dp = exact_dp_bic(t);
    INFO("seed ", seed, " p ", p);
    CHECK(dp.best_score == doctest::Approx(ex.best_score).epsilon(1e-10));
    CHECK(dp.best_dags == ex.best_dags);
    CHECK(dp.method == SearchMethod::Dp);
    for (const Dag& g : dp.best_dags) CHECK(bic_score(t, g) == doctest::Approx(dp.best_score).epsilon(1e-10));
  }
}

TEST_CASE("DP enumerates every tied optimum") {
  // Equal column norms make the two single-edge DAGs tie.
  Eigen::MatrixXd v(4, 2);
  v << 1, 2, 2, 1, 3, 4, 4, 3;
  const NodeScoreTable t = NodeScoreTable::build(Dataset(v));
  const SearchResult ex = exhaustive_best(t, Criterion::bic());
  const SearchResult dp = exact_dp_bic(t);
  CHECK(ex.best_dags.size() == 2);
  CHECK(dp.best_dags == ex.best_dags);
}

TEST_CASE("parent cap of zero yields the empty graph") {
  const Dataset d = random_sem_data(4, 200, 1);
  const NodeScoreTable t = NodeScoreTable::build(d, 0);
  const SearchResult dp = exact_dp_bic(t, 0);
  REQUIRE(dp.best_dags.size() == 1);
  CHECK(dp.best_dags[0] == Dag(4));
}

TEST_CASE("parent cap restricts the optimum") {
  const Dag collider = edges(3, {{0, 2}, {1, 2}});
  const Dataset d = simulate(SemSpec::uniform_weights(collider, 1.5, 1.0), 2000, 4);
  const NodeScoreTable t = NodeScoreTable::build(d);
  CHECK(exact_dp_bic(t).best_dags[0] == collider);
  for (const Dag& g : exact_dp_bic(t, 1).best_dags)
    for (int j = 0; j < 3; ++j) CHECK(mask_size(g.parent_mask(j)) <= 1);
}

TEST_CASE("DP resource limits") {
  NodeScoreTable t(100, 25, 1.0);
  try {
    exact_dp_bic(t);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ResourceCap);
  }
  try {
    exact_dp_bic(NodeScoreTable::build(random_sem_data(4, 50, 2)), -1, 16);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ResourceCap);
  }
  CHECK(dp_memory_estimate(10, 3) < dp_memory_estimate(10, 9));
  CHECK(default_max_parents(4) == 3);
  CHECK(default_max_parents(12) == 5);
}

TEST_CASE("DP with a missing table entry is an error") {
  const NodeScoreTable t = NodeScoreTable::build(random_sem_data(3, 50, 3), 1);
  try {
    exact_dp_bic(t, 2);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::IncompleteTable);
  }
}

TEST_CASE("exhaustive log-marginal search") {
  const Dag chain = edges(3, {{0, 1}, {1, 2}});
  const Dataset d = simulate(SemSpec::uniform_weights(chain, 1.0, 1.0), 3000, 8);
  const NodeScoreTable t = NodeScoreTable::build(d);
  const SearchResult r = exhaustive_best(t, Criterion::log_marginal(3000.0));
  CHECK(r.best_dags[0] == chain);
  CHECK(r.stats.candidates_scored == 25);
  CHECK(r.best_score == doctest::Approx(log_marginal(t, chain, 3000.0)).epsilon(1e-14));
}

TEST_CASE("greedy hill climbing") {
  const Dataset d = random_sem_data(5, 1000, 21);
  NodeScoreTable t = NodeScoreTable::build(d);
  const SearchResult dp = exact_dp_bic(t);

  SUBCASE("starting at the optimum returns it unchanged") {
    GreedyOptions o;
    o.restarts = 1;
    o.initial = dp.best_dags[0];
    const SearchResult g = greedy_hill_climb(d, t, Criterion::bic(), o);
    CHECK(g.best_dags[0] == dp.best_dags[0]);
    CHECK(g.best_score == doctest::Approx(dp.best_score).epsilon(1e-12));
  }
  SUBCASE("best score is consistent and never better than the optimum") {
    GreedyOptions o;
    o.restarts = 10;
    o.seed = 5;
    o.reference_score = dp.best_score;
    const SearchResult g = greedy_hill_climb(d, t, Criterion::bic(), o);
    CHECK(g.best_score >= dp.best_score - score_tie_tolerance(dp.best_score));
    for (const Dag& b : g.best_dags) CHECK(bic_score(t, b) == doctest::Approx(g.best_score).epsilon(1e-12));
    REQUIRE(g.stats.restarts_reaching_reference);
    CHECK(*g.stats.restarts_reaching_reference >= 1);
    CHECK(g.stats.restarts == 10);
  }
  SUBCASE("trajectory increases within a restart") {
    GreedyOptions o;
    o.restarts = 1;
    o.seed = 9;
    const SearchResult g = greedy_hill_climb(d, t, Criterion::log_marginal(1000.0), o);
    for (std::size_t i = 1; i < g.trajectory.size(); ++i) CHECK(g.trajectory[i] > g.trajectory[i - 1]);
  }
  SUBCASE("deterministic") {
    GreedyOptions o;
    o.seed = 13;
    const SearchResult a = greedy_hill_climb(d, t, Criterion::bic(), o);
    const SearchResult b = greedy_hill_climb(d, t, Criterion::bic(), o);
    CHECK(a.best_dags == b.best_dags);
    CHECK(a.trajectory == b.trajectory);
  }
}

TEST_CASE("greedy reaches the exhaustive optimum on a three-node chain") {
  const Dag chain = edges(3, {{0, 1}, {1, 2}});
  const SemSpec spec = SemSpec::uniform_weights(chain, 1.0, 1.0);
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Dataset d = simulate(spec, 5000, 200 + seed);
    NodeScoreTable t = NodeScoreTable::build(d);
    const SearchResult ex = exhaustive_best(t, Criterion::bic());
    GreedyOptions o;
    o.seed = seed;
    const SearchResult g = greedy_hill_climb(d, t, Criterion::bic(), o);
    hits += std::abs(g.best_score - ex.best_score) <= score_tie_tolerance(ex.best_score);
  }
  CHECK(hits >= 9);
}

TEST_CASE("greedy fills missing table entries") {
  const Dataset d = random_sem_data(4, 200, 31);
  NodeScoreTable t(d.n(), d.p(), v_n(d));
  GreedyOptions o;
  o.restarts = 2;
  const SearchResult g = greedy_hill_climb(d, t, Criterion::bic(), o);
  CHECK(t.size() > 0);
  CHECK(bic_score(t, g.best_dags[0]) == doctest::Approx(g.best_score));
}
