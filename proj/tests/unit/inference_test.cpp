#include "support.hpp"

#include <numeric>

#include "kmarket/skill_space.hpp"

using namespace kmarket;

namespace {

double f_oracle(const std::vector<double>& q, const std::vector<double>& col) {
  double f = 0.0;
  for (std::size_t s = 0; s < q.size(); ++s)
    if (q[s] > 0.0) f += q[s] * std::log(q[s] / col[s]);
  return f;
}

}  // namespace

TEST_CASE("marginal evidence") {
  auto m = test::two_state_model();
  CHECK(marginal_evidence(m, "o") == doctest::Approx(0.5).epsilon(1e-15));
  GenerativeModel zero({{"a", {}}, {"b", {}}}, {"o", "x"}, {0, 0.5, 0, 0.5});
  CHECK(marginal_evidence(zero, "o") == 0.0);
  CHECK_ERRC(marginal_evidence(m, "nope"), Errc::unknown_aim);

  std::mt19937_64 rng(1);
  auto r = test::random_model(rng, 10);
  double want = 0.0;
  for (std::size_t s = 0; s < 10; ++s) want += r.joint(s, 0);
  CHECK(std::abs(marginal_evidence(r, "o") - want) <= 1e-12);
}

TEST_CASE("model validation") {
  CHECK_ERRC(GenerativeModel({{"a", {}}}, {"o"}, {0.5}), Errc::invalid_model);
  CHECK_ERRC(GenerativeModel({{"a", {}}}, {"o", "o"}, {0.5, 0.5}), Errc::invalid_model);
  CHECK_ERRC(GenerativeModel({}, {"o"}, {}), Errc::invalid_model);
  CHECK_ERRC(GenerativeModel({{"a", {}}, {"b", {}}}, {"o"}, {1.2, -0.2}), Errc::invalid_model);
  CHECK_ERRC(VariationalDistribution({0.7, 0.7}), Errc::invalid_model);
}

TEST_CASE("free energy values") {
  auto m = test::two_state_model();
  const auto r = free_energy(VariationalDistribution({0.5, 0.5}), m, "o");
  const double want = 0.5 * std::log(0.5 / 0.3) + 0.5 * std::log(0.5 / 0.2);
  CHECK(r.free_energy == doctest::Approx(want).epsilon(1e-12));
  CHECK(r.free_energy == doctest::Approx(0.71356).epsilon(1e-5));
  CHECK(r.neg_log_evidence == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(r.kl_gap == doctest::Approx(0.02041).epsilon(1e-3));

  const auto post = exact_posterior(m, "o");
  CHECK(post[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(post[1] == doctest::Approx(0.4).epsilon(1e-15));
  const auto at = free_energy(post, m, "o");
  CHECK(std::abs(at.free_energy - std::log(2.0)) <= 1e-12);
  CHECK(std::abs(at.kl_gap) <= 1e-12);

  GenerativeModel sparse({{"a", {}}, {"b", {}}}, {"o", "x"}, {0.5, 0.0, 0.0, 0.5});
  CHECK_ERRC(free_energy(VariationalDistribution({0.5, 0.5}), sparse, "o"), Errc::infinite_free_energy);
  CHECK(free_energy(VariationalDistribution({1.0, 0.0}), sparse, "o").free_energy ==
        doctest::Approx(std::log(2.0)));
  GenerativeModel zero({{"a", {}}, {"b", {}}}, {"o", "x"}, {0, 0.5, 0, 0.5});
  CHECK_ERRC(exact_posterior(zero, "o"), Errc::impossible_aim);
  GenerativeModel single({{"only", {}}}, {"o", "x"}, {0.25, 0.75});
  CHECK(exact_posterior(single, "o")[0] == 1.0);
}

TEST_CASE("free energy matches a direct summation oracle on random models") {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 2 + static_cast<std::size_t>(t % 30);
    auto m = test::random_model(rng, n);
    auto q = test::random_simplex(rng, n);
    const auto col = m.column("o");
    CHECK(std::abs(free_energy(VariationalDistribution(q), m, "o").free_energy - f_oracle(q, col)) <= 1e-12);
  }
}

TEST_CASE("posterior beats a simplex grid") {
  // 3 states, grid step 1/140 gives 10,011 points.
  std::mt19937_64 rng(3);
  auto m = test::random_model(rng, 3);
  const auto col = m.column("o");
  const auto post = exact_posterior(m, "o");
  const double f_star = free_energy(post, m, "o").free_energy;
  const int steps = 140;
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> best_q;
  for (int i = 0; i <= steps; ++i)
    for (int j = 0; i + j <= steps; ++j) {
      std::vector<double> q{i / double(steps), j / double(steps), (steps - i - j) / double(steps)};
      const double f = f_oracle(q, col);
      if (f < best) {
        best = f;
        best_q = q;
      }
    }
  CHECK(best >= f_star - 1e-12);
  for (std::size_t s = 0; s < 3; ++s) CHECK(std::abs(best_q[s] - post[s]) <= 1.0 / steps);
}

TEST_CASE("minimizer converges to the posterior") {
  auto m = test::two_state_model();
  const auto r = minimize_free_energy(m, "o", 1000, 1e-8);
  CHECK(std::abs(r.report.free_energy - std::log(2.0)) <= 1e-8);
  for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i] <= r.trace[i - 1] + 1e-15);

  MinimizeOptions warm;
  warm.initial = exact_posterior(m, "o");
  CHECK(minimize_free_energy(m, "o", warm).iterations <= 1);

  std::mt19937_64 rng(4);
  for (int t = 0; t < 20; ++t) {
    auto rm = test::random_model(rng, 2 + static_cast<std::size_t>(t));
    const auto res = minimize_free_energy(rm, "o", 1000, 1e-8);
    CHECK(total_variation(res.q, exact_posterior(rm, "o")) <= 1e-6);
  }

  MinimizeOptions tight;
  tight.max_iters = 1;
  tight.tol = 1e-300;
  tight.step = 0.01;
  std::mt19937_64 rng2(9);
  CHECK_THROWS_AS(minimize_free_energy(test::random_model(rng2, 8), "o", tight), ConvergenceFailure);
  CHECK_ERRC(minimize_free_energy(m, "o", 0, 1e-8), Errc::invalid_argument);
}

TEST_CASE("team model construction") {
  auto t = make_taxonomy({"a", "b", "c", "d"});
  SkillProfile project(t, {1, 1, 1, 1});
  std::vector<Candidate> three{{"x", SkillProfile(t, {1, 0, 0, 1})},
                              {"y", SkillProfile(t, {0, 1, 1, 0})},
                              {"z", SkillProfile(t, {1, 1, 0, 0})}};
  const auto m3 = build_team_model(project, three, {2, 2}, 0.01);
  CHECK(m3.state_count() == 3);
  CHECK(m3.states()[0].members == std::vector<AgentId>{"x", "y"});

  std::vector<Candidate> same;
  for (const char* id : {"a1", "a2", "a3", "a4", "a5"}) same.push_back({id, project});
  const auto m5 = build_team_model(project, same, {2, 3}, 0.01);
  CHECK(m5.state_count() == 20);  // C(5,2) + C(5,3)
  const auto a = m5.aim_index(kAimAchieved);
  for (std::size_t s = 0; s < m5.state_count(); ++s) {
    const double prior = m5.joint(s, 0) + m5.joint(s, 1);
    CHECK(m5.joint(s, a) / prior == doctest::Approx(0.99).epsilon(1e-12));
  }
  // Lexicographic order over sorted member ids.
  for (std::size_t s = 1; s < m5.state_count(); ++s) CHECK(m5.states()[s - 1].members < m5.states()[s].members);

  CHECK_ERRC(build_team_model(project, {}, {1, 1}, 0.01), Errc::no_candidates);
  CHECK_ERRC(build_team_model(project, three, {4, 5}, 0.01), Errc::no_candidates);
  CHECK_ERRC(clamped_aim_probability(0.5, "maybe", 0.01), Errc::unknown_aim);
  CHECK(clamped_aim_probability(0.0, kAimAchieved, 0.01) == doctest::Approx(0.01));
  CHECK(clamped_aim_probability(0.0, kAimNotAchieved, 0.01) == doctest::Approx(0.99));
}
