#include "support.hpp"

#include <numbers>

#include "kmarket/skill_space.hpp"

using namespace kmarket;

namespace {

TaxonomyPtr tax(std::size_t k) {
  std::vector<std::string> skills;
  for (std::size_t i = 0; i < k; ++i) skills.push_back("s" + std::to_string(i));
  return make_taxonomy(skills);
}

// Vertices on the axes, then the shoelace formula.
double shoelace(const std::vector<double>& r) {
  const std::size_t k = r.size();
  std::vector<double> x(k), y(k);
  for (std::size_t i = 0; i < k; ++i) {
    const double a = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(k);
    x[i] = r[i] * std::cos(a);
    y[i] = r[i] * std::sin(a);
  }
  double s = 0.0;
  for (std::size_t i = 0; i < k; ++i) s += x[i] * y[(i + 1) % k] - x[(i + 1) % k] * y[i];
  return 0.5 * std::abs(s);
}

}  // namespace

TEST_CASE("polygon area against the shoelace oracle") {
  CHECK(polygon_area(SkillProfile(tax(4), {2, 2, 2, 2})) == doctest::Approx(8.0).epsilon(1e-12));
  CHECK(shoelace({2, 2, 2, 2}) == doctest::Approx(8.0).epsilon(1e-12));
  CHECK(polygon_area(SkillProfile(tax(5), {0, 0, 0, 0, 0})) == 0.0);
  CHECK(polygon_area(SkillProfile(tax(3), {1, 1, 1})) == doctest::Approx(3.0 * std::sqrt(3.0) / 4.0).epsilon(1e-12));

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  for (int t = 0; t < 200; ++t) {
    const std::size_t k = 3 + static_cast<std::size_t>(t % 10);
    std::vector<double> r(k);
    for (auto& v : r) v = u(rng);
    const double want = shoelace(r);
    CHECK(std::abs(polygon_area(SkillProfile(tax(k), r)) - want) <= 1e-9 * std::max(1.0, want));
  }
}

TEST_CASE("overlap and team profiles are componentwise") {
  auto t4 = tax(4);
  CHECK(overlap_profile(SkillProfile(t4, {2, 2, 2, 2}), SkillProfile(t4, {1, 3, 1, 3})) ==
        SkillProfile(t4, {1, 2, 1, 2}));
  SkillProfile a(t4, {0.3, 1.2, 0, 4});
  CHECK(overlap_profile(a, a) == a);
  auto t3 = tax(3);
  CHECK(overlap_profile(SkillProfile(t3, {1, 0, 5}), SkillProfile(t3, {0, 4, 5})) == SkillProfile(t3, {0, 0, 5}));

  std::vector<SkillProfile> padded{SkillProfile(t3, {1, 0, 0}), SkillProfile(t3, {0, 1, 0})};
  CHECK(team_profile(padded) == SkillProfile(t3, {1, 1, 0}));
  std::vector<SkillProfile> one{a};
  CHECK(team_profile(one) == a);
  std::vector<SkillProfile> two{SkillProfile(t4, {2, 2, 2, 2}), SkillProfile(t4, {1, 3, 1, 3})};
  CHECK(team_profile(two) == SkillProfile(t4, {2, 3, 2, 3}));
  CHECK_ERRC(team_profile(std::vector<SkillProfile>{}), Errc::empty_team);
  CHECK_ERRC(overlap_profile(SkillProfile(t3, {1, 1, 1}), SkillProfile(make_taxonomy({"a", "b", "c"}), {1, 1, 1})),
             Errc::taxonomy_mismatch);
}

TEST_CASE("cooperation fit worked example and bounds") {
  auto t4 = tax(4);
  SkillProfile project(t4, {2, 2, 2, 2});
  CHECK(std::abs(cooperation_fit(project, SkillProfile(t4, {1, 3, 1, 3})).value - 0.5) <= 1e-12);
  CHECK(cooperation_fit(project, project).value == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(cooperation_fit(project, SkillProfile(t4, {0, 0, 0, 0})).value == 0.0);
  CHECK_ERRC(cooperation_fit(SkillProfile(t4, {0, 0, 0, 0}), project), Errc::degenerate_project);
  CHECK_ERRC(SkillProfile(t4, {1, -1, 1, 1}), Errc::invalid_profile);
  CHECK_ERRC(SkillProfile(t4, {1, 1, 1}), Errc::invalid_profile);
  CHECK_ERRC(make_taxonomy({"a", "b"}), Errc::invalid_taxonomy);
  CHECK_ERRC(make_taxonomy({"a", "b", "a"}), Errc::invalid_taxonomy);
}

TEST_CASE("fit is scale invariant, monotone and bounded") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.05, 3.0);
  for (int t = 0; t < 300; ++t) {
    const std::size_t k = 3 + static_cast<std::size_t>(t % 6);
    auto tk = tax(k);
    std::vector<double> p(k), m(k);
    for (std::size_t i = 0; i < k; ++i) {
      p[i] = u(rng);
      m[i] = u(rng);
    }
    SkillProfile project(tk, p), member(tk, m);
    const double f = cooperation_fit(project, member).value;
    CHECK(f >= 0.0);
    CHECK(f <= 1.0);
    const double c = u(rng);
    CHECK(std::abs(cooperation_fit(project.scaled(c), member.scaled(c)).value - f) <= 1e-12);
    auto grown = m;
    grown[static_cast<std::size_t>(t) % k] += u(rng);
    CHECK(cooperation_fit(project, SkillProfile(tk, grown)).value >= f - 1e-15);
  }
}

TEST_CASE("group strength sums the individual fits") {
  auto t4 = tax(4);
  SkillProfile project(t4, {2, 2, 2, 2});
  std::vector<SkillProfile> halves{SkillProfile(t4, {1, 3, 1, 3}), SkillProfile(t4, {3, 1, 3, 1})};
  CHECK(cooperation_fit(project, halves[1]).value == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(group_strength(project, halves) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(group_strength(project, std::vector<SkillProfile>{}) == 0.0);
  CHECK(group_strength(project, std::vector<SkillProfile>{project}) == doctest::Approx(1.0));
}
