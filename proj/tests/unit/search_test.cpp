#include "support.hpp"

#include <cstring>
#include <set>

#include "../common/oracles.hpp"
#include "kmarket/partitions.hpp"
#include "kmarket/subgroup_search.hpp"

using namespace kmarket;
namespace sk = kmarket::search_kernels;

namespace {

std::vector<Candidate> random_agents(std::mt19937_64& rng, const TaxonomyPtr& t, std::size_t n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Candidate> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> r(t->size());
    for (auto& v : r) v = u(rng);
    out.push_back({"a" + std::to_string(10 + i), SkillProfile(t, r)});
  }
  return out;
}

std::vector<double> radii(const SkillProfile& p) { return {p.radii().begin(), p.radii().end()}; }

}  // namespace

TEST_CASE("integer partitions") {
  CHECK(enumerate_partitions(4, 2) == std::vector<IntegerPartition>{{4}, {2, 2}});
  CHECK(enumerate_partitions(2, 2) == std::vector<IntegerPartition>{{2}});
  CHECK(enumerate_partitions(6, 2) == std::vector<IntegerPartition>{{6}, {4, 2}, {3, 3}, {2, 2, 2}});
  CHECK(enumerate_partitions(5, 1).size() == 7);
  CHECK_ERRC(enumerate_partitions(1, 2), Errc::infeasible_partition);
  CHECK_ERRC(enumerate_partitions(3, 0), Errc::invalid_argument);
}

TEST_CASE("set partitions by shape match an independent enumeration") {
  for (std::size_t n = 2; n <= 8; ++n) {
    std::set<std::vector<std::size_t>> mine;
    for (const auto& shape : enumerate_partitions(n, 2))
      for_each_set_partition(shape, [&](const std::vector<std::vector<std::size_t>>& blocks) {
        std::vector<std::size_t> rgs(n);
        for (std::size_t b = 0; b < blocks.size(); ++b)
          for (auto a : blocks[b]) rgs[a] = b;
        CHECK(mine.insert(rgs).second);
      });
    const auto want = oracle::set_partitions(n);
    CHECK(mine == std::set<std::vector<std::size_t>>(want.begin(), want.end()));
  }
  // n = 4: one way to keep everyone together plus three pairings.
  CHECK(sk::enumerate_configurations(4).size() == 4);
  CHECK(sk::enumerate_configurations(8, 3).size() < sk::enumerate_configurations(8).size());
}

TEST_CASE("two agents form one group") {
  auto t = make_taxonomy({"a", "b", "c"});
  std::vector<Candidate> two{{"y", SkillProfile(t, {1, 0, 1})}, {"x", SkillProfile(t, {0, 1, 0})}};
  const auto c = stable_subgroup_search(SkillProfile(t, {1, 1, 1}), two);
  CHECK(c.partition == IntegerPartition{2});
  CHECK(c.groups == std::vector<std::vector<AgentId>>{{"x", "y"}});
  CHECK_ERRC(stable_subgroup_search(SkillProfile(t, {1, 1, 1}), std::span(two).first(1)), Errc::invalid_argument);
}

TEST_CASE("specialty clusters split across two sub-projects") {
  auto t = make_taxonomy({"s1", "s2", "s3", "s4"});
  std::vector<SkillProfile> projects{SkillProfile(t, {1, 1, 0.1, 0.1}), SkillProfile(t, {0.1, 0.1, 1, 1})};
  std::vector<Candidate> agents{{"a", SkillProfile(t, {1, 0.2, 0.1, 0.1})},
                                {"b", SkillProfile(t, {0.2, 1, 0.1, 0.1})},
                                {"c", SkillProfile(t, {0.1, 0.1, 1, 0.2})},
                                {"d", SkillProfile(t, {0.1, 0.1, 0.2, 1})}};
  const auto c = stable_subgroup_search(projects, agents);
  CHECK(c.partition == IntegerPartition{2, 2});
  CHECK(c.groups == std::vector<std::vector<AgentId>>{{"a", "b"}, {"c", "d"}});
  CHECK(c.project_of_group == std::vector<std::size_t>{0, 1});

  std::vector<std::vector<double>> pr, ag;
  for (const auto& p : projects) pr.push_back(radii(p));
  for (const auto& a : agents) ag.push_back(radii(a.profile));
  const auto want = oracle::search(pr, ag, 0.01);
  CHECK(want.labels == std::vector<std::size_t>{0, 0, 1, 1});
  CHECK(std::abs(c.total_free_energy - want.total) <= 1e-12);
}

TEST_CASE("exhaustive search equals the brute-force oracle") {
  std::mt19937_64 rng(21);
  auto t = make_taxonomy({"s1", "s2", "s3", "s4", "s5"});
  for (std::size_t n = 2; n <= 6; ++n) {
    for (int trial = 0; trial < 5; ++trial) {
      const std::size_t m = 1 + static_cast<std::size_t>(trial % 2);
      auto agents = random_agents(rng, t, n);
      std::vector<SkillProfile> projects;
      std::vector<std::vector<double>> pr, ag;
      for (std::size_t p = 0; p < m; ++p) {
        projects.push_back(random_agents(rng, t, 1)[0].profile);
        pr.push_back(radii(projects.back()));
      }
      for (const auto& a : agents) ag.push_back(radii(a.profile));
      const auto got = stable_subgroup_search(projects, agents);
      const auto want = oracle::search(pr, ag, 0.01);
      std::vector<std::size_t> labels;
      for (const auto& a : agents) labels.push_back(got.assignment.at(a.id));
      CHECK(labels == want.labels);
      CHECK(got.project_of_group == want.project_of_group);
      CHECK(std::abs(got.total_free_energy - want.total) <= 1e-9);
    }
  }
}

TEST_CASE("search limits and greedy fallback") {
  std::mt19937_64 rng(22);
  auto t = make_taxonomy({"s1", "s2", "s3", "s4"});
  auto agents = random_agents(rng, t, 11);
  SkillProfile project(t, {1, 1, 1, 1});
  CHECK_ERRC(stable_subgroup_search(project, agents), Errc::search_too_large);
  SearchOptions greedy;
  greedy.mode = SearchMode::greedy;
  const auto g = stable_subgroup_search(project, agents, greedy);
  std::size_t covered = 0;
  for (const auto& grp : g.groups) {
    CHECK(grp.size() >= 2);
    covered += grp.size();
  }
  CHECK(covered == agents.size());

  SearchOptions capped;
  capped.max_group_size = 3;
  const auto c = stable_subgroup_search(project, std::span(agents).first(7), capped);
  for (const auto& grp : c.groups) CHECK(grp.size() <= 3);
  capped.max_group_size = 2;
  CHECK_ERRC(stable_subgroup_search(project, std::span(agents).first(5), capped), Errc::invalid_argument);

  auto other = make_taxonomy({"x", "y", "z"});
  std::vector<Candidate> mixed{agents[0], {"zz", SkillProfile(other, {1, 1, 1})}};
  CHECK_ERRC(stable_subgroup_search(project, mixed), Errc::taxonomy_mismatch);
}

TEST_CASE("parallel kernels reproduce the serial reference bit for bit") {
  std::mt19937_64 rng(23);
  auto t = make_taxonomy({"s1", "s2", "s3", "s4", "s5", "s6"});
  auto agents = random_agents(rng, t, 9);
  std::vector<SkillProfile> projects{random_agents(rng, t, 1)[0].profile, random_agents(rng, t, 1)[0].profile};
  SearchOptions opts;
  const auto a = sk::build_cost_table_serial(projects, agents, opts);
  const auto b = sk::build_cost_table_parallel(projects, agents, opts);
  REQUIRE(a.group_cost.size() == b.group_cost.size());
  CHECK(std::memcmp(a.group_cost.data(), b.group_cost.data(), a.group_cost.size() * sizeof(double)) == 0);

  const auto configs = sk::enumerate_configurations(agents.size());
  const auto sa = sk::score_configurations_serial(a, configs);
  const auto sb = sk::score_configurations_parallel(a, configs);
  REQUIRE(sa.size() == sb.size());
  for (std::size_t i = 0; i < sa.size(); ++i) {
    CHECK(std::memcmp(&sa[i].total, &sb[i].total, sizeof(double)) == 0);
    CHECK(sa[i].project_of_group == sb[i].project_of_group);
  }

  opts.parallel = false;
  const auto serial = stable_subgroup_search(projects, agents, opts);
  opts.parallel = true;
  const auto parallel = stable_subgroup_search(projects, agents, opts);
  CHECK(serial.groups == parallel.groups);
  CHECK(serial.project_of_group == parallel.project_of_group);
  CHECK(std::memcmp(&serial.total_free_energy, &parallel.total_free_energy, sizeof(double)) == 0);
}
