#include "kmarket/subgroup_search.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <limits>
#include <optional>

namespace kmarket {

namespace {

constexpr std::size_t kMaskAgentLimit = 16;

bool admissible(const IntegerPartition& shape, std::size_t max_group_size) {
  return max_group_size == 0 || shape.front() <= max_group_size;
}

// One candidate configuration in agent-index space.
struct Evaluated {
  std::vector<std::vector<std::size_t>> groups;  // ordered by first member
  std::vector<std::size_t> project_of_group;
  double total{0.0};
};

std::vector<std::size_t> labels_of(const std::vector<std::vector<std::size_t>>& groups, std::size_t n) {
  std::vector<std::size_t> labels(n, 0);
  for (std::size_t g = 0; g < groups.size(); ++g)
    for (std::size_t a : groups[g]) labels[a] = g;
  return labels;
}

// Minimum total, then fewer sub-groups, then the smallest assignment label string.
std::size_t select_best(const std::vector<Evaluated>& all, std::size_t n) {
  double best_total = std::numeric_limits<double>::infinity();
  for (const auto& e : all) best_total = std::min(best_total, e.total);
  std::optional<std::size_t> pick;
  std::vector<std::size_t> pick_labels;
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (all[i].total > best_total + kFreeEnergyTieTolerance) continue;
    auto labels = labels_of(all[i].groups, n);
    if (!pick || all[i].groups.size() < all[*pick].groups.size() ||
        (all[i].groups.size() == all[*pick].groups.size() && labels < pick_labels)) {
      pick = i;
      pick_labels = std::move(labels);
    }
  }
  return *pick;
}

std::vector<const Candidate*> sorted_agents(std::span<const Candidate> agents) {
  std::vector<const Candidate*> sorted;
  for (const auto& a : agents) sorted.push_back(&a);
  std::sort(sorted.begin(), sorted.end(), [](const Candidate* a, const Candidate* b) { return a->id < b->id; });
  for (std::size_t i = 1; i < sorted.size(); ++i)
    if (sorted[i - 1]->id == sorted[i]->id) throw Error(Errc::invalid_argument, "duplicate agent id " + sorted[i]->id);
  return sorted;
}

void validate_inputs(std::span<const SkillProfile> projects, std::span<const Candidate> agents,
                     const SearchOptions& options) {
  if (agents.size() < 2) throw Error(Errc::invalid_argument, "sub-group search needs at least 2 agents");
  if (projects.empty()) throw Error(Errc::invalid_argument, "sub-group search needs at least one project");
  if (!(options.floor > 0.0 && options.floor < 0.5)) throw Error(Errc::invalid_argument, "floor must lie in (0, 0.5)");
  clamped_aim_probability(0.0, options.aim, options.floor);  // rejects unknown aims up front
  for (const auto& p : projects) {
    if (!p.same_taxonomy(projects.front())) throw Error(Errc::taxonomy_mismatch, "projects use different taxonomies");
    if (!(polygon_area(p) > 0.0)) throw Error(Errc::degenerate_project, "project polygon has zero area");
  }
  for (const auto& a : agents)
    if (!a.profile.same_taxonomy(projects.front()))
      throw Error(Errc::taxonomy_mismatch, "agent " + a.id + " uses a different taxonomy");
}

// -ln p(aim) of the single-state model restricted to `members` with team size |members|.
double group_free_energy(const SkillProfile& project, std::span<const Candidate> members, const SearchOptions& options) {
  const auto model = build_team_model(project, members, TeamSizeRange{members.size(), members.size()}, options.floor);
  return -std::log(marginal_evidence(model, options.aim));
}

double idle_free_energy(const SearchOptions& options) {
  return -std::log(clamped_aim_probability(0.0, options.aim, options.floor));
}

// Best mapping of groups to projects, given per-group costs cost[g][p].
search_kernels::ScoredConfiguration best_mapping(const std::vector<std::vector<double>>& cost,
                                                 std::span<const double> idle) {
  const std::size_t groups = cost.size();
  const std::size_t m = idle.size();
  search_kernels::ScoredConfiguration best{std::numeric_limits<double>::infinity(), {}};
  std::vector<std::size_t> phi(groups, 0);
  std::vector<bool> served(m);
  while (true) {
    double total = 0.0;
    std::fill(served.begin(), served.end(), false);
    for (std::size_t g = 0; g < groups; ++g) {
      total += cost[g][phi[g]];
      served[phi[g]] = true;
    }
    for (std::size_t p = 0; p < m; ++p)
      if (!served[p]) total += idle[p];
    if (total < best.total) {
      best.total = total;
      best.project_of_group = phi;
    }
    // Odometer increment in lexicographic order.
    std::size_t g = groups;
    while (g > 0) {
      --g;
      if (++phi[g] < m) break;
      phi[g] = 0;
      if (g == 0) return best;
    }
    if (groups == 0) return best;
  }
}

SubGroupConfiguration assemble(const Evaluated& e, const std::vector<const Candidate*>& agents) {
  SubGroupConfiguration out;
  for (const auto& g : e.groups) {
    out.partition.push_back(g.size());
    std::vector<AgentId> ids;
    for (std::size_t a : g) {
      out.assignment[agents[a]->id] = out.groups.size();
      ids.push_back(agents[a]->id);
    }
    out.groups.push_back(std::move(ids));
  }
  std::sort(out.partition.begin(), out.partition.end(), std::greater<>());
  out.project_of_group = e.project_of_group;
  out.total_free_energy = e.total;
  return out;
}

std::vector<Candidate> gather(const std::vector<const Candidate*>& agents, std::span<const std::size_t> members) {
  std::vector<Candidate> out;
  out.reserve(members.size());
  for (std::size_t a : members) out.push_back(*agents[a]);
  return out;
}

SubGroupConfiguration exhaustive_search(std::span<const SkillProfile> projects,
                                        const std::vector<const Candidate*>& agents, const SearchOptions& options) {
  std::vector<Candidate> ordered;
  for (const auto* a : agents) ordered.push_back(*a);
  const auto table = options.parallel ? search_kernels::build_cost_table_parallel(projects, ordered, options)
                                      : search_kernels::build_cost_table_serial(projects, ordered, options);
  const auto configs = search_kernels::enumerate_configurations(agents.size(), options.max_group_size);
  if (configs.empty()) throw Error(Errc::invalid_argument, "no partition fits the group size limit");
  const auto scored = options.parallel ? search_kernels::score_configurations_parallel(table, configs)
                                       : search_kernels::score_configurations_serial(table, configs);

  std::vector<Evaluated> all(configs.size());
  for (std::size_t i = 0; i < configs.size(); ++i) {
    for (auto mask : configs[i]) {
      std::vector<std::size_t> members;
      for (std::size_t a = 0; a < agents.size(); ++a)
        if (mask & (search_kernels::GroupMask{1} << a)) members.push_back(a);
      all[i].groups.push_back(std::move(members));
    }
    all[i].project_of_group = scored[i].project_of_group;
    all[i].total = scored[i].total;
  }
  return assemble(all[select_best(all, agents.size())], agents);
}

SubGroupConfiguration greedy_search(std::span<const SkillProfile> projects,
                                    const std::vector<const Candidate*>& agents, const SearchOptions& options) {
  const std::size_t n = agents.size();
  // Deal order: descending best fit over the projects, ties by id.
  std::vector<std::pair<double, std::size_t>> order;
  for (std::size_t a = 0; a < n; ++a) {
    double fit = 0.0;
    for (const auto& p : projects) fit = std::max(fit, cooperation_fit(p, agents[a]->profile).value);
    order.emplace_back(fit, a);
  }
  std::stable_sort(order.begin(), order.end(), [](const auto& x, const auto& y) { return x.first > y.first; });

  std::vector<double> idle(projects.size(), idle_free_energy(options));
  std::map<std::vector<std::size_t>, std::vector<double>> memo;
  std::vector<Evaluated> all;
  for (const auto& shape : enumerate_partitions(n, 2)) {
    if (!admissible(shape, options.max_group_size)) continue;
    std::vector<std::vector<std::size_t>> groups(shape.size());
    std::size_t slot = 0;
    for (const auto& entry : order) {
      while (groups[slot].size() == shape[slot]) slot = (slot + 1) % shape.size();
      groups[slot].push_back(entry.second);
      slot = (slot + 1) % shape.size();
    }
    for (auto& g : groups) std::sort(g.begin(), g.end());
    std::sort(groups.begin(), groups.end());

    std::vector<std::vector<double>> cost;
    for (const auto& g : groups) {
      auto it = memo.find(g);
      if (it == memo.end()) {
        const auto members = gather(agents, g);
        std::vector<double> per_project;
        for (const auto& p : projects) per_project.push_back(group_free_energy(p, members, options));
        it = memo.emplace(g, std::move(per_project)).first;
      }
      cost.push_back(it->second);
    }
    auto mapped = best_mapping(cost, idle);
    all.push_back(Evaluated{std::move(groups), std::move(mapped.project_of_group), mapped.total});
  }
  if (all.empty()) throw Error(Errc::invalid_argument, "no partition fits the group size limit");
  return assemble(all[select_best(all, n)], agents);
}

}  // namespace

SubGroupConfiguration stable_subgroup_search(const SkillProfile& project, std::span<const Candidate> agents,
                                             const SearchOptions& options) {
  return stable_subgroup_search(std::span<const SkillProfile>(&project, 1), agents, options);
}

SubGroupConfiguration stable_subgroup_search(std::span<const SkillProfile> projects, std::span<const Candidate> agents,
                                             const SearchOptions& options) {
  validate_inputs(projects, agents, options);
  const auto sorted = sorted_agents(agents);
  if (options.mode == SearchMode::greedy) return greedy_search(projects, sorted, options);
  const std::size_t cap = std::min(options.exhaustive_cap, kMaskAgentLimit);
  if (sorted.size() > cap)
    throw Error(Errc::search_too_large, std::to_string(sorted.size()) + " agents exceed the exhaustive cap of " +
                                            std::to_string(cap) + "; use greedy mode");
  return exhaustive_search(projects, sorted, options);
}

namespace search_kernels {

namespace {

template <bool Parallel>
CostTable build_cost_table(std::span<const SkillProfile> projects, std::span<const Candidate> agents,
                           const SearchOptions& options) {
  const std::size_t n = agents.size();
  if (n > kMaskAgentLimit) throw Error(Errc::search_too_large, "cost table limited to 16 agents");
  CostTable table;
  table.agent_count = n;
  table.project_count = projects.size();
  table.idle_cost.assign(projects.size(), idle_free_energy(options));
  const std::size_t masks = std::size_t{1} << n;
  table.group_cost.assign(masks * projects.size(), std::numeric_limits<double>::quiet_NaN());

  std::atomic<bool> failed{false};
  auto fill = [&](std::size_t mask) {
    if (std::popcount(mask) < 2) return;
    std::vector<Candidate> members;
    for (std::size_t a = 0; a < n; ++a)
      if (mask & (std::size_t{1} << a)) members.push_back(agents[a]);
    for (std::size_t p = 0; p < projects.size(); ++p)
      table.group_cost[mask * projects.size() + p] = group_free_energy(projects[p], members, options);
  };

  const auto count = static_cast<std::int64_t>(masks);
  if constexpr (Parallel) {
#pragma omp parallel for schedule(dynamic, 16)
    for (std::int64_t mask = 0; mask < count; ++mask) {
      try {
        fill(static_cast<std::size_t>(mask));
      } catch (...) {
        failed = true;
      }
    }
  } else {
    for (std::int64_t mask = 0; mask < count; ++mask) fill(static_cast<std::size_t>(mask));
  }
  if (failed) throw Error(Errc::invalid_argument, "cost table evaluation failed");
  return table;
}

template <bool Parallel>
std::vector<ScoredConfiguration> score_all(const CostTable& table, std::span<const std::vector<GroupMask>> configs) {
  std::vector<ScoredConfiguration> out(configs.size());
  const auto count = static_cast<std::int64_t>(configs.size());
  if constexpr (Parallel) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < count; ++i) out[i] = score_configuration(table, configs[i]);
  } else {
    for (std::int64_t i = 0; i < count; ++i) out[i] = score_configuration(table, configs[i]);
  }
  return out;
}

}  // namespace

CostTable build_cost_table_serial(std::span<const SkillProfile> projects, std::span<const Candidate> agents,
                                  const SearchOptions& options) {
  return build_cost_table<false>(projects, agents, options);
}

CostTable build_cost_table_parallel(std::span<const SkillProfile> projects, std::span<const Candidate> agents,
                                    const SearchOptions& options) {
  return build_cost_table<true>(projects, agents, options);
}

std::vector<std::vector<GroupMask>> enumerate_configurations(std::size_t agent_count, std::size_t max_group_size) {
  std::vector<std::vector<GroupMask>> configs;
  for (const auto& shape : enumerate_partitions(agent_count, 2)) {
    if (!admissible(shape, max_group_size)) continue;
    for_each_set_partition(shape, [&](const std::vector<std::vector<std::size_t>>& blocks) {
      std::vector<GroupMask> masks;
      for (const auto& b : blocks) {
        GroupMask m = 0;
        for (std::size_t a : b) m |= GroupMask{1} << a;
        masks.push_back(m);
      }
      configs.push_back(std::move(masks));
    });
  }
  return configs;
}

ScoredConfiguration score_configuration(const CostTable& table, std::span<const GroupMask> groups) {
  std::vector<std::vector<double>> cost(groups.size(), std::vector<double>(table.project_count));
  for (std::size_t g = 0; g < groups.size(); ++g)
    for (std::size_t p = 0; p < table.project_count; ++p) cost[g][p] = table.cost(groups[g], p);
  return best_mapping(cost, table.idle_cost);
}

std::vector<ScoredConfiguration> score_configurations_serial(const CostTable& table,
                                                             std::span<const std::vector<GroupMask>> configs) {
  return score_all<false>(table, configs);
}

std::vector<ScoredConfiguration> score_configurations_parallel(const CostTable& table,
                                                               std::span<const std::vector<GroupMask>> configs) {
  return score_all<true>(table, configs);
}

}  // namespace search_kernels

}  // namespace kmarket
