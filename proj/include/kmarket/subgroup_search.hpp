#pragma once
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "kmarket/inference.hpp"
#include "kmarket/partitions.hpp"
#include "kmarket/skill_space.hpp"

namespace kmarket {

enum class SearchMode { exhaustive, greedy };

struct SearchOptions {
  SearchMode mode{SearchMode::exhaustive};
  std::string aim{kAimAchieved};
  double floor{0.01};
  std::size_t exhaustive_cap{10};
  std::size_t max_group_size{0};  // 0 = no limit
  bool parallel{true};
};

// Configurations whose totals differ by no more than this are treated as tied.
inline constexpr double kFreeEnergyTieTolerance = 1e-12;

struct SubGroupConfiguration {
  IntegerPartition partition;                  // sub-group sizes, non-increasing
  std::vector<std::vector<AgentId>> groups;    // ordered by their first member in id order
  std::map<AgentId, std::size_t> assignment;   // agent -> index into groups
  std::vector<std::size_t> project_of_group;   // index into the project list
  double total_free_energy{0.0};               // nats
};

// Single project: every sub-group is scored against it.
SubGroupConfiguration stable_subgroup_search(const SkillProfile& project, std::span<const Candidate> agents,
                                             const SearchOptions& options = {});

// Several (sub-)projects: each sub-group serves one project, and a project left without
// a sub-group costs as much as a team with zero fit.
SubGroupConfiguration stable_subgroup_search(std::span<const SkillProfile> projects, std::span<const Candidate> agents,
                                             const SearchOptions& options = {});

// Data-parallel pieces of the exhaustive search. The *_serial variants are the reference
// the OpenMP versions are tested and benchmarked against; both produce identical bits.
namespace search_kernels {

using GroupMask = std::uint32_t;

struct CostTable {
  std::size_t agent_count{0};
  std::size_t project_count{0};
  std::vector<double> group_cost;  // [mask * project_count + p] = -ln p(aim) of that sub-group on project p
  std::vector<double> idle_cost;   // [p] cost of leaving project p unstaffed
  double cost(GroupMask mask, std::size_t project) const { return group_cost[mask * project_count + project]; }
};

struct ScoredConfiguration {
  double total{0.0};
  std::vector<std::size_t> project_of_group;
};

// Agents must already be in ascending id order.
CostTable build_cost_table_serial(std::span<const SkillProfile> projects, std::span<const Candidate> agents,
                                  const SearchOptions& options);
CostTable build_cost_table_parallel(std::span<const SkillProfile> projects, std::span<const Candidate> agents,
                                    const SearchOptions& options);

// Every set partition of the agents with blocks of size >= 2 (and <= max_group_size
// when non-zero), as lists of block masks.
std::vector<std::vector<GroupMask>> enumerate_configurations(std::size_t agent_count, std::size_t max_group_size = 0);

ScoredConfiguration score_configuration(const CostTable& table, std::span<const GroupMask> groups);

std::vector<ScoredConfiguration> score_configurations_serial(const CostTable& table,
                                                             std::span<const std::vector<GroupMask>> configs);
std::vector<ScoredConfiguration> score_configurations_parallel(const CostTable& table,
                                                               std::span<const std::vector<GroupMask>> configs);

}  // namespace search_kernels

}  // namespace kmarket
