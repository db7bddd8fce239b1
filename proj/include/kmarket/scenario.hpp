#pragma once
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "kmarket/governance.hpp"
#include "kmarket/marketplace.hpp"
#include "kmarket/protocol.hpp"
#include "kmarket/skill_space.hpp"

namespace kmarket {

inline constexpr std::string_view kScenarioSchema = "kmarket-scenario/1";

struct TaxonomySpec {
  std::string id;
  TaxonomyPtr taxonomy;
};

// Synthetic investor behaviours.
enum class BeliefPolicy { posterior_follower, noisy, adversarial };

std::string_view to_string(BeliefPolicy policy) noexcept;

struct ResearcherSpec {
  AgentId id;
  std::string taxonomy_id;
  SkillProfile profile;
  Amount reservation_price{0.0};
  Amount balance{0.0};
};

struct InvestorSpec {
  AgentId id;
  Amount capital{0.0};
  Amount stake{0.0};
  BeliefPolicy policy{BeliefPolicy::posterior_follower};
  double noise{0.0};                     // std-dev of the log-belief perturbation (noisy)
  double accept_threshold{0.5};          // minimum success probability to back a proposal
  std::uint32_t revision_demands{0};     // versions rejected before the investor can approve
  std::optional<Tick> abandon_after;     // ticks after funding before proposing abandonment
};

struct MilestoneSpec {
  std::string description;
  Amount amount{0.0};
  Tick due{1};  // ticks after funding
};

struct ProjectSpec {
  std::string id;
  std::string title;
  std::string taxonomy_id;
  SkillProfile requirement;
  Amount promised{0.0};
  std::vector<MilestoneSpec> milestones;
  std::string introduction;
  std::string literature_review;
  std::string methodology;
  std::vector<CostLine> budget;
  std::optional<FecCostSheet> costing;
  Tick open_at{1};
};

struct ListingSpec {
  std::string id;
  AgentId owner;
  std::vector<std::string> tags;
  std::string description;
  std::string payload;
  Amount ask_price{0.0};
  Tick publish_at{1};
  bool tampered{false};  // seller delivers a corrupted ciphertext
};

struct DesideratumSpec {
  Desideratum desideratum;
  Tick post_at{1};
};

struct ScenarioConfig {
  std::string name;
  std::uint64_t seed{0};
  Tick horizon{1};
  std::vector<TaxonomySpec> taxonomies;
  ProtocolParams params;  // params.lexicon holds the scenario lexicon
  std::vector<ResearcherSpec> researchers;
  std::vector<InvestorSpec> investors;
  std::vector<ProjectSpec> projects;
  std::vector<ListingSpec> listings;
  std::vector<DesideratumSpec> desiderata;

  const TaxonomySpec* find_taxonomy(const std::string& id) const;
  const ProjectSpec* find_project(const std::string& id) const;
};

struct ScenarioIssue {
  Errc code{Errc::validation_error};
  std::string where;    // e.g. "agents[3].profile.radii" or "line 12"
  std::string message;
};

// Carries every problem found, not just the first.
class ScenarioError : public Error {
public:
  explicit ScenarioError(std::vector<ScenarioIssue> issues);
  const std::vector<ScenarioIssue>& issues() const noexcept { return issues_; }

private:
  std::vector<ScenarioIssue> issues_;
};

ScenarioConfig parse_scenario(std::string_view text);
ScenarioConfig load_scenario(const std::filesystem::path& path);

}  // namespace kmarket
