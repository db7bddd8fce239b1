#include "kmarket/skill_space.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "kmarket/error.hpp"

namespace kmarket {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::invalid_taxonomy: return "invalid-taxonomy";
    case Errc::invalid_profile: return "invalid-profile";
    case Errc::taxonomy_mismatch: return "taxonomy-mismatch";
    case Errc::degenerate_project: return "degenerate-project";
    case Errc::empty_team: return "empty-team";
    case Errc::invalid_model: return "invalid-model";
    case Errc::unknown_aim: return "unknown-aim";
    case Errc::infinite_free_energy: return "infinite-free-energy";
    case Errc::impossible_aim: return "impossible-aim";
    case Errc::convergence_failure: return "convergence-failure";
    case Errc::no_candidates: return "no-candidates";
    case Errc::infeasible_partition: return "infeasible-partition";
    case Errc::search_too_large: return "search-too-large";
    case Errc::signature_error: return "signature-error";
    case Errc::replay_error: return "replay-error";
    case Errc::empty_block: return "empty-block";
    case Errc::unknown_actor: return "unknown-actor";
    case Errc::malformed_record: return "malformed-record";
    case Errc::missing_section: return "missing-section";
    case Errc::unsigned_cv: return "unsigned-cv";
    case Errc::milestone_sum_mismatch: return "milestone-sum-mismatch";
    case Errc::empty_electorate: return "empty-electorate";
    case Errc::missing_reasons: return "missing-reasons";
    case Errc::duplicate_ballot: return "duplicate-ballot";
    case Errc::unaddressed_feedback: return "unaddressed-feedback";
    case Errc::insufficient_deposit: return "insufficient-deposit";
    case Errc::state_error: return "state-error";
    case Errc::ordering_error: return "ordering-error";
    case Errc::liquidity_error: return "liquidity-error";
    case Errc::validation_error: return "validation-error";
    case Errc::lexicon_violation: return "lexicon-violation";
    case Errc::empty_payload: return "empty-payload";
    case Errc::unsigned_contract: return "unsigned-contract";
    case Errc::price_out_of_bounds: return "price-out-of-bounds";
    case Errc::payment_error: return "payment-error";
    case Errc::parse_error: return "parse-error";
    case Errc::dangling_reference: return "dangling-reference";
    case Errc::undefined_gini: return "undefined-gini";
    case Errc::io_error: return "io-error";
  }
  return "unknown";
}

SkillTaxonomy::SkillTaxonomy(std::vector<std::string> skills) : skills_(std::move(skills)) {
  if (skills_.size() < 3)
    throw Error(Errc::invalid_taxonomy, "a taxonomy needs at least 3 skills, got " + std::to_string(skills_.size()));
  std::set<std::string> seen;
  for (const auto& s : skills_) {
    if (s.empty()) throw Error(Errc::invalid_taxonomy, "empty skill label");
    if (!seen.insert(s).second) throw Error(Errc::invalid_taxonomy, "duplicate skill label '" + s + "'");
  }
}

std::size_t SkillTaxonomy::index_of(const std::string& skill) const {
  auto it = std::find(skills_.begin(), skills_.end(), skill);
  if (it == skills_.end()) throw Error(Errc::invalid_argument, "unknown skill '" + skill + "'");
  return static_cast<std::size_t>(it - skills_.begin());
}

TaxonomyPtr make_taxonomy(std::vector<std::string> skills) {
  return std::make_shared<const SkillTaxonomy>(std::move(skills));
}

SkillProfile::SkillProfile(TaxonomyPtr taxonomy, std::vector<double> radii)
    : taxonomy_(std::move(taxonomy)), radii_(std::move(radii)) {
  if (!taxonomy_) throw Error(Errc::invalid_taxonomy, "profile without taxonomy");
  if (radii_.size() != taxonomy_->size())
    throw Error(Errc::invalid_profile, "expected " + std::to_string(taxonomy_->size()) + " radii, got " +
                                           std::to_string(radii_.size()));
  for (double r : radii_)
    if (!std::isfinite(r) || r < 0.0) throw Error(Errc::invalid_profile, "radii must be finite and non-negative");
}

bool SkillProfile::same_taxonomy(const SkillProfile& other) const noexcept {
  return taxonomy_ == other.taxonomy_ || *taxonomy_ == *other.taxonomy_;
}

SkillProfile SkillProfile::scaled(double factor) const {
  std::vector<double> r(radii_);
  for (double& x : r) x *= factor;
  return SkillProfile(taxonomy_, std::move(r));
}

bool SkillProfile::operator==(const SkillProfile& other) const {
  return same_taxonomy(other) && radii_ == other.radii_;
}

namespace {

void require_same(const SkillProfile& a, const SkillProfile& b) {
  if (!a.same_taxonomy(b)) throw Error(Errc::taxonomy_mismatch, "profiles are drawn on different taxonomies");
}

}  // namespace

double polygon_area(const SkillProfile& profile) {
  const auto r = profile.radii();
  const std::size_t k = r.size();
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) sum += r[i] * r[(i + 1) % k];
  return 0.5 * std::sin(2.0 * std::numbers::pi / static_cast<double>(k)) * sum;
}

SkillProfile overlap_profile(const SkillProfile& a, const SkillProfile& b) {
  require_same(a, b);
  std::vector<double> r(a.radii().size());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = std::min(a[i], b[i]);
  return SkillProfile(a.taxonomy_ptr(), std::move(r));
}

FitIndex cooperation_fit(const SkillProfile& project, const SkillProfile& member) {
  require_same(project, member);
  const double project_area = polygon_area(project);
  if (!(project_area > 0.0)) throw Error(Errc::degenerate_project, "project polygon has zero area");
  const double ratio = polygon_area(overlap_profile(project, member)) / project_area;
  return FitIndex{std::clamp(ratio, 0.0, 1.0)};
}

SkillProfile team_profile(std::span<const SkillProfile> members) {
  if (members.empty()) throw Error(Errc::empty_team, "team has no members");
  std::vector<double> r(members.front().radii().begin(), members.front().radii().end());
  for (const auto& m : members.subspan(1)) {
    require_same(members.front(), m);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = std::max(r[i], m[i]);
  }
  return SkillProfile(members.front().taxonomy_ptr(), std::move(r));
}

double group_strength(const SkillProfile& project, std::span<const SkillProfile> members) {
  if (!(polygon_area(project) > 0.0)) throw Error(Errc::degenerate_project, "project polygon has zero area");
  double strength = 0.0;
  for (const auto& m : members) strength += cooperation_fit(project, m).value;
  return strength;
}

}  // namespace kmarket
