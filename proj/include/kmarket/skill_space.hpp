#pragma once
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace kmarket {

// Ordered set of discrete skill axes. Shared by every profile drawn on it.
class SkillTaxonomy {
public:
  explicit SkillTaxonomy(std::vector<std::string> skills);

  std::size_t size() const noexcept { return skills_.size(); }
  const std::vector<std::string>& skills() const noexcept { return skills_; }
  std::size_t index_of(const std::string& skill) const;

  bool operator==(const SkillTaxonomy& other) const = default;

private:
  std::vector<std::string> skills_;
};

using TaxonomyPtr = std::shared_ptr<const SkillTaxonomy>;

// Non-negative radii, one per taxonomy axis, in taxonomy order.
class SkillProfile {
public:
  SkillProfile(TaxonomyPtr taxonomy, std::vector<double> radii);

  const SkillTaxonomy& taxonomy() const noexcept { return *taxonomy_; }
  const TaxonomyPtr& taxonomy_ptr() const noexcept { return taxonomy_; }
  std::span<const double> radii() const noexcept { return radii_; }
  double operator[](std::size_t k) const { return radii_[k]; }

  bool same_taxonomy(const SkillProfile& other) const noexcept;
  SkillProfile scaled(double factor) const;

  bool operator==(const SkillProfile& other) const;

private:
  TaxonomyPtr taxonomy_;
  std::vector<double> radii_;
};

// Cooperation fit index, always in [0, 1].
struct FitIndex {
  double value{0.0};
};

TaxonomyPtr make_taxonomy(std::vector<std::string> skills);

// Area of the radar polygon with vertex k at radius r_k on axis angle 2*pi*k/K:
//   A = 1/2 * sin(2*pi/K) * sum_k r_k * r_{(k+1) mod K}
double polygon_area(const SkillProfile& profile);

// Componentwise-minimum polygon; stands in for the overlap region.
SkillProfile overlap_profile(const SkillProfile& a, const SkillProfile& b);

// Share of the project's polygon covered by the member's polygon.
FitIndex cooperation_fit(const SkillProfile& project, const SkillProfile& member);

// Componentwise maximum: a team covers a skill if any member does.
SkillProfile team_profile(std::span<const SkillProfile> members);

// Sum of the individual fit indices; a value >= 1 means the pool could staff the project.
double group_strength(const SkillProfile& project, std::span<const SkillProfile> members);

}  // namespace kmarket
