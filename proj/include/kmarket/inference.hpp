#pragma once
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kmarket/error.hpp"
#include "kmarket/skill_space.hpp"
#include "kmarket/types.hpp"

namespace kmarket {

inline constexpr std::string_view kAimAchieved = "achieved";
inline constexpr std::string_view kAimNotAchieved = "not-achieved";

struct ModelState {
  std::string label;
  std::vector<AgentId> members;  // empty for states that are not team compositions

  bool operator==(const ModelState&) const = default;
};

// Finite joint distribution p(s, o), stored row-major (state-major).
class GenerativeModel {
public:
  GenerativeModel(std::vector<ModelState> states, std::vector<std::string> aims, std::vector<double> joint);

  const std::vector<ModelState>& states() const noexcept { return states_; }
  const std::vector<std::string>& aims() const noexcept { return aims_; }
  std::size_t state_count() const noexcept { return states_.size(); }
  std::size_t aim_count() const noexcept { return aims_.size(); }

  std::size_t aim_index(std::string_view aim) const;
  double joint(std::size_t state, std::size_t aim) const { return joint_[state * aims_.size() + aim]; }
  std::vector<double> column(std::string_view aim) const;

private:
  std::vector<ModelState> states_;
  std::vector<std::string> aims_;
  std::vector<double> joint_;
};

// q(s), aligned by index with a model's state list.
class VariationalDistribution {
public:
  explicit VariationalDistribution(std::vector<double> q);

  static VariationalDistribution uniform(std::size_t n);

  std::size_t size() const noexcept { return q_.size(); }
  std::span<const double> probabilities() const noexcept { return q_; }
  double operator[](std::size_t i) const { return q_[i]; }

private:
  std::vector<double> q_;
};

double total_variation(const VariationalDistribution& a, const VariationalDistribution& b);

struct FreeEnergyReport {
  double free_energy{0.0};       // nats
  double neg_log_evidence{0.0};  // -ln p(o), nats
  double kl_gap{0.0};            // KL(q || p(.|o)), nats
};

// p(o) = sum_s p(s, o)
double marginal_evidence(const GenerativeModel& model, std::string_view aim);

// F = sum_s q(s) ln(q(s) / p(s, o)) with 0 ln(0/x) = 0. Throws infinite_free_energy
// when q puts mass on a state the joint rules out.
FreeEnergyReport free_energy(const VariationalDistribution& q, const GenerativeModel& model, std::string_view aim);

VariationalDistribution exact_posterior(const GenerativeModel& model, std::string_view aim);

struct MinimizeOptions {
  std::size_t max_iters{1000};
  double tol{1e-8};
  // Geometric step toward the posterior: q <- q^(1-step) * p(s,o)^step, renormalized.
  // step = 1 jumps straight to the posterior.
  double step{0.5};
  std::optional<VariationalDistribution> initial;
};

struct MinimizeResult {
  VariationalDistribution q;
  FreeEnergyReport report;
  std::size_t iterations{0};
  std::vector<double> trace;  // F of the initial iterate followed by F after each update
};

class ConvergenceFailure : public Error {
public:
  ConvergenceFailure(VariationalDistribution last, double gap);

  const VariationalDistribution& last_iterate() const noexcept { return last_; }
  double gap() const noexcept { return gap_; }

private:
  VariationalDistribution last_;
  double gap_;
};

MinimizeResult minimize_free_energy(const GenerativeModel& model, std::string_view aim, std::size_t max_iters,
                                    double tol);
MinimizeResult minimize_free_energy(const GenerativeModel& model, std::string_view aim,
                                    const MinimizeOptions& options);

struct Candidate {
  AgentId id;
  SkillProfile profile;
};

struct TeamSizeRange {
  std::size_t min{2};
  std::size_t max{2};
};

// Uniform prior over admissible teams; p(achieved | s) is the team's cooperation fit
// clamped to [floor, 1 - floor]. States are listed in lexicographic order of their
// sorted member ids.
GenerativeModel build_team_model(const SkillProfile& project, std::span<const Candidate> candidates,
                                 TeamSizeRange sizes, double floor);

// Probability of `aim` for a single team whose cooperation fit is `fit`.
double clamped_aim_probability(double fit, std::string_view aim, double floor);

}  // namespace kmarket
