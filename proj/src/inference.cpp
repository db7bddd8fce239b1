#include "kmarket/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace kmarket {

namespace {

constexpr double kSumTolerance = 1e-9;
constexpr std::size_t kMaxModelStates = 1'000'000;

void check_distribution(std::span<const double> values, const char* what) {
  double sum = 0.0;
  for (double v : values) {
    if (!std::isfinite(v) || v < 0.0) throw Error(Errc::invalid_model, std::string(what) + " has a negative or non-finite entry");
    sum += v;
  }
  if (std::abs(sum - 1.0) > kSumTolerance)
    throw Error(Errc::invalid_model, std::string(what) + " sums to " + std::to_string(sum) + ", not 1");
}

}  // namespace

GenerativeModel::GenerativeModel(std::vector<ModelState> states, std::vector<std::string> aims, std::vector<double> joint)
    : states_(std::move(states)), aims_(std::move(aims)), joint_(std::move(joint)) {
  if (states_.empty()) throw Error(Errc::invalid_model, "model has no states");
  if (aims_.empty()) throw Error(Errc::invalid_model, "model has no aims");
  if (std::set<std::string>(aims_.begin(), aims_.end()).size() != aims_.size())
    throw Error(Errc::invalid_model, "duplicate aim identifiers");
  if (joint_.size() != states_.size() * aims_.size())
    throw Error(Errc::invalid_model, "joint table size does not match states x aims");
  check_distribution(joint_, "joint");
}

std::size_t GenerativeModel::aim_index(std::string_view aim) const {
  auto it = std::find(aims_.begin(), aims_.end(), aim);
  if (it == aims_.end()) throw Error(Errc::unknown_aim, "aim '" + std::string(aim) + "' is not in the model");
  return static_cast<std::size_t>(it - aims_.begin());
}

std::vector<double> GenerativeModel::column(std::string_view aim) const {
  const std::size_t o = aim_index(aim);
  std::vector<double> col(states_.size());
  for (std::size_t s = 0; s < states_.size(); ++s) col[s] = joint(s, o);
  return col;
}

VariationalDistribution::VariationalDistribution(std::vector<double> q) : q_(std::move(q)) {
  if (q_.empty()) throw Error(Errc::invalid_model, "empty variational distribution");
  check_distribution(q_, "q");
}

VariationalDistribution VariationalDistribution::uniform(std::size_t n) {
  return VariationalDistribution(std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

double total_variation(const VariationalDistribution& a, const VariationalDistribution& b) {
  if (a.size() != b.size()) throw Error(Errc::invalid_argument, "distributions have different supports");
  double tv = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) tv += std::abs(a[i] - b[i]);
  return 0.5 * tv;
}

double marginal_evidence(const GenerativeModel& model, std::string_view aim) {
  const std::size_t o = model.aim_index(aim);
  double evidence = 0.0;
  for (std::size_t s = 0; s < model.state_count(); ++s) evidence += model.joint(s, o);
  return evidence;
}

FreeEnergyReport free_energy(const VariationalDistribution& q, const GenerativeModel& model, std::string_view aim) {
  if (q.size() != model.state_count())
    throw Error(Errc::invalid_argument, "q is not aligned with the model's states");
  const std::size_t o = model.aim_index(aim);
  const double evidence = marginal_evidence(model, aim);

  FreeEnergyReport report;
  for (std::size_t s = 0; s < q.size(); ++s) {
    if (q[s] == 0.0) continue;
    const double p = model.joint(s, o);
    if (p == 0.0)
      throw Error(Errc::infinite_free_energy, "q puts mass on state " + std::to_string(s) + " where p(s,o) = 0");
    report.free_energy += q[s] * std::log(q[s] / p);
    report.kl_gap += q[s] * std::log(q[s] * evidence / p);
  }
  report.neg_log_evidence = -std::log(evidence);
  return report;
}

VariationalDistribution exact_posterior(const GenerativeModel& model, std::string_view aim) {
  const double evidence = marginal_evidence(model, aim);
  if (!(evidence > 0.0)) throw Error(Errc::impossible_aim, "aim '" + std::string(aim) + "' has zero evidence");
  std::vector<double> col = model.column(aim);
  for (double& p : col) p /= evidence;
  return VariationalDistribution(std::move(col));
}

ConvergenceFailure::ConvergenceFailure(VariationalDistribution last, double gap)
    : Error(Errc::convergence_failure, "free energy gap " + std::to_string(gap) + " above tolerance"),
      last_(std::move(last)),
      gap_(gap) {}

MinimizeResult minimize_free_energy(const GenerativeModel& model, std::string_view aim, std::size_t max_iters,
                                    double tol) {
  MinimizeOptions options;
  options.max_iters = max_iters;
  options.tol = tol;
  return minimize_free_energy(model, aim, options);
}

MinimizeResult minimize_free_energy(const GenerativeModel& model, std::string_view aim,
                                    const MinimizeOptions& options) {
  if (options.max_iters < 1) throw Error(Errc::invalid_argument, "max_iters must be at least 1");
  if (!(options.tol > 0.0)) throw Error(Errc::invalid_argument, "tol must be positive");
  if (!(options.step > 0.0 && options.step <= 1.0)) throw Error(Errc::invalid_argument, "step must be in (0, 1]");

  const double evidence = marginal_evidence(model, aim);
  if (!(evidence > 0.0)) throw Error(Errc::impossible_aim, "aim '" + std::string(aim) + "' has zero evidence");
  const std::vector<double> joint = model.column(aim);
  const std::size_t n = joint.size();

  std::vector<double> q(n, 0.0);
  if (options.initial) {
    if (options.initial->size() != n) throw Error(Errc::invalid_argument, "initial q is not aligned with the model");
    q.assign(options.initial->probabilities().begin(), options.initial->probabilities().end());
  } else {
    const auto support = static_cast<double>(std::count_if(joint.begin(), joint.end(), [](double p) { return p > 0.0; }));
    for (std::size_t s = 0; s < n; ++s) q[s] = joint[s] > 0.0 ? 1.0 / support : 0.0;
  }

  MinimizeResult result{VariationalDistribution(q), {}, 0, {}};
  result.report = free_energy(result.q, model, aim);
  result.trace.push_back(result.report.free_energy);

  std::vector<double> logq(n);
  for (std::size_t it = 1; it <= options.max_iters; ++it) {
    // log q_new = (1 - step) log q + step log p(s,o), then normalize in log space.
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < n; ++s) {
      if (q[s] == 0.0) {
        logq[s] = -std::numeric_limits<double>::infinity();
        continue;
      }
      logq[s] = (1.0 - options.step) * std::log(q[s]) + options.step * std::log(joint[s]);
      hi = std::max(hi, logq[s]);
    }
    double z = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      if (!std::isinf(logq[s])) z += std::exp(logq[s] - hi);
    }
    // A gap below tol only bounds the distance to the posterior by sqrt(tol/2),
    // so the iterate itself must also have stopped moving.
    double moved = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      if (std::isinf(logq[s])) continue;
      const double next = logq[s] - hi - std::log(z);
      moved = std::max(moved, std::abs(next - std::log(q[s])));
      q[s] = std::exp(next);
    }

    result.q = VariationalDistribution(q);
    result.report = free_energy(result.q, model, aim);
    result.trace.push_back(result.report.free_energy);
    result.iterations = it;
    if (result.report.free_energy - result.report.neg_log_evidence <= options.tol && moved <= options.tol)
      return result;
  }
  throw ConvergenceFailure(result.q, result.report.free_energy - result.report.neg_log_evidence);
}

double clamped_aim_probability(double fit, std::string_view aim, double floor) {
  const double achieved = std::clamp(fit, floor, 1.0 - floor);
  if (aim == kAimAchieved) return achieved;
  if (aim == kAimNotAchieved) return 1.0 - achieved;
  throw Error(Errc::unknown_aim, "team models only know '" + std::string(kAimAchieved) + "' and '" +
                                     std::string(kAimNotAchieved) + "', got '" + std::string(aim) + "'");
}

GenerativeModel build_team_model(const SkillProfile& project, std::span<const Candidate> candidates,
                                 TeamSizeRange sizes, double floor) {
  if (!(floor > 0.0 && floor < 0.5)) throw Error(Errc::invalid_argument, "floor must lie in (0, 0.5)");
  if (sizes.min < 1 || sizes.min > sizes.max) throw Error(Errc::invalid_argument, "team size range is empty");

  std::vector<const Candidate*> pool;
  for (const auto& c : candidates) pool.push_back(&c);
  std::sort(pool.begin(), pool.end(), [](const Candidate* a, const Candidate* b) { return a->id < b->id; });
  for (std::size_t i = 1; i < pool.size(); ++i)
    if (pool[i - 1]->id == pool[i]->id) throw Error(Errc::invalid_argument, "duplicate candidate id " + pool[i]->id);

  // Pre-order DFS over index sets emits subsets in lexicographic order of member ids.
  std::vector<std::vector<std::size_t>> subsets;
  std::vector<std::size_t> current;
  auto visit = [&](auto&& self, std::size_t start) -> void {
    for (std::size_t i = start; i < pool.size(); ++i) {
      current.push_back(i);
      if (current.size() >= sizes.min && current.size() <= sizes.max) {
        subsets.push_back(current);
        if (subsets.size() > kMaxModelStates) throw Error(Errc::invalid_argument, "team model exceeds state limit");
      }
      if (current.size() < sizes.max) self(self, i + 1);
      current.pop_back();
    }
  };
  visit(visit, 0);
  if (subsets.empty()) throw Error(Errc::no_candidates, "no admissible team in the requested size range");

  const double prior = 1.0 / static_cast<double>(subsets.size());
  std::vector<ModelState> states;
  std::vector<double> joint;
  states.reserve(subsets.size());
  joint.reserve(subsets.size() * 2);
  std::vector<SkillProfile> profiles;
  for (const auto& subset : subsets) {
    ModelState state;
    profiles.clear();
    for (std::size_t i : subset) {
      state.members.push_back(pool[i]->id);
      profiles.push_back(pool[i]->profile);
      state.label += (state.label.empty() ? "" : "+") + pool[i]->id;
    }
    const double achieved = clamped_aim_probability(cooperation_fit(project, team_profile(profiles)).value,
                                                    kAimAchieved, floor);
    joint.push_back(prior * achieved);
    joint.push_back(prior * (1.0 - achieved));
    states.push_back(std::move(state));
  }
  return GenerativeModel(std::move(states), {std::string(kAimAchieved), std::string(kAimNotAchieved)}, std::move(joint));
}

}  // namespace kmarket
