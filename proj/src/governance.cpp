#include "kmarket/governance.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <limits>
#include <map>

#include "kmarket/error.hpp"

namespace kmarket {

namespace {

constexpr std::array<std::string_view, 7> kSectionNames = {"title", "introduction", "literature_review",
                                                           "methodology", "plan", "budget", "team"};

constexpr std::array<std::string_view, 9> kStateNames = {"Draft",  "Submitted", "Voting",    "Accepted", "Rejected",
                                                         "Funded", "Completed", "Forfeited", "Abandoned"};

using PS = ProposalState;
constexpr std::array<std::pair<PS, PS>, 9> kTransitions = {{
    {PS::draft, PS::submitted},
    {PS::submitted, PS::voting},
    {PS::voting, PS::accepted},
    {PS::voting, PS::rejected},
    {PS::rejected, PS::submitted},
    {PS::accepted, PS::funded},
    {PS::funded, PS::completed},
    {PS::funded, PS::forfeited},
    {PS::funded, PS::abandoned},
}};

// Relative slack for comparisons against amounts derived by multiplication.
double slack(Amount scale) { return 1e-9 * std::max(1.0, std::abs(scale)); }

bool blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

void require_state(const Proposal& p, ProposalState expected, const char* op) {
  if (p.state != expected)
    throw Error(Errc::state_error, std::string(op) + " requires a " + std::string(to_string(expected)) +
                                       " proposal, '" + p.id + "' is " + std::string(to_string(p.state)));
}

void check_template(const Proposal& p) {
  const std::array<std::pair<Section, bool>, 7> present = {{
      {Section::title, !blank(p.title)},
      {Section::introduction, !blank(p.introduction)},
      {Section::literature_review, !blank(p.literature_review)},
      {Section::methodology, !blank(p.methodology)},
      {Section::plan, !p.plan.empty()},
      {Section::budget, !p.budget.empty()},
      {Section::team, !p.team.empty()},
  }};
  for (const auto& [section, ok] : present)
    if (!ok) throw Error(Errc::missing_section, std::string(to_string(section)));

  for (const auto& line : p.budget)
    if (!(line.amount >= 0.0) || !std::isfinite(line.amount))
      throw Error(Errc::validation_error, "budget line '" + line.label + "' has an invalid amount");
  Amount milestones = 0.0;
  for (std::size_t i = 0; i < p.plan.size(); ++i) {
    if (p.plan[i].index != i) throw Error(Errc::validation_error, "milestone indices must run 0..k-1 in order");
    if (!(p.plan[i].amount >= 0.0) || !std::isfinite(p.plan[i].amount))
      throw Error(Errc::validation_error, "milestone " + std::to_string(i) + " has an invalid amount");
    milestones += p.plan[i].amount;
  }
  const Amount promised = p.promised();
  if (std::abs(milestones - promised) > slack(promised))
    throw Error(Errc::milestone_sum_mismatch,
                "milestones total " + std::to_string(milestones) + " but the budget is " + std::to_string(promised));

  for (const auto& cv : p.team) {
    if (!cv.signature || !crypto::verify(cv.public_key, cv.cv_digest, *cv.signature))
      throw Error(Errc::unsigned_cv, "CV of " + cv.member + " is not signed");
  }
}

std::size_t next_unreleased(const Proposal& p) {
  for (const auto& m : p.plan)
    if (m.state != MilestoneState::released) return m.index;
  return p.plan.size();
}

}  // namespace

std::string_view to_string(Section section) noexcept { return kSectionNames[static_cast<std::size_t>(section)]; }

std::optional<Section> section_from_string(std::string_view name) noexcept {
  for (std::size_t i = 0; i < kSectionNames.size(); ++i)
    if (kSectionNames[i] == name) return static_cast<Section>(i);
  return std::nullopt;
}

std::string_view to_string(ProposalState state) noexcept { return kStateNames[static_cast<std::size_t>(state)]; }

std::optional<ProposalState> proposal_state_from_string(std::string_view name) noexcept {
  for (std::size_t i = 0; i < kStateNames.size(); ++i)
    if (kStateNames[i] == name) return static_cast<ProposalState>(i);
  return std::nullopt;
}

std::span<const std::pair<ProposalState, ProposalState>> declared_transitions() noexcept { return kTransitions; }

bool transition_allowed(ProposalState from, ProposalState to) noexcept {
  return std::find(kTransitions.begin(), kTransitions.end(), std::pair{from, to}) != kTransitions.end();
}

std::string_view to_string(MilestoneState state) noexcept {
  switch (state) {
    case MilestoneState::pending: return "Pending";
    case MilestoneState::under_vote: return "UnderVote";
    case MilestoneState::released: return "Released";
    case MilestoneState::disputed: return "Disputed";
  }
  return "Unknown";
}

std::string_view to_string(Outcome outcome) noexcept {
  return outcome == Outcome::accepted ? "Accepted" : "Rejected";
}

std::string_view to_string(DisputeStatus status) noexcept {
  switch (status) {
    case DisputeStatus::none: return "None";
    case DisputeStatus::escalating: return "Escalating";
    case DisputeStatus::forfeit_proposed: return "ForfeitProposed";
    case DisputeStatus::forfeited: return "Forfeited";
    case DisputeStatus::resolved: return "Resolved";
  }
  return "Unknown";
}

CvEntry sign_cv(const AgentId& member, const crypto::KeyPair& keys, const crypto::Digest& cv_digest) {
  return CvEntry{member, cv_digest, keys.public_key(), keys.sign(cv_digest)};
}

Amount Proposal::promised() const {
  Amount total = 0.0;
  for (const auto& line : budget) total += line.amount;
  return total;
}

Proposal transition(Proposal proposal, ProposalState to) {
  if (!transition_allowed(proposal.state, to))
    throw Error(Errc::state_error, "transition " + std::string(to_string(proposal.state)) + " -> " +
                                       std::string(to_string(to)) + " is not in the proposal machine");
  proposal.state = to;
  return proposal;
}

Proposal validate_and_submit(Proposal proposal) {
  require_state(proposal, ProposalState::draft, "submission");
  check_template(proposal);
  return transition(std::move(proposal), ProposalState::submitted);
}

Proposal begin_voting(Proposal proposal) { return transition(std::move(proposal), ProposalState::voting); }

TallyResult tally(std::span<const Ballot> ballots, const TallyOptions& options) {
  if (ballots.empty()) throw Error(Errc::empty_electorate, "no ballots cast");
  std::set<AgentId> voters;
  TallyResult result;
  for (const auto& b : ballots) {
    if (!voters.insert(b.voter).second) throw Error(Errc::duplicate_ballot, b.voter + " already voted in this round");
    if (b.proposal_id != ballots.front().proposal_id)
      throw Error(Errc::invalid_argument, "ballots refer to different proposals");
    if (!(b.weight >= 0.0) || !std::isfinite(b.weight))
      throw Error(Errc::invalid_argument, "ballot weight must be finite and non-negative");
    const double w = options.weighting == Weighting::stake ? b.weight : 1.0;
    (b.choice == VoteChoice::yes ? result.yes_weight : result.no_weight) += w;
  }
  const double cast = result.yes_weight + result.no_weight;
  if (!(cast > 0.0)) throw Error(Errc::empty_electorate, "total cast weight is zero");

  // The 1e-12 relative slack absorbs rounding when all weights are rescaled.
  const bool quorate = !options.quorum_weight || cast >= *options.quorum_weight;
  if (quorate && result.yes_weight >= options.threshold * cast * (1.0 - 1e-12)) {
    result.outcome = Outcome::accepted;
    return result;
  }
  result.outcome = Outcome::rejected;
  if (!quorate) result.reasons.push_back({std::nullopt, "quorum not met"});
  for (const auto& b : ballots)
    if (b.choice == VoteChoice::no && b.reason && !blank(b.reason->text)) result.reasons.push_back(*b.reason);
  if (options.require_reasons && result.reasons.empty())
    throw Error(Errc::missing_reasons, "a rejection must carry the investors' reasons");
  return result;
}

Proposal apply_tally(Proposal proposal, const TallyResult& result) {
  require_state(proposal, ProposalState::voting, "tally");
  if (result.outcome == Outcome::accepted) {
    proposal.rejection_reasons.clear();
    return transition(std::move(proposal), ProposalState::accepted);
  }
  if (result.reasons.empty()) throw Error(Errc::missing_reasons, "rejected without reasons");
  proposal.rejection_reasons = result.reasons;
  return transition(std::move(proposal), ProposalState::rejected);
}

std::set<Section> Revisions::touched() const {
  std::set<Section> out;
  if (title) out.insert(Section::title);
  if (introduction) out.insert(Section::introduction);
  if (literature_review) out.insert(Section::literature_review);
  if (methodology) out.insert(Section::methodology);
  if (plan) out.insert(Section::plan);
  if (budget) out.insert(Section::budget);
  if (team) out.insert(Section::team);
  return out;
}

Proposal resubmit(Proposal proposal, const Revisions& revisions) {
  require_state(proposal, ProposalState::rejected, "resubmission");
  std::set<Section> flagged;
  for (const auto& r : proposal.rejection_reasons)
    if (r.section) flagged.insert(*r.section);
  const auto touched = revisions.touched();
  const bool addressed = flagged.empty() ? !touched.empty()
                                         : std::any_of(touched.begin(), touched.end(),
                                                       [&](Section s) { return flagged.contains(s); });
  if (!addressed) throw Error(Errc::unaddressed_feedback, "revisions do not touch any section flagged by the investors");

  if (revisions.title) proposal.title = *revisions.title;
  if (revisions.introduction) proposal.introduction = *revisions.introduction;
  if (revisions.literature_review) proposal.literature_review = *revisions.literature_review;
  if (revisions.methodology) proposal.methodology = *revisions.methodology;
  if (revisions.plan) proposal.plan = *revisions.plan;
  if (revisions.budget) proposal.budget = *revisions.budget;
  if (revisions.team) proposal.team = *revisions.team;
  check_template(proposal);

  proposal.history.push_back(ReviewRound{proposal.version, std::move(proposal.rejection_reasons)});
  proposal.rejection_reasons.clear();
  ++proposal.version;
  return transition(std::move(proposal), ProposalState::submitted);
}

FundingState open_escrow(Proposal proposal, Amount deposit, double tau, std::size_t patience) {
  require_state(proposal, ProposalState::accepted, "opening escrow");
  const Amount promised = proposal.promised();
  const Amount minimum = kGuaranteedFraction * promised;
  if (!std::isfinite(deposit) || deposit < minimum - slack(promised)) {
    throw Error(Errc::insufficient_deposit, "deposit " + std::to_string(deposit) + " is below 30% of " +
                                                std::to_string(promised) + " (shortfall " +
                                                std::to_string(minimum - deposit) + ")");
  }
  if (deposit > promised + slack(promised))
    throw Error(Errc::invalid_argument, "deposit exceeds the promised amount");

  FundingState out;
  out.escrow = EscrowAccount{proposal.id, promised, deposit, 0.0, 0.0, minimum};
  out.dispute.proposal_id = proposal.id;
  out.dispute.threshold = tau;
  out.dispute.patience = patience;
  out.proposal = transition(std::move(proposal), ProposalState::funded);
  return out;
}

EscrowAccount top_up(EscrowAccount escrow, Amount amount) {
  if (!(amount > 0.0) || !std::isfinite(amount)) throw Error(Errc::invalid_argument, "top-up must be positive");
  if (escrow.deposited + amount > escrow.promised + slack(escrow.promised))
    throw Error(Errc::invalid_argument, "top-up would exceed the promised amount");
  escrow.deposited += amount;
  return escrow;
}

MilestoneVote release_milestone(FundingState state, std::size_t milestone_index, std::span<const Ballot> ballots,
                                double disagreement, const TallyOptions& options) {
  require_state(state.proposal, ProposalState::funded, "milestone release");
  const std::size_t next = next_unreleased(state.proposal);
  if (milestone_index != next)
    throw Error(Errc::ordering_error, "milestone " + std::to_string(milestone_index) + " requested but milestone " +
                                          std::to_string(next) + " is next");

  MilestoneVote vote{std::move(state), tally(ballots, options), false};
  Milestone& m = vote.state.proposal.plan[milestone_index];
  if (vote.tally.outcome == Outcome::accepted) {
    EscrowAccount& e = vote.state.escrow;
    if (e.released + m.amount > e.deposited + slack(e.promised))
      throw Error(Errc::liquidity_error, "escrow holds " + std::to_string(e.deposited - e.released) + ", milestone needs " +
                                             std::to_string(m.amount) + "; deposit first");
    e.released += m.amount;
    m.state = MilestoneState::released;
    vote.released = true;
    DisputeState& d = vote.state.dispute;
    if (d.status == DisputeStatus::escalating) {
      d.status = DisputeStatus::resolved;
      d.window_start = d.rounds.size();
    }
    if (next_unreleased(vote.state.proposal) == vote.state.proposal.plan.size())
      vote.state.proposal = transition(std::move(vote.state.proposal), ProposalState::completed);
  } else {
    m.state = MilestoneState::disputed;
    vote.state.dispute = escalate_dispute(vote.state.proposal.state, std::move(vote.state.dispute), disagreement);
  }
  return vote;
}

double disagreement_score(const VariationalDistribution& investor_belief, const GenerativeModel& model,
                          std::string_view aim) {
  try {
    const auto report = free_energy(investor_belief, model, aim);
    return std::max(0.0, report.free_energy - report.neg_log_evidence);
  } catch (const Error& e) {
    if (e.code() == Errc::infinite_free_energy) return std::numeric_limits<double>::infinity();
    throw;
  }
}

DisputeState escalate_dispute(ProposalState proposal_state, DisputeState dispute, double score) {
  if (proposal_state != ProposalState::funded)
    throw Error(Errc::state_error, "disputes only escalate on Funded proposals");
  if (dispute.status == DisputeStatus::forfeit_proposed || dispute.status == DisputeStatus::forfeited)
    throw Error(Errc::state_error, "a forfeiture is already pending or settled");
  if (std::isnan(score) || score < 0.0) throw Error(Errc::invalid_argument, "disagreement score must be >= 0");
  if (dispute.patience == 0) throw Error(Errc::invalid_argument, "dispute patience must be at least 1");

  dispute.rounds.push_back(score);
  const std::size_t open = dispute.rounds.size() - dispute.window_start;
  bool streak = open >= dispute.patience;
  for (std::size_t i = 0; streak && i < dispute.patience; ++i)
    streak = dispute.rounds[dispute.rounds.size() - 1 - i] > dispute.threshold;
  dispute.status = streak ? DisputeStatus::forfeit_proposed : DisputeStatus::escalating;
  return dispute;
}

FundingState resolve_forfeit(FundingState state, const TallyResult& result) {
  require_state(state.proposal, ProposalState::funded, "forfeiture");
  if (state.dispute.status != DisputeStatus::forfeit_proposed)
    throw Error(Errc::state_error, "no forfeiture has been proposed");
  if (result.outcome == Outcome::accepted) {
    state.escrow.returned += state.escrow.balance();
    state.dispute.status = DisputeStatus::forfeited;
    state.proposal = transition(std::move(state.proposal), ProposalState::forfeited);
  } else {
    state.dispute.status = DisputeStatus::resolved;
    state.dispute.window_start = state.dispute.rounds.size();
  }
  return state;
}

Amount abandonment_payout(const EscrowAccount& escrow) {
  return std::max(0.0, escrow.guaranteed_min - escrow.released);
}

AbandonmentResult abandon(FundingState state, const TallyResult& result) {
  require_state(state.proposal, ProposalState::funded, "abandonment");
  AbandonmentResult out;
  if (result.outcome == Outcome::accepted) {
    out.payout = std::min(abandonment_payout(state.escrow), state.escrow.balance());
    state.escrow.released += out.payout;
    out.returned = state.escrow.balance();
    state.escrow.returned += out.returned;
    state.proposal = transition(std::move(state.proposal), ProposalState::abandoned);
  }
  out.state = std::move(state);
  return out;
}

FecCost fec_cost(const FecCostSheet& sheet) {
  FecCost out;
  for (const auto* items : {&sheet.direct_items, &sheet.indirect_items}) {
    for (const auto& line : *items) {
      if (!(line.amount >= 0.0) || !std::isfinite(line.amount))
        throw Error(Errc::validation_error, "cost line '" + line.label + "' is negative");
      out.total_cost += line.amount;
    }
  }
  if (!(sheet.price >= 0.0)) throw Error(Errc::validation_error, "price is negative");
  if (sheet.price < out.total_cost) out.under_recovery = out.total_cost - sheet.price;
  return out;
}

GenerativeModel milestone_outcome_model(double team_fit) {
  const double f = std::clamp(team_fit, 0.0, 1.0);
  const std::array<double, 3> prior_weight = {0.05 + f, 0.5, 0.05 + (1.0 - f)};
  const std::array<double, 3> p_complete = {0.9, 0.5, 0.1};
  const double z = prior_weight[0] + prior_weight[1] + prior_weight[2];
  std::vector<double> joint;
  for (std::size_t s = 0; s < 3; ++s) {
    const double prior = prior_weight[s] / z;
    joint.push_back(prior * p_complete[s]);
    joint.push_back(prior * (1.0 - p_complete[s]));
  }
  return GenerativeModel({{"delivered", {}}, {"partial", {}}, {"missed", {}}},
                         {std::string(kReportComplete), std::string(kReportIncomplete)}, std::move(joint));
}

}  // namespace kmarket
