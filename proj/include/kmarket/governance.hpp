#pragma once
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kmarket/crypto.hpp"
#include "kmarket/inference.hpp"
#include "kmarket/types.hpp"

namespace kmarket {

// The seven constituents of the proposal template.
enum class Section { title, introduction, literature_review, methodology, plan, budget, team };

std::string_view to_string(Section section) noexcept;
std::optional<Section> section_from_string(std::string_view name) noexcept;

enum class ProposalState { draft, submitted, voting, accepted, rejected, funded, completed, forfeited, abandoned };

std::string_view to_string(ProposalState state) noexcept;
std::optional<ProposalState> proposal_state_from_string(std::string_view name) noexcept;

// The declared proposal machine. Every state change goes through `transition`.
std::span<const std::pair<ProposalState, ProposalState>> declared_transitions() noexcept;
bool transition_allowed(ProposalState from, ProposalState to) noexcept;

enum class MilestoneState { pending, under_vote, released, disputed };

std::string_view to_string(MilestoneState state) noexcept;

struct Milestone {
  std::size_t index{0};
  std::string description;
  Amount amount{0.0};
  Tick deadline{0};
  MilestoneState state{MilestoneState::pending};

  bool operator==(const Milestone&) const = default;
};

struct CostLine {
  std::string label;
  Amount amount{0.0};

  bool operator==(const CostLine&) const = default;
};

// A team member's CV commitment, signed with the member's key.
struct CvEntry {
  AgentId member;
  crypto::Digest cv_digest{};
  crypto::PublicKey public_key{};
  std::optional<crypto::Signature> signature;

  bool operator==(const CvEntry&) const = default;
};

CvEntry sign_cv(const AgentId& member, const crypto::KeyPair& keys, const crypto::Digest& cv_digest);

// Rejection feedback. `section` lets a resubmission be checked mechanically.
struct RejectionReason {
  std::optional<Section> section;
  std::string text;

  bool operator==(const RejectionReason&) const = default;
};

struct ReviewRound {
  std::uint32_t version{1};
  std::vector<RejectionReason> reasons;

  bool operator==(const ReviewRound&) const = default;
};

struct Proposal {
  std::string id;
  std::uint32_t version{1};
  std::string title;
  std::string introduction;
  std::string literature_review;
  std::string methodology;
  std::vector<Milestone> plan;
  std::vector<CostLine> budget;
  std::vector<CvEntry> team;
  ProposalState state{ProposalState::draft};
  std::vector<RejectionReason> rejection_reasons;
  std::vector<ReviewRound> history;

  // The requested price: the sum of the budget lines.
  Amount promised() const;

  bool operator==(const Proposal&) const = default;
};

Proposal transition(Proposal proposal, ProposalState to);

// Draft -> Submitted once the template is complete, milestones add up to the
// budget and every CV carries a valid signature.
Proposal validate_and_submit(Proposal proposal);

// Submitted -> Voting.
Proposal begin_voting(Proposal proposal);

enum class VoteChoice { yes, no };

struct Ballot {
  AgentId voter;
  std::string proposal_id;
  VoteChoice choice{VoteChoice::yes};
  double weight{0.0};
  std::optional<RejectionReason> reason;

  bool operator==(const Ballot&) const = default;
};

enum class Weighting { stake, per_capita };
enum class Outcome { accepted, rejected };

std::string_view to_string(Outcome outcome) noexcept;

inline constexpr double kAcceptanceThreshold = 0.51;

struct TallyOptions {
  double threshold{kAcceptanceThreshold};
  Weighting weighting{Weighting::stake};
  std::optional<double> quorum_weight;  // minimum cast weight, none by default
  bool require_reasons{true};
};

struct TallyResult {
  Outcome outcome{Outcome::rejected};
  double yes_weight{0.0};
  double no_weight{0.0};
  std::vector<RejectionReason> reasons;
};

// Accepted iff yes / cast >= threshold. Abstentions are simply absent ballots.
TallyResult tally(std::span<const Ballot> ballots, const TallyOptions& options = {});

// Voting -> Accepted, or Rejected carrying the tally's reasons.
Proposal apply_tally(Proposal proposal, const TallyResult& result);

struct Revisions {
  std::optional<std::string> title;
  std::optional<std::string> introduction;
  std::optional<std::string> literature_review;
  std::optional<std::string> methodology;
  std::optional<std::vector<Milestone>> plan;
  std::optional<std::vector<CostLine>> budget;
  std::optional<std::vector<CvEntry>> team;

  std::set<Section> touched() const;
};

// Rejected -> Submitted with version + 1; the previous reasons move into history.
Proposal resubmit(Proposal proposal, const Revisions& revisions);

inline constexpr double kGuaranteedFraction = 0.30;

struct EscrowAccount {
  std::string proposal_id;
  Amount promised{0.0};
  Amount deposited{0.0};
  Amount released{0.0};
  Amount returned{0.0};  // handed back to investors on forfeiture or abandonment
  Amount guaranteed_min{0.0};

  Amount balance() const { return deposited - released - returned; }

  bool operator==(const EscrowAccount&) const = default;
};

enum class DisputeStatus { none, escalating, forfeit_proposed, forfeited, resolved };

std::string_view to_string(DisputeStatus status) noexcept;

struct DisputeState {
  std::string proposal_id;
  std::vector<double> rounds;   // disagreement per round, nats
  double threshold{0.1};        // tau, nats
  std::size_t patience{3};      // T, rounds
  DisputeStatus status{DisputeStatus::none};
  std::size_t window_start{0};  // rounds before this index predate the last resolution

  bool operator==(const DisputeState&) const = default;
};

struct FundingState {
  Proposal proposal;
  EscrowAccount escrow;
  DisputeState dispute;
};

// Accepted -> Funded. The deposit must cover 30% of the promised amount.
FundingState open_escrow(Proposal proposal, Amount deposit, double tau = 0.1, std::size_t patience = 3);

// Adds funds to an open escrow; the total never exceeds the promised amount.
EscrowAccount top_up(EscrowAccount escrow, Amount amount);

struct MilestoneVote {
  FundingState state;
  TallyResult tally;
  bool released{false};
};

// Votes on the lowest-index unreleased milestone. Accepted releases its amount from
// the escrow; Rejected marks it Disputed and records `disagreement` as a dispute round.
MilestoneVote release_milestone(FundingState state, std::size_t milestone_index, std::span<const Ballot> ballots,
                                double disagreement, const TallyOptions& options = {});

// Free energy in excess of the evidence bound; +inf when the belief supports a
// state the model rules out.
double disagreement_score(const VariationalDistribution& investor_belief, const GenerativeModel& model,
                          std::string_view aim);

// Appends a round. ForfeitProposed once the trailing `patience` rounds since the last
// resolution all exceed the threshold.
DisputeState escalate_dispute(ProposalState proposal_state, DisputeState dispute, double score);

// Outcome of the forfeiture vote raised by a ForfeitProposed dispute.
FundingState resolve_forfeit(FundingState state, const TallyResult& result);

Amount abandonment_payout(const EscrowAccount& escrow);

// Outcome of an abandonment vote. Accepted pays the guarantee shortfall to the
// researchers, returns the rest, and closes the proposal as Abandoned.
struct AbandonmentResult {
  FundingState state;
  Amount payout{0.0};
  Amount returned{0.0};
};
AbandonmentResult abandon(FundingState state, const TallyResult& result);

struct FecCostSheet {
  std::vector<CostLine> direct_items;
  std::vector<CostLine> indirect_items;
  Amount price{0.0};
};

struct FecCost {
  Amount total_cost{0.0};
  std::optional<Amount> under_recovery;  // set when the price does not cover the cost
};

FecCost fec_cost(const FecCostSheet& sheet);

// Researcher-reported milestone model: states are outcome assessments
// (delivered / partial / missed), aims the two possible progress reports.
inline constexpr std::string_view kReportComplete = "reported-complete";
inline constexpr std::string_view kReportIncomplete = "reported-incomplete";
GenerativeModel milestone_outcome_model(double team_fit);

}  // namespace kmarket
