// Governance events: proposals, votes, escrow, milestones, disputes, forfeiture and
// abandonment, applied against ProtocolState.
#include <algorithm>
#include <cmath>

#include "kmarket/codec.hpp"
#include "kmarket/protocol.hpp"

namespace kmarket {

namespace {

std::size_t next_unreleased(const Proposal& p) {
  for (std::size_t i = 0; i < p.plan.size(); ++i)
    if (p.plan[i].state != MilestoneState::released) return i;
  return p.plan.size();
}

bool pending(const VoteRound& r) { return !r.closed() || (r.kind == RoundKind::milestone && !r.consumed); }

bool has_pending_round(const std::map<std::string, VoteRound>& rounds, const std::string& pid) {
  return std::any_of(rounds.begin(), rounds.end(),
                     [&](const auto& kv) { return kv.second.proposal_id == pid && pending(kv.second); });
}

VoteChoice choice_from(const std::string& s) {
  if (s == "yes") return VoteChoice::yes;
  if (s == "no") return VoteChoice::no;
  throw Error(Errc::validation_error, "vote choice must be yes|no");
}

bool same_score(double a, double b) { return (std::isinf(a) && std::isinf(b)) || a == b; }

bool close_enough(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(a)); }

}  // namespace

ProposalRecord& ProtocolState::proposal(const std::string& id) {
  auto it = proposals_.find(id);
  if (it == proposals_.end()) throw Error(Errc::validation_error, "unknown proposal " + id);
  return it->second;
}

void ProtocolState::pay_team(ProposalRecord& rec, Amount amount) {
  if (!(amount > 0.0)) return;
  const auto& team = rec.funding.proposal.team;
  const double share = amount / static_cast<double>(team.size());
  Amount paid = 0.0;
  for (std::size_t i = 0; i < team.size(); ++i) {
    const Amount a = i + 1 == team.size() ? amount - paid : share;
    accounts_.credit(team[i].member, a);
    receipts_[team[i].member] += a;
    paid += a;
  }
  rec.paid_out += amount;
}

void ProtocolState::return_to_investors(ProposalRecord& rec, Amount amount) {
  if (!(amount > 0.0)) return;
  Amount contributed = 0.0;
  for (const auto& [inv, c] : rec.contributions) contributed += c;
  Amount paid = 0.0;
  std::size_t i = 0;
  for (const auto& [inv, c] : rec.contributions) {
    const Amount a = ++i == rec.contributions.size() ? amount - paid : amount * (c / contributed);
    accounts_.credit(inv, a);
    paid += a;
  }
}

void ProtocolState::on_submit_proposal(const Transaction& tx, const Json& p, Tick tick, AppliedEvent& ev) {
  identity(tx.actor, kResearcherRole);
  auto check_team = [&](const Proposal& prop) {
    const bool actor_in_team = std::any_of(prop.team.begin(), prop.team.end(),
                                           [&](const CvEntry& cv) { return cv.member == tx.actor; });
    if (!actor_in_team) throw Error(Errc::validation_error, tx.actor + " is not on the team of " + prop.id);
    for (const auto& cv : prop.team) {
      const auto& member = identity(cv.member, kResearcherRole);
      if (member.key != cv.public_key)
        throw Error(Errc::signature_error, "CV key of " + cv.member + " is not the registered key");
    }
  };

  Proposal prop;
  if (p.contains("proposal")) {
    prop = p["proposal"].get<Proposal>();
    if (prop.state != ProposalState::draft || prop.version != 1)
      throw Error(Errc::validation_error, "a new proposal must be a version 1 draft");
    if (proposals_.contains(prop.id)) throw Error(Errc::validation_error, "proposal " + prop.id + " already exists");
    check_team(prop);
    prop = begin_voting(validate_and_submit(std::move(prop)));
    ProposalRecord rec;
    rec.submitted_at = tick;
    rec.funding.proposal = prop;
    proposals_.emplace(prop.id, std::move(rec));
  } else {
    auto& rec = proposal(p.at("proposal_id").get<std::string>());
    if (rec.funding.proposal.version >= params().max_versions)
      throw Error(Errc::validation_error, "proposal " + rec.funding.proposal.id + " reached its revision limit");
    prop = resubmit(rec.funding.proposal, p.at("revisions").get<Revisions>());
    check_team(prop);
    prop = begin_voting(std::move(prop));
    rec.funding.proposal = prop;
  }

  const auto round_id = proposal_round_id(prop.id, prop.version);
  if (rounds_.contains(round_id)) throw Error(Errc::state_error, "round " + round_id + " already exists");
  VoteRound round;
  round.id = round_id;
  round.kind = RoundKind::proposal;
  round.proposal_id = prop.id;
  rounds_.emplace(round_id, std::move(round));
  ev.subject = prop.id;
  ev.detail = "v" + std::to_string(prop.version);
}

void ProtocolState::on_cast_vote(const Transaction& tx, const Json& p, AppliedEvent& ev) {
  const auto& voter = identity(tx.actor, kInvestorRole);
  const auto round_id = p.at("round").get<std::string>();
  auto it = rounds_.find(round_id);
  if (it == rounds_.end()) {
    // Milestone rounds open with their first ballot.
    const auto pid = p.at("proposal_id").get<std::string>();
    const auto idx = p.at("milestone").get<std::size_t>();
    auto& rec = proposal(pid);
    auto& prop = rec.funding.proposal;
    if (prop.state != ProposalState::funded) throw Error(Errc::state_error, "milestone votes need a Funded proposal");
    if (idx != next_unreleased(prop))
      throw Error(Errc::ordering_error, "milestone " + std::to_string(idx) + " is not the next unreleased one");
    const auto status = rec.funding.dispute.status;
    if (status == DisputeStatus::forfeit_proposed || status == DisputeStatus::forfeited)
      throw Error(Errc::state_error, "milestones are frozen while a forfeiture is pending");
    if (has_pending_round(rounds_, pid)) throw Error(Errc::state_error, "proposal " + pid + " has a round in progress");
    if (round_id != milestone_round_id(pid, idx, rec.milestone_rounds))
      throw Error(Errc::validation_error, "unexpected round id " + round_id);
    prop.plan[idx].state = MilestoneState::under_vote;
    ++rec.milestone_rounds;
    VoteRound round;
    round.id = round_id;
    round.kind = RoundKind::milestone;
    round.proposal_id = pid;
    round.milestone = idx;
    it = rounds_.emplace(round_id, std::move(round)).first;
  }
  VoteRound& round = it->second;
  if (round.closed()) throw Error(Errc::state_error, "round " + round_id + " is closed");
  if (std::any_of(round.ballots.begin(), round.ballots.end(), [&](const Ballot& b) { return b.voter == tx.actor; }))
    throw Error(Errc::duplicate_ballot, tx.actor + " already voted in " + round_id);

  Ballot b;
  b.voter = tx.actor;
  b.proposal_id = round.proposal_id;
  b.choice = choice_from(p.at("choice").get<std::string>());
  b.weight = p.at("weight").get<double>();
  if (params().weighting == Weighting::stake && b.weight != voter.stake)
    throw Error(Errc::validation_error, "ballot weight " + std::to_string(b.weight) + " differs from the stake of " +
                                            tx.actor);
  if (p.contains("reason") && !p["reason"].is_null()) b.reason = p["reason"].get<RejectionReason>();
  const double score = score_from_json(p.value("score", Json(0.0)));
  if (std::isnan(score) || score < 0.0) throw Error(Errc::validation_error, "disagreement score must be >= 0");

  round.ballots.push_back(std::move(b));
  round.scores.push_back(score);
  ev.subject = round_id;
  ev.detail = p["choice"].get<std::string>();
}

void ProtocolState::on_close_vote(const Transaction& tx, const Json& p, Tick tick, AppliedEvent& ev) {
  require_protocol_actor(tx);
  const auto round_id = p.at("round").get<std::string>();
  auto it = rounds_.find(round_id);
  if (it == rounds_.end()) throw Error(Errc::validation_error, "unknown round " + round_id);
  VoteRound& round = it->second;
  if (round.closed()) throw Error(Errc::state_error, "round " + round_id + " is already closed");

  const TallyResult result = tally(round.ballots, round_tally_options(params(), round.kind));
  if (p.at("outcome").get<std::string>() != to_string(result.outcome) ||
      !close_enough(p.at("yes_weight").get<double>(), result.yes_weight) ||
      !close_enough(p.at("no_weight").get<double>(), result.no_weight))
    throw Error(Errc::validation_error, "recorded tally of " + round_id + " does not match the ballots");
  round.result = result;

  auto& rec = proposal(round.proposal_id);
  switch (round.kind) {
    case RoundKind::proposal:
      rec.funding.proposal = apply_tally(std::move(rec.funding.proposal), result);
      break;
    case RoundKind::milestone:
      break;
    case RoundKind::forfeit: {
      const Amount before = rec.funding.escrow.returned;
      rec.funding = resolve_forfeit(std::move(rec.funding), result);
      return_to_investors(rec, rec.funding.escrow.returned - before);
      if (rec.funding.proposal.state == ProposalState::forfeited) rec.closed_at = tick;
      break;
    }
    case RoundKind::abandon: {
      auto out = abandon(std::move(rec.funding), result);
      rec.funding = std::move(out.state);
      pay_team(rec, out.payout);
      return_to_investors(rec, out.returned);
      if (rec.funding.proposal.state == ProposalState::abandoned) rec.closed_at = tick;
      break;
    }
  }
  ev.subject = round_id;
  ev.detail = std::string(to_string(result.outcome));
}

void ProtocolState::on_deposit(const Transaction& tx, const Json& p, Tick tick, AppliedEvent& ev) {
  require_protocol_actor(tx);
  auto& rec = proposal(p.at("proposal_id").get<std::string>());
  std::map<AgentId, Amount> adds;
  Amount total = 0.0;
  for (const auto& c : p.at("contributions")) {
    const auto inv = c.at("investor").get<std::string>();
    identity(inv, kInvestorRole);
    const Amount a = c.at("amount").get<double>();
    if (!(a > 0.0) || !std::isfinite(a)) throw Error(Errc::validation_error, "contribution must be positive");
    adds[inv] += a;
    total += a;
  }
  if (adds.empty()) throw Error(Errc::validation_error, "deposit without contributions");

  const auto state = rec.funding.proposal.state;
  if (state == ProposalState::accepted) {
    rec.funding = open_escrow(std::move(rec.funding.proposal), total, params().tau, params().patience);
    rec.funded_at = tick;
  } else if (state == ProposalState::funded) {
    rec.funding.escrow = top_up(rec.funding.escrow, total);
  } else {
    throw Error(Errc::state_error, "deposits need an Accepted or Funded proposal");
  }
  for (const auto& [inv, a] : adds) {
    accounts_.debit(inv, a);
    rec.contributions[inv] += a;
  }
  ev.subject = rec.funding.proposal.id;
  ev.detail = std::to_string(total);
}

void ProtocolState::on_release(const Transaction& tx, const Json& p, Tick tick, AppliedEvent& ev) {
  require_protocol_actor(tx);
  const auto pid = p.at("proposal_id").get<std::string>();
  const auto idx = p.at("milestone").get<std::size_t>();
  const auto round_id = p.at("round").get<std::string>();
  auto it = rounds_.find(round_id);
  if (it == rounds_.end() || it->second.kind != RoundKind::milestone || it->second.proposal_id != pid ||
      it->second.milestone != idx)
    throw Error(Errc::validation_error, "no milestone round " + round_id + " for " + pid);
  VoteRound& round = it->second;
  if (!round.closed() || round.result->outcome != Outcome::accepted)
    throw Error(Errc::state_error, "release of " + pid + " milestone " + std::to_string(idx) +
                                       " needs an Accepted tally");
  if (round.consumed) throw Error(Errc::state_error, "round " + round_id + " was already acted upon");

  auto& rec = proposal(pid);
  const Amount before = rec.funding.escrow.released;
  auto vote = release_milestone(std::move(rec.funding), idx, round.ballots, round.aggregate_score(),
                                round_tally_options(params(), RoundKind::milestone));
  if (!vote.released) throw Error(Errc::state_error, "tally did not release the milestone");
  rec.funding = std::move(vote.state);
  pay_team(rec, rec.funding.escrow.released - before);
  round.consumed = true;
  if (rec.funding.proposal.state == ProposalState::completed) rec.closed_at = tick;
  ev.subject = round_id;
  ev.detail = "released";
}

void ProtocolState::on_raise_dispute(const Transaction& tx, const Json& p, AppliedEvent& ev) {
  if (p.contains("contract_id")) {
    const auto cid = p["contract_id"].get<std::string>();
    auto it = contracts_.find(cid);
    if (it == contracts_.end()) throw Error(Errc::validation_error, "unknown contract " + cid);
    auto& c = it->second;
    if (tx.actor != c.doc.buyer && tx.actor != c.doc.seller)
      throw Error(Errc::validation_error, tx.actor + " is not a party to " + cid);
    if (c.settlement.status == SettlementStatus::complete)
      throw Error(Errc::state_error, "contract " + cid + " is already complete");
    c.disputed = true;
    ev.subject = cid;
    ev.detail = p.value("reason", "");
    return;
  }

  require_protocol_actor(tx);
  const auto pid = p.at("proposal_id").get<std::string>();
  const auto idx = p.at("milestone").get<std::size_t>();
  const auto round_id = p.at("round").get<std::string>();
  auto it = rounds_.find(round_id);
  if (it == rounds_.end() || it->second.kind != RoundKind::milestone || it->second.proposal_id != pid ||
      it->second.milestone != idx)
    throw Error(Errc::validation_error, "no milestone round " + round_id + " for " + pid);
  VoteRound& round = it->second;
  if (!round.closed() || round.result->outcome != Outcome::rejected)
    throw Error(Errc::state_error, "a dispute needs a Rejected milestone tally");
  if (round.consumed) throw Error(Errc::state_error, "round " + round_id + " was already acted upon");
  const double score = score_from_json(p.at("score"));
  if (!same_score(score, round.aggregate_score()))
    throw Error(Errc::validation_error, "recorded disagreement does not match the ballots of " + round_id);

  auto& rec = proposal(pid);
  auto vote = release_milestone(std::move(rec.funding), idx, round.ballots, score,
                                round_tally_options(params(), RoundKind::milestone));
  if (vote.released) throw Error(Errc::state_error, "tally released the milestone");
  rec.funding = std::move(vote.state);
  rec.ever_disputed = true;
  round.consumed = true;
  ev.subject = round_id;
  ev.detail = std::string(to_string(rec.funding.dispute.status));
}

void ProtocolState::on_forfeit_bond(const Transaction& tx, const Json& p, AppliedEvent& ev) {
  require_protocol_actor(tx);
  const auto pid = p.at("proposal_id").get<std::string>();
  auto& rec = proposal(pid);
  if (rec.funding.proposal.state != ProposalState::funded)
    throw Error(Errc::state_error, "forfeiture needs a Funded proposal");
  if (rec.funding.dispute.status != DisputeStatus::forfeit_proposed)
    throw Error(Errc::state_error, "no forfeiture has been proposed for " + pid);
  if (has_pending_round(rounds_, pid)) throw Error(Errc::state_error, "proposal " + pid + " has a round in progress");
  const auto round_id = p.at("round").get<std::string>();
  if (round_id != forfeit_round_id(pid, rec.forfeit_rounds))
    throw Error(Errc::validation_error, "unexpected round id " + round_id);
  ++rec.forfeit_rounds;
  VoteRound round;
  round.id = round_id;
  round.kind = RoundKind::forfeit;
  round.proposal_id = pid;
  rounds_.emplace(round_id, std::move(round));
  ev.subject = round_id;
}

void ProtocolState::on_abandon(const Transaction& tx, const Json& p, AppliedEvent& ev) {
  const auto& actor = identity(tx.actor, "");
  if (actor.role != kInvestorRole && actor.role != kProtocolRole)
    throw Error(Errc::validation_error, "only investors or the protocol may propose abandonment");
  const auto pid = p.at("proposal_id").get<std::string>();
  auto& rec = proposal(pid);
  if (rec.funding.proposal.state != ProposalState::funded)
    throw Error(Errc::state_error, "abandonment needs a Funded proposal");
  if (has_pending_round(rounds_, pid)) throw Error(Errc::state_error, "proposal " + pid + " has a round in progress");
  const auto round_id = p.at("round").get<std::string>();
  if (round_id != abandon_round_id(pid, rec.abandon_rounds))
    throw Error(Errc::validation_error, "unexpected round id " + round_id);
  ++rec.abandon_rounds;
  VoteRound round;
  round.id = round_id;
  round.kind = RoundKind::abandon;
  round.proposal_id = pid;
  rounds_.emplace(round_id, std::move(round));
  ev.subject = round_id;
}

}  // namespace kmarket
