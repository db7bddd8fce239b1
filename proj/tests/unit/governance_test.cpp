#include "support.hpp"

#include <limits>

#include "kmarket/governance.hpp"

using namespace kmarket;

namespace {

const crypto::KeyPair& member_keys() {
  static const auto kp = crypto::KeyPair::from_seed(crypto::sha256("member"));
  return kp;
}

Proposal draft(std::vector<Amount> milestones = {300, 300, 400}) {
  Proposal p;
  p.id = "p1";
  p.title = "Title";
  p.introduction = "Intro";
  p.literature_review = "Prior work";
  p.methodology = "Method";
  Amount total = 0.0;
  for (std::size_t i = 0; i < milestones.size(); ++i) {
    p.plan.push_back({i, "m" + std::to_string(i), milestones[i], i + 1, MilestoneState::pending});
    total += milestones[i];
  }
  p.budget = {{"staff", total}};
  p.team = {sign_cv("alice", member_keys(), crypto::sha256("cv"))};
  return p;
}

Ballot ballot(const std::string& voter, VoteChoice c, double w, std::optional<Section> s = Section::budget) {
  Ballot b{voter, "p1", c, w, std::nullopt};
  if (c == VoteChoice::no) b.reason = RejectionReason{s, "needs work"};
  return b;
}

Proposal in_voting() { return begin_voting(validate_and_submit(draft())); }

FundingState funded(Amount deposit = 1000) {
  auto p = apply_tally(in_voting(), tally(std::vector<Ballot>{ballot("i1", VoteChoice::yes, 1)}));
  return open_escrow(p, deposit);
}

}  // namespace

TEST_CASE("template validation") {
  CHECK(validate_and_submit(draft()).state == ProposalState::submitted);
  auto p = draft();
  p.methodology = "  ";
  CHECK_ERRC(validate_and_submit(p), Errc::missing_section);
  p = draft({300, 300, 300});
  p.budget = {{"staff", 1000}};
  CHECK_ERRC(validate_and_submit(p), Errc::milestone_sum_mismatch);
  p = draft();
  p.team[0].signature.reset();
  CHECK_ERRC(validate_and_submit(p), Errc::unsigned_cv);
  p = draft();
  p.team[0].cv_digest[0] ^= 1;
  CHECK_ERRC(validate_and_submit(p), Errc::unsigned_cv);
  p = draft();
  p.team.clear();
  CHECK_ERRC(validate_and_submit(p), Errc::missing_section);
}

TEST_CASE("state machine only follows declared transitions") {
  const ProposalState all[] = {ProposalState::draft,    ProposalState::submitted, ProposalState::voting,
                               ProposalState::accepted, ProposalState::rejected,  ProposalState::funded,
                               ProposalState::completed, ProposalState::forfeited, ProposalState::abandoned};
  std::size_t allowed = 0;
  for (auto from : all)
    for (auto to : all) {
      Proposal p = draft();
      p.state = from;
      if (transition_allowed(from, to)) {
        ++allowed;
        CHECK(transition(p, to).state == to);
      } else {
        CHECK_ERRC(transition(p, to), Errc::state_error);
      }
    }
  CHECK(allowed == declared_transitions().size());
  for (auto s : all) CHECK(proposal_state_from_string(to_string(s)) == s);
}

TEST_CASE("tally threshold") {
  auto accepted = [](double yes, double no) {
    std::vector<Ballot> b{ballot("y", VoteChoice::yes, yes), ballot("n", VoteChoice::no, no)};
    return tally(b).outcome == Outcome::accepted;
  };
  CHECK(accepted(51, 49));
  CHECK_FALSE(accepted(50, 50));
  CHECK(accepted(0.5100, 0.4900));
  CHECK_FALSE(accepted(0.5099, 0.4901));
  CHECK(tally(std::vector<Ballot>{ballot("y", VoteChoice::yes, 1)}).outcome == Outcome::accepted);

  std::vector<Ballot> split{ballot("y", VoteChoice::yes, 50), ballot("n", VoteChoice::no, 50)};
  const auto r = tally(split);
  REQUIRE(r.reasons.size() == 1);
  CHECK(r.reasons[0].section == Section::budget);

  std::vector<Ballot> silent{ballot("y", VoteChoice::yes, 50), {"n", "p1", VoteChoice::no, 50, std::nullopt}};
  CHECK_ERRC(tally(silent), Errc::missing_reasons);
  TallyOptions lax;
  lax.require_reasons = false;
  CHECK(tally(silent, lax).outcome == Outcome::rejected);

  CHECK_ERRC(tally(std::vector<Ballot>{}), Errc::empty_electorate);
  CHECK_ERRC(tally(std::vector<Ballot>{ballot("a", VoteChoice::yes, 1), ballot("a", VoteChoice::no, 1)}),
             Errc::duplicate_ballot);
  CHECK_ERRC(tally(std::vector<Ballot>{ballot("a", VoteChoice::yes, 0)}), Errc::empty_electorate);

  TallyOptions capita;
  capita.weighting = Weighting::per_capita;
  std::vector<Ballot> whales{ballot("w", VoteChoice::yes, 100), ballot("a", VoteChoice::no, 1),
                             ballot("b", VoteChoice::no, 1)};
  CHECK(tally(whales).outcome == Outcome::accepted);
  CHECK(tally(whales, capita).outcome == Outcome::rejected);

  TallyOptions quorum;
  quorum.quorum_weight = 10;
  const auto q = tally(std::vector<Ballot>{ballot("y", VoteChoice::yes, 5)}, quorum);
  CHECK(q.outcome == Outcome::rejected);
  CHECK(q.reasons.at(0).text == "quorum not met");
}

TEST_CASE("rejection and resubmission") {
  std::vector<Ballot> no{ballot("n", VoteChoice::no, 1, Section::budget)};
  auto p = apply_tally(in_voting(), tally(no));
  CHECK(p.state == ProposalState::rejected);

  Revisions title_only;
  title_only.title = "New title";
  CHECK_ERRC(resubmit(p, title_only), Errc::unaddressed_feedback);

  Revisions budget;
  budget.budget = std::vector<CostLine>{{"staff", 800}, {"travel", 200}};
  auto v2 = resubmit(p, budget);
  CHECK(v2.state == ProposalState::submitted);
  CHECK(v2.version == 2);

  auto cur = p;
  for (int i = 0; i < 3; ++i) {
    cur = resubmit(cur, budget);
    if (i < 2) cur = apply_tally(begin_voting(cur), tally(no));
  }
  CHECK(cur.version == 4);
  CHECK(cur.history.size() == 3);
  for (std::uint32_t v = 0; v < 3; ++v) CHECK(cur.history[v].version == v + 1);
}

TEST_CASE("escrow floor") {
  auto accepted = apply_tally(in_voting(), tally(std::vector<Ballot>{ballot("y", VoteChoice::yes, 1)}));
  const auto f = open_escrow(accepted, 300);
  CHECK(f.proposal.state == ProposalState::funded);
  CHECK(f.escrow.guaranteed_min == doctest::Approx(300));
  CHECK_ERRC(open_escrow(accepted, 299), Errc::insufficient_deposit);
  CHECK(open_escrow(accepted, 1000).escrow.guaranteed_min == doctest::Approx(300));
  CHECK_ERRC(open_escrow(accepted, 1000.5), Errc::invalid_argument);
  CHECK_ERRC(open_escrow(in_voting(), 500), Errc::state_error);
  CHECK_ERRC(top_up(f.escrow, 701), Errc::invalid_argument);
  CHECK(top_up(f.escrow, 700).deposited == doctest::Approx(1000));
}

TEST_CASE("milestones release in order and disputes accumulate") {
  auto f = funded(300);
  std::vector<Ballot> yes{ballot("y", VoteChoice::yes, 1)};
  std::vector<Ballot> no{ballot("n", VoteChoice::no, 1, Section::plan)};
  CHECK_ERRC(release_milestone(f, 1, yes, 0.0), Errc::ordering_error);
  auto r = release_milestone(f, 0, yes, 0.0);
  CHECK(r.released);
  CHECK(r.state.escrow.released == doctest::Approx(300));
  CHECK_ERRC(release_milestone(r.state, 1, yes, 0.0), Errc::liquidity_error);

  auto d = release_milestone(f, 0, no, 0.2);
  CHECK_FALSE(d.released);
  CHECK(d.state.proposal.plan[0].state == MilestoneState::disputed);
  CHECK(d.state.dispute.rounds.size() == f.dispute.rounds.size() + 1);
  CHECK(d.state.dispute.status == DisputeStatus::escalating);
  CHECK(d.state.escrow.released == 0.0);

  // a later release closes the dispute window
  auto top = d.state;
  top.escrow = top_up(top.escrow, 700);
  auto ok = release_milestone(top, 0, yes, 0.0);
  CHECK(ok.state.dispute.status == DisputeStatus::resolved);
  CHECK(ok.state.dispute.window_start == 1);
  ok = release_milestone(ok.state, 1, yes, 0.0);
  ok = release_milestone(ok.state, 2, yes, 0.0);
  CHECK(ok.state.proposal.state == ProposalState::completed);
  CHECK(ok.state.escrow.released == doctest::Approx(1000));
  CHECK_ERRC(release_milestone(ok.state, 3, yes, 0.0), Errc::state_error);
}

TEST_CASE("disagreement score") {
  const auto m = test::two_state_model();
  CHECK(disagreement_score(exact_posterior(m, "o"), m, "o") == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(disagreement_score(VariationalDistribution({0.5, 0.5}), m, "o") == doctest::Approx(0.02041).epsilon(1e-3));
  const GenerativeModel ruled_out({{"s0", {}}, {"s1", {}}}, {"o", "other"}, {0.5, 0.2, 0.0, 0.3});
  CHECK(std::isinf(disagreement_score(VariationalDistribution({0.5, 0.5}), ruled_out, "o")));
}

TEST_CASE("escalation to forfeiture") {
  DisputeState d;
  d.threshold = 0.1;
  d.patience = 3;
  for (double s : {0.2, 0.15, 0.12}) d = escalate_dispute(ProposalState::funded, d, s);
  CHECK(d.status == DisputeStatus::forfeit_proposed);
  CHECK_ERRC(escalate_dispute(ProposalState::funded, d, 0.5), Errc::state_error);

  DisputeState e;
  for (double s : {0.2, 0.05, 0.3}) e = escalate_dispute(ProposalState::funded, e, s);
  CHECK(e.status == DisputeStatus::escalating);
  CHECK(e.rounds.size() == 3);

  DisputeState w;
  w.window_start = 0;
  w = escalate_dispute(ProposalState::funded, w, 0.5);
  w.window_start = 1;
  w = escalate_dispute(ProposalState::funded, w, 0.5);
  w = escalate_dispute(ProposalState::funded, w, 0.5);
  CHECK(w.status == DisputeStatus::escalating);
  w = escalate_dispute(ProposalState::funded, w, 0.5);
  CHECK(w.status == DisputeStatus::forfeit_proposed);

  CHECK_ERRC(escalate_dispute(ProposalState::accepted, DisputeState{}, 0.5), Errc::state_error);
  CHECK_ERRC(escalate_dispute(ProposalState::funded, DisputeState{}, -1.0), Errc::invalid_argument);
  CHECK(escalate_dispute(ProposalState::funded, DisputeState{}, std::numeric_limits<double>::infinity()).rounds.size() ==
        1);
}

TEST_CASE("forfeiture vote") {
  auto f = funded(1000);
  std::vector<Ballot> yes{ballot("y", VoteChoice::yes, 1)};
  f = release_milestone(f, 0, yes, 0.0).state;
  CHECK_ERRC(resolve_forfeit(f, tally(yes)), Errc::state_error);
  for (double s : {0.2, 0.15, 0.12}) f.dispute = escalate_dispute(ProposalState::funded, f.dispute, s);

  std::vector<Ballot> split{ballot("a", VoteChoice::yes, 60), ballot("b", VoteChoice::no, 40)};
  const auto out = resolve_forfeit(f, tally(split));
  CHECK(out.proposal.state == ProposalState::forfeited);
  CHECK(out.dispute.status == DisputeStatus::forfeited);
  CHECK(out.escrow.returned == doctest::Approx(700));
  CHECK(out.escrow.balance() == doctest::Approx(0));

  std::vector<Ballot> lost{ballot("a", VoteChoice::yes, 40), ballot("b", VoteChoice::no, 60)};
  const auto kept = resolve_forfeit(f, tally(lost));
  CHECK(kept.proposal.state == ProposalState::funded);
  CHECK(kept.dispute.status == DisputeStatus::resolved);
  CHECK(kept.dispute.window_start == 3);
}

TEST_CASE("abandonment guarantee") {
  const std::vector<Ballot> yes{ballot("y", VoteChoice::yes, 1)};
  const auto accepted = tally(yes);
  auto check = [&](Amount deposit, std::vector<std::size_t> release, Amount payout) {
    auto f = funded(deposit);
    for (auto i : release) f = release_milestone(f, i, yes, 0.0).state;
    CHECK(abandonment_payout(f.escrow) == doctest::Approx(payout));
    const Amount before = f.escrow.balance();
    const auto a = abandon(f, accepted);
    CHECK(a.payout == doctest::Approx(payout));
    CHECK(a.payout + a.returned == doctest::Approx(before));
    CHECK(a.state.proposal.state == ProposalState::abandoned);
    CHECK(a.state.escrow.released >= 0.3 * a.state.escrow.promised - 1e-9);
  };
  check(300, {}, 300);
  check(1000, {0}, 0);
  check(1000, {}, 300);

  // guarantee of 300 on 1000, 100 already released
  auto f = funded(1000);
  f.proposal.plan = {{0, "a", 100, 1, MilestoneState::pending}, {1, "b", 900, 2, MilestoneState::pending}};
  f = release_milestone(f, 0, yes, 0.0).state;
  CHECK(abandon(f, accepted).payout == doctest::Approx(200));

  std::vector<Ballot> no{ballot("n", VoteChoice::no, 1)};
  const auto kept = abandon(funded(), tally(no));
  CHECK(kept.state.proposal.state == ProposalState::funded);
  CHECK(kept.payout == 0.0);
}

TEST_CASE("full economic cost") {
  FecCostSheet sheet{{{"staff", 500}, {"equipment", 100}}, {{"estates", 200}}, 700};
  const auto c = fec_cost(sheet);
  CHECK(c.total_cost == doctest::Approx(800));
  REQUIRE(c.under_recovery);
  CHECK(*c.under_recovery == doctest::Approx(100));
  sheet.price = 800;
  CHECK_FALSE(fec_cost(sheet).under_recovery);
  const auto empty = fec_cost({});
  CHECK(empty.total_cost == 0.0);
  CHECK_FALSE(empty.under_recovery);
  CHECK_ERRC(fec_cost({{{"x", -1}}, {}, 0}), Errc::validation_error);
}

TEST_CASE("milestone outcome model") {
  const auto m = milestone_outcome_model(0.8);
  CHECK(marginal_evidence(m, kReportComplete) > marginal_evidence(milestone_outcome_model(0.2), kReportComplete));
  double total = 0.0;
  for (auto a : {kReportComplete, kReportIncomplete}) total += marginal_evidence(m, a);
  CHECK(total == doctest::Approx(1.0));
}
