#include "support.hpp"

#include "kmarket/codec.hpp"
#include "kmarket/protocol.hpp"

using namespace kmarket;
using Json = nlohmann::json;

namespace {

crypto::Seed seed(const std::string& id) { return crypto::sha256(id); }

struct Market {
  ProtocolRuntime rt;
  ProtocolParams params;

  Market() {
    params.lexicon = Lexicon({{"ml", "models"}, {"stats", "analysis"}, {"data", "datasets"}});
    rt.register_protocol("protocol", params, seed("protocol"));
    for (auto id : {"alice", "bob", "seller"}) rt.register_agent(id, kResearcherRole, Json{{"balance", 0}}, seed(id));
    rt.register_agent("i1", kInvestorRole, Json{{"balance", 1000}, {"stake", 60}}, seed("i1"));
    rt.register_agent("i2", kInvestorRole, Json{{"balance", 1000}, {"stake", 40}}, seed("i2"));
    rt.register_agent("buyer", kInvestorRole, Json{{"balance", 50}}, seed("buyer"));
    rt.seal();
    rt.set_tick(1);
  }

  Proposal draft(const std::string& id = "p1") const {
    Proposal p;
    p.id = id;
    p.title = "t";
    p.introduction = "i";
    p.literature_review = "l";
    p.methodology = "m";
    p.plan = {{0, "first", 400, 2, MilestoneState::pending}, {1, "second", 600, 4, MilestoneState::pending}};
    p.budget = {{"staff", 1000}};
    p.team = {sign_cv("alice", rt.keys("alice"), crypto::sha256("alice cv"))};
    return p;
  }

  void vote(const std::string& round, const std::string& choice, Json extra = Json::object()) {
    for (auto [id, w] : {std::pair{"i1", 60}, std::pair{"i2", 40}}) {
      Json b = extra;
      b["round"] = round;
      b["weight"] = w;
      b["choice"] = choice;
      if (choice == "no") b["reason"] = RejectionReason{Section::budget, "too costly"};
      rt.submit(id, TxKind::cast_vote, b);
    }
  }

  void close(const std::string& round, const std::string& outcome, double yes, double no) {
    rt.submit("protocol", TxKind::close_vote,
              {{"round", round}, {"outcome", outcome}, {"yes_weight", yes}, {"no_weight", no}});
  }

  void fund(const std::string& id, double amount) {
    rt.submit("alice", TxKind::submit_proposal, {{"proposal", draft(id)}});
    vote(proposal_round_id(id, 1), "yes");
    close(proposal_round_id(id, 1), "Accepted", 100, 0);
    rt.submit("protocol", TxKind::deposit_escrow,
              {{"proposal_id", id}, {"contributions", Json::array({{{"investor", "i1"}, {"amount", amount}}})}});
  }

  PublishedListing list(const std::string& payload, Amount ask = 20) {
    const crypto::Bytes bytes(payload.begin(), payload.end());
    const auto secret = crypto::sha256("seller secret");
    auto pub = publish_listing("L1", "seller", {"ml"}, "weights", bytes, ask, params.lexicon, secret);
    rt.submit("seller", TxKind::create_listing, {{"listing", pub.listing}});
    Desideratum req{"q1", "buyer", DesideratumKind::request, {"ml"}, 1, 10, 30, 9, ""};
    Desideratum off{"o1", "seller", DesideratumKind::offer, {"ml"}, 1, 15, 40, 9, "L1"};
    rt.submit("buyer", TxKind::post_desideratum, {{"desideratum", req}});
    rt.submit("seller", TxKind::post_desideratum, {{"desideratum", off}});
    return pub;
  }

  void contract(const Listing& l, Amount price) {
    auto doc = form_contract("c1", "buyer", "seller", l, price, 15, 30, "as is");
    doc = sign_contract(doc, ContractParty::seller, rt.keys("seller"));
    doc = sign_contract(doc, ContractParty::buyer, rt.keys("buyer"));
    rt.submit("buyer", TxKind::form_contract, {{"contract", doc}, {"request_id", "q1"}, {"offer_id", "o1"}});
  }
};

}  // namespace

TEST_CASE("runtime registration and clock") {
  ProtocolRuntime rt;
  CHECK_ERRC(rt.register_agent("early", kResearcherRole, Json::object(), seed("early")), Errc::state_error);
  CHECK(rt.pending() == 0);
  CHECK_ERRC(rt.submit("early", TxKind::cast_vote, Json::object()), Errc::unknown_actor);

  Market m;
  CHECK_ERRC(m.rt.register_agent("alice", kResearcherRole, Json::object(), seed("x")), Errc::replay_error);
  CHECK_ERRC(m.rt.register_agent("eve", "oracle", Json::object(), seed("eve")), Errc::validation_error);
  CHECK_ERRC(m.rt.register_agent("neg", kInvestorRole, Json{{"balance", -1}}, seed("neg")), Errc::validation_error);
  CHECK(m.rt.state().identities().at("i1").stake == 60);
  CHECK(m.rt.state().identities().at("buyer").stake == 50);

  m.rt.submit("alice", TxKind::submit_proposal, {{"proposal", m.draft()}});
  CHECK_ERRC(m.rt.set_tick(2), Errc::state_error);
  m.rt.seal();
  CHECK_FALSE(m.rt.seal());
  CHECK_ERRC(m.rt.set_tick(0), Errc::ordering_error);
  m.rt.set_tick(2);
  CHECK(m.rt.chain().blocks().back().timestamp == 1);
}

TEST_CASE("rejected events leave no trace") {
  Market m;
  const auto nonce = m.rt.chain().last_nonce("alice");
  const auto before = m.rt.state().snapshot();
  auto bad = m.draft();
  bad.methodology.clear();
  CHECK_ERRC(m.rt.submit("alice", TxKind::submit_proposal, {{"proposal", bad}}), Errc::missing_section);
  auto foreign = m.draft();
  foreign.team = {sign_cv("alice", m.rt.keys("bob"), crypto::sha256("cv"))};
  CHECK_ERRC(m.rt.submit("alice", TxKind::submit_proposal, {{"proposal", foreign}}), Errc::signature_error);
  CHECK_ERRC(m.rt.submit("bob", TxKind::submit_proposal, {{"proposal", m.draft()}}), Errc::validation_error);
  CHECK_ERRC(m.rt.submit("alice", TxKind::submit_proposal, Json{{"proposal", 7}}), Errc::malformed_record);
  CHECK(m.rt.pending() == 0);
  CHECK(m.rt.state().snapshot() == before);

  const auto tx = m.rt.submit("alice", TxKind::submit_proposal, {{"proposal", m.draft()}});
  CHECK(tx.nonce == nonce + 1);
  m.rt.seal();
  CHECK(verify_chain(m.rt.chain()).ok);
}

TEST_CASE("funding lifecycle through events") {
  Market m;
  m.rt.submit("alice", TxKind::submit_proposal, {{"proposal", m.draft()}});
  const auto round = proposal_round_id("p1", 1);
  CHECK_ERRC(m.rt.submit("i1", TxKind::cast_vote, {{"round", round}, {"weight", 99}, {"choice", "yes"}}),
             Errc::validation_error);
  CHECK_ERRC(m.rt.submit("alice", TxKind::cast_vote, {{"round", round}, {"weight", 0}, {"choice", "yes"}}),
             Errc::validation_error);
  m.vote(round, "yes");
  CHECK_ERRC(m.rt.submit("i1", TxKind::cast_vote, {{"round", round}, {"weight", 60}, {"choice", "yes"}}),
             Errc::duplicate_ballot);
  CHECK_ERRC(m.close(round, "Rejected", 0, 100), Errc::validation_error);
  CHECK_ERRC(m.rt.submit("i1", TxKind::close_vote,
                         {{"round", round}, {"outcome", "Accepted"}, {"yes_weight", 100}, {"no_weight", 0}}),
             Errc::validation_error);
  m.close(round, "Accepted", 100, 0);
  CHECK(m.rt.state().proposals().at("p1").funding.proposal.state == ProposalState::accepted);

  const double total = m.rt.state().total_currency();
  auto deposit = [&](double a) {
    m.rt.submit("protocol", TxKind::deposit_escrow,
                {{"proposal_id", "p1"}, {"contributions", Json::array({{{"investor", "i2"}, {"amount", a}}})}});
  };
  CHECK_ERRC(deposit(299), Errc::insufficient_deposit);
  deposit(400);
  CHECK(m.rt.state().proposals().at("p1").funding.proposal.state == ProposalState::funded);
  CHECK(m.rt.state().accounts().balance("i2") == doctest::Approx(600));

  const auto mr = milestone_round_id("p1", 0, 0);
  const Json release{{"proposal_id", "p1"}, {"milestone", 0}, {"round", mr}};
  CHECK_ERRC(m.rt.submit("protocol", TxKind::release_milestone, release), Errc::validation_error);
  CHECK_ERRC(m.rt.submit("i1", TxKind::cast_vote,
                         {{"round", milestone_round_id("p1", 1, 0)}, {"proposal_id", "p1"}, {"milestone", 1},
                          {"weight", 60}, {"choice", "yes"}}),
             Errc::ordering_error);
  m.vote(mr, "yes", {{"proposal_id", "p1"}, {"milestone", 0}});
  CHECK_ERRC(m.rt.submit("protocol", TxKind::release_milestone, release), Errc::state_error);
  m.close(mr, "Accepted", 100, 0);
  m.rt.submit("protocol", TxKind::release_milestone, release);
  CHECK_ERRC(m.rt.submit("protocol", TxKind::release_milestone, release), Errc::state_error);
  CHECK(m.rt.state().accounts().balance("alice") == doctest::Approx(400));
  CHECK(m.rt.state().total_currency() == doctest::Approx(total).epsilon(1e-12));

  m.rt.seal();
  CHECK(audit(m.rt.state()).empty());
  const auto rep = replay(m.rt.chain());
  CHECK_FALSE(rep.failure);
  CHECK(rep.state.snapshot() == m.rt.state().snapshot());
}

TEST_CASE("abandonment vote pays the guarantee") {
  Market m;
  m.fund("p1", 1000);
  const double total = m.rt.state().total_currency();
  const auto round = abandon_round_id("p1", 0);
  m.rt.submit("i1", TxKind::abandon_proposal, {{"proposal_id", "p1"}, {"round", round}});
  for (auto [id, w] : {std::pair{"i1", 60}, std::pair{"i2", 40}})
    m.rt.submit(id, TxKind::cast_vote, {{"round", round}, {"weight", w}, {"choice", "yes"}});
  m.close(round, "Accepted", 100, 0);
  CHECK_ERRC(m.rt.submit("alice", TxKind::abandon_proposal, {{"proposal_id", "p1"}, {"round", "x"}}),
             Errc::validation_error);
  const auto& rec = m.rt.state().proposals().at("p1");
  CHECK(rec.funding.proposal.state == ProposalState::abandoned);
  CHECK(m.rt.state().accounts().balance("alice") == doctest::Approx(300));
  CHECK(m.rt.state().accounts().balance("i1") == doctest::Approx(700));
  CHECK(m.rt.state().total_currency() == doctest::Approx(total).epsilon(1e-12));
}

TEST_CASE("settlement happy path") {
  Market m;
  const auto pub = m.list("model weights");
  CHECK_ERRC(m.contract(pub.listing, 35), Errc::price_out_of_bounds);
  m.contract(pub.listing, 20);
  const double total = m.rt.state().total_currency();
  const auto rec = settle(m.rt, "c1", pub.key, pub.sealed_payload);
  CHECK(rec.status == SettlementStatus::complete);
  REQUIRE(rec.payment_tx);
  REQUIRE(rec.key_release_tx);
  REQUIRE(rec.ownership_tx);
  CHECK(*rec.key_digest == crypto::sha256(std::span<const std::uint8_t>(pub.key)));
  CHECK(m.rt.state().accounts().balance("buyer") == doctest::Approx(30));
  CHECK(m.rt.state().accounts().balance("seller") == doctest::Approx(20));
  CHECK(m.rt.state().listings().at("L1").holders.contains("buyer"));
  CHECK(m.rt.state().total_currency() == doctest::Approx(total));
  m.rt.seal();
  CHECK(audit(m.rt.state()).empty());
  CHECK(replay(m.rt.chain()).state.snapshot() == m.rt.state().snapshot());
}

TEST_CASE("settlement without funds never releases the key") {
  Market m;
  const auto pub = m.list("model weights");
  m.contract(pub.listing, 20);
  m.rt.submit("buyer", TxKind::settle_contract, {{"contract_id", "c1"}, {"step", "payment"}});
  m.rt.seal();
  // a second contract the buyer can no longer afford
  ProtocolRuntime& rt = m.rt;
  rt.set_tick(2);
  const auto events = rt.state().events().size();
  const double before = rt.state().accounts().balance("buyer");
  CHECK(before == doctest::Approx(30));
  Desideratum req{"q2", "buyer", DesideratumKind::request, {"ml"}, 1, 10, 40, 9, ""};
  Desideratum off{"o2", "seller", DesideratumKind::offer, {"ml"}, 1, 35, 40, 9, "L1"};
  rt.submit("buyer", TxKind::post_desideratum, {{"desideratum", req}});
  rt.submit("seller", TxKind::post_desideratum, {{"desideratum", off}});
  auto doc = form_contract("c2", "buyer", "seller", pub.listing, 35, 35, 40, "as is");
  doc = sign_contract(sign_contract(doc, ContractParty::seller, rt.keys("seller")), ContractParty::buyer,
                      rt.keys("buyer"));
  rt.submit("buyer", TxKind::form_contract, {{"contract", doc}, {"request_id", "q2"}, {"offer_id", "o2"}});
  const auto after_form = rt.state().events().size();
  CHECK(after_form == events + 3);
  CHECK_ERRC(settle(rt, "c2", pub.key, pub.sealed_payload), Errc::payment_error);
  CHECK(rt.state().events().size() == after_form);
  const auto& s = rt.state().contracts().at("c2").settlement;
  CHECK(s.status == SettlementStatus::payment_pending);
  CHECK_FALSE(s.key_release_tx);

  // the state refuses a key release ahead of payment too
  CHECK_ERRC(rt.submit("seller", TxKind::settle_contract,
                       {{"contract_id", "c2"}, {"step", "key_release"}, {"key_digest", crypto::to_hex(crypto::Digest{})}}),
             Errc::ordering_error);
  CHECK_ERRC(rt.submit("buyer", TxKind::transfer_ownership,
                       {{"contract_id", "c2"}, {"delivered_digest", crypto::to_hex(pub.listing.payload_commitment)}}),
             Errc::ordering_error);
}

TEST_CASE("wrong payload is refunded and disputed") {
  Market m;
  const auto pub = m.list("model weights");
  m.contract(pub.listing, 25);
  const double total = m.rt.state().total_currency();
  auto wrong = pub.sealed_payload;
  wrong.back() ^= 1;
  const auto rec = settle(m.rt, "c1", pub.key, wrong);
  CHECK(rec.status == SettlementStatus::refunded);
  CHECK(rec.refund_tx);
  CHECK_FALSE(rec.ownership_tx);
  const auto& c = m.rt.state().contracts().at("c1");
  CHECK(c.disputed);
  CHECK(c.escrowed == 0.0);
  CHECK(m.rt.state().accounts().balance("buyer") == doctest::Approx(50));
  CHECK(m.rt.state().accounts().balance("seller") == 0.0);
  CHECK(m.rt.state().total_currency() == doctest::Approx(total));
  CHECK_FALSE(m.rt.state().listings().at("L1").holders.contains("buyer"));

  m.rt.seal();
  CHECK(audit(m.rt.state()).empty());
  const auto rep = replay(m.rt.chain());
  CHECK_FALSE(rep.failure);
  CHECK(rep.state.snapshot() == m.rt.state().snapshot());
}

TEST_CASE("wrong key is refunded") {
  Market m;
  const auto pub = m.list("model weights");
  m.contract(pub.listing, 25);
  auto key = pub.key;
  key[3] ^= 1;
  const auto rec = settle(m.rt, "c1", key, pub.sealed_payload);
  CHECK(rec.status == SettlementStatus::refunded);
  CHECK(rec.key_release_tx);
  CHECK(m.rt.state().accounts().balance("buyer") == doctest::Approx(50));
}

TEST_CASE("marketplace events are validated") {
  Market m;
  const auto pub = m.list("model weights");
  auto stolen = pub.listing;
  stolen.id = "L9";
  CHECK_ERRC(m.rt.submit("buyer", TxKind::create_listing, {{"listing", stolen}}), Errc::validation_error);
  stolen.owner = "buyer";
  stolen.tags = {"astrology"};
  CHECK_ERRC(m.rt.submit("buyer", TxKind::create_listing, {{"listing", stolen}}), Errc::lexicon_violation);
  Desideratum off{"o9", "buyer", DesideratumKind::offer, {"ml"}, 1, 15, 40, 9, "L1"};
  CHECK_ERRC(m.rt.submit("buyer", TxKind::post_desideratum, {{"desideratum", off}}), Errc::validation_error);

  auto doc = form_contract("c1", "buyer", "seller", pub.listing, 20, 15, 30, "as is");
  const auto seller_only = sign_contract(doc, ContractParty::seller, m.rt.keys("seller"));
  CHECK_ERRC(m.rt.submit("buyer", TxKind::form_contract,
                         {{"contract", seller_only}, {"request_id", "q1"}, {"offer_id", "o1"}}),
             Errc::unsigned_contract);
  auto both = sign_contract(seller_only, ContractParty::buyer, m.rt.keys("buyer"));
  both.agreed_price = 21;
  CHECK_ERRC(m.rt.submit("buyer", TxKind::form_contract, {{"contract", both}, {"request_id", "q1"}, {"offer_id", "o1"}}),
             Errc::signature_error);
}
