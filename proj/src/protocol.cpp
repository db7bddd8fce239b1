#include "kmarket/protocol.hpp"

#include <cmath>
#include <limits>

#include "kmarket/codec.hpp"

namespace kmarket {

namespace {

Weighting weighting_from(const std::string& s) {
  if (s == "stake") return Weighting::stake;
  if (s == "per_capita") return Weighting::per_capita;
  throw Error(Errc::validation_error, "weighting must be stake|per_capita");
}

}  // namespace

TallyOptions ProtocolParams::tally_options() const {
  TallyOptions o;
  o.threshold = threshold;
  o.weighting = weighting;
  o.quorum_weight = quorum_weight;
  return o;
}

nlohmann::json ProtocolParams::to_json() const {
  return Json{{"tau", tau},
              {"patience", patience},
              {"threshold", threshold},
              {"weighting", weighting == Weighting::stake ? "stake" : "per_capita"},
              {"quorum_weight", quorum_weight ? Json(*quorum_weight) : Json(nullptr)},
              {"floor", floor},
              {"exhaustive_cap", exhaustive_cap},
              {"team_size", {{"min", min_team}, {"max", max_team}}},
              {"initial_deposit_fraction", initial_deposit_fraction},
              {"max_versions", max_versions},
              {"lexicon", lexicon.terms()}};
}

ProtocolParams ProtocolParams::from_json(const nlohmann::json& j) {
  ProtocolParams p;
  p.tau = j.value("tau", p.tau);
  p.patience = j.value("patience", p.patience);
  p.threshold = j.value("threshold", p.threshold);
  p.weighting = weighting_from(j.value("weighting", std::string("stake")));
  if (j.contains("quorum_weight") && !j["quorum_weight"].is_null()) p.quorum_weight = j["quorum_weight"].get<double>();
  p.floor = j.value("floor", p.floor);
  p.exhaustive_cap = j.value("exhaustive_cap", p.exhaustive_cap);
  if (j.contains("team_size")) {
    p.min_team = j["team_size"].value("min", p.min_team);
    p.max_team = j["team_size"].value("max", p.max_team);
  }
  p.initial_deposit_fraction = j.value("initial_deposit_fraction", p.initial_deposit_fraction);
  p.max_versions = j.value("max_versions", p.max_versions);
  if (j.contains("lexicon")) p.lexicon = Lexicon(j["lexicon"].get<std::map<std::string, std::string>>());

  if (!(p.tau >= 0.0)) throw Error(Errc::validation_error, "tau must be >= 0");
  if (p.patience == 0) throw Error(Errc::validation_error, "patience must be >= 1");
  if (!(p.threshold > 0.0 && p.threshold <= 1.0)) throw Error(Errc::validation_error, "threshold must lie in (0, 1]");
  if (!(p.floor > 0.0 && p.floor < 0.5)) throw Error(Errc::validation_error, "floor must lie in (0, 0.5)");
  if (p.min_team == 0 || p.max_team < p.min_team) throw Error(Errc::validation_error, "invalid team size range");
  if (!(p.initial_deposit_fraction >= kGuaranteedFraction && p.initial_deposit_fraction <= 1.0))
    throw Error(Errc::validation_error, "initial deposit fraction must lie in [0.3, 1]");
  if (p.max_versions == 0) throw Error(Errc::validation_error, "max_versions must be >= 1");
  return p;
}

std::string_view to_string(RoundKind kind) noexcept {
  switch (kind) {
    case RoundKind::proposal: return "proposal";
    case RoundKind::milestone: return "milestone";
    case RoundKind::forfeit: return "forfeit";
    case RoundKind::abandon: return "abandon";
  }
  return "unknown";
}

TallyOptions round_tally_options(const ProtocolParams& params, RoundKind kind) {
  auto o = params.tally_options();
  o.require_reasons = kind == RoundKind::proposal;
  return o;
}

std::string proposal_round_id(const std::string& proposal_id, std::uint32_t version) {
  return "proposal:" + proposal_id + ":v" + std::to_string(version);
}
std::string milestone_round_id(const std::string& proposal_id, std::size_t milestone, std::size_t attempt) {
  return "milestone:" + proposal_id + ":" + std::to_string(milestone) + ":" + std::to_string(attempt);
}
std::string forfeit_round_id(const std::string& proposal_id, std::size_t n) {
  return "forfeit:" + proposal_id + ":" + std::to_string(n);
}
std::string abandon_round_id(const std::string& proposal_id, std::size_t n) {
  return "abandon:" + proposal_id + ":" + std::to_string(n);
}

double VoteRound::aggregate_score() const {
  if (ballots.empty()) return 0.0;
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < ballots.size(); ++i) {
    if (std::isinf(scores[i])) return std::numeric_limits<double>::infinity();
    num += ballots[i].weight * scores[i];
    den += ballots[i].weight;
  }
  if (den > 0.0) return num / den;
  double sum = 0.0;
  for (double s : scores) sum += s;
  return sum / static_cast<double>(scores.size());
}

const ProtocolParams& ProtocolState::params() const {
  if (!params_) throw Error(Errc::state_error, "protocol identity not registered");
  return *params_;
}

const AgentId& ProtocolState::protocol_id() const {
  if (!protocol_) throw Error(Errc::state_error, "protocol identity not registered");
  return *protocol_;
}

const Identity& ProtocolState::identity(const AgentId& id, std::string_view role) const {
  auto it = identities_.find(id);
  if (it == identities_.end()) throw Error(Errc::unknown_actor, id + " is not registered");
  if (!role.empty() && it->second.role != role)
    throw Error(Errc::validation_error, id + " acts as " + std::string(role) + " but is registered as " + it->second.role);
  return it->second;
}

void ProtocolState::require_protocol_actor(const Transaction& tx) const {
  if (tx.actor != protocol_id())
    throw Error(Errc::validation_error, std::string(to_string(tx.kind)) + " may only be issued by the protocol");
}

void ProtocolState::apply(const Transaction& tx, const std::string& payload, Tick tick) {
  Json p;
  try {
    p = Json::parse(payload);
  } catch (const Json::exception& e) {
    throw Error(Errc::malformed_record, std::string("payload is not JSON: ") + e.what());
  }
  if (!p.is_object()) throw Error(Errc::malformed_record, "payload must be a JSON object");

  // Work on a copy so a rejected event leaves no partial effect. The event log is
  // append-only and is kept out of the copy.
  auto log = std::move(events_);
  events_.clear();
  ProtocolState next = *this;
  events_ = std::move(log);

  AppliedEvent ev{events_.size(), tick, tx.kind, tx.actor, transaction_digest(tx), {}, {}};
  try {
    if (tx.kind != TxKind::register_identity) {
      if (!protocol_) throw Error(Errc::state_error, "protocol identity not registered");
      identity(tx.actor, "");
    }
    switch (tx.kind) {
      case TxKind::register_identity: next.on_register(tx, p, ev); break;
      case TxKind::submit_proposal: next.on_submit_proposal(tx, p, tick, ev); break;
      case TxKind::cast_vote: next.on_cast_vote(tx, p, ev); break;
      case TxKind::close_vote: next.on_close_vote(tx, p, tick, ev); break;
      case TxKind::deposit_escrow: next.on_deposit(tx, p, tick, ev); break;
      case TxKind::release_milestone: next.on_release(tx, p, tick, ev); break;
      case TxKind::raise_dispute: next.on_raise_dispute(tx, p, ev); break;
      case TxKind::forfeit_bond: next.on_forfeit_bond(tx, p, ev); break;
      case TxKind::abandon_proposal: next.on_abandon(tx, p, ev); break;
      case TxKind::create_listing: next.on_create_listing(tx, p, ev); break;
      case TxKind::post_desideratum: next.on_post_desideratum(tx, p, ev); break;
      case TxKind::form_contract: next.on_form_contract(tx, p, tick, ev); break;
      case TxKind::settle_contract: next.on_settle(tx, p, ev); break;
      case TxKind::transfer_ownership: next.on_transfer_ownership(tx, p, ev); break;
    }
  } catch (const Json::exception& e) {
    throw Error(Errc::malformed_record, std::string(to_string(tx.kind)) + " payload: " + e.what());
  }
  next.events_ = std::move(events_);
  next.events_.push_back(std::move(ev));
  *this = std::move(next);
}

void ProtocolState::on_register(const Transaction& tx, const Json& p, AppliedEvent& ev) {
  auto rec = parse_identity_payload(p.dump());
  if (!rec) throw Error(Errc::malformed_record, "identity payload");
  if (rec->agent != tx.actor) throw Error(Errc::validation_error, "identity " + rec->agent + " registered by " + tx.actor);
  if (identities_.contains(rec->agent)) throw Error(Errc::replay_error, rec->agent + " is already registered");
  const Json params = Json::parse(rec->params_json);

  Identity id{rec->agent, rec->public_key, rec->role, 0.0};
  Amount balance = 0.0;
  if (rec->role == kProtocolRole) {
    if (protocol_) throw Error(Errc::validation_error, "a protocol identity already exists");
    params_ = ProtocolParams::from_json(params);
    protocol_ = rec->agent;
  } else if (rec->role == kResearcherRole || rec->role == kInvestorRole) {
    if (!protocol_) throw Error(Errc::state_error, "protocol identity must be registered first");
    balance = params.value("balance", 0.0);
    if (rec->role == kInvestorRole) id.stake = params.value("stake", balance);
    if (!(balance >= 0.0) || !std::isfinite(balance) || !(id.stake >= 0.0) || !std::isfinite(id.stake))
      throw Error(Errc::validation_error, "balance and stake must be finite and >= 0");
  } else {
    throw Error(Errc::validation_error, "unknown role " + rec->role);
  }
  accounts_.open(rec->agent, balance);
  identities_.emplace(rec->agent, std::move(id));
  ev.subject = rec->agent;
  ev.detail = rec->role;
}

Amount ProtocolState::total_currency() const {
  Amount total = accounts_.total();
  for (const auto& [id, rec] : proposals_) total += rec.funding.escrow.balance();
  for (const auto& [id, c] : contracts_) total += c.escrowed;
  return total;
}

Json ProtocolState::snapshot() const {
  Json j;
  j["protocol"] = protocol_ ? Json(*protocol_) : Json(nullptr);
  j["params"] = params_ ? params_->to_json() : Json(nullptr);
  Json ids = Json::object();
  for (const auto& [id, v] : identities_)
    ids[id] = {{"public_key", crypto::to_hex(v.key)}, {"role", v.role}, {"stake", v.stake}};
  j["identities"] = ids;
  j["balances"] = accounts_.balances();
  j["receipts"] = receipts_;

  Json props = Json::object();
  for (const auto& [id, r] : proposals_) {
    props[id] = {{"proposal", r.funding.proposal},
                 {"escrow", r.funding.escrow},
                 {"dispute", r.funding.dispute},
                 {"contributions", r.contributions},
                 {"submitted_at", r.submitted_at},
                 {"funded_at", r.funded_at ? Json(*r.funded_at) : Json(nullptr)},
                 {"closed_at", r.closed_at ? Json(*r.closed_at) : Json(nullptr)},
                 {"milestone_rounds", r.milestone_rounds},
                 {"forfeit_rounds", r.forfeit_rounds},
                 {"abandon_rounds", r.abandon_rounds},
                 {"ever_disputed", r.ever_disputed},
                 {"paid_out", r.paid_out}};
  }
  j["proposals"] = props;

  Json rounds = Json::object();
  for (const auto& [id, r] : rounds_) {
    Json scores = Json::array();
    for (double s : r.scores) scores.push_back(score_to_json(s));
    rounds[id] = {{"kind", std::string(to_string(r.kind))},
                  {"proposal_id", r.proposal_id},
                  {"milestone", r.milestone},
                  {"ballots", r.ballots},
                  {"scores", scores},
                  {"result", r.result ? Json(*r.result) : Json(nullptr)},
                  {"consumed", r.consumed}};
  }
  j["rounds"] = rounds;

  Json listings = Json::object();
  for (const auto& [id, l] : listings_) listings[id] = {{"listing", l.listing}, {"holders", l.holders}};
  j["listings"] = listings;
  Json des = Json::object();
  for (const auto& [id, d] : desiderata_) des[id] = {{"desideratum", d.desideratum}, {"open", d.open}};
  j["desiderata"] = des;
  Json contracts = Json::object();
  for (const auto& [id, c] : contracts_) {
    contracts[id] = {{"contract", c.doc},
                     {"request_id", c.request_id},
                     {"offer_id", c.offer_id},
                     {"settlement", c.settlement},
                     {"escrowed", c.escrowed},
                     {"delivered_digest", c.delivered_digest ? Json(crypto::to_hex(*c.delivered_digest)) : Json(nullptr)},
                     {"disputed", c.disputed},
                     {"formed_at", c.formed_at}};
  }
  j["contracts"] = contracts;

  Json events = Json::array();
  for (const auto& e : events_) {
    events.push_back({{"sequence", e.sequence},
                      {"tick", e.tick},
                      {"kind", std::string(to_string(e.kind))},
                      {"actor", e.actor},
                      {"tx", crypto::to_hex(e.tx_digest)},
                      {"subject", e.subject},
                      {"detail", e.detail}});
  }
  j["events"] = events;
  j["total_currency"] = total_currency();
  return j;
}

}  // namespace kmarket
