#include "kmarket/codec.hpp"

#include <limits>

namespace kmarket {

namespace {

template <typename T>
Json opt(const std::optional<T>& v) {
  return v ? Json(*v) : Json(nullptr);
}

Json opt_hex(const std::optional<crypto::Digest>& v) { return v ? Json(crypto::to_hex(*v)) : Json(nullptr); }

}  // namespace

void to_json(Json& j, const CostLine& v) { j = Json{{"label", v.label}, {"amount", v.amount}}; }
void from_json(const Json& j, CostLine& v) {
  v.label = j.at("label").get<std::string>();
  v.amount = j.at("amount").get<double>();
}

void to_json(Json& j, const Milestone& v) {
  j = Json{{"index", v.index},
           {"description", v.description},
           {"amount", v.amount},
           {"deadline", v.deadline},
           {"state", std::string(to_string(v.state))}};
}
void from_json(const Json& j, Milestone& v) {
  v.index = j.at("index").get<std::size_t>();
  v.description = j.value("description", "");
  v.amount = j.at("amount").get<double>();
  v.deadline = j.value("deadline", Tick{0});
  const auto state = j.value("state", "Pending");
  v.state = state == "Released"    ? MilestoneState::released
            : state == "Disputed"  ? MilestoneState::disputed
            : state == "UnderVote" ? MilestoneState::under_vote
                                   : MilestoneState::pending;
}

void to_json(Json& j, const CvEntry& v) {
  j = Json{{"member", v.member},
           {"cv_digest", crypto::to_hex(v.cv_digest)},
           {"public_key", crypto::to_hex(v.public_key)},
           {"signature", v.signature ? Json(crypto::to_hex(*v.signature)) : Json(nullptr)}};
}
void from_json(const Json& j, CvEntry& v) {
  v.member = j.at("member").get<std::string>();
  v.cv_digest = hex_array<32>(j.at("cv_digest"));
  v.public_key = hex_array<32>(j.at("public_key"));
  v.signature.reset();
  if (j.contains("signature") && !j["signature"].is_null()) v.signature = hex_array<64>(j["signature"]);
}

void to_json(Json& j, const RejectionReason& v) {
  j = Json{{"section", v.section ? Json(std::string(to_string(*v.section))) : Json(nullptr)}, {"text", v.text}};
}
void from_json(const Json& j, RejectionReason& v) {
  v.section.reset();
  if (j.contains("section") && !j["section"].is_null()) {
    v.section = section_from_string(j["section"].get<std::string>());
    if (!v.section) throw Error(Errc::parse_error, "unknown section " + j["section"].get<std::string>());
  }
  v.text = j.value("text", "");
}

void to_json(Json& j, const ReviewRound& v) { j = Json{{"version", v.version}, {"reasons", v.reasons}}; }
void from_json(const Json& j, ReviewRound& v) {
  v.version = j.at("version").get<std::uint32_t>();
  v.reasons = j.at("reasons").get<std::vector<RejectionReason>>();
}

void to_json(Json& j, const Proposal& v) {
  j = Json{{"id", v.id},
           {"version", v.version},
           {"title", v.title},
           {"introduction", v.introduction},
           {"literature_review", v.literature_review},
           {"methodology", v.methodology},
           {"plan", v.plan},
           {"budget", v.budget},
           {"team", v.team},
           {"state", std::string(to_string(v.state))},
           {"rejection_reasons", v.rejection_reasons},
           {"history", v.history}};
}
void from_json(const Json& j, Proposal& v) {
  v.id = j.at("id").get<std::string>();
  v.version = j.value("version", 1u);
  v.title = j.value("title", "");
  v.introduction = j.value("introduction", "");
  v.literature_review = j.value("literature_review", "");
  v.methodology = j.value("methodology", "");
  v.plan = j.value("plan", std::vector<Milestone>{});
  v.budget = j.value("budget", std::vector<CostLine>{});
  v.team = j.value("team", std::vector<CvEntry>{});
  auto state = proposal_state_from_string(j.value("state", "Draft"));
  if (!state) throw Error(Errc::parse_error, "unknown proposal state");
  v.state = *state;
  v.rejection_reasons = j.value("rejection_reasons", std::vector<RejectionReason>{});
  v.history = j.value("history", std::vector<ReviewRound>{});
}

void to_json(Json& j, const Ballot& v) {
  j = Json{{"voter", v.voter},
           {"proposal_id", v.proposal_id},
           {"choice", v.choice == VoteChoice::yes ? "yes" : "no"},
           {"weight", v.weight},
           {"reason", opt(v.reason)}};
}

void to_json(Json& j, const TallyResult& v) {
  j = Json{{"outcome", std::string(to_string(v.outcome))},
           {"yes_weight", v.yes_weight},
           {"no_weight", v.no_weight},
           {"reasons", v.reasons}};
}

void to_json(Json& j, const EscrowAccount& v) {
  j = Json{{"proposal_id", v.proposal_id}, {"promised", v.promised}, {"deposited", v.deposited},
           {"released", v.released},       {"returned", v.returned}, {"guaranteed_min", v.guaranteed_min}};
}

void to_json(Json& j, const DisputeState& v) {
  Json rounds = Json::array();
  for (double r : v.rounds) rounds.push_back(score_to_json(r));
  j = Json{{"proposal_id", v.proposal_id},
           {"rounds", rounds},
           {"threshold", v.threshold},
           {"patience", v.patience},
           {"status", std::string(to_string(v.status))},
           {"window_start", v.window_start}};
}

void to_json(Json& j, const Revisions& v) {
  j = Json::object();
  if (v.title) j["title"] = *v.title;
  if (v.introduction) j["introduction"] = *v.introduction;
  if (v.literature_review) j["literature_review"] = *v.literature_review;
  if (v.methodology) j["methodology"] = *v.methodology;
  if (v.plan) j["plan"] = *v.plan;
  if (v.budget) j["budget"] = *v.budget;
  if (v.team) j["team"] = *v.team;
}
void from_json(const Json& j, Revisions& v) {
  v = Revisions{};
  if (j.contains("title")) v.title = j["title"].get<std::string>();
  if (j.contains("introduction")) v.introduction = j["introduction"].get<std::string>();
  if (j.contains("literature_review")) v.literature_review = j["literature_review"].get<std::string>();
  if (j.contains("methodology")) v.methodology = j["methodology"].get<std::string>();
  if (j.contains("plan")) v.plan = j["plan"].get<std::vector<Milestone>>();
  if (j.contains("budget")) v.budget = j["budget"].get<std::vector<CostLine>>();
  if (j.contains("team")) v.team = j["team"].get<std::vector<CvEntry>>();
}

void to_json(Json& j, const Listing& v) {
  j = Json{{"id", v.id},
           {"owner", v.owner},
           {"tags", v.tags},
           {"description", v.description},
           {"payload_commitment", crypto::to_hex(v.payload_commitment)},
           {"ask_price", v.ask_price}};
}
void from_json(const Json& j, Listing& v) {
  v.id = j.at("id").get<std::string>();
  v.owner = j.at("owner").get<std::string>();
  v.tags = j.at("tags").get<std::vector<std::string>>();
  v.description = j.value("description", "");
  v.payload_commitment = hex_array<32>(j.at("payload_commitment"));
  v.ask_price = j.at("ask_price").get<double>();
}

void to_json(Json& j, const Desideratum& v) {
  j = Json{{"id", v.id},
           {"agent", v.agent},
           {"kind", v.kind == DesideratumKind::request ? "request" : "offer"},
           {"tags", v.tags},
           {"quantity", v.quantity},
           {"price_min", v.price_min},
           {"price_max", v.price_max},
           {"deadline", v.deadline},
           {"listing_id", v.listing_id}};
}
void from_json(const Json& j, Desideratum& v) {
  v.id = j.at("id").get<std::string>();
  v.agent = j.at("agent").get<std::string>();
  const auto kind = j.at("kind").get<std::string>();
  if (kind != "request" && kind != "offer") throw Error(Errc::parse_error, "desideratum kind must be request|offer");
  v.kind = kind == "request" ? DesideratumKind::request : DesideratumKind::offer;
  v.tags = j.at("tags").get<std::vector<std::string>>();
  v.quantity = j.value("quantity", 1u);
  v.price_min = j.at("price_min").get<double>();
  v.price_max = j.at("price_max").get<double>();
  v.deadline = j.at("deadline").get<Tick>();
  v.listing_id = j.value("listing_id", "");
}

void to_json(Json& j, const ContractDoc& v) {
  j = Json{{"id", v.id},
           {"buyer", v.buyer},
           {"seller", v.seller},
           {"listing_id", v.listing_id},
           {"agreed_price", v.agreed_price},
           {"terms_digest", crypto::to_hex(v.terms_digest)},
           {"buyer_signature", v.buyer_signature ? Json(crypto::to_hex(*v.buyer_signature)) : Json(nullptr)},
           {"seller_signature", v.seller_signature ? Json(crypto::to_hex(*v.seller_signature)) : Json(nullptr)}};
}
void from_json(const Json& j, ContractDoc& v) {
  v.id = j.at("id").get<std::string>();
  v.buyer = j.at("buyer").get<std::string>();
  v.seller = j.at("seller").get<std::string>();
  v.listing_id = j.at("listing_id").get<std::string>();
  v.agreed_price = j.at("agreed_price").get<double>();
  v.terms_digest = hex_array<32>(j.at("terms_digest"));
  v.buyer_signature.reset();
  v.seller_signature.reset();
  if (j.contains("buyer_signature") && !j["buyer_signature"].is_null())
    v.buyer_signature = hex_array<64>(j["buyer_signature"]);
  if (j.contains("seller_signature") && !j["seller_signature"].is_null())
    v.seller_signature = hex_array<64>(j["seller_signature"]);
}

void to_json(Json& j, const SettlementRecord& v) {
  j = Json{{"contract_id", v.contract_id},
           {"payment_tx", opt_hex(v.payment_tx)},
           {"key_release_tx", opt_hex(v.key_release_tx)},
           {"ownership_tx", opt_hex(v.ownership_tx)},
           {"refund_tx", opt_hex(v.refund_tx)},
           {"key_digest", opt_hex(v.key_digest)},
           {"status", std::string(to_string(v.status))}};
}

Json score_to_json(double score) {
  if (std::isinf(score)) return "inf";
  return score;
}

double score_from_json(const Json& j) {
  if (j.is_string() && j.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
  if (j.is_number()) return j.get<double>();
  if (j.is_null()) return 0.0;
  throw Error(Errc::parse_error, "score must be a number or \"inf\"");
}

}  // namespace kmarket
