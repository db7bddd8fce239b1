#pragma once
#include <json.hpp>

#include "kmarket/governance.hpp"
#include "kmarket/marketplace.hpp"

// JSON forms of the records that travel in ledger payloads and state snapshots.
// Digests, keys and signatures are lowercase hex; absent optionals are null.
namespace kmarket {

using Json = nlohmann::json;

void to_json(Json& j, const CostLine& v);
void from_json(const Json& j, CostLine& v);
void to_json(Json& j, const Milestone& v);
void from_json(const Json& j, Milestone& v);
void to_json(Json& j, const CvEntry& v);
void from_json(const Json& j, CvEntry& v);
void to_json(Json& j, const RejectionReason& v);
void from_json(const Json& j, RejectionReason& v);
void to_json(Json& j, const ReviewRound& v);
void from_json(const Json& j, ReviewRound& v);
void to_json(Json& j, const Proposal& v);
void from_json(const Json& j, Proposal& v);
void to_json(Json& j, const Ballot& v);
void to_json(Json& j, const TallyResult& v);
void to_json(Json& j, const EscrowAccount& v);
void to_json(Json& j, const DisputeState& v);
void to_json(Json& j, const Revisions& v);
void from_json(const Json& j, Revisions& v);
void to_json(Json& j, const Listing& v);
void from_json(const Json& j, Listing& v);
void to_json(Json& j, const Desideratum& v);
void from_json(const Json& j, Desideratum& v);
void to_json(Json& j, const ContractDoc& v);
void from_json(const Json& j, ContractDoc& v);
void to_json(Json& j, const SettlementRecord& v);

// Scores may be +inf; JSON has no infinity, so it travels as the string "inf".
Json score_to_json(double score);
double score_from_json(const Json& j);

template <std::size_t N>
std::array<std::uint8_t, N> hex_array(const Json& j) {
  auto v = crypto::fixed_from_hex<N>(j.get<std::string>());
  if (!v) throw Error(Errc::parse_error, "expected " + std::to_string(N) + " hex-encoded bytes");
  return *v;
}

}  // namespace kmarket
