// Marketplace events: listings, desiderata, contracts and settlement.
#include <algorithm>

#include "kmarket/codec.hpp"
#include "kmarket/protocol.hpp"

namespace kmarket {

namespace {

ContractRecord& find_contract(std::map<std::string, ContractRecord>& contracts, const std::string& id) {
  auto it = contracts.find(id);
  if (it == contracts.end()) throw Error(Errc::validation_error, "unknown contract " + id);
  return it->second;
}

}  // namespace

void ProtocolState::on_create_listing(const Transaction& tx, const Json& p, AppliedEvent& ev) {
  auto listing = p.at("listing").get<Listing>();
  if (listing.owner != tx.actor) throw Error(Errc::validation_error, "listing owner must be the signer");
  validate_listing(listing, params().lexicon);
  if (listings_.contains(listing.id)) throw Error(Errc::validation_error, "listing " + listing.id + " already exists");
  ev.subject = listing.id;
  const auto id = listing.id;
  listings_.emplace(id, ListingRecord{std::move(listing), {}});
}

void ProtocolState::on_post_desideratum(const Transaction& tx, const Json& p, AppliedEvent& ev) {
  auto d = p.at("desideratum").get<Desideratum>();
  if (d.agent != tx.actor) throw Error(Errc::validation_error, "desideratum agent must be the signer");
  validate_desideratum(d, params().lexicon);
  if (desiderata_.contains(d.id)) throw Error(Errc::validation_error, "desideratum " + d.id + " already exists");
  if (d.kind == DesideratumKind::offer) {
    auto it = listings_.find(d.listing_id);
    if (it == listings_.end() || it->second.listing.owner != d.agent)
      throw Error(Errc::validation_error, "offer " + d.id + " names a listing its agent does not own");
  }
  ev.subject = d.id;
  ev.detail = d.kind == DesideratumKind::request ? "request" : "offer";
  const auto id = d.id;
  desiderata_.emplace(id, DesiderataRecord{std::move(d), true});
}

void ProtocolState::on_form_contract(const Transaction& tx, const Json& p, Tick tick, AppliedEvent& ev) {
  auto doc = p.at("contract").get<ContractDoc>();
  const auto request_id = p.at("request_id").get<std::string>();
  const auto offer_id = p.at("offer_id").get<std::string>();
  if (doc.buyer != tx.actor) throw Error(Errc::validation_error, "contracts are submitted by the buyer");
  if (doc.buyer == doc.seller) throw Error(Errc::validation_error, "buyer and seller must differ");
  if (contracts_.contains(doc.id)) throw Error(Errc::validation_error, "contract " + doc.id + " already exists");

  auto req = desiderata_.find(request_id);
  auto off = desiderata_.find(offer_id);
  if (req == desiderata_.end() || !req->second.open || req->second.desideratum.kind != DesideratumKind::request ||
      req->second.desideratum.agent != doc.buyer)
    throw Error(Errc::validation_error, "request " + request_id + " is not an open request of " + doc.buyer);
  if (off == desiderata_.end() || !off->second.open || off->second.desideratum.kind != DesideratumKind::offer ||
      off->second.desideratum.agent != doc.seller || off->second.desideratum.listing_id != doc.listing_id)
    throw Error(Errc::validation_error, "offer " + offer_id + " is not an open offer of " + doc.listing_id);
  if (tick > req->second.desideratum.deadline || tick > off->second.desideratum.deadline)
    throw Error(Errc::validation_error, "desideratum deadline has passed");

  const auto& r = req->second.desideratum;
  const auto& o = off->second.desideratum;
  const Amount low = std::max(r.price_min, o.price_min);
  const Amount high = std::min(r.price_max, o.price_max);
  if (!(doc.agreed_price >= low && doc.agreed_price <= high))
    throw Error(Errc::price_out_of_bounds, "agreed price outside the overlap of " + request_id + " and " + offer_id);
  verify_contract(doc, identity(doc.buyer, "").key, identity(doc.seller, "").key);

  req->second.open = false;
  off->second.open = false;
  ContractRecord rec;
  rec.doc = doc;
  rec.request_id = request_id;
  rec.offer_id = offer_id;
  rec.settlement.contract_id = doc.id;
  rec.formed_at = tick;
  ev.subject = doc.id;
  contracts_.emplace(doc.id, std::move(rec));
}

void ProtocolState::on_settle(const Transaction& tx, const Json& p, AppliedEvent& ev) {
  const auto cid = p.at("contract_id").get<std::string>();
  const auto step = p.at("step").get<std::string>();
  auto& c = find_contract(contracts_, cid);
  auto& s = c.settlement;

  if (step == "payment") {
    if (tx.actor != c.doc.buyer) throw Error(Errc::validation_error, "payment must come from the buyer");
    if (s.status != SettlementStatus::payment_pending || s.payment_tx)
      throw Error(Errc::state_error, "contract " + cid + " is not awaiting payment");
    accounts_.debit(c.doc.buyer, c.doc.agreed_price);
    c.escrowed = c.doc.agreed_price;
    s.payment_tx = ev.tx_digest;
  } else if (step == "key_release") {
    if (tx.actor != c.doc.seller) throw Error(Errc::validation_error, "key release must come from the seller");
    if (s.status != SettlementStatus::payment_pending || !s.payment_tx)
      throw Error(Errc::ordering_error, "key release on " + cid + " before payment");
    s.key_digest = hex_array<32>(p.at("key_digest"));
    s.key_release_tx = ev.tx_digest;
    s.status = SettlementStatus::key_released;
  } else if (step == "refund") {
    if (tx.actor != c.doc.buyer) throw Error(Errc::validation_error, "refunds are claimed by the buyer");
    if (!s.payment_tx || (s.status != SettlementStatus::payment_pending && s.status != SettlementStatus::key_released))
      throw Error(Errc::state_error, "contract " + cid + " has nothing to refund");
    const auto reason = p.at("reason").get<std::string>();
    if (reason == "commitment_mismatch") {
      const auto delivered = hex_array<32>(p.at("delivered_digest"));
      if (delivered == listings_.at(c.doc.listing_id).listing.payload_commitment)
        throw Error(Errc::validation_error, "delivered payload matches the commitment");
      c.delivered_digest = delivered;
    } else if (reason != "key_mismatch") {
      throw Error(Errc::validation_error, "refund reason must be commitment_mismatch|key_mismatch");
    }
    accounts_.credit(c.doc.buyer, c.escrowed);
    c.escrowed = 0.0;
    s.refund_tx = ev.tx_digest;
    s.status = SettlementStatus::refunded;
  } else {
    throw Error(Errc::validation_error, "settlement step must be payment|key_release|refund");
  }
  ev.subject = cid;
  ev.detail = step;
}

void ProtocolState::on_transfer_ownership(const Transaction& tx, const Json& p, AppliedEvent& ev) {
  const auto cid = p.at("contract_id").get<std::string>();
  auto& c = find_contract(contracts_, cid);
  if (tx.actor != c.doc.buyer) throw Error(Errc::validation_error, "ownership transfer is confirmed by the buyer");
  if (c.settlement.status != SettlementStatus::key_released)
    throw Error(Errc::ordering_error, "ownership transfer on " + cid + " before key release");
  const auto delivered = hex_array<32>(p.at("delivered_digest"));
  auto& listing = listings_.at(c.doc.listing_id);
  if (delivered != listing.listing.payload_commitment)
    throw Error(Errc::validation_error, "delivered payload does not match the commitment of " + c.doc.listing_id);
  accounts_.credit(c.doc.seller, c.escrowed);
  c.escrowed = 0.0;
  c.delivered_digest = delivered;
  listing.holders.insert(c.doc.buyer);
  c.settlement.ownership_tx = ev.tx_digest;
  c.settlement.status = SettlementStatus::complete;
  ev.subject = cid;
}

}  // namespace kmarket
