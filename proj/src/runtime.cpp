#include <json.hpp>

#include "kmarket/protocol.hpp"

namespace kmarket {

void ProtocolRuntime::register_protocol(const AgentId& id, const ProtocolParams& params, const crypto::Seed& seed) {
  register_agent(id, kProtocolRole, params.to_json(), seed);
}

void ProtocolRuntime::register_agent(const AgentId& id, std::string_view role, const nlohmann::json& params,
                                     const crypto::Seed& seed) {
  if (signers_.contains(id)) throw Error(Errc::replay_error, id + " is already registered");
  auto keys = crypto::KeyPair::from_seed(seed);
  IdentityRecord rec{id, keys.public_key(), std::string(role), params.dump()};
  const auto text = identity_payload(rec);
  signers_.emplace(id, Signer(id, std::move(keys)));
  try {
    submit_text(id, TxKind::register_identity, text);
  } catch (...) {
    signers_.erase(id);
    throw;
  }
}

Transaction ProtocolRuntime::submit(const AgentId& actor, TxKind kind, const nlohmann::json& payload) {
  return submit_text(actor, kind, payload.dump());
}

Transaction ProtocolRuntime::submit_text(const AgentId& actor, TxKind kind, const std::string& text) {
  auto it = signers_.find(actor);
  if (it == signers_.end()) throw Error(Errc::unknown_actor, actor + " has no key in this runtime");
  Signer trial = it->second;  // the nonce only advances if the event is accepted
  const auto tx = trial.sign(kind, crypto::sha256(text));
  state_.apply(tx, text, tick_);
  it->second = std::move(trial);
  chain_.put_payload(std::string_view(text));
  pending_.push_back(tx);
  return tx;
}

bool ProtocolRuntime::seal() {
  if (pending_.empty()) return false;
  chain_.append(std::move(pending_), tick_);
  pending_.clear();
  return true;
}

void ProtocolRuntime::set_tick(Tick tick) {
  if (!pending_.empty()) throw Error(Errc::state_error, "seal pending events before advancing the clock");
  if (tick < tick_) throw Error(Errc::ordering_error, "clock cannot move backwards");
  tick_ = tick;
}

const crypto::KeyPair& ProtocolRuntime::keys(const AgentId& id) const {
  auto it = signers_.find(id);
  if (it == signers_.end()) throw Error(Errc::unknown_actor, id + " has no key in this runtime");
  return it->second.keys();
}

SettlementRecord settle(ProtocolRuntime& runtime, const std::string& contract_id, const crypto::SymmetricKey& key,
                        std::span<const std::uint8_t> delivered) {
  const auto& contracts = runtime.state().contracts();
  auto it = contracts.find(contract_id);
  if (it == contracts.end()) throw Error(Errc::validation_error, "unknown contract " + contract_id);
  const ContractDoc doc = it->second.doc;
  const auto commitment = runtime.state().listings().at(doc.listing_id).listing.payload_commitment;
  if (runtime.state().accounts().balance(doc.buyer) < doc.agreed_price)
    throw Error(Errc::payment_error, doc.buyer + " cannot pay " + std::to_string(doc.agreed_price) + " for " +
                                         contract_id);

  runtime.submit(doc.buyer, TxKind::settle_contract, {{"contract_id", contract_id}, {"step", "payment"}});
  runtime.submit(doc.seller, TxKind::settle_contract,
                 {{"contract_id", contract_id},
                  {"step", "key_release"},
                  {"key_digest", crypto::to_hex(crypto::sha256(std::span<const std::uint8_t>(key)))}});

  const auto delivered_digest = crypto::sha256(delivered);
  if (delivered_digest != commitment) {
    runtime.submit(doc.buyer, TxKind::settle_contract,
                   {{"contract_id", contract_id},
                    {"step", "refund"},
                    {"reason", "commitment_mismatch"},
                    {"delivered_digest", crypto::to_hex(delivered_digest)}});
    runtime.submit(doc.buyer, TxKind::raise_dispute, {{"contract_id", contract_id}, {"reason", "commitment_mismatch"}});
  } else if (!crypto::open(key, delivered)) {
    runtime.submit(doc.buyer, TxKind::settle_contract,
                   {{"contract_id", contract_id}, {"step", "refund"}, {"reason", "key_mismatch"}});
    runtime.submit(doc.buyer, TxKind::raise_dispute, {{"contract_id", contract_id}, {"reason", "key_mismatch"}});
  } else {
    runtime.submit(doc.buyer, TxKind::transfer_ownership,
                   {{"contract_id", contract_id}, {"delivered_digest", crypto::to_hex(delivered_digest)}});
  }
  return runtime.state().contracts().at(contract_id).settlement;
}

}  // namespace kmarket
