#include "kmarket/ledger.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <json.hpp>

#include "kmarket/error.hpp"

namespace kmarket {

namespace {

constexpr std::array<std::string_view, 14> kKindNames = {
    "RegisterIdentity", "CreateListing", "PostDesideratum", "SubmitProposal", "CastVote",
    "DepositEscrow",    "ReleaseMilestone", "RaiseDispute", "ForfeitBond",   "FormContract",
    "SettleContract",   "TransferOwnership", "CloseVote",   "AbandonProposal",
};

constexpr std::array<std::uint8_t, 8> kChainMagic = {'K', 'M', 'C', 'H', 'A', 'I', 'N', '1'};

class Writer {
public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) out_.push_back(static_cast<std::uint8_t>(v >> s));
  }
  void u64(std::uint64_t v) {
    for (int s = 56; s >= 0; s -= 8) out_.push_back(static_cast<std::uint8_t>(v >> s));
  }
  void raw(std::span<const std::uint8_t> bytes) { out_.insert(out_.end(), bytes.begin(), bytes.end()); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(crypto::as_bytes(s));
  }
  Bytes take() { return std::move(out_); }

private:
  Bytes out_;
};

class Reader {
public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8() { return need(1)[0]; }
  std::uint32_t u32() {
    auto b = need(4);
    std::uint32_t v = 0;
    for (auto x : b) v = v << 8 | x;
    return v;
  }
  std::uint64_t u64() {
    auto b = need(8);
    std::uint64_t v = 0;
    for (auto x : b) v = v << 8 | x;
    return v;
  }
  template <std::size_t N>
  std::array<std::uint8_t, N> fixed() {
    auto b = need(N);
    std::array<std::uint8_t, N> out{};
    std::copy(b.begin(), b.end(), out.begin());
    return out;
  }
  std::span<const std::uint8_t> bytes(std::size_t n) { return need(n); }
  std::string str() {
    auto b = need(u32());
    return std::string(b.begin(), b.end());
  }
  bool done() const noexcept { return pos_ == in_.size(); }
  std::size_t remaining() const noexcept { return in_.size() - pos_; }

private:
  std::span<const std::uint8_t> need(std::size_t n) {
    if (n > remaining()) throw Error(Errc::malformed_record, "truncated record");
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_{0};
};

void write_tx_body(Writer& w, const Transaction& tx) {
  w.u8(static_cast<std::uint8_t>(tx.kind));
  w.str(tx.actor);
  w.raw(tx.payload_digest);
  w.u64(tx.nonce);
}

void write_block(Writer& w, const Block& block) {
  w.u64(block.height);
  w.u64(block.timestamp);
  w.raw(block.prev_hash);
  w.raw(block.tx_root);
  w.u32(static_cast<std::uint32_t>(block.transactions.size()));
  for (const auto& tx : block.transactions) {
    write_tx_body(w, tx);
    w.raw(tx.signature);
  }
}

Transaction read_tx(Reader& r) {
  Transaction tx;
  const auto kind = r.u8();
  if (kind >= kKindNames.size()) throw Error(Errc::malformed_record, "unknown transaction kind");
  tx.kind = static_cast<TxKind>(kind);
  tx.actor = r.str();
  tx.payload_digest = r.fixed<32>();
  tx.nonce = r.u64();
  tx.signature = r.fixed<64>();
  return tx;
}

Block read_block(Reader& r) {
  Block b;
  b.height = r.u64();
  b.timestamp = r.u64();
  b.prev_hash = r.fixed<32>();
  b.tx_root = r.fixed<32>();
  const auto count = r.u32();
  // Each transaction needs at least 109 bytes; reject absurd counts before reserving.
  if (count > r.remaining() / 109 + 1) throw Error(Errc::malformed_record, "transaction count exceeds record");
  for (std::uint32_t i = 0; i < count; ++i) b.transactions.push_back(read_tx(r));
  return b;
}

VerificationReport fail(std::uint64_t height, VerifyCause cause, std::string detail) {
  return VerificationReport{false, height, cause, std::move(detail)};
}

}  // namespace

std::string_view to_string(TxKind kind) noexcept {
  const auto i = static_cast<std::size_t>(kind);
  return i < kKindNames.size() ? kKindNames[i] : "Unknown";
}

std::optional<TxKind> tx_kind_from_string(std::string_view name) noexcept {
  for (std::size_t i = 0; i < kKindNames.size(); ++i)
    if (kKindNames[i] == name) return static_cast<TxKind>(i);
  return std::nullopt;
}

std::string_view to_string(VerifyCause cause) noexcept {
  switch (cause) {
    case VerifyCause::ok: return "ok";
    case VerifyCause::malformed: return "malformed";
    case VerifyCause::height_mismatch: return "height_mismatch";
    case VerifyCause::prev_hash_mismatch: return "prev_hash_mismatch";
    case VerifyCause::timestamp_regression: return "timestamp_regression";
    case VerifyCause::empty_block: return "empty_block";
    case VerifyCause::tx_root_mismatch: return "tx_root_mismatch";
    case VerifyCause::block_hash_mismatch: return "block_hash_mismatch";
    case VerifyCause::unknown_actor: return "unknown_actor";
    case VerifyCause::identity_invalid: return "identity_invalid";
    case VerifyCause::bad_signature: return "bad_signature";
    case VerifyCause::nonce_replay: return "nonce_replay";
    case VerifyCause::payload_mismatch: return "payload_mismatch";
  }
  return "unknown";
}

Bytes canonical_serialize(const Transaction& tx) {
  Writer w;
  write_tx_body(w, tx);
  w.raw(tx.signature);
  return w.take();
}

Bytes canonical_serialize(const Block& block) {
  Writer w;
  write_block(w, block);
  return w.take();
}

Bytes signing_bytes(const Transaction& tx) {
  Writer w;
  write_tx_body(w, tx);
  return w.take();
}

Transaction deserialize_transaction(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  auto tx = read_tx(r);
  if (!r.done()) throw Error(Errc::malformed_record, "trailing bytes after transaction");
  return tx;
}

Block deserialize_block(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  auto block = read_block(r);
  if (!r.done()) throw Error(Errc::malformed_record, "trailing bytes after block");
  block.hash = compute_block_hash(block);
  return block;
}

Digest transaction_digest(const Transaction& tx) { return crypto::sha256(canonical_serialize(tx)); }

Digest compute_tx_root(std::span<const Transaction> txs) {
  Bytes concat;
  concat.reserve(txs.size() * 32);
  for (const auto& tx : txs) {
    const auto d = transaction_digest(tx);
    concat.insert(concat.end(), d.begin(), d.end());
  }
  return crypto::sha256(concat);
}

Digest compute_block_hash(const Block& block) { return crypto::sha256(canonical_serialize(block)); }

Digest PayloadStore::put(Bytes data) {
  const auto digest = crypto::sha256(data);
  entries_.emplace(digest, std::move(data));
  return digest;
}

Digest PayloadStore::put(std::string_view text) {
  auto b = crypto::as_bytes(text);
  return put(Bytes(b.begin(), b.end()));
}

const Bytes* PayloadStore::find(const Digest& digest) const {
  auto it = entries_.find(digest);
  return it == entries_.end() ? nullptr : &it->second;
}

std::optional<std::string> PayloadStore::text(const Digest& digest) const {
  const Bytes* b = find(digest);
  if (!b) return std::nullopt;
  return std::string(b->begin(), b->end());
}

std::string identity_payload(const IdentityRecord& record) {
  nlohmann::json j;
  j["agent"] = record.agent;
  j["public_key"] = crypto::to_hex(record.public_key);
  j["role"] = record.role;
  j["params"] = nlohmann::json::parse(record.params_json);
  return j.dump();
}

std::optional<IdentityRecord> parse_identity_payload(std::string_view json) {
  auto j = nlohmann::json::parse(json, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  if (!j.contains("agent") || !j["agent"].is_string() || !j.contains("public_key") || !j["public_key"].is_string() ||
      !j.contains("role") || !j["role"].is_string())
    return std::nullopt;
  auto key = crypto::fixed_from_hex<32>(j["public_key"].get<std::string>());
  if (!key) return std::nullopt;
  IdentityRecord rec;
  rec.agent = j["agent"].get<std::string>();
  rec.public_key = *key;
  rec.role = j["role"].get<std::string>();
  rec.params_json = j.contains("params") ? j["params"].dump() : "{}";
  return rec;
}

Transaction Signer::sign(TxKind kind, const Digest& payload_digest) {
  Transaction tx;
  tx.kind = kind;
  tx.actor = id_;
  tx.payload_digest = payload_digest;
  tx.nonce = next_nonce_++;
  tx.signature = keys_.sign(signing_bytes(tx));
  return tx;
}

const Block& Chain::append(std::vector<Transaction> txs, Tick timestamp) {
  if (txs.empty()) throw Error(Errc::empty_block, "a block needs at least one transaction");
  if (!blocks_.empty() && timestamp < blocks_.back().timestamp)
    throw Error(Errc::invalid_argument, "block timestamp moves backwards");

  auto keys = keys_;
  auto nonces = nonces_;
  for (const auto& tx : txs) {
    crypto::PublicKey key{};
    if (tx.kind == TxKind::register_identity) {
      if (keys.contains(tx.actor)) throw Error(Errc::replay_error, "identity " + tx.actor + " already registered");
      auto text = payloads_.text(tx.payload_digest);
      auto record = text ? parse_identity_payload(*text) : std::nullopt;
      if (!record || record->agent != tx.actor)
        throw Error(Errc::signature_error, "identity payload for " + tx.actor + " is missing or malformed");
      key = record->public_key;
    } else {
      auto it = keys.find(tx.actor);
      if (it == keys.end()) throw Error(Errc::unknown_actor, "actor " + tx.actor + " has no registered identity");
      key = it->second;
    }
    if (!crypto::verify(key, signing_bytes(tx), tx.signature))
      throw Error(Errc::signature_error, "bad signature from " + tx.actor);
    auto& last = nonces[tx.actor];
    if (tx.nonce <= last)
      throw Error(Errc::replay_error, "nonce " + std::to_string(tx.nonce) + " from " + tx.actor + " is not above " +
                                          std::to_string(last));
    last = tx.nonce;
    keys[tx.actor] = key;
  }

  Block block;
  block.height = blocks_.size();
  block.timestamp = timestamp;
  block.prev_hash = blocks_.empty() ? Digest{} : blocks_.back().hash;
  block.transactions = std::move(txs);
  block.tx_root = compute_tx_root(block.transactions);
  block.hash = compute_block_hash(block);

  blocks_.push_back(std::move(block));
  keys_ = std::move(keys);
  nonces_ = std::move(nonces);
  return blocks_.back();
}

std::optional<crypto::PublicKey> Chain::public_key(const AgentId& actor) const {
  auto it = keys_.find(actor);
  if (it == keys_.end()) return std::nullopt;
  return it->second;
}

std::uint64_t Chain::last_nonce(const AgentId& actor) const {
  auto it = nonces_.find(actor);
  return it == nonces_.end() ? 0 : it->second;
}

Digest Chain::head_hash() const { return blocks_.empty() ? Digest{} : blocks_.back().hash; }

std::size_t Chain::transaction_count() const {
  std::size_t n = 0;
  for (const auto& b : blocks_) n += b.transactions.size();
  return n;
}

Chain Chain::from_parts(std::vector<Block> blocks, PayloadStore payloads) {
  Chain chain;
  chain.blocks_ = std::move(blocks);
  chain.payloads_ = std::move(payloads);
  for (const auto& b : chain.blocks_) {
    for (const auto& tx : b.transactions) {
      if (tx.kind == TxKind::register_identity) {
        auto text = chain.payloads_.text(tx.payload_digest);
        if (auto rec = text ? parse_identity_payload(*text) : std::nullopt) chain.keys_[tx.actor] = rec->public_key;
      }
      auto& n = chain.nonces_[tx.actor];
      n = std::max(n, tx.nonce);
    }
  }
  return chain;
}

VerificationReport verify_chain(const Chain& chain) {
  for (const auto& [digest, data] : chain.payloads().entries())
    if (crypto::sha256(data) != digest)
      return VerificationReport{false, std::nullopt, VerifyCause::payload_mismatch,
                                "payload " + crypto::to_hex(digest) + " does not hash to its address"};

  std::map<AgentId, crypto::PublicKey> keys;
  std::map<AgentId, std::uint64_t> nonces;
  Digest prev{};
  Tick last_time = 0;
  const auto blocks = chain.blocks();
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const Block& b = blocks[i];
    const auto h = static_cast<std::uint64_t>(i);
    if (b.height != h) return fail(h, VerifyCause::height_mismatch, "recorded height " + std::to_string(b.height));
    if (b.prev_hash != prev) return fail(h, VerifyCause::prev_hash_mismatch, "link to predecessor broken");
    if (i > 0 && b.timestamp < last_time) return fail(h, VerifyCause::timestamp_regression, "timestamp moves backwards");
    if (b.transactions.empty()) return fail(h, VerifyCause::empty_block, "block has no transactions");
    if (compute_tx_root(b.transactions) != b.tx_root) return fail(h, VerifyCause::tx_root_mismatch, "tx_root differs");
    const auto recomputed = compute_block_hash(b);
    if (recomputed != b.hash) return fail(h, VerifyCause::block_hash_mismatch, "recorded block hash differs");

    for (const auto& tx : b.transactions) {
      crypto::PublicKey key{};
      if (tx.kind == TxKind::register_identity) {
        auto text = chain.payloads().text(tx.payload_digest);
        auto record = text ? parse_identity_payload(*text) : std::nullopt;
        if (!record || record->agent != tx.actor || keys.contains(tx.actor))
          return fail(h, VerifyCause::identity_invalid, "identity registration for " + tx.actor);
        key = record->public_key;
        keys[tx.actor] = key;
      } else {
        auto it = keys.find(tx.actor);
        if (it == keys.end()) return fail(h, VerifyCause::unknown_actor, tx.actor);
        key = it->second;
      }
      if (!crypto::verify(key, signing_bytes(tx), tx.signature))
        return fail(h, VerifyCause::bad_signature, "signature from " + tx.actor);
      auto& last = nonces[tx.actor];
      if (tx.nonce <= last) return fail(h, VerifyCause::nonce_replay, "nonce from " + tx.actor);
      last = tx.nonce;
    }
    prev = recomputed;
    last_time = b.timestamp;
  }
  return {};
}

Bytes serialize_chain(const Chain& chain) {
  Writer w;
  w.raw(kChainMagic);
  w.u64(chain.blocks().size());
  for (const auto& b : chain.blocks()) {
    write_block(w, b);
    w.raw(b.hash);
  }
  w.u64(chain.payloads().entries().size());
  for (const auto& [digest, data] : chain.payloads().entries()) {
    w.raw(digest);
    w.u32(static_cast<std::uint32_t>(data.size()));
    w.raw(data);
  }
  return w.take();
}

Chain deserialize_chain(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (r.fixed<8>() != kChainMagic) throw Error(Errc::malformed_record, "not a chain image");
  const auto block_count = r.u64();
  if (block_count > r.remaining()) throw Error(Errc::malformed_record, "block count exceeds image");
  std::vector<Block> blocks;
  for (std::uint64_t i = 0; i < block_count; ++i) {
    auto b = read_block(r);
    b.hash = r.fixed<32>();
    blocks.push_back(std::move(b));
  }
  PayloadStore store;
  const auto payload_count = r.u64();
  if (payload_count > r.remaining()) throw Error(Errc::malformed_record, "payload count exceeds image");
  Digest previous{};
  for (std::uint64_t i = 0; i < payload_count; ++i) {
    const auto digest = r.fixed<32>();
    // Entries are written in ascending digest order; anything else is not canonical.
    if (i > 0 && !(previous < digest)) throw Error(Errc::malformed_record, "payload entries out of order");
    previous = digest;
    auto data = r.bytes(r.u32());
    store.insert_unchecked(digest, Bytes(data.begin(), data.end()));
  }
  if (!r.done()) throw Error(Errc::malformed_record, "trailing bytes after chain image");
  return Chain::from_parts(std::move(blocks), std::move(store));
}

}  // namespace kmarket
