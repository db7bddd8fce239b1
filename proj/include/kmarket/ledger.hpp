#pragma once
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kmarket/crypto.hpp"
#include "kmarket/types.hpp"

namespace kmarket {

using crypto::Bytes;
using crypto::Digest;

enum class TxKind : std::uint8_t {
  register_identity = 0,
  create_listing = 1,
  post_desideratum = 2,
  submit_proposal = 3,
  cast_vote = 4,
  deposit_escrow = 5,
  release_milestone = 6,
  raise_dispute = 7,
  forfeit_bond = 8,
  form_contract = 9,
  settle_contract = 10,
  transfer_ownership = 11,
  close_vote = 12,
  abandon_proposal = 13,
};

std::string_view to_string(TxKind kind) noexcept;
std::optional<TxKind> tx_kind_from_string(std::string_view name) noexcept;

struct Transaction {
  TxKind kind{TxKind::register_identity};
  AgentId actor;
  Digest payload_digest{};
  std::uint64_t nonce{0};
  crypto::Signature signature{};

  bool operator==(const Transaction&) const = default;
};

struct Block {
  std::uint64_t height{0};
  Tick timestamp{0};
  Digest prev_hash{};
  Digest tx_root{};
  std::vector<Transaction> transactions;
  // Hash recorded when the block was sealed; verification recomputes and compares.
  Digest hash{};

  bool operator==(const Block&) const = default;
};

// Canonical bytes. Integers are fixed-width big-endian, strings carry a u32 length
// prefix, lists a u32 count prefix, digests and signatures are raw. See docs/formats.md.
Bytes canonical_serialize(const Transaction& tx);
Bytes canonical_serialize(const Block& block);  // header + transactions; excludes the recorded hash
// Bytes covered by the actor's signature: the canonical transaction minus its signature.
Bytes signing_bytes(const Transaction& tx);

Transaction deserialize_transaction(std::span<const std::uint8_t> bytes);
Block deserialize_block(std::span<const std::uint8_t> bytes);  // sets hash to the recomputed value

Digest transaction_digest(const Transaction& tx);
Digest compute_tx_root(std::span<const Transaction> txs);
Digest compute_block_hash(const Block& block);

// Off-block payloads, addressed by their SHA-256.
class PayloadStore {
public:
  Digest put(Bytes data);
  Digest put(std::string_view text);
  const Bytes* find(const Digest& digest) const;
  std::optional<std::string> text(const Digest& digest) const;
  const std::map<Digest, Bytes>& entries() const noexcept { return entries_; }
  // Raw insert used by importers; verify_chain checks the address.
  void insert_unchecked(const Digest& digest, Bytes data) { entries_[digest] = std::move(data); }

private:
  std::map<Digest, Bytes> entries_;
};

struct IdentityRecord {
  AgentId agent;
  crypto::PublicKey public_key{};
  std::string role;
  std::string params_json{"{}"};  // free-form protocol parameters, canonical JSON object
};

std::string identity_payload(const IdentityRecord& record);
std::optional<IdentityRecord> parse_identity_payload(std::string_view json);

// Holds one agent's key and nonce counter; nonces start at 1.
class Signer {
public:
  Signer(AgentId id, crypto::KeyPair keys) : id_(std::move(id)), keys_(std::move(keys)) {}

  const AgentId& id() const noexcept { return id_; }
  const crypto::PublicKey& public_key() const noexcept { return keys_.public_key(); }
  const crypto::KeyPair& keys() const noexcept { return keys_; }

  Transaction sign(TxKind kind, const Digest& payload_digest);
  crypto::Signature sign_bytes(std::span<const std::uint8_t> message) const { return keys_.sign(message); }

private:
  AgentId id_;
  crypto::KeyPair keys_;
  std::uint64_t next_nonce_{1};
};

enum class VerifyCause {
  ok,
  malformed,
  height_mismatch,
  prev_hash_mismatch,
  timestamp_regression,
  empty_block,
  tx_root_mismatch,
  block_hash_mismatch,
  unknown_actor,
  identity_invalid,
  bad_signature,
  nonce_replay,
  payload_mismatch,
};

std::string_view to_string(VerifyCause cause) noexcept;

struct VerificationReport {
  bool ok{true};
  std::optional<std::uint64_t> failing_height;
  VerifyCause cause{VerifyCause::ok};
  std::string detail;
};

// Append-only, single-writer chain. Committed blocks are only reachable as const.
class Chain {
public:
  Chain() = default;

  // Validates signatures, nonces and identity registrations; commits atomically.
  const Block& append(std::vector<Transaction> txs, Tick timestamp);
  Digest put_payload(Bytes data) { return payloads_.put(std::move(data)); }
  Digest put_payload(std::string_view text) { return payloads_.put(text); }

  std::span<const Block> blocks() const noexcept { return blocks_; }
  const PayloadStore& payloads() const noexcept { return payloads_; }
  std::optional<crypto::PublicKey> public_key(const AgentId& actor) const;
  std::uint64_t last_nonce(const AgentId& actor) const;
  Digest head_hash() const;
  std::size_t transaction_count() const;

  // Import without validation; callers follow with verify_chain.
  static Chain from_parts(std::vector<Block> blocks, PayloadStore payloads);

private:
  std::vector<Block> blocks_;
  PayloadStore payloads_;
  std::map<AgentId, crypto::PublicKey> keys_;
  std::map<AgentId, std::uint64_t> nonces_;
};

// Recomputes every link, root, hash, signature and nonce; reports the first violation.
VerificationReport verify_chain(const Chain& chain);

// Whole-chain binary image: blocks with their recorded hashes, then the payload store.
Bytes serialize_chain(const Chain& chain);
Chain deserialize_chain(std::span<const std::uint8_t> bytes);

}  // namespace kmarket
