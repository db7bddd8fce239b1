#pragma once
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "kmarket/crypto.hpp"
#include "kmarket/skill_space.hpp"
#include "kmarket/types.hpp"

namespace kmarket {

// Controlled vocabulary shared by all listings and desiderata.
class Lexicon {
public:
  Lexicon() = default;
  explicit Lexicon(std::map<std::string, std::string> terms);

  bool contains(const std::string& term) const { return terms_.contains(term); }
  const std::map<std::string, std::string>& terms() const noexcept { return terms_; }
  // Taxonomy over the terms (sorted), used to score tag overlap.
  TaxonomyPtr taxonomy() const;

private:
  std::map<std::string, std::string> terms_;
  TaxonomyPtr taxonomy_;  // null below 3 terms
};

struct Listing {
  std::string id;
  AgentId owner;
  std::vector<std::string> tags;
  std::string description;
  crypto::Digest payload_commitment{};  // SHA-256 of the sealed payload
  Amount ask_price{0.0};

  bool operator==(const Listing&) const = default;
};

struct PublishedListing {
  Listing listing;
  crypto::Bytes sealed_payload;
  crypto::SymmetricKey key{};  // stays with the owner until settlement releases it
};

// Seals the payload under a key derived from the owner's secret and the payload
// digest, so republishing the same payload yields the same commitment.
PublishedListing publish_listing(std::string id, const AgentId& owner, std::vector<std::string> tags,
                                 std::string description, std::span<const std::uint8_t> payload, Amount ask_price,
                                 const Lexicon& lexicon, std::span<const std::uint8_t> owner_secret);

void validate_listing(const Listing& listing, const Lexicon& lexicon);

enum class DesideratumKind { request, offer };

struct Desideratum {
  std::string id;
  AgentId agent;
  DesideratumKind kind{DesideratumKind::request};
  std::vector<std::string> tags;
  std::uint32_t quantity{1};
  Amount price_min{0.0};
  Amount price_max{0.0};
  Tick deadline{0};
  std::string listing_id;  // offers only: the knowledge asset on sale

  bool operator==(const Desideratum&) const = default;
};

void validate_desideratum(const Desideratum& d, const Lexicon& lexicon);

struct MatchCandidate {
  std::string request_id;
  std::string offer_id;
  double fit{0.0};
  Amount price_low{0.0};   // overlap of the two price intervals
  Amount price_high{0.0};

  bool operator==(const MatchCandidate&) const = default;
};

// Fit of an offer's tags against a request's tags over the lexicon axes: every term has
// base radius 1, tagged terms radius 2.
double tag_fit(const std::vector<std::string>& request_tags, const std::vector<std::string>& offer_tags,
               const Lexicon& lexicon);

// Pairs sharing a tag with overlapping price intervals, enough quantity and neither
// deadline passed at `now`; ranked by fit, then request id, then offer id.
std::vector<MatchCandidate> match_desiderata(std::span<const Desideratum> requests, std::span<const Desideratum> offers,
                                             const Lexicon& lexicon, Tick now);

struct ContractDoc {
  std::string id;
  AgentId buyer;
  AgentId seller;
  std::string listing_id;
  Amount agreed_price{0.0};
  crypto::Digest terms_digest{};
  std::optional<crypto::Signature> buyer_signature;
  std::optional<crypto::Signature> seller_signature;

  bool operator==(const ContractDoc&) const = default;
};

// Canonical bytes both parties sign (signatures excluded).
crypto::Bytes contract_bytes(const ContractDoc& doc);

// Draft a contract; the price must lie in [price_low, price_high].
ContractDoc form_contract(std::string id, const AgentId& buyer, const AgentId& seller, const Listing& listing,
                          Amount agreed_price, Amount price_low, Amount price_high, const std::string& terms);

enum class ContractParty { buyer, seller };
ContractDoc sign_contract(ContractDoc doc, ContractParty party, const crypto::KeyPair& keys);

// Throws unsigned_contract for a missing signature, signature_error for a bad one.
void verify_contract(const ContractDoc& doc, const crypto::PublicKey& buyer_key, const crypto::PublicKey& seller_key);

enum class SettlementStatus { payment_pending, key_released, complete, refunded };

std::string_view to_string(SettlementStatus status) noexcept;

struct SettlementRecord {
  std::string contract_id;
  std::optional<crypto::Digest> payment_tx;
  std::optional<crypto::Digest> key_release_tx;
  std::optional<crypto::Digest> ownership_tx;
  std::optional<crypto::Digest> refund_tx;
  std::optional<crypto::Digest> key_digest;
  SettlementStatus status{SettlementStatus::payment_pending};

  bool operator==(const SettlementRecord&) const = default;
};

}  // namespace kmarket
