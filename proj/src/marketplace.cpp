#include "kmarket/marketplace.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "kmarket/error.hpp"

namespace kmarket {

namespace {

void append_str(crypto::Bytes& out, std::string_view s) {
  const auto n = static_cast<std::uint32_t>(s.size());
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(n >> shift));
  out.insert(out.end(), s.begin(), s.end());
}

void append_u64(crypto::Bytes& out, std::uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

void check_tags(const std::vector<std::string>& tags, const Lexicon& lexicon) {
  if (tags.empty()) throw Error(Errc::validation_error, "at least one tag is required");
  for (const auto& t : tags)
    if (!lexicon.contains(t)) throw Error(Errc::lexicon_violation, t);
}

}  // namespace

Lexicon::Lexicon(std::map<std::string, std::string> terms) : terms_(std::move(terms)) {
  for (const auto& [term, definition] : terms_)
    if (term.empty()) throw Error(Errc::validation_error, "empty lexicon term");
  if (terms_.size() >= 3) {
    std::vector<std::string> skills;
    for (const auto& [term, definition] : terms_) skills.push_back(term);
    taxonomy_ = make_taxonomy(std::move(skills));
  }
}

TaxonomyPtr Lexicon::taxonomy() const {
  if (!taxonomy_) throw Error(Errc::invalid_taxonomy, "tag scoring needs a lexicon of at least 3 terms");
  return taxonomy_;
}

void validate_listing(const Listing& listing, const Lexicon& lexicon) {
  check_tags(listing.tags, lexicon);
  if (listing.payload_commitment == crypto::Digest{}) throw Error(Errc::validation_error, "zero payload commitment");
  if (!(listing.ask_price >= 0.0) || !std::isfinite(listing.ask_price))
    throw Error(Errc::validation_error, "ask price must be non-negative");
}

PublishedListing publish_listing(std::string id, const AgentId& owner, std::vector<std::string> tags,
                                 std::string description, std::span<const std::uint8_t> payload, Amount ask_price,
                                 const Lexicon& lexicon, std::span<const std::uint8_t> owner_secret) {
  check_tags(tags, lexicon);
  if (payload.empty()) throw Error(Errc::empty_payload, "listing " + id + " has no payload");
  PublishedListing out;
  out.key = crypto::hmac_sha256(owner_secret, crypto::sha256(payload));
  out.sealed_payload = crypto::seal(out.key, payload);
  out.listing = Listing{std::move(id), owner, std::move(tags), std::move(description),
                        crypto::sha256(out.sealed_payload), ask_price};
  validate_listing(out.listing, lexicon);
  return out;
}

void validate_desideratum(const Desideratum& d, const Lexicon& lexicon) {
  if (d.id.empty() || d.agent.empty()) throw Error(Errc::validation_error, "desideratum needs an id and an agent");
  check_tags(d.tags, lexicon);
  if (d.quantity == 0) throw Error(Errc::validation_error, "desideratum " + d.id + " has zero quantity");
  if (!(d.price_min >= 0.0) || !(d.price_max >= d.price_min) || !std::isfinite(d.price_max))
    throw Error(Errc::validation_error, "desideratum " + d.id + " has an invalid price interval");
  if (d.kind == DesideratumKind::offer && d.listing_id.empty())
    throw Error(Errc::validation_error, "offer " + d.id + " does not name a listing");
}

double tag_fit(const std::vector<std::string>& request_tags, const std::vector<std::string>& offer_tags,
               const Lexicon& lexicon) {
  const auto taxonomy = lexicon.taxonomy();
  auto profile = [&](const std::vector<std::string>& tags) {
    std::vector<double> radii(taxonomy->size(), 1.0);
    for (const auto& t : tags) radii[taxonomy->index_of(t)] = 2.0;
    return SkillProfile(taxonomy, std::move(radii));
  };
  return cooperation_fit(profile(request_tags), profile(offer_tags)).value;
}

std::vector<MatchCandidate> match_desiderata(std::span<const Desideratum> requests, std::span<const Desideratum> offers,
                                             const Lexicon& lexicon, Tick now) {
  std::vector<MatchCandidate> out;
  for (const auto& r : requests) {
    for (const auto& o : offers) {
      const bool shared = std::any_of(r.tags.begin(), r.tags.end(), [&](const std::string& t) {
        return std::find(o.tags.begin(), o.tags.end(), t) != o.tags.end();
      });
      if (!shared) continue;
      const Amount low = std::max(r.price_min, o.price_min);
      const Amount high = std::min(r.price_max, o.price_max);
      if (low > high) continue;
      if (o.quantity < r.quantity) continue;
      if (now > r.deadline || now > o.deadline) continue;
      out.push_back(MatchCandidate{r.id, o.id, tag_fit(r.tags, o.tags, lexicon), low, high});
    }
  }
  std::sort(out.begin(), out.end(), [](const MatchCandidate& a, const MatchCandidate& b) {
    if (a.fit != b.fit) return a.fit > b.fit;
    if (a.request_id != b.request_id) return a.request_id < b.request_id;
    return a.offer_id < b.offer_id;
  });
  return out;
}

crypto::Bytes contract_bytes(const ContractDoc& doc) {
  crypto::Bytes out;
  append_str(out, doc.id);
  append_str(out, doc.buyer);
  append_str(out, doc.seller);
  append_str(out, doc.listing_id);
  append_u64(out, std::bit_cast<std::uint64_t>(doc.agreed_price));
  out.insert(out.end(), doc.terms_digest.begin(), doc.terms_digest.end());
  return out;
}

ContractDoc form_contract(std::string id, const AgentId& buyer, const AgentId& seller, const Listing& listing,
                          Amount agreed_price, Amount price_low, Amount price_high, const std::string& terms) {
  if (!(agreed_price >= price_low && agreed_price <= price_high))
    throw Error(Errc::price_out_of_bounds, "price " + std::to_string(agreed_price) + " outside [" +
                                               std::to_string(price_low) + ", " + std::to_string(price_high) + "]");
  if (seller != listing.owner) throw Error(Errc::validation_error, "seller does not own listing " + listing.id);
  ContractDoc doc;
  doc.id = std::move(id);
  doc.buyer = buyer;
  doc.seller = seller;
  doc.listing_id = listing.id;
  doc.agreed_price = agreed_price;
  doc.terms_digest = crypto::sha256(terms);
  return doc;
}

ContractDoc sign_contract(ContractDoc doc, ContractParty party, const crypto::KeyPair& keys) {
  const auto sig = keys.sign(contract_bytes(doc));
  (party == ContractParty::buyer ? doc.buyer_signature : doc.seller_signature) = sig;
  return doc;
}

void verify_contract(const ContractDoc& doc, const crypto::PublicKey& buyer_key, const crypto::PublicKey& seller_key) {
  if (!doc.buyer_signature) throw Error(Errc::unsigned_contract, "buyer signature missing on " + doc.id);
  if (!doc.seller_signature) throw Error(Errc::unsigned_contract, "seller signature missing on " + doc.id);
  const auto bytes = contract_bytes(doc);
  if (!crypto::verify(buyer_key, bytes, *doc.buyer_signature))
    throw Error(Errc::signature_error, "buyer signature does not match contract " + doc.id);
  if (!crypto::verify(seller_key, bytes, *doc.seller_signature))
    throw Error(Errc::signature_error, "seller signature does not match contract " + doc.id);
}

std::string_view to_string(SettlementStatus status) noexcept {
  switch (status) {
    case SettlementStatus::payment_pending: return "PaymentPending";
    case SettlementStatus::key_released: return "KeyReleased";
    case SettlementStatus::complete: return "Complete";
    case SettlementStatus::refunded: return "Refunded";
  }
  return "Unknown";
}

}  // namespace kmarket
