#include "support.hpp"

#include <algorithm>
#include <set>
#include <tuple>

#include "../common/oracles.hpp"
#include "kmarket/marketplace.hpp"

using namespace kmarket;

namespace {

Lexicon lexicon() {
  return Lexicon({{"genomics", "sequence data"},
                  {"imaging", "microscopy"},
                  {"ml", "learned models"},
                  {"protocols", "lab procedures"},
                  {"stats", "analysis"}});
}

crypto::Bytes bytes(std::string_view s) { return {s.begin(), s.end()}; }

const crypto::Bytes kSecret = bytes("owner secret");

Desideratum want(std::string id, DesideratumKind kind, std::vector<std::string> tags, Amount lo, Amount hi,
                 Tick deadline = 10, std::uint32_t qty = 1) {
  Desideratum d;
  d.id = std::move(id);
  d.agent = kind == DesideratumKind::request ? "buyer" : "seller";
  d.kind = kind;
  d.tags = std::move(tags);
  d.quantity = qty;
  d.price_min = lo;
  d.price_max = hi;
  d.deadline = deadline;
  if (kind == DesideratumKind::offer) d.listing_id = "L1";
  return d;
}

}  // namespace

TEST_CASE("publishing listings") {
  const auto lex = lexicon();
  const auto payload = bytes("the dataset");
  const auto a = publish_listing("L1", "seller", {"genomics"}, "reads", payload, 10, lex, kSecret);
  CHECK(a.listing.payload_commitment != crypto::Digest{});
  CHECK(a.listing.payload_commitment == crypto::sha256(a.sealed_payload));
  CHECK(a.sealed_payload != payload);
  REQUIRE(crypto::open(a.key, a.sealed_payload));
  CHECK(*crypto::open(a.key, a.sealed_payload) == payload);

  const auto b = publish_listing("L2", "seller", {"genomics", "stats"}, "again", payload, 12, lex, kSecret);
  CHECK(b.listing.payload_commitment == a.listing.payload_commitment);
  CHECK(b.listing.id != a.listing.id);
  const auto c = publish_listing("L3", "seller", {"genomics"}, "other", bytes("other data"), 10, lex, kSecret);
  CHECK(c.listing.payload_commitment != a.listing.payload_commitment);

  CHECK_ERRC(publish_listing("L4", "seller", {"quantum-basketweaving"}, "", payload, 1, lex, kSecret),
             Errc::lexicon_violation);
  CHECK_ERRC(publish_listing("L5", "seller", {"ml"}, "", crypto::Bytes{}, 1, lex, kSecret), Errc::empty_payload);

  auto zero = a.listing;
  zero.payload_commitment = {};
  CHECK_ERRC(validate_listing(zero, lex), Errc::validation_error);

  auto wrong_key = a.key;
  wrong_key[0] ^= 1;
  CHECK_FALSE(crypto::open(wrong_key, a.sealed_payload));
}

TEST_CASE("desideratum validation") {
  const auto lex = lexicon();
  CHECK_NOTHROW(validate_desideratum(want("r", DesideratumKind::request, {"ml"}, 1, 2), lex));
  CHECK_ERRC(validate_desideratum(want("r", DesideratumKind::request, {"astrology"}, 1, 2), lex),
             Errc::lexicon_violation);
  CHECK_ERRC(validate_desideratum(want("r", DesideratumKind::request, {"ml"}, 3, 2), lex), Errc::validation_error);
  CHECK_ERRC(validate_desideratum(want("r", DesideratumKind::request, {"ml"}, 1, 2, 10, 0), lex),
             Errc::validation_error);
  auto offer = want("o", DesideratumKind::offer, {"ml"}, 1, 2);
  offer.listing_id.clear();
  CHECK_ERRC(validate_desideratum(offer, lex), Errc::validation_error);
  CHECK_ERRC(Lexicon({{"a", "x"}, {"b", "y"}}).taxonomy(), Errc::invalid_taxonomy);
}

TEST_CASE("matching desiderata") {
  const auto lex = lexicon();
  std::vector<Desideratum> req{want("r1", DesideratumKind::request, {"ml"}, 10, 20)};
  std::vector<Desideratum> disjoint{want("o1", DesideratumKind::offer, {"imaging"}, 10, 20)};
  CHECK(match_desiderata(req, disjoint, lex, 0).empty());

  std::vector<Desideratum> off{want("o1", DesideratumKind::offer, {"ml"}, 15, 30)};
  const auto m = match_desiderata(req, off, lex, 0);
  REQUIRE(m.size() == 1);
  CHECK(m[0].price_low == 15);
  CHECK(m[0].price_high == 20);
  CHECK(m[0].fit == doctest::Approx(1.0));
  CHECK(match_desiderata(req, off, lex, 11).empty());

  // tag profiles: radius 2 on tagged terms, 1 elsewhere
  const std::vector<std::string> r_tags{"ml", "stats"}, o_tags{"ml"};
  const std::vector<double> rp{1, 1, 2, 1, 2}, op{1, 1, 2, 1, 1};
  CHECK(tag_fit(r_tags, o_tags, lex) == doctest::Approx(oracle::fit(rp, {op})).epsilon(1e-12));
}

TEST_CASE("matching equals the all-pairs filter") {
  const auto lex = lexicon();
  const std::vector<std::string> terms{"genomics", "imaging", "ml", "protocols", "stats"};
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> price(0, 40), width(0, 20), deadline(0, 6), qty(1, 3), coin(0, 1);
  auto random_tags = [&] {
    std::vector<std::string> t;
    for (const auto& term : terms)
      if (coin(rng) && coin(rng)) t.push_back(term);
    if (t.empty()) t.push_back(terms[static_cast<std::size_t>(price(rng)) % terms.size()]);
    return t;
  };
  auto radii = [&](const std::vector<std::string>& tags) {
    std::vector<double> r;
    for (const auto& term : terms) r.push_back(std::count(tags.begin(), tags.end(), term) ? 2.0 : 1.0);
    return r;
  };

  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Desideratum> reqs, offs;
    for (int i = 0; i < 5; ++i) {
      const int lo = price(rng), lo2 = price(rng);
      reqs.push_back(want("r" + std::to_string(i), DesideratumKind::request, random_tags(), lo, lo + width(rng),
                          deadline(rng), static_cast<std::uint32_t>(qty(rng))));
      offs.push_back(want("o" + std::to_string(i), DesideratumKind::offer, random_tags(), lo2, lo2 + width(rng),
                          deadline(rng), static_cast<std::uint32_t>(qty(rng))));
    }
    const Tick now = static_cast<Tick>(deadline(rng));

    std::vector<std::tuple<double, std::string, std::string, double, double>> expect;
    for (const auto& r : reqs)
      for (const auto& o : offs) {
        std::set<std::string> a(r.tags.begin(), r.tags.end()), common;
        for (const auto& t : o.tags)
          if (a.count(t)) common.insert(t);
        const double lo = std::max(r.price_min, o.price_min), hi = std::min(r.price_max, o.price_max);
        if (common.empty() || lo > hi || o.quantity < r.quantity || now > r.deadline || now > o.deadline) continue;
        expect.emplace_back(-oracle::fit(radii(r.tags), {radii(o.tags)}), r.id, o.id, lo, hi);
      }
    std::sort(expect.begin(), expect.end());

    const auto got = match_desiderata(reqs, offs, lex, now);
    REQUIRE(got.size() == expect.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].fit == doctest::Approx(-std::get<0>(expect[i])).epsilon(1e-12));
      CHECK(got[i].request_id == std::get<1>(expect[i]));
      CHECK(got[i].offer_id == std::get<2>(expect[i]));
      CHECK(got[i].price_low == std::get<3>(expect[i]));
      CHECK(got[i].price_high == std::get<4>(expect[i]));
    }
  }
}

TEST_CASE("contracts") {
  const auto lex = lexicon();
  const auto buyer = crypto::KeyPair::from_seed(crypto::sha256("buyer"));
  const auto seller = crypto::KeyPair::from_seed(crypto::sha256("seller"));
  const auto l = publish_listing("L1", "seller", {"ml"}, "model", bytes("weights"), 15, lex, kSecret).listing;

  CHECK_ERRC(form_contract("c1", "buyer", "seller", l, 25, 15, 20, "terms"), Errc::price_out_of_bounds);
  CHECK_ERRC(form_contract("c1", "buyer", "mallory", l, 18, 15, 20, "terms"), Errc::validation_error);

  auto doc = form_contract("c1", "buyer", "seller", l, 18, 15, 20, "deliver within 3 ticks");
  CHECK(doc.terms_digest == crypto::sha256("deliver within 3 ticks"));
  const auto seller_only = sign_contract(doc, ContractParty::seller, seller);
  CHECK_ERRC(verify_contract(seller_only, buyer.public_key(), seller.public_key()), Errc::unsigned_contract);
  const auto both = sign_contract(seller_only, ContractParty::buyer, buyer);
  CHECK_NOTHROW(verify_contract(both, buyer.public_key(), seller.public_key()));
  CHECK_ERRC(verify_contract(both, seller.public_key(), seller.public_key()), Errc::signature_error);

  auto tampered = both;
  tampered.terms_digest[5] ^= 0x01;
  CHECK_ERRC(verify_contract(tampered, buyer.public_key(), seller.public_key()), Errc::signature_error);
  tampered = both;
  tampered.agreed_price = 15;
  CHECK_ERRC(verify_contract(tampered, buyer.public_key(), seller.public_key()), Errc::signature_error);

  // every byte of the signed encoding is covered
  const auto raw = contract_bytes(both);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    auto flipped = raw;
    flipped[i] ^= 0x80;
    CHECK_FALSE(crypto::verify(buyer.public_key(), flipped, *both.buyer_signature));
  }
}
