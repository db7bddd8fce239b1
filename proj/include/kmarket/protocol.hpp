#pragma once
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "kmarket/accounts.hpp"
#include "kmarket/governance.hpp"
#include "kmarket/ledger.hpp"
#include "kmarket/marketplace.hpp"

namespace kmarket {

inline constexpr std::string_view kProtocolRole = "protocol";
inline constexpr std::string_view kResearcherRole = "researcher";
inline constexpr std::string_view kInvestorRole = "investor";

// Parameters fixed at genesis, carried in the protocol identity's params.
struct ProtocolParams {
  double tau{0.1};
  std::size_t patience{3};
  double threshold{kAcceptanceThreshold};
  Weighting weighting{Weighting::stake};
  std::optional<double> quorum_weight;
  double floor{0.01};
  std::size_t exhaustive_cap{10};
  std::size_t min_team{1};
  std::size_t max_team{4};
  double initial_deposit_fraction{kGuaranteedFraction};
  std::uint32_t max_versions{3};
  Lexicon lexicon;

  TallyOptions tally_options() const;
  nlohmann::json to_json() const;
  static ProtocolParams from_json(const nlohmann::json& j);
};

struct Identity {
  AgentId id;
  crypto::PublicKey key{};
  std::string role;
  Amount stake{0.0};
};

enum class RoundKind { proposal, milestone, forfeit, abandon };

std::string_view to_string(RoundKind kind) noexcept;

// Reasons are required on proposal rounds only.
TallyOptions round_tally_options(const ProtocolParams& params, RoundKind kind);

std::string proposal_round_id(const std::string& proposal_id, std::uint32_t version);
std::string milestone_round_id(const std::string& proposal_id, std::size_t milestone, std::size_t attempt);
std::string forfeit_round_id(const std::string& proposal_id, std::size_t n);
std::string abandon_round_id(const std::string& proposal_id, std::size_t n);

struct VoteRound {
  std::string id;
  RoundKind kind{RoundKind::proposal};
  std::string proposal_id;
  std::size_t milestone{0};
  std::vector<Ballot> ballots;
  std::vector<double> scores;  // per ballot, milestone rounds only
  std::optional<TallyResult> result;
  bool consumed{false};  // a milestone result has been acted upon

  bool closed() const { return result.has_value(); }
  // Stake-weighted mean of the ballot scores; +inf if any ballot is +inf.
  double aggregate_score() const;
};

struct ProposalRecord {
  FundingState funding;
  std::map<AgentId, Amount> contributions;
  Tick submitted_at{0};
  std::optional<Tick> funded_at;
  std::optional<Tick> closed_at;
  std::size_t milestone_rounds{0};
  std::size_t forfeit_rounds{0};
  std::size_t abandon_rounds{0};
  bool ever_disputed{false};
  Amount paid_out{0.0};  // everything the team received from this proposal
};

struct ListingRecord {
  Listing listing;
  std::set<AgentId> holders;  // buyers who completed a purchase
};

struct DesiderataRecord {
  Desideratum desideratum;
  bool open{true};
};

struct ContractRecord {
  ContractDoc doc;
  std::string request_id;
  std::string offer_id;
  SettlementRecord settlement;
  Amount escrowed{0.0};
  std::optional<crypto::Digest> delivered_digest;
  bool disputed{false};
  Tick formed_at{0};
};

// One entry per applied event; used for audits and metrics.
struct AppliedEvent {
  std::uint64_t sequence{0};
  Tick tick{0};
  TxKind kind{TxKind::register_identity};
  AgentId actor;
  Digest tx_digest{};
  std::string subject;  // proposal, round or contract id
  std::string detail;   // e.g. "Accepted" on a closed vote
};

// Event-sourced market and governance state. `apply` is all-or-nothing: a rejected
// event leaves the state untouched. Replaying a chain reproduces the same state.
class ProtocolState {
public:
  void apply(const Transaction& tx, const std::string& payload, Tick tick);

  bool has_protocol() const { return protocol_.has_value(); }
  const ProtocolParams& params() const;
  const AgentId& protocol_id() const;
  const std::map<AgentId, Identity>& identities() const noexcept { return identities_; }
  const Accounts& accounts() const noexcept { return accounts_; }
  const std::map<std::string, ProposalRecord>& proposals() const noexcept { return proposals_; }
  const std::map<std::string, VoteRound>& rounds() const noexcept { return rounds_; }
  const std::map<std::string, ListingRecord>& listings() const noexcept { return listings_; }
  const std::map<std::string, DesiderataRecord>& desiderata() const noexcept { return desiderata_; }
  const std::map<std::string, ContractRecord>& contracts() const noexcept { return contracts_; }
  const std::map<AgentId, Amount>& receipts() const noexcept { return receipts_; }
  const std::vector<AppliedEvent>& events() const noexcept { return events_; }

  // Liquid balances + escrow balances + settlement escrow.
  Amount total_currency() const;

  nlohmann::json snapshot() const;

private:
  void on_register(const Transaction& tx, const nlohmann::json& p, AppliedEvent& ev);
  void on_submit_proposal(const Transaction& tx, const nlohmann::json& p, Tick tick, AppliedEvent& ev);
  void on_cast_vote(const Transaction& tx, const nlohmann::json& p, AppliedEvent& ev);
  void on_close_vote(const Transaction& tx, const nlohmann::json& p, Tick tick, AppliedEvent& ev);
  void on_deposit(const Transaction& tx, const nlohmann::json& p, Tick tick, AppliedEvent& ev);
  void on_release(const Transaction& tx, const nlohmann::json& p, Tick tick, AppliedEvent& ev);
  void on_raise_dispute(const Transaction& tx, const nlohmann::json& p, AppliedEvent& ev);
  void on_forfeit_bond(const Transaction& tx, const nlohmann::json& p, AppliedEvent& ev);
  void on_abandon(const Transaction& tx, const nlohmann::json& p, AppliedEvent& ev);
  void on_create_listing(const Transaction& tx, const nlohmann::json& p, AppliedEvent& ev);
  void on_post_desideratum(const Transaction& tx, const nlohmann::json& p, AppliedEvent& ev);
  void on_form_contract(const Transaction& tx, const nlohmann::json& p, Tick tick, AppliedEvent& ev);
  void on_settle(const Transaction& tx, const nlohmann::json& p, AppliedEvent& ev);
  void on_transfer_ownership(const Transaction& tx, const nlohmann::json& p, AppliedEvent& ev);

  const Identity& identity(const AgentId& id, std::string_view role) const;
  void require_protocol_actor(const Transaction& tx) const;
  ProposalRecord& proposal(const std::string& id);
  void pay_team(ProposalRecord& rec, Amount amount);
  void return_to_investors(ProposalRecord& rec, Amount amount);

  std::optional<AgentId> protocol_;
  std::optional<ProtocolParams> params_;
  std::map<AgentId, Identity> identities_;
  Accounts accounts_;
  std::map<std::string, ProposalRecord> proposals_;
  std::map<std::string, VoteRound> rounds_;
  std::map<std::string, ListingRecord> listings_;
  std::map<std::string, DesiderataRecord> desiderata_;
  std::map<std::string, ContractRecord> contracts_;
  std::map<AgentId, Amount> receipts_;
  std::vector<AppliedEvent> events_;
};

// Signs events as they are accepted and seals them into one block per tick.
class ProtocolRuntime {
public:
  ProtocolRuntime() = default;

  void register_protocol(const AgentId& id, const ProtocolParams& params, const crypto::Seed& seed);
  void register_agent(const AgentId& id, std::string_view role, const nlohmann::json& params,
                      const crypto::Seed& seed);

  // Applies the event to the state first; on success stores the payload and queues
  // the signed transaction. Throws the state's error otherwise, leaving no trace.
  Transaction submit(const AgentId& actor, TxKind kind, const nlohmann::json& payload);

  // Appends the queued transactions as one block stamped `tick`. No-op when empty.
  bool seal();

  // Refuses while events are pending, so every event carries its block's timestamp.
  void set_tick(Tick tick);
  Tick tick() const noexcept { return tick_; }

  const Chain& chain() const noexcept { return chain_; }
  const ProtocolState& state() const noexcept { return state_; }
  const crypto::KeyPair& keys(const AgentId& id) const;
  std::size_t pending() const noexcept { return pending_.size(); }

private:
  Transaction submit_text(const AgentId& actor, TxKind kind, const std::string& text);

  Chain chain_;
  ProtocolState state_;
  std::map<AgentId, Signer> signers_;
  std::vector<Transaction> pending_;
  Tick tick_{0};
};

// Runs payment, key release and then ownership transfer for a formed contract. The
// buyer checks the delivered ciphertext against the listing commitment and that the
// released key opens it; otherwise the buyer refunds and raises a dispute. Throws
// payment_error before any event if the buyer cannot pay.
SettlementRecord settle(ProtocolRuntime& runtime, const std::string& contract_id, const crypto::SymmetricKey& key,
                        std::span<const std::uint8_t> delivered);

struct ReplayFailure {
  std::uint64_t height{0};
  std::size_t tx_index{0};
  std::string detail;
};

struct ReplayResult {
  ProtocolState state;
  std::optional<ReplayFailure> failure;
};

// Re-executes every transaction of a chain against a fresh state.
ReplayResult replay(const Chain& chain);

struct AuditFinding {
  std::string check;
  std::string subject;
  std::string detail;
};

// Release safety: every release follows an Accepted milestone tally. Confidentiality:
// every key release follows the matching payment and precedes the ownership transfer.
std::vector<AuditFinding> audit(const ProtocolState& state);

}  // namespace kmarket
