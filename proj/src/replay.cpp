#include <map>
#include <set>

#include "kmarket/protocol.hpp"

namespace kmarket {

ReplayResult replay(const Chain& chain) {
  ReplayResult out;
  for (const auto& block : chain.blocks()) {
    for (std::size_t i = 0; i < block.transactions.size(); ++i) {
      const auto& tx = block.transactions[i];
      const auto text = chain.payloads().text(tx.payload_digest);
      if (!text) {
        out.failure = ReplayFailure{block.height, i, "payload " + crypto::to_hex(tx.payload_digest) + " is missing"};
        return out;
      }
      try {
        out.state.apply(tx, *text, block.timestamp);
      } catch (const Error& e) {
        out.failure = ReplayFailure{block.height, i, e.what()};
        return out;
      }
    }
  }
  return out;
}

std::vector<AuditFinding> audit(const ProtocolState& state) {
  std::vector<AuditFinding> findings;
  std::map<std::string, std::string> closed;  // round -> outcome
  std::set<std::string> paid;
  std::set<std::string> keyed;
  for (const auto& ev : state.events()) {
    switch (ev.kind) {
      case TxKind::close_vote: closed[ev.subject] = ev.detail; break;
      case TxKind::release_milestone: {
        auto it = closed.find(ev.subject);
        if (it == closed.end() || it->second != to_string(Outcome::accepted))
          findings.push_back({"release_safety", ev.subject, "release without a preceding Accepted tally"});
        break;
      }
      case TxKind::settle_contract:
        if (ev.detail == "payment") paid.insert(ev.subject);
        if (ev.detail == "key_release") {
          if (!paid.contains(ev.subject))
            findings.push_back({"confidentiality", ev.subject, "key released before payment"});
          keyed.insert(ev.subject);
        }
        break;
      case TxKind::transfer_ownership:
        if (!keyed.contains(ev.subject))
          findings.push_back({"confidentiality", ev.subject, "ownership transferred before key release"});
        break;
      default: break;
    }
  }
  return findings;
}

}  // namespace kmarket
