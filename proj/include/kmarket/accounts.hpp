#pragma once
#include <map>
#include <string>

#include "kmarket/error.hpp"
#include "kmarket/types.hpp"

namespace kmarket {

// Liquid balances held by agents. Escrowed funds live with the escrow, not here.
class Accounts {
public:
  void open(const AgentId& agent, Amount initial) {
    if (!(initial >= 0.0)) throw Error(Errc::validation_error, "negative opening balance for " + agent);
    balances_.emplace(agent, initial);
  }
  bool has(const AgentId& agent) const { return balances_.contains(agent); }
  Amount balance(const AgentId& agent) const {
    auto it = balances_.find(agent);
    return it == balances_.end() ? 0.0 : it->second;
  }
  void credit(const AgentId& agent, Amount amount) { balances_[agent] += amount; }
  void debit(const AgentId& agent, Amount amount) {
    auto it = balances_.find(agent);
    if (it == balances_.end() || it->second < amount)
      throw Error(Errc::payment_error, agent + " holds " + std::to_string(balance(agent)) + ", needs " +
                                           std::to_string(amount));
    it->second -= amount;
  }
  Amount total() const {
    Amount t = 0.0;
    for (const auto& [agent, b] : balances_) t += b;
    return t;
  }
  const std::map<AgentId, Amount>& balances() const noexcept { return balances_; }

private:
  std::map<AgentId, Amount> balances_;
};

}  // namespace kmarket
