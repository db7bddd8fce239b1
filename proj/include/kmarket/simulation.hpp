#pragma once
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "kmarket/metrics.hpp"
#include "kmarket/protocol.hpp"
#include "kmarket/scenario.hpp"

namespace kmarket {

// Seeded generator with portable conversions (the standard distributions are not
// specified bit-for-bit across library implementations).
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double normal();
  std::size_t categorical(std::span<const double> weights);

private:
  std::mt19937_64 engine_;
};

// Ed25519 seed of an agent: SHA-256 over the little-endian run seed and the agent id.
crypto::Seed agent_seed(std::uint64_t run_seed, const AgentId& id);

inline constexpr std::string_view kProtocolAgent = "protocol";

struct SimEvent {
  Tick tick{0};
  std::string phase;  // setup | matching | governance | settlement
  std::string type;   // transaction kind, a simulation step, or "error"
  AgentId actor;
  std::string subject;
  std::string detail;
  std::optional<Errc> error;
};

nlohmann::json to_json(const SimEvent& e);

struct TeamRecord {
  std::string project_id;
  std::vector<AgentId> members;
  double fit{0.0};
  Tick formed_at{0};
};

struct SimulationResult {
  ScenarioConfig config;
  ProtocolRuntime runtime;
  MetricsReport metrics;
  std::vector<SimEvent> events;
  std::vector<TeamRecord> teams;
  std::vector<double> currency_by_tick;  // after registration, then after each tick
  std::vector<AuditFinding> audit;
};

// Runs the scenario to its horizon. Module errors become structured events.
SimulationResult run(ScenarioConfig config, std::optional<std::uint64_t> seed = std::nullopt);

// chain.jsonl, metrics.json, events.jsonl, governance.json
void write_outputs(const SimulationResult& result, const std::filesystem::path& dir);

}  // namespace kmarket
