#pragma once
#include <cstdint>
#include <string>

namespace kmarket {

using AgentId = std::string;
// Abstract currency units.
using Amount = double;
// Simulation tick; never wall-clock.
using Tick = std::uint64_t;

}  // namespace kmarket
