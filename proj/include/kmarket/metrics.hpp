#pragma once
#include <iosfwd>
#include <optional>
#include <span>
#include <string>

#include <json.hpp>

#include "kmarket/types.hpp"

namespace kmarket {

inline constexpr std::string_view kMetricsSchema = "kmarket-metrics/1";

// Mean absolute difference over all ordered pairs divided by twice the mean.
double gini(std::span<const Amount> allocations);

struct MetricsReport {
  std::string scenario;
  std::uint64_t seed{0};
  std::optional<double> gini_funding;  // null when no researcher received anything
  double mean_match_fit{0.0};
  std::optional<double> median_time_to_fund;  // ticks, null when nothing was funded
  double dispute_rate{0.0};
  double forfeit_rate{0.0};
  double abandonment_rate{0.0};
  double settlement_completion_rate{0.0};

  std::size_t ticks{0};
  std::size_t blocks{0};
  std::size_t transactions{0};
  std::size_t teams_formed{0};
  std::size_t proposals{0};
  std::size_t funded{0};
  std::size_t completed{0};
  std::size_t forfeited{0};
  std::size_t abandoned{0};
  std::size_t contracts{0};
  std::size_t settlements_complete{0};
  std::size_t error_events{0};
  double max_conservation_drift{0.0};

  bool operator==(const MetricsReport&) const = default;
};

nlohmann::json to_json(const MetricsReport& report);
MetricsReport metrics_from_json(const nlohmann::json& j);

enum class ReportFormat { table, structured };

void emit_report(const MetricsReport& report, ReportFormat format, std::ostream& out);

}  // namespace kmarket
