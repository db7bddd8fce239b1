#include "kmarket/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <vector>

#include "kmarket/error.hpp"

namespace kmarket {

double gini(std::span<const Amount> allocations) {
  if (allocations.empty()) throw Error(Errc::undefined_gini, "no allocations");
  double sum = 0.0;
  for (Amount a : allocations) {
    if (!(a >= 0.0) || !std::isfinite(a)) throw Error(Errc::invalid_argument, "allocations must be finite and >= 0");
    sum += a;
  }
  if (sum == 0.0) throw Error(Errc::undefined_gini, "all allocations are zero");
  // Sorted form of sum_ij |x_i - x_j| / (2 n^2 mean).
  std::vector<Amount> x(allocations.begin(), allocations.end());
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double weighted = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) weighted += (2.0 * static_cast<double>(i) + 1.0 - n) * x[i];
  return std::clamp(weighted / (n * sum), 0.0, 1.0);
}

namespace {

nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

std::optional<double> opt_from(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<double>();
}

}  // namespace

nlohmann::json to_json(const MetricsReport& r) {
  return {{"schema", std::string(kMetricsSchema)},
          {"scenario", r.scenario},
          {"seed", r.seed},
          {"gini_funding", opt(r.gini_funding)},
          {"mean_match_fit", r.mean_match_fit},
          {"median_time_to_fund", opt(r.median_time_to_fund)},
          {"dispute_rate", r.dispute_rate},
          {"forfeit_rate", r.forfeit_rate},
          {"abandonment_rate", r.abandonment_rate},
          {"settlement_completion_rate", r.settlement_completion_rate},
          {"counts",
           {{"ticks", r.ticks},
            {"blocks", r.blocks},
            {"transactions", r.transactions},
            {"teams_formed", r.teams_formed},
            {"proposals", r.proposals},
            {"funded", r.funded},
            {"completed", r.completed},
            {"forfeited", r.forfeited},
            {"abandoned", r.abandoned},
            {"contracts", r.contracts},
            {"settlements_complete", r.settlements_complete},
            {"error_events", r.error_events}}},
          {"max_conservation_drift", r.max_conservation_drift}};
}

MetricsReport metrics_from_json(const nlohmann::json& j) {
  try {
    if (j.value("schema", "") != kMetricsSchema) throw Error(Errc::parse_error, "not a kmarket-metrics/1 document");
    MetricsReport r;
    r.scenario = j.at("scenario").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.gini_funding = opt_from(j, "gini_funding");
    r.mean_match_fit = j.at("mean_match_fit").get<double>();
    r.median_time_to_fund = opt_from(j, "median_time_to_fund");
    r.dispute_rate = j.at("dispute_rate").get<double>();
    r.forfeit_rate = j.at("forfeit_rate").get<double>();
    r.abandonment_rate = j.at("abandonment_rate").get<double>();
    r.settlement_completion_rate = j.at("settlement_completion_rate").get<double>();
    const auto& c = j.at("counts");
    r.ticks = c.at("ticks").get<std::size_t>();
    r.blocks = c.at("blocks").get<std::size_t>();
    r.transactions = c.at("transactions").get<std::size_t>();
    r.teams_formed = c.at("teams_formed").get<std::size_t>();
    r.proposals = c.at("proposals").get<std::size_t>();
    r.funded = c.at("funded").get<std::size_t>();
    r.completed = c.at("completed").get<std::size_t>();
    r.forfeited = c.at("forfeited").get<std::size_t>();
    r.abandoned = c.at("abandoned").get<std::size_t>();
    r.contracts = c.at("contracts").get<std::size_t>();
    r.settlements_complete = c.at("settlements_complete").get<std::size_t>();
    r.error_events = c.at("error_events").get<std::size_t>();
    r.max_conservation_drift = j.value("max_conservation_drift", 0.0);
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::parse_error, e.what());
  }
}

void emit_report(const MetricsReport& r, ReportFormat format, std::ostream& out) {
  if (format == ReportFormat::structured) {
    out << to_json(r).dump(2) << '\n';
    return;
  }
  auto num = [](std::optional<double> v, int precision = 6) {
    if (!v) return std::string("n/a");
    std::ostringstream s;
    s << std::fixed << std::setprecision(precision) << *v;
    return s.str();
  };
  const std::vector<std::pair<std::string, std::string>> rows = {
      {"scenario", r.scenario},
      {"seed", std::to_string(r.seed)},
      {"gini_funding", num(r.gini_funding)},
      {"mean_match_fit", num(r.mean_match_fit)},
      {"median_time_to_fund", num(r.median_time_to_fund, 1)},
      {"dispute_rate", num(r.dispute_rate)},
      {"forfeit_rate", num(r.forfeit_rate)},
      {"abandonment_rate", num(r.abandonment_rate)},
      {"settlement_completion_rate", num(r.settlement_completion_rate)},
      {"ticks", std::to_string(r.ticks)},
      {"blocks", std::to_string(r.blocks)},
      {"transactions", std::to_string(r.transactions)},
      {"teams_formed", std::to_string(r.teams_formed)},
      {"proposals", std::to_string(r.proposals)},
      {"funded", std::to_string(r.funded)},
      {"completed", std::to_string(r.completed)},
      {"forfeited", std::to_string(r.forfeited)},
      {"abandoned", std::to_string(r.abandoned)},
      {"contracts", std::to_string(r.contracts)},
      {"settlements_complete", std::to_string(r.settlements_complete)},
      {"error_events", std::to_string(r.error_events)},
  };
  std::size_t width = 6;
  for (const auto& [k, v] : rows) width = std::max(width, k.size());
  out << std::left << std::setw(static_cast<int>(width)) << "metric" << "  value\n";
  out << std::string(width, '-') << "  " << std::string(16, '-') << '\n';
  for (const auto& [k, v] : rows) out << std::left << std::setw(static_cast<int>(width)) << k << "  " << v << '\n';
}

}  // namespace kmarket
