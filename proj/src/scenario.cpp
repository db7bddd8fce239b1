#include "kmarket/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "kmarket/codec.hpp"

namespace kmarket {

namespace {

std::string describe(const std::vector<ScenarioIssue>& issues) {
  std::string out = std::to_string(issues.size()) + " problem(s) in scenario";
  for (const auto& i : issues) out += "\n  " + i.where + ": " + std::string(to_string(i.code)) + ": " + i.message;
  return out;
}

std::size_t line_of(std::string_view text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

class Reader {
public:
  std::vector<ScenarioIssue> issues;

  void fail(std::string where, std::string message, Errc code = Errc::validation_error) {
    issues.push_back({code, std::move(where), std::move(message)});
  }

  // Typed field access; records an issue and returns the fallback on a missing or mistyped field.
  template <typename T>
  std::optional<T> get(const Json& obj, const char* key, const std::string& path, bool required = true) {
    if (!obj.is_object() || !obj.contains(key)) {
      if (required) fail(path + "." + key, "missing field");
      return std::nullopt;
    }
    try {
      return obj[key].get<T>();
    } catch (const Json::exception& e) {
      fail(path + "." + key, std::string("wrong type: ") + e.what());
      return std::nullopt;
    }
  }

  template <typename T>
  T get_or(const Json& obj, const char* key, const std::string& path, T fallback) {
    auto v = get<T>(obj, key, path, false);
    return v ? *v : fallback;
  }
};

std::optional<SkillProfile> read_profile(Reader& r, const Json& j, const std::string& path,
                                         const std::map<std::string, TaxonomyPtr>& taxonomies,
                                         std::string& taxonomy_id) {
  if (!j.is_object()) {
    r.fail(path, "expected an object with taxonomy and radii");
    return std::nullopt;
  }
  auto tax = r.get<std::string>(j, "taxonomy", path);
  auto radii = r.get<std::vector<double>>(j, "radii", path);
  if (!tax || !radii) return std::nullopt;
  taxonomy_id = *tax;
  auto it = taxonomies.find(*tax);
  if (it == taxonomies.end()) {
    r.fail(path + ".taxonomy", "unknown taxonomy " + *tax, Errc::dangling_reference);
    return std::nullopt;
  }
  try {
    return SkillProfile(it->second, *radii);
  } catch (const Error& e) {
    r.fail(path + ".radii", e.what(), e.code());
    return std::nullopt;
  }
}

std::vector<CostLine> read_lines(Reader& r, const Json& j, const char* key, const std::string& path) {
  std::vector<CostLine> out;
  if (!j.contains(key)) return out;
  if (!j[key].is_array()) {
    r.fail(path + "." + key, "expected a list");
    return out;
  }
  for (std::size_t i = 0; i < j[key].size(); ++i) {
    const auto p = path + "." + key + "[" + std::to_string(i) + "]";
    auto label = r.get<std::string>(j[key][i], "label", p);
    auto amount = r.get<double>(j[key][i], "amount", p);
    if (label && amount) out.push_back(CostLine{*label, *amount});
  }
  return out;
}

}  // namespace

std::string_view to_string(BeliefPolicy policy) noexcept {
  switch (policy) {
    case BeliefPolicy::posterior_follower: return "posterior-follower";
    case BeliefPolicy::noisy: return "noisy";
    case BeliefPolicy::adversarial: return "adversarial";
  }
  return "unknown";
}

ScenarioError::ScenarioError(std::vector<ScenarioIssue> issues)
    : Error(issues.empty() ? Errc::validation_error : issues.front().code, describe(issues)),
      issues_(std::move(issues)) {}

const TaxonomySpec* ScenarioConfig::find_taxonomy(const std::string& id) const {
  for (const auto& t : taxonomies)
    if (t.id == id) return &t;
  return nullptr;
}

const ProjectSpec* ScenarioConfig::find_project(const std::string& id) const {
  for (const auto& p : projects)
    if (p.id == id) return &p;
  return nullptr;
}

ScenarioConfig parse_scenario(std::string_view text) {
  Json root;
  try {
    root = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ScenarioError({{Errc::parse_error, "line " + std::to_string(line_of(text, e.byte)), e.what()}});
  }

  Reader r;
  ScenarioConfig cfg;
  if (!root.is_object()) throw ScenarioError({{Errc::parse_error, "line 1", "scenario must be a JSON object"}});
  const auto schema = r.get_or<std::string>(root, "schema", "", "");
  if (schema != kScenarioSchema) r.fail("schema", "expected \"" + std::string(kScenarioSchema) + "\"");
  cfg.name = r.get_or<std::string>(root, "name", "", "scenario");
  cfg.seed = r.get_or<std::uint64_t>(root, "seed", "", 0);
  if (auto h = r.get<std::int64_t>(root, "horizon", "")) {
    if (*h < 1) r.fail("horizon", "horizon must be >= 1, got " + std::to_string(*h));
    else cfg.horizon = static_cast<Tick>(*h);
  }

  std::map<std::string, TaxonomyPtr> taxonomies;
  if (root.contains("taxonomies") && root["taxonomies"].is_array()) {
    for (std::size_t i = 0; i < root["taxonomies"].size(); ++i) {
      const auto path = "taxonomies[" + std::to_string(i) + "]";
      const auto& t = root["taxonomies"][i];
      auto id = r.get<std::string>(t, "id", path);
      auto skills = r.get<std::vector<std::string>>(t, "skills", path);
      if (!id || !skills) continue;
      if (taxonomies.contains(*id)) {
        r.fail(path + ".id", "duplicate taxonomy " + *id);
        continue;
      }
      try {
        auto tax = make_taxonomy(*skills);
        taxonomies[*id] = tax;
        cfg.taxonomies.push_back({*id, tax});
      } catch (const Error& e) {
        r.fail(path + ".skills", e.what(), e.code());
      }
    }
  } else {
    r.fail("taxonomies", "missing list");
  }

  try {
    const Json params = root.value("params", Json::object());
    Json with_lexicon = params;
    with_lexicon["lexicon"] = root.value("lexicon", Json::object());
    cfg.params = ProtocolParams::from_json(with_lexicon);
  } catch (const Error& e) {
    r.fail("params", e.what(), e.code());
  } catch (const Json::exception& e) {
    r.fail("params", e.what());
  }

  std::set<std::string> agent_ids;
  if (root.contains("agents") && root["agents"].is_array()) {
    for (std::size_t i = 0; i < root["agents"].size(); ++i) {
      const auto path = "agents[" + std::to_string(i) + "]";
      const auto& a = root["agents"][i];
      auto id = r.get<std::string>(a, "id", path);
      auto role = r.get<std::string>(a, "role", path);
      if (!id || !role) continue;
      if (id->empty() || *id == "protocol") {
        r.fail(path + ".id", "reserved or empty agent id");
        continue;
      }
      if (!agent_ids.insert(*id).second) {
        r.fail(path + ".id", "duplicate agent id " + *id);
        continue;
      }
      if (*role == "researcher") {
        std::string tax_id;
        auto profile = a.contains("profile") ? read_profile(r, a["profile"], path + ".profile", taxonomies, tax_id)
                                             : (r.fail(path + ".profile", "missing field"), std::nullopt);
        const auto reservation = r.get_or<double>(a, "reservation_price", path, 0.0);
        const auto balance = r.get_or<double>(a, "balance", path, 0.0);
        if (!(reservation >= 0.0) || !(balance >= 0.0)) r.fail(path, "prices and balances must be >= 0");
        if (profile) cfg.researchers.push_back({*id, tax_id, *profile, reservation, balance});
      } else if (*role == "investor") {
        InvestorSpec inv;
        inv.id = *id;
        inv.capital = r.get_or<double>(a, "capital", path, 0.0);
        inv.stake = r.get_or<double>(a, "stake", path, inv.capital);
        const auto policy = r.get_or<std::string>(a, "policy", path, "posterior-follower");
        if (policy == "posterior-follower") inv.policy = BeliefPolicy::posterior_follower;
        else if (policy == "noisy") inv.policy = BeliefPolicy::noisy;
        else if (policy == "adversarial") inv.policy = BeliefPolicy::adversarial;
        else r.fail(path + ".policy", "unknown policy " + policy);
        inv.noise = r.get_or<double>(a, "noise", path, 0.0);
        inv.accept_threshold = r.get_or<double>(a, "accept_threshold", path, 0.5);
        inv.revision_demands = r.get_or<std::uint32_t>(a, "revision_demands", path, 0);
        if (a.contains("abandon_after") && !a["abandon_after"].is_null())
          inv.abandon_after = r.get_or<Tick>(a, "abandon_after", path, 0);
        if (!(inv.capital >= 0.0) || !(inv.stake >= 0.0) || !(inv.noise >= 0.0))
          r.fail(path, "capital, stake and noise must be >= 0");
        cfg.investors.push_back(std::move(inv));
      } else {
        r.fail(path + ".role", "role must be researcher|investor");
      }
    }
  } else {
    r.fail("agents", "missing list");
  }

  std::set<std::string> project_ids;
  if (root.contains("projects") && root["projects"].is_array()) {
    for (std::size_t i = 0; i < root["projects"].size(); ++i) {
      const auto path = "projects[" + std::to_string(i) + "]";
      const auto& p = root["projects"][i];
      auto id = r.get<std::string>(p, "id", path);
      if (!id) continue;
      if (!project_ids.insert(*id).second) r.fail(path + ".id", "duplicate project id " + *id);
      std::string tax_id;
      auto req = p.contains("requirement") ? read_profile(r, p["requirement"], path + ".requirement", taxonomies, tax_id)
                                           : (r.fail(path + ".requirement", "missing field"), std::nullopt);
      const auto promised = r.get_or<double>(p, "promised", path, 0.0);
      if (!(promised > 0.0)) r.fail(path + ".promised", "promised amount must be > 0");
      std::vector<MilestoneSpec> milestones;
      Amount msum = 0.0;
      if (p.contains("milestones") && p["milestones"].is_array() && !p["milestones"].empty()) {
        for (std::size_t k = 0; k < p["milestones"].size(); ++k) {
          const auto mp = path + ".milestones[" + std::to_string(k) + "]";
          const auto& m = p["milestones"][k];
          MilestoneSpec ms;
          ms.description = r.get_or<std::string>(m, "description", mp, "milestone " + std::to_string(k + 1));
          ms.amount = r.get_or<double>(m, "amount", mp, 0.0);
          ms.due = r.get_or<Tick>(m, "due", mp, 1);
          if (!(ms.amount > 0.0)) r.fail(mp + ".amount", "milestone amount must be > 0");
          msum += ms.amount;
          milestones.push_back(std::move(ms));
        }
      } else {
        r.fail(path + ".milestones", "at least one milestone is required");
      }
      if (promised > 0.0 && !milestones.empty() && std::abs(msum - promised) > 1e-9 * promised)
        r.fail(path + ".milestones", "milestones sum to " + std::to_string(msum) + ", promised " +
                                         std::to_string(promised), Errc::milestone_sum_mismatch);

      if (!req) continue;
      ProjectSpec ps{*id,
                     r.get_or<std::string>(p, "title", path, *id),
                     tax_id,
                     *req,
                     promised,
                     milestones,
                     r.get_or<std::string>(p, "introduction", path, "Motivation for " + *id + "."),
                     r.get_or<std::string>(p, "literature_review", path, "Prior work relevant to " + *id + "."),
                     r.get_or<std::string>(p, "methodology", path, "Approach taken in " + *id + "."),
                     read_lines(r, p, "budget", path),
                     std::nullopt,
                     1};
      if (ps.budget.empty()) ps.budget.push_back(CostLine{"research", promised});
      Amount bsum = 0.0;
      for (const auto& l : ps.budget) bsum += l.amount;
      if (std::abs(bsum - promised) > 1e-9 * std::max(1.0, promised))
        r.fail(path + ".budget", "budget lines must sum to the promised amount");
      if (p.contains("costing")) {
        FecCostSheet sheet;
        sheet.direct_items = read_lines(r, p["costing"], "direct", path + ".costing");
        sheet.indirect_items = read_lines(r, p["costing"], "indirect", path + ".costing");
        sheet.price = promised;
        ps.costing = std::move(sheet);
      }
      ps.open_at = r.get_or<Tick>(p, "open_at", path, 1);
      cfg.projects.push_back(std::move(ps));
    }
  } else {
    r.fail("projects", "missing list");
  }

  std::set<std::string> listing_ids;
  if (root.contains("listings")) {
    for (std::size_t i = 0; i < root["listings"].size(); ++i) {
      const auto path = "listings[" + std::to_string(i) + "]";
      const auto& l = root["listings"][i];
      ListingSpec ls;
      ls.id = r.get_or<std::string>(l, "id", path, "");
      ls.owner = r.get_or<std::string>(l, "owner", path, "");
      ls.tags = r.get_or<std::vector<std::string>>(l, "tags", path, {});
      ls.description = r.get_or<std::string>(l, "description", path, "");
      ls.payload = r.get_or<std::string>(l, "payload", path, "");
      ls.ask_price = r.get_or<double>(l, "ask_price", path, 0.0);
      ls.publish_at = r.get_or<Tick>(l, "publish_at", path, 1);
      ls.tampered = r.get_or<bool>(l, "tampered", path, false);
      if (ls.id.empty()) r.fail(path + ".id", "missing listing id");
      else if (!listing_ids.insert(ls.id).second) r.fail(path + ".id", "duplicate listing id " + ls.id);
      if (!agent_ids.contains(ls.owner))
        r.fail(path + ".owner", "unknown agent " + ls.owner, Errc::dangling_reference);
      cfg.listings.push_back(std::move(ls));
    }
  }

  std::set<std::string> desideratum_ids;
  if (root.contains("desiderata")) {
    for (std::size_t i = 0; i < root["desiderata"].size(); ++i) {
      const auto path = "desiderata[" + std::to_string(i) + "]";
      const auto& d = root["desiderata"][i];
      DesideratumSpec ds;
      try {
        Json copy = d;
        if (copy.contains("listing")) copy["listing_id"] = copy["listing"];
        ds.desideratum = copy.get<Desideratum>();
      } catch (const std::exception& e) {
        r.fail(path, e.what(), Errc::parse_error);
        continue;
      }
      ds.post_at = r.get_or<Tick>(d, "post_at", path, 1);
      const auto& des = ds.desideratum;
      if (!desideratum_ids.insert(des.id).second) r.fail(path + ".id", "duplicate desideratum id " + des.id);
      if (!agent_ids.contains(des.agent))
        r.fail(path + ".agent", "unknown agent " + des.agent, Errc::dangling_reference);
      if (des.kind == DesideratumKind::offer && !listing_ids.contains(des.listing_id))
        r.fail(path + ".listing", "unknown listing " + des.listing_id, Errc::dangling_reference);
      cfg.desiderata.push_back(std::move(ds));
    }
  }

  if (!r.issues.empty()) throw ScenarioError(std::move(r.issues));
  return cfg;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

}  // namespace kmarket
