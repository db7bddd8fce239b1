// kmarket: command-line front end.
// Exit codes: 0 success, 1 validation failure (bad input), 2 verification failure.
#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "kmarket/chain_io.hpp"
#include "kmarket/codec.hpp"
#include "kmarket/inference.hpp"
#include "kmarket/metrics.hpp"
#include "kmarket/protocol.hpp"
#include "kmarket/scenario.hpp"
#include "kmarket/simulation.hpp"
#include "kmarket/subgroup_search.hpp"

namespace fs = std::filesystem;
using namespace kmarket;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kUnverified = 2;

json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(Errc::parse_error, path.string() + ": " + e.what());
  }
}

Chain load_chain(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
  char magic[8] = {};
  in.read(magic, sizeof magic);
  in.clear();
  in.seekg(0);
  if (std::string_view(magic, 8) == "KMCHAIN1") {
    crypto::Bytes bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_chain(bytes);
  }
  return read_chain(in);
}

int report_error(const Error& e) {
  if (const auto* se = dynamic_cast<const ScenarioError*>(&e)) {
    std::cerr << "invalid scenario: " << se->issues().size() << " problem(s)\n";
    for (const auto& i : se->issues())
      std::cerr << "  " << i.where << ": " << to_string(i.code) << ": " << i.message << '\n';
  } else {
    std::cerr << "error: " << e.what() << '\n';
  }
  return kInvalid;
}

int cmd_simulate(const std::string& scenario, std::optional<std::uint64_t> seed, const std::string& out_dir) {
  auto cfg = load_scenario(scenario);
  const fs::path dir = out_dir.empty() ? fs::path("out") / cfg.name : fs::path(out_dir);
  auto result = run(std::move(cfg), seed);
  write_outputs(result, dir);
  emit_report(result.metrics, ReportFormat::table, std::cout);
  std::cout << "outputs written to " << dir.string() << '\n';

  const auto verification = verify_chain(result.runtime.chain());
  if (!verification.ok) {
    std::cerr << "chain failed verification: " << to_string(verification.cause) << ": " << verification.detail << '\n';
    return kUnverified;
  }
  if (!result.audit.empty()) {
    for (const auto& f : result.audit) std::cerr << "audit " << f.check << " " << f.subject << ": " << f.detail << '\n';
    return kUnverified;
  }
  return kOk;
}

int cmd_ledger_verify(const std::string& path) {
  const auto chain = load_chain(path);
  const auto r = verify_chain(chain);
  if (!r.ok) {
    std::cout << "FAILED";
    if (r.failing_height) std::cout << " at height " << *r.failing_height;
    std::cout << ": " << to_string(r.cause) << ": " << r.detail << '\n';
    return kUnverified;
  }
  std::cout << "ok: " << chain.blocks().size() << " blocks, " << chain.transaction_count() << " transactions, head "
            << crypto::to_hex(chain.head_hash()) << '\n';
  return kOk;
}

int cmd_govern_replay(const std::string& path, const std::string& expect, const std::string& out, bool print_json) {
  const auto chain = load_chain(path);
  const auto v = verify_chain(chain);
  if (!v.ok) {
    std::cout << "chain failed verification: " << to_string(v.cause) << ": " << v.detail << '\n';
    return kUnverified;
  }
  const auto replayed = replay(chain);
  if (replayed.failure) {
    std::cout << "replay failed at height " << replayed.failure->height << " tx " << replayed.failure->tx_index << ": "
              << replayed.failure->detail << '\n';
    return kUnverified;
  }
  const auto snapshot = replayed.state.snapshot();
  if (!out.empty()) {
    std::ofstream o(out, std::ios::binary);
    if (!o) throw Error(Errc::io_error, "cannot write " + out);
    o << snapshot.dump(2) << '\n';
  }
  if (print_json) {
    std::cout << snapshot.dump(2) << '\n';
  } else {
    std::cout << std::left << std::setw(20) << "proposal" << std::setw(12) << "state" << std::setw(14) << "released"
              << "dispute\n";
    for (const auto& [id, rec] : replayed.state.proposals()) {
      std::cout << std::left << std::setw(20) << id << std::setw(12) << to_string(rec.funding.proposal.state)
                << std::setw(14) << rec.funding.escrow.released << to_string(rec.funding.dispute.status) << '\n';
    }
    std::cout << "contracts: " << replayed.state.contracts().size()
              << ", total currency: " << replayed.state.total_currency() << '\n';
  }
  const auto findings = audit(replayed.state);
  for (const auto& f : findings) std::cout << "audit " << f.check << " " << f.subject << ": " << f.detail << '\n';
  if (!findings.empty()) return kUnverified;
  if (!expect.empty()) {
    if (read_json(expect) != snapshot) {
      std::cout << "replayed state differs from " << expect << '\n';
      return kUnverified;
    }
    std::cout << "replayed state matches " << expect << '\n';
  }
  return kOk;
}

int cmd_match(const std::string& project_file, const std::string& agents_file, const std::string& mode,
              const std::string& aim, double floor, std::size_t cap) {
  const auto pj = read_json(project_file);
  const auto aj = read_json(agents_file);
  std::vector<SkillProfile> projects;
  std::vector<std::string> project_ids;
  TaxonomyPtr tax;
  try {
    tax = make_taxonomy(pj.at("skills").get<std::vector<std::string>>());
    const auto list = pj.contains("projects") ? pj["projects"] : json::array({pj});
    for (const auto& p : list) {
      project_ids.push_back(p.value("id", "project"));
      projects.emplace_back(tax, p.at("radii").get<std::vector<double>>());
    }
    std::vector<Candidate> agents;
    for (const auto& a : aj.at("agents"))
      agents.push_back({a.at("id").get<std::string>(), SkillProfile(tax, a.at("radii").get<std::vector<double>>())});

    SearchOptions opts;
    opts.mode = mode == "greedy" ? SearchMode::greedy : SearchMode::exhaustive;
    opts.aim = aim;
    opts.floor = floor;
    opts.exhaustive_cap = cap;
    const auto conf = stable_subgroup_search(projects, agents, opts);
    json groups = json::array();
    for (std::size_t g = 0; g < conf.groups.size(); ++g)
      groups.push_back({{"members", conf.groups[g]}, {"project", project_ids[conf.project_of_group[g]]}});
    std::cout << json{{"mode", mode},
                      {"partition", conf.partition},
                      {"groups", groups},
                      {"total_free_energy", conf.total_free_energy}}
                     .dump(2)
              << '\n';
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, e.what());
  }
  return kOk;
}

int cmd_inspect_model(const std::string& scenario, const std::string& project_id, const std::string& aim) {
  const auto cfg = load_scenario(scenario);
  const auto* project = cfg.find_project(project_id);
  if (!project) throw Error(Errc::dangling_reference, "no project " + project_id + " in scenario");
  std::vector<Candidate> candidates;
  for (const auto& r : cfg.researchers)
    if (r.taxonomy_id == project->taxonomy_id) candidates.push_back({r.id, r.profile});
  const TeamSizeRange sizes{std::min(cfg.params.min_team, candidates.size()),
                            std::min(cfg.params.max_team, candidates.size())};
  const auto model = build_team_model(project->requirement, candidates, sizes, cfg.params.floor);
  const auto evidence = marginal_evidence(model, aim);
  const auto posterior = exact_posterior(model, aim);
  const auto uniform = free_energy(VariationalDistribution::uniform(model.state_count()), model, aim);
  const auto a = model.aim_index(aim);

  std::cout << "project " << project_id << ", " << candidates.size() << " candidates, team sizes " << sizes.min << ".."
            << sizes.max << ", " << model.state_count() << " states\n";
  std::cout << "p(" << aim << ") = " << evidence << ", -ln p(" << aim << ") = " << -std::log(evidence) << " nats\n";
  std::cout << "F(uniform q) = " << uniform.free_energy << " nats, KL gap " << uniform.kl_gap << "\n\n";
  std::vector<std::size_t> order(model.state_count());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) { return posterior[x] > posterior[y]; });
  std::cout << std::left << std::setw(32) << "team" << std::setw(14) << "prior" << std::setw(14) << "p(aim|team)"
            << "posterior\n";
  const std::size_t shown = std::min<std::size_t>(order.size(), 20);
  for (std::size_t k = 0; k < shown; ++k) {
    const auto s = order[k];
    double prior = 0.0;
    for (std::size_t o = 0; o < model.aim_count(); ++o) prior += model.joint(s, o);
    std::cout << std::left << std::setw(32) << model.states()[s].label << std::setw(14) << prior << std::setw(14)
              << model.joint(s, a) / prior << posterior[s] << '\n';
  }
  if (shown < order.size()) std::cout << "... " << order.size() - shown << " more states\n";
  return kOk;
}

int cmd_report(const std::string& path, const std::string& format) {
  const auto report = metrics_from_json(read_json(path));
  emit_report(report, format == "structured" ? ReportFormat::structured : ReportFormat::table, std::cout);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Knowledge-market simulator: team matching, DAO funding governance and a signed event ledger"};
  app.require_subcommand(1);

  auto* simulate = app.add_subcommand("simulate", "Run a scenario and write chain, metrics and event files");
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  simulate->add_option("scenario", scenario, "Scenario file")->required()->check(CLI::ExistingFile);
  simulate->add_option("--seed", seed, "Override the scenario seed");
  simulate->add_option("--out", out_dir, "Output directory (default out/<scenario name>)");

  auto* ledger = app.add_subcommand("ledger", "Ledger tools");
  ledger->require_subcommand(1);
  auto* verify = ledger->add_subcommand("verify", "Verify every hash, signature and nonce of a chain file");
  std::string chain_file;
  verify->add_option("chain-file", chain_file, "Chain file (.jsonl or binary)")->required()->check(CLI::ExistingFile);

  auto* govern = app.add_subcommand("govern", "Governance tools");
  govern->require_subcommand(1);
  auto* replay_cmd = govern->add_subcommand("replay", "Rebuild governance and market state from a chain file");
  std::string expect;
  std::string replay_out;
  bool replay_json = false;
  replay_cmd->add_option("chain-file", chain_file, "Chain file")->required()->check(CLI::ExistingFile);
  replay_cmd->add_option("--expect", expect, "Recorded state (governance.json) that the replay must equal");
  replay_cmd->add_option("--out", replay_out, "Write the replayed state here");
  replay_cmd->add_flag("--json", replay_json, "Print the full replayed state");

  auto* match = app.add_subcommand("match", "Run the stable sub-group search");
  std::string project_file;
  std::string agents_file;
  std::string mode = "exhaustive";
  std::string aim{kAimAchieved};
  double floor = 0.01;
  std::size_t cap = 10;
  match->add_option("--project", project_file, "Project file")->required()->check(CLI::ExistingFile);
  match->add_option("--agents", agents_file, "Agents file")->required()->check(CLI::ExistingFile);
  match->add_option("--mode", mode, "exhaustive|greedy")->check(CLI::IsMember({"exhaustive", "greedy"}));
  match->add_option("--aim", aim, "Aim to condition on");
  match->add_option("--floor", floor, "Probability floor");
  match->add_option("--cap", cap, "Largest agent count searched exhaustively");

  auto* inspect = app.add_subcommand("inspect-model", "Show the team generative model of a scenario project");
  std::string project_id;
  inspect->add_option("scenario", scenario, "Scenario file")->required()->check(CLI::ExistingFile);
  inspect->add_option("project-id", project_id, "Project id")->required();
  inspect->add_option("--aim", aim, "Aim to condition on");

  auto* report = app.add_subcommand("report", "Render a metrics file");
  std::string metrics_file;
  std::string format = "table";
  report->add_option("metrics-file", metrics_file, "metrics.json")->required()->check(CLI::ExistingFile);
  report->add_option("--format", format, "table|structured")->check(CLI::IsMember({"table", "structured"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }

  try {
    if (*simulate) return cmd_simulate(scenario, seed, out_dir);
    if (*verify) return cmd_ledger_verify(chain_file);
    if (*replay_cmd) return cmd_govern_replay(chain_file, expect, replay_out, replay_json);
    if (*match) return cmd_match(project_file, agents_file, mode, aim, floor, cap);
    if (*inspect) return cmd_inspect_model(scenario, project_id, aim);
    if (*report) return cmd_report(metrics_file, format);
  } catch (const Error& e) {
    // A chain that cannot even be parsed is a verification failure for the ledger commands.
    if ((*verify || *replay_cmd) && (e.code() == Errc::malformed_record || e.code() == Errc::parse_error)) {
      std::cout << "FAILED: " << e.what() << '\n';
      return kUnverified;
    }
    return report_error(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInvalid;
  }
  return kInvalid;
}
