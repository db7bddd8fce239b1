#include "kmarket/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

#include "kmarket/chain_io.hpp"
#include "kmarket/codec.hpp"
#include "kmarket/subgroup_search.hpp"

namespace kmarket {

double Rng::normal() {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t Rng::categorical(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  double x = uniform() * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (x < weights[i]) return i;
    x -= weights[i];
  }
  return weights.size() - 1;
}

crypto::Seed agent_seed(std::uint64_t run_seed, const AgentId& id) {
  crypto::Bytes material;
  for (int i = 0; i < 8; ++i) material.push_back(static_cast<std::uint8_t>(run_seed >> (8 * i)));
  material.insert(material.end(), id.begin(), id.end());
  return crypto::sha256(material);
}

nlohmann::json to_json(const SimEvent& e) {
  nlohmann::json j{{"tick", e.tick}, {"phase", e.phase},     {"type", e.type},
                   {"actor", e.actor}, {"subject", e.subject}, {"detail", e.detail}};
  if (e.error) j["code"] = std::string(to_string(*e.error));
  return j;
}

namespace {

constexpr double kAdversarialEpsilon = 1e-3;
constexpr std::size_t kMissed = 2;  // index of "missed" in the milestone outcome model

struct ProjectRun {
  const ProjectSpec* spec{nullptr};
  std::vector<AgentId> team;
  double fit{0.0};
  bool staffed{false};
  bool closed{false};
};

crypto::Digest cv_digest(const AgentId& member, std::uint32_t version) {
  return crypto::sha256("cv:" + member + ":v" + std::to_string(version));
}

class Simulator {
public:
  Simulator(ScenarioConfig config, std::uint64_t seed) : rng_(seed), seed_(seed) {
    result_.config = std::move(config);
    auto& cfg = result_.config;
    cfg.seed = seed;
    std::sort(cfg.researchers.begin(), cfg.researchers.end(), [](auto& a, auto& b) { return a.id < b.id; });
    std::sort(cfg.investors.begin(), cfg.investors.end(), [](auto& a, auto& b) { return a.id < b.id; });
    std::sort(cfg.projects.begin(), cfg.projects.end(), [](auto& a, auto& b) { return a.id < b.id; });
    for (const auto& p : cfg.projects) projects_[p.id].spec = &p;
  }

  SimulationResult run() {
    setup();
    const auto& cfg = result_.config;
    for (Tick t = 1; t <= cfg.horizon; ++t) {
      rt().set_tick(t);
      tick_ = t;
      matching();
      governance();
      settlement();
      rt().seal();
      result_.currency_by_tick.push_back(rt().state().total_currency());
    }
    finish();
    return std::move(result_);
  }

private:
  ProtocolRuntime& rt() { return result_.runtime; }
  const ProtocolState& st() { return result_.runtime.state(); }
  const ProtocolParams& params() { return result_.config.params; }

  void note(const char* phase, std::string type, const AgentId& actor, std::string subject, std::string detail = {}) {
    result_.events.push_back({tick_, phase, std::move(type), actor, std::move(subject), std::move(detail), {}});
  }

  void fail(const char* phase, const AgentId& actor, std::string subject, const Error& e) {
    result_.events.push_back({tick_, phase, "error", actor, std::move(subject), e.what(), e.code()});
  }

  bool submit(const char* phase, const AgentId& actor, TxKind kind, const Json& payload, const std::string& subject) {
    try {
      rt().submit(actor, kind, payload);
      note(phase, std::string(to_string(kind)), actor, subject);
      return true;
    } catch (const Error& e) {
      fail(phase, actor, subject, e);
      return false;
    }
  }

  void setup() {
    const auto& cfg = result_.config;
    rt().set_tick(0);
    try {
      rt().register_protocol(std::string(kProtocolAgent), cfg.params, agent_seed(seed_, std::string(kProtocolAgent)));
      note("setup", "RegisterIdentity", std::string(kProtocolAgent), std::string(kProtocolAgent));
    } catch (const Error& e) {
      fail("setup", std::string(kProtocolAgent), std::string(kProtocolAgent), e);
    }
    for (const auto& r : cfg.researchers) register_agent(r.id, kResearcherRole, {{"balance", r.balance}});
    for (const auto& i : cfg.investors)
      register_agent(i.id, kInvestorRole, {{"balance", i.capital}, {"stake", i.stake}});
    rt().seal();
    result_.currency_by_tick.push_back(st().total_currency());
  }

  void register_agent(const AgentId& id, std::string_view role, const Json& params) {
    try {
      rt().register_agent(id, role, params, agent_seed(seed_, id));
      note("setup", "RegisterIdentity", id, id, std::string(role));
    } catch (const Error& e) {
      fail("setup", id, id, e);
    }
  }

  // (1) Researchers team up once the available pool's group strength reaches 1.
  void matching() {
    const auto& cfg = result_.config;
    for (const auto& tax : cfg.taxonomies) {
      std::vector<Candidate> pool;
      for (const auto& r : cfg.researchers)
        if (r.taxonomy_id == tax.id && !busy_.contains(r.id) && st().identities().contains(r.id))
          pool.push_back({r.id, r.profile});
      if (pool.empty()) continue;
      std::vector<SkillProfile> pool_profiles;
      for (const auto& c : pool) pool_profiles.push_back(c.profile);

      std::vector<ProjectRun*> triggered;
      for (auto& [id, pr] : projects_) {
        if (pr.staffed || pr.closed || pr.spec->taxonomy_id != tax.id || pr.spec->open_at > tick_) continue;
        try {
          if (group_strength(pr.spec->requirement, pool_profiles) >= 1.0) triggered.push_back(&pr);
        } catch (const Error& e) {
          fail("matching", "", id, e);
          pr.closed = true;
        }
      }
      if (triggered.empty()) continue;

      try {
        if (pool.size() == 1) {
          staff(*triggered.front(), {pool.front()});
          continue;
        }
        std::vector<SkillProfile> reqs;
        for (const auto* pr : triggered) reqs.push_back(pr->spec->requirement);
        SearchOptions opts;
        opts.floor = params().floor;
        opts.exhaustive_cap = params().exhaustive_cap;
        opts.max_group_size = params().max_team;
        opts.mode = pool.size() > params().exhaustive_cap ? SearchMode::greedy : SearchMode::exhaustive;
        const auto conf = stable_subgroup_search(reqs, pool, opts);
        note("matching", "subgroup_search", "", tax.id,
             std::to_string(conf.groups.size()) + " groups, F=" + std::to_string(conf.total_free_energy));
        // Each project takes its best-fitting sub-group; other groups stay in the pool.
        for (std::size_t j = 0; j < triggered.size(); ++j) {
          std::optional<std::size_t> best;
          double best_fit = -1.0;
          for (std::size_t g = 0; g < conf.groups.size(); ++g) {
            if (conf.project_of_group[g] != j) continue;
            const double f = fit_of(*triggered[j], members_of(pool, conf.groups[g]));
            if (f > best_fit) {
              best = g;
              best_fit = f;
            }
          }
          if (best) staff(*triggered[j], members_of(pool, conf.groups[*best]));
        }
      } catch (const Error& e) {
        fail("matching", "", tax.id, e);
      }
    }
  }

  static std::vector<Candidate> members_of(const std::vector<Candidate>& pool, const std::vector<AgentId>& ids) {
    std::vector<Candidate> out;
    for (const auto& id : ids)
      for (const auto& c : pool)
        if (c.id == id) out.push_back(c);
    return out;
  }

  static double fit_of(const ProjectRun& pr, const std::vector<Candidate>& members) {
    std::vector<SkillProfile> profiles;
    for (const auto& m : members) profiles.push_back(m.profile);
    return cooperation_fit(pr.spec->requirement, team_profile(profiles)).value;
  }

  void staff(ProjectRun& pr, const std::vector<Candidate>& members) {
    pr.fit = fit_of(pr, members);
    pr.team.clear();
    for (const auto& m : members) {
      pr.team.push_back(m.id);
      busy_.insert(m.id);
    }
    pr.staffed = true;
    result_.teams.push_back({pr.spec->id, pr.team, pr.fit, tick_});
    std::string names;
    for (const auto& m : pr.team) names += (names.empty() ? "" : ",") + m;
    note("matching", "team_formed", pr.team.front(), pr.spec->id, names + " fit=" + std::to_string(pr.fit));
  }

  void release_team(ProjectRun& pr, const std::string& why) {
    pr.closed = true;
    for (const auto& m : pr.team) busy_.erase(m);
    note("governance", "project_closed", "", pr.spec->id, why);
  }

  // (2)-(4) Proposals, votes, escrow, milestones, disputes.
  void governance() {
    for (auto& [id, pr] : projects_) {
      if (pr.closed || !pr.staffed) continue;
      const auto& proposals = st().proposals();
      auto it = proposals.find(id);
      if (it == proposals.end()) {
        if (submit("governance", pr.team.front(), TxKind::submit_proposal, {{"proposal", draft(pr)}}, id))
          vote_on_proposal(pr);
        else
          release_team(pr, "proposal refused");
        continue;
      }
      const auto& rec = it->second;
      switch (rec.funding.proposal.state) {
        case ProposalState::rejected: revise(pr, rec); break;
        case ProposalState::voting: close_round(proposal_round_id(id, rec.funding.proposal.version)); break;
        case ProposalState::accepted: deposit(pr, params().initial_deposit_fraction * rec.funding.proposal.promised());
          break;
        case ProposalState::funded: advance_funded(pr); break;
        default: release_team(pr, std::string(to_string(rec.funding.proposal.state))); break;
      }
    }
  }

  Proposal draft(const ProjectRun& pr) {
    const auto& spec = *pr.spec;
    Proposal p;
    p.id = spec.id;
    p.title = spec.title;
    p.introduction = spec.introduction;
    p.literature_review = spec.literature_review;
    p.methodology = spec.methodology;
    for (std::size_t k = 0; k < spec.milestones.size(); ++k)
      p.plan.push_back(Milestone{k, spec.milestones[k].description, spec.milestones[k].amount, spec.milestones[k].due,
                                 MilestoneState::pending});
    p.budget = spec.budget;
    p.team = signed_team(pr, 1);
    return p;
  }

  std::vector<CvEntry> signed_team(const ProjectRun& pr, std::uint32_t version) {
    std::vector<CvEntry> team;
    for (const auto& m : pr.team) team.push_back(sign_cv(m, rt().keys(m), cv_digest(m, version)));
    return team;
  }

  void vote_on_proposal(const ProjectRun& pr) {
    const auto prop = st().proposals().at(pr.spec->id).funding.proposal;
    const auto round = proposal_round_id(prop.id, prop.version);
    const double p_success = clamped_aim_probability(pr.fit, kAimAchieved, params().floor);
    for (const auto& inv : result_.config.investors) {
      double belief = p_success;
      if (inv.policy == BeliefPolicy::noisy) belief = std::clamp(p_success + inv.noise * rng_.normal(), 0.0, 1.0);
      const bool demands_revision = prop.version <= inv.revision_demands;
      const bool backs = inv.policy == BeliefPolicy::adversarial || belief >= inv.accept_threshold;
      Json ballot{{"round", round}, {"weight", inv.stake}};
      if (!demands_revision && backs) {
        ballot["choice"] = "yes";
      } else {
        ballot["choice"] = "no";
        ballot["reason"] = demands_revision
                               ? RejectionReason{Section::methodology, "methodology needs more detail"}
                               : RejectionReason{Section::team, "team fit below the investor's threshold"};
      }
      submit("governance", inv.id, TxKind::cast_vote, ballot, round);
    }
    close_round(round);
  }

  std::optional<Outcome> close_round(const std::string& round_id) {
    auto it = st().rounds().find(round_id);
    if (it == st().rounds().end() || it->second.closed()) return std::nullopt;
    try {
      const auto result = tally(it->second.ballots, round_tally_options(params(), it->second.kind));
      const Json payload{{"round", round_id},
                         {"outcome", std::string(to_string(result.outcome))},
                         {"yes_weight", result.yes_weight},
                         {"no_weight", result.no_weight}};
      if (submit("governance", std::string(kProtocolAgent), TxKind::close_vote, payload, round_id)) return result.outcome;
    } catch (const Error& e) {
      fail("governance", std::string(kProtocolAgent), round_id, e);
    }
    return std::nullopt;
  }

  void revise(ProjectRun& pr, const ProposalRecord& rec) {
    const auto& prop = rec.funding.proposal;
    if (prop.version >= params().max_versions) {
      release_team(pr, "rejected at revision limit");
      return;
    }
    Revisions rev;
    const std::string mark = " (revised for v" + std::to_string(prop.version + 1) + ")";
    for (const auto& reason : prop.rejection_reasons) {
      if (!reason.section) continue;
      switch (*reason.section) {
        case Section::title: rev.title = prop.title + mark; break;
        case Section::introduction: rev.introduction = prop.introduction + mark; break;
        case Section::literature_review: rev.literature_review = prop.literature_review + mark; break;
        case Section::methodology: rev.methodology = prop.methodology + mark; break;
        case Section::plan: rev.plan = prop.plan; break;
        case Section::budget: rev.budget = prop.budget; break;
        case Section::team: rev.team = signed_team(pr, prop.version + 1); break;
      }
    }
    if (submit("governance", pr.team.front(), TxKind::submit_proposal, {{"proposal_id", prop.id}, {"revisions", rev}},
               prop.id))
      vote_on_proposal(pr);
    else
      release_team(pr, "resubmission refused");
  }

  // Investors contribute in proportion to stake, each capped by its balance.
  bool deposit(const ProjectRun& pr, Amount amount) {
    const auto& investors = result_.config.investors;
    double stake_total = 0.0;
    for (const auto& inv : investors) stake_total += inv.stake;
    Json contributions = Json::array();
    for (const auto& inv : investors) {
      const double share = stake_total > 0.0 ? inv.stake / stake_total : 1.0 / static_cast<double>(investors.size());
      const Amount a = std::min(st().accounts().balance(inv.id), amount * share);
      if (a > 0.0) contributions.push_back({{"investor", inv.id}, {"amount", a}});
    }
    return submit("governance", std::string(kProtocolAgent), TxKind::deposit_escrow,
                  {{"proposal_id", pr.spec->id}, {"contributions", contributions}}, pr.spec->id);
  }

  void advance_funded(ProjectRun& pr) {
    const auto& id = pr.spec->id;
    if (maybe_abandon(pr)) return;
    const auto& rec = st().proposals().at(id);
    if (rec.funding.dispute.status == DisputeStatus::forfeit_proposed) {
      forfeit_vote(pr);
      return;
    }
    // A closed but unexecuted milestone round (e.g. short of liquidity) is retried first.
    for (const auto& [rid, round] : st().rounds()) {
      if (round.proposal_id == id && round.kind == RoundKind::milestone && round.closed() && !round.consumed) {
        execute_milestone(pr, rid);
        return;
      }
    }
    const auto& prop = rec.funding.proposal;
    std::size_t idx = 0;
    while (idx < prop.plan.size() && prop.plan[idx].state == MilestoneState::released) ++idx;
    if (idx == prop.plan.size() || !rec.funded_at || tick_ < *rec.funded_at + prop.plan[idx].deadline) return;

    const auto& escrow = rec.funding.escrow;
    const std::size_t attempt = rec.milestone_rounds;
    if (escrow.balance() < prop.plan[idx].amount) {
      const Amount need = std::min(prop.plan[idx].amount - escrow.balance(), escrow.promised - escrow.deposited);
      if (need > 0.0) deposit(pr, need);
    }
    milestone_vote(pr, idx, attempt);
  }

  void milestone_vote(ProjectRun& pr, std::size_t idx, std::size_t attempt) {
    const auto& id = pr.spec->id;
    const auto model = milestone_outcome_model(pr.fit);
    std::vector<double> prior(model.state_count());
    for (std::size_t s = 0; s < prior.size(); ++s) prior[s] = model.joint(s, 0) + model.joint(s, 1);
    const std::size_t truth = rng_.categorical(prior);
    const bool complete = rng_.uniform() < model.joint(truth, 0) / prior[truth];
    const std::string_view report = complete ? kReportComplete : kReportIncomplete;
    const auto posterior = exact_posterior(model, report);

    const auto round = milestone_round_id(id, idx, attempt);
    note("governance", "milestone_report", pr.team.front(), round, std::string(report));
    for (const auto& inv : result_.config.investors) {
      std::vector<double> q(posterior.probabilities().begin(), posterior.probabilities().end());
      if (inv.policy == BeliefPolicy::noisy) {
        double z = 0.0;
        for (auto& v : q) z += (v *= std::exp(inv.noise * rng_.normal()));
        for (auto& v : q) v /= z;
      } else if (inv.policy == BeliefPolicy::adversarial) {
        q.assign(q.size(), kAdversarialEpsilon);
        q[kMissed] = 1.0 - kAdversarialEpsilon * static_cast<double>(q.size() - 1);
      }
      const double score = disagreement_score(VariationalDistribution(q), model, report);
      const bool yes = inv.policy != BeliefPolicy::adversarial && q[kMissed] < 0.5;
      last_missed_[{inv.id, id}] = q[kMissed];
      Json ballot{{"round", round},      {"proposal_id", id},
                  {"milestone", idx},    {"weight", inv.stake},
                  {"choice", yes ? "yes" : "no"}, {"score", score_to_json(score)}};
      if (!yes) ballot["reason"] = RejectionReason{Section::plan, "milestone evidence judged insufficient"};
      submit("governance", inv.id, TxKind::cast_vote, ballot, round);
    }
    if (close_round(round)) execute_milestone(pr, round);
  }

  void execute_milestone(ProjectRun& pr, const std::string& round_id) {
    const auto& round = st().rounds().at(round_id);
    const auto& id = pr.spec->id;
    Json payload{{"proposal_id", id}, {"milestone", round.milestone}, {"round", round_id}};
    if (round.result->outcome == Outcome::accepted) {
      submit("governance", std::string(kProtocolAgent), TxKind::release_milestone, payload, round_id);
    } else {
      payload["score"] = score_to_json(round.aggregate_score());
      submit("governance", std::string(kProtocolAgent), TxKind::raise_dispute, payload, round_id);
    }
    const auto state = st().proposals().at(id).funding.proposal.state;
    if (state == ProposalState::completed) release_team(pr, "Completed");
    else if (st().proposals().at(id).funding.dispute.status == DisputeStatus::forfeit_proposed) forfeit_vote(pr);
  }

  void forfeit_vote(ProjectRun& pr) {
    const auto& id = pr.spec->id;
    const auto round = forfeit_round_id(id, st().proposals().at(id).forfeit_rounds);
    if (!submit("governance", std::string(kProtocolAgent), TxKind::forfeit_bond, {{"proposal_id", id}, {"round", round}},
                round))
      return;
    for (const auto& inv : result_.config.investors) {
      auto it = last_missed_.find({inv.id, id});
      const bool yes = inv.policy == BeliefPolicy::adversarial || (it != last_missed_.end() && it->second >= 0.5);
      submit("governance", inv.id, TxKind::cast_vote, {{"round", round}, {"weight", inv.stake}, {"choice", yes ? "yes" : "no"}},
             round);
    }
    close_round(round);
    if (st().proposals().at(id).funding.proposal.state == ProposalState::forfeited) release_team(pr, "Forfeited");
  }

  bool maybe_abandon(ProjectRun& pr) {
    const auto& id = pr.spec->id;
    const auto& rec = st().proposals().at(id);
    if (!rec.funded_at || rec.abandon_rounds > 0) return false;
    const Tick funded_at = *rec.funded_at;
    auto wants = [&](const InvestorSpec& inv) { return inv.abandon_after && tick_ >= funded_at + *inv.abandon_after; };
    const auto& investors = result_.config.investors;
    auto initiator = std::find_if(investors.begin(), investors.end(), wants);
    if (initiator == investors.end()) return false;
    const auto round = abandon_round_id(id, rec.abandon_rounds);
    if (!submit("governance", initiator->id, TxKind::abandon_proposal, {{"proposal_id", id}, {"round", round}}, round))
      return false;
    for (const auto& inv : investors)
      submit("governance", inv.id, TxKind::cast_vote,
             {{"round", round}, {"weight", inv.stake}, {"choice", wants(inv) ? "yes" : "no"}}, round);
    close_round(round);
    if (st().proposals().at(id).funding.proposal.state == ProposalState::abandoned) {
      release_team(pr, "Abandoned");
      return true;
    }
    return false;
  }

  // (5) Knowledge marketplace: publish, post, match, contract, settle.
  void settlement() {
    const auto& cfg = result_.config;
    for (const auto& l : cfg.listings) {
      if (l.publish_at > tick_ || attempted_.contains("listing:" + l.id)) continue;
      attempted_.insert("listing:" + l.id);
      try {
        const auto secret = crypto::sha256("owner-secret:" + std::to_string(seed_) + ":" + l.owner);
        auto pub = publish_listing(l.id, l.owner, l.tags, l.description, crypto::as_bytes(l.payload), l.ask_price,
                                   params().lexicon, secret);
        if (submit("settlement", l.owner, TxKind::create_listing, {{"listing", pub.listing}}, l.id))
          published_.emplace(l.id, std::move(pub));
      } catch (const Error& e) {
        fail("settlement", l.owner, l.id, e);
      }
    }
    for (const auto& d : cfg.desiderata) {
      if (d.post_at > tick_ || attempted_.contains("desideratum:" + d.desideratum.id)) continue;
      attempted_.insert("desideratum:" + d.desideratum.id);
      submit("settlement", d.desideratum.agent, TxKind::post_desideratum, {{"desideratum", d.desideratum}},
             d.desideratum.id);
    }

    std::vector<Desideratum> requests;
    std::vector<Desideratum> offers;
    for (const auto& [id, rec] : st().desiderata()) {
      if (!rec.open) continue;
      (rec.desideratum.kind == DesideratumKind::request ? requests : offers).push_back(rec.desideratum);
    }
    if (requests.empty() || offers.empty()) return;
    std::vector<MatchCandidate> matches;
    try {
      matches = match_desiderata(requests, offers, params().lexicon, tick_);
    } catch (const Error& e) {
      fail("settlement", "", "match", e);
      return;
    }
    std::set<std::string> used;
    for (const auto& m : matches) {
      if (used.contains(m.request_id) || used.contains(m.offer_id)) continue;
      // Copies: every accepted event replaces the state object.
      const auto req = st().desiderata().at(m.request_id).desideratum;
      const auto off = st().desiderata().at(m.offer_id).desideratum;
      auto pub = published_.find(off.listing_id);
      if (pub == published_.end()) continue;
      used.insert(m.request_id);
      used.insert(m.offer_id);
      trade(req, off, m, pub->second);
    }
  }

  void trade(const Desideratum& req, const Desideratum& off, const MatchCandidate& m, const PublishedListing& pub) {
    const auto cid = "c:" + req.id + ":" + off.id;
    const Amount price = std::clamp(pub.listing.ask_price, m.price_low, m.price_high);
    try {
      auto doc = form_contract(cid, req.agent, off.agent, pub.listing, price, m.price_low, m.price_high,
                               "licence to " + pub.listing.id + "; shipping and insurance not applicable");
      doc = sign_contract(doc, ContractParty::buyer, rt().keys(req.agent));
      doc = sign_contract(doc, ContractParty::seller, rt().keys(off.agent));
      if (!submit("settlement", req.agent, TxKind::form_contract,
                  {{"contract", doc}, {"request_id", req.id}, {"offer_id", off.id}}, cid))
        return;
      crypto::Bytes delivered = pub.sealed_payload;
      const auto* spec = find_listing(pub.listing.id);
      if (spec && spec->tampered) delivered.back() ^= 0x01;
      const auto record = settle(rt(), cid, pub.key, delivered);
      note("settlement", "settlement", req.agent, cid, std::string(to_string(record.status)));
    } catch (const Error& e) {
      fail("settlement", req.agent, cid, e);
    }
  }

  const ListingSpec* find_listing(const std::string& id) const {
    for (const auto& l : result_.config.listings)
      if (l.id == id) return &l;
    return nullptr;
  }

  void finish() {
    const auto& cfg = result_.config;
    const auto& state = st();
    MetricsReport& m = result_.metrics;
    m.scenario = cfg.name;
    m.seed = seed_;

    std::vector<Amount> receipts;
    for (const auto& r : cfg.researchers) {
      auto it = state.receipts().find(r.id);
      receipts.push_back(it == state.receipts().end() ? 0.0 : it->second);
    }
    try {
      if (!receipts.empty()) m.gini_funding = gini(receipts);
    } catch (const Error&) {
      m.gini_funding.reset();  // nobody received funds
    }

    double fit_sum = 0.0;
    for (const auto& t : result_.teams) fit_sum += t.fit;
    m.teams_formed = result_.teams.size();
    m.mean_match_fit = result_.teams.empty() ? 0.0 : fit_sum / static_cast<double>(result_.teams.size());

    std::vector<double> to_fund;
    std::size_t disputed = 0;
    for (const auto& [id, rec] : state.proposals()) {
      ++m.proposals;
      const auto s = rec.funding.proposal.state;
      if (rec.funded_at) {
        ++m.funded;
        to_fund.push_back(static_cast<double>(*rec.funded_at - rec.submitted_at));
        if (rec.ever_disputed) ++disputed;
      }
      if (s == ProposalState::completed) ++m.completed;
      if (s == ProposalState::forfeited) ++m.forfeited;
      if (s == ProposalState::abandoned) ++m.abandoned;
    }
    if (!to_fund.empty()) {
      std::sort(to_fund.begin(), to_fund.end());
      const std::size_t n = to_fund.size();
      m.median_time_to_fund = n % 2 ? to_fund[n / 2] : 0.5 * (to_fund[n / 2 - 1] + to_fund[n / 2]);
    }
    auto rate = [](std::size_t k, std::size_t n) { return n == 0 ? 0.0 : static_cast<double>(k) / static_cast<double>(n); };
    m.dispute_rate = rate(disputed, m.funded);
    m.forfeit_rate = rate(m.forfeited, m.funded);
    m.abandonment_rate = rate(m.abandoned, m.funded);

    for (const auto& [id, c] : state.contracts()) {
      ++m.contracts;
      if (c.settlement.status == SettlementStatus::complete) ++m.settlements_complete;
    }
    m.settlement_completion_rate = rate(m.settlements_complete, m.contracts);

    m.ticks = cfg.horizon;
    m.blocks = result_.runtime.chain().blocks().size();
    m.transactions = result_.runtime.chain().transaction_count();
    m.error_events = static_cast<std::size_t>(
        std::count_if(result_.events.begin(), result_.events.end(), [](const SimEvent& e) { return e.error.has_value(); }));
    const double base = result_.currency_by_tick.front();
    for (double c : result_.currency_by_tick) m.max_conservation_drift = std::max(m.max_conservation_drift, std::abs(c - base));
    result_.audit = audit(state);
  }

  SimulationResult result_;
  Rng rng_;
  std::uint64_t seed_;
  Tick tick_{0};
  std::map<std::string, ProjectRun> projects_;
  std::set<AgentId> busy_;
  std::map<std::pair<AgentId, std::string>, double> last_missed_;
  std::map<std::string, PublishedListing> published_;
  std::set<std::string> attempted_;
};

}  // namespace

SimulationResult run(ScenarioConfig config, std::optional<std::uint64_t> seed) {
  const std::uint64_t s = seed.value_or(config.seed);
  Simulator sim(std::move(config), s);
  return sim.run();
}

void write_outputs(const SimulationResult& result, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::io_error, "cannot create " + dir.string() + ": " + ec.message());
  write_chain_file(dir / "chain.jsonl", result.runtime.chain());
  auto write = [&](const char* name, const std::string& text) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw Error(Errc::io_error, "cannot write " + (dir / name).string());
    out << text;
  };
  write("metrics.json", to_json(result.metrics).dump(2) + "\n");
  std::string events;
  for (const auto& e : result.events) events += to_json(e).dump() + "\n";
  write("events.jsonl", events);
  write("governance.json", result.runtime.state().snapshot().dump(2) + "\n");
}

}  // namespace kmarket
