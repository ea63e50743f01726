#include "json_codec.hpp"
#include "lateralsim/adversary.hpp"

namespace lateralsim {

using detail::json;

namespace {

json exploits_to_json(const ExploitSet& e) {
  json out = json::array();
  if (e.privilege_escalation) out.push_back("PrivilegeEscalation");
  if (e.credential_harvest) out.push_back("CredentialHarvest");
  return out;
}

ExploitSet exploits_from_json(const json& j, const std::string& ctx) {
  ExploitSet e;
  if (!j.is_array()) throw Error(ErrorCode::ParseError, ctx + ": exploits must be an array");
  for (const auto& v : j) {
    if (v == "PrivilegeEscalation") {
      e.privilege_escalation = true;
    } else if (v == "CredentialHarvest") {
      e.credential_harvest = true;
    } else {
      throw Error(ErrorCode::ParseError, ctx + ": unknown exploit " + v.dump());
    }
  }
  return e;
}

json weights_to_json(const HeuristicWeights& w) {
  return json{{"w_higher_privilege", w.w_higher_privilege},
              {"w_unexplored_subnet", w.w_unexplored_subnet},
              {"w_toward_goal", w.w_toward_goal},
              {"w_random", w.w_random}};
}

}  // namespace

namespace detail {

HeuristicWeights weights_from_json(const json& j, const std::string& ctx) {
  HeuristicWeights w;
  w.w_higher_privilege =
      optional_as(j, "w_higher_privilege", w.w_higher_privilege, ctx);
  w.w_unexplored_subnet =
      optional_as(j, "w_unexplored_subnet", w.w_unexplored_subnet, ctx);
  w.w_toward_goal = optional_as(j, "w_toward_goal", w.w_toward_goal, ctx);
  w.w_random = optional_as(j, "w_random", w.w_random, ctx);
  return w;
}

json weights_json(const HeuristicWeights& w) { return weights_to_json(w); }

}  // namespace detail

std::string episode_to_json_line(const Episode& ep) {
  json steps = json::array();
  for (const StepSnapshot& s : ep.steps) {
    json creds = json::array();
    for (const Credential& c : s.credentials) {
      creds.push_back(json::array({c.user, c.effective_privilege}));
    }
    steps.push_back({{"host", s.host},
                     {"subnet", s.subnet},
                     {"required_privilege", s.required_privilege},
                     {"host_type", std::string(to_string(s.host_type))},
                     {"exploits", exploits_to_json(s.exploits)},
                     {"credentials", std::move(creds)}});
  }
  json j{{"id", ep.id},
         {"network",
          {{"seed", ep.network.seed},
           {"fingerprint", ep.network.fingerprint},
           {"config", detail::config_to_json(ep.network.config)}}},
         {"start_host", ep.start_host},
         {"start_user", ep.start_user},
         {"goal_host", ep.goal_host},
         {"steps", std::move(steps)},
         {"outcome", std::string(to_string(ep.outcome))},
         {"weights", weights_to_json(ep.weights)},
         {"seed", ep.seed},
         {"max_steps", ep.max_steps}};
  return j.dump();
}

Episode episode_from_json_line(std::string_view line) {
  using detail::require;
  using detail::require_as;
  const json j = detail::parse_document(line, "episode");
  Episode ep;
  ep.id = require_as<std::uint64_t>(j, "id", "episode");
  const std::string ctx = "episode " + std::to_string(ep.id);
  const json& net = require(j, "network", ctx);
  ep.network.seed = require_as<std::uint64_t>(net, "seed", ctx + ".network");
  ep.network.fingerprint =
      require_as<std::string>(net, "fingerprint", ctx + ".network");
  ep.network.config = detail::config_from_json(require(net, "config", ctx),
                                               ctx + ".network.config");
  ep.start_host = require_as<HostId>(j, "start_host", ctx);
  ep.start_user = require_as<UserId>(j, "start_user", ctx);
  ep.goal_host = require_as<HostId>(j, "goal_host", ctx);
  const json& steps = require(j, "steps", ctx);
  if (!steps.is_array()) throw Error(ErrorCode::ParseError, ctx + ": steps must be an array");
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const std::string sctx = ctx + ".steps[" + std::to_string(i) + "]";
    const json& js = steps[i];
    StepSnapshot s;
    s.host = require_as<HostId>(js, "host", sctx);
    s.subnet = require_as<SubnetId>(js, "subnet", sctx);
    s.required_privilege = require_as<int>(js, "required_privilege", sctx);
    const auto type = parse_host_type(require_as<std::string>(js, "host_type", sctx));
    if (!type) throw Error(ErrorCode::ParseError, sctx + ": unknown host_type");
    s.host_type = *type;
    s.exploits = exploits_from_json(require(js, "exploits", sctx), sctx);
    for (const auto& pair :
         require_as<std::vector<std::array<int, 2>>>(js, "credentials", sctx)) {
      s.credentials.push_back({pair[0], pair[1]});
    }
    ep.steps.push_back(std::move(s));
  }
  const auto outcome = require_as<std::string>(j, "outcome", ctx);
  if (outcome == "GoalReached") {
    ep.outcome = Outcome::GoalReached;
  } else if (outcome == "Blocked") {
    ep.outcome = Outcome::Blocked;
  } else if (outcome == "StepBudgetExhausted") {
    ep.outcome = Outcome::StepBudgetExhausted;
  } else {
    throw Error(ErrorCode::ParseError, ctx + ": unknown outcome " + outcome);
  }
  ep.weights = detail::weights_from_json(require(j, "weights", ctx), ctx);
  ep.seed = require_as<std::uint64_t>(j, "seed", ctx);
  ep.max_steps = detail::optional_as<int>(j, "max_steps", 0, ctx);
  return ep;
}

std::string save_episodes(std::span<const Episode> episodes) {
  std::string out;
  for (const Episode& ep : episodes) {
    out += episode_to_json_line(ep);
    out += '\n';
  }
  return out;
}

std::vector<Episode> load_episodes(std::string_view text) {
  std::vector<Episode> out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      out.push_back(episode_from_json_line(line));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ParseError) throw;
      throw Error(ErrorCode::ParseError,
                  "episodes line " + std::to_string(line_no) + ": " + e.message());
    }
  }
  return out;
}

}  // namespace lateralsim
