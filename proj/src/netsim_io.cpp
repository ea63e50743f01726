#include <algorithm>

#include "json_codec.hpp"
#include "lateralsim/netsim.hpp"

namespace lateralsim {

namespace detail {

json parse_document(std::string_view text, std::string_view what) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    const auto offset = std::min<std::size_t>(e.byte, text.size());
    const auto line =
        1 + std::count(text.begin(),
                       text.begin() + static_cast<std::ptrdiff_t>(offset),
                       '\n');
    throw Error(ErrorCode::ParseError, std::string(what) + " line " +
                                           std::to_string(line) +
                                           ": malformed JSON");
  }
}

const json& require(const json& object, std::string_view field,
                    const std::string& context) {
  if (!object.is_object()) {
    throw Error(ErrorCode::ParseError, context + ": expected an object");
  }
  auto it = object.find(field);
  if (it == object.end()) {
    throw Error(ErrorCode::ParseError, context + ": missing required field \"" +
                                           std::string(field) + "\"");
  }
  return *it;
}

json config_to_json(const GenerationConfig& c) {
  return json{
      {"n_hosts", c.n_hosts},
      {"n_users", c.n_users},
      {"n_subnets", c.n_subnets},
      {"privilege_levels", c.privilege_levels},
      {"p_priv_escalation_exploit", c.p_priv_escalation_exploit},
      {"p_cred_harvest_exploit", c.p_cred_harvest_exploit},
      {"mean_history_per_user", c.mean_history_per_user},
      {"host_type_weights", c.host_type_weights},
      {"user_privilege_weights", c.user_privilege_weights},
      {"host_privilege_weights", c.host_privilege_weights},
      {"subnets_per_user_mean", c.subnets_per_user_mean},
      {"max_placement_retries", c.max_placement_retries},
  };
}

GenerationConfig config_from_json(const json& j, const std::string& ctx) {
  GenerationConfig c;
  if (!j.is_object()) throw Error(ErrorCode::ParseError, ctx + ": expected an object");
  c.n_hosts = optional_as(j, "n_hosts", c.n_hosts, ctx);
  c.n_users = optional_as(j, "n_users", c.n_users, ctx);
  c.n_subnets = optional_as(j, "n_subnets", c.n_subnets, ctx);
  c.privilege_levels = optional_as(j, "privilege_levels", c.privilege_levels, ctx);
  c.p_priv_escalation_exploit = optional_as(
      j, "p_priv_escalation_exploit", c.p_priv_escalation_exploit, ctx);
  c.p_cred_harvest_exploit =
      optional_as(j, "p_cred_harvest_exploit", c.p_cred_harvest_exploit, ctx);
  c.mean_history_per_user =
      optional_as(j, "mean_history_per_user", c.mean_history_per_user, ctx);
  c.host_type_weights =
      optional_as(j, "host_type_weights", c.host_type_weights, ctx);
  c.user_privilege_weights =
      optional_as(j, "user_privilege_weights", c.user_privilege_weights, ctx);
  c.host_privilege_weights =
      optional_as(j, "host_privilege_weights", c.host_privilege_weights, ctx);
  c.subnets_per_user_mean =
      optional_as(j, "subnets_per_user_mean", c.subnets_per_user_mean, ctx);
  c.max_placement_retries =
      optional_as(j, "max_placement_retries", c.max_placement_retries, ctx);
  return c;
}

}  // namespace detail

using detail::json;

std::string save_network(const Network& net) {
  json subnets = json::array();
  for (const Subnet& s : net.subnets) {
    subnets.push_back({{"id", s.id}, {"name", s.name}});
  }
  json hosts = json::array();
  for (const Host& h : net.hosts) {
    json exploits = json::array();
    if (h.exploits.privilege_escalation) exploits.push_back("PrivilegeEscalation");
    if (h.exploits.credential_harvest) exploits.push_back("CredentialHarvest");
    hosts.push_back({{"id", h.id},
                     {"subnet", h.subnet},
                     {"required_privilege", h.required_privilege},
                     {"host_type", std::string(to_string(h.type))},
                     {"exploits", std::move(exploits)},
                     {"recent_users", h.recent_users}});
  }
  json users = json::array();
  for (const User& u : net.users) {
    users.push_back({{"id", u.id},
                     {"privilege_level", u.privilege_level},
                     {"accessible_subnets", u.accessible_subnets},
                     {"accessed_hosts", u.accessed_hosts}});
  }
  json doc{{"seed", net.seed},
           {"config", detail::config_to_json(net.config)},
           {"subnets", std::move(subnets)},
           {"hosts", std::move(hosts)},
           {"users", std::move(users)}};
  return doc.dump(1) + "\n";
}

Network load_network(std::string_view document) {
  using detail::require;
  using detail::require_as;
  const json doc = detail::parse_document(document, "network file");
  Network net;
  net.seed = require_as<std::uint64_t>(doc, "seed", "network");
  net.config = detail::config_from_json(require(doc, "config", "network"),
                                        "network.config");

  const json& subnets = require(doc, "subnets", "network");
  if (!subnets.is_array())
    throw Error(ErrorCode::ParseError, "network: \"subnets\" must be an array");
  for (std::size_t i = 0; i < subnets.size(); ++i) {
    const std::string ctx = "subnets[" + std::to_string(i) + "]";
    Subnet s;
    s.id = require_as<SubnetId>(subnets[i], "id", ctx);
    s.name = detail::optional_as<std::string>(subnets[i], "name",
                                              "subnet-" + std::to_string(s.id),
                                              ctx);
    net.subnets.push_back(std::move(s));
  }

  const json& hosts = require(doc, "hosts", "network");
  if (!hosts.is_array())
    throw Error(ErrorCode::ParseError, "network: \"hosts\" must be an array");
  for (std::size_t i = 0; i < hosts.size(); ++i) {
    const std::string ctx = "hosts[" + std::to_string(i) + "]";
    const json& jh = hosts[i];
    Host h;
    h.id = require_as<HostId>(jh, "id", ctx);
    h.subnet = require_as<SubnetId>(jh, "subnet", ctx);
    h.required_privilege = require_as<int>(jh, "required_privilege", ctx);
    const auto type_name = require_as<std::string>(jh, "host_type", ctx);
    const auto type = parse_host_type(type_name);
    if (!type) {
      throw Error(ErrorCode::ParseError,
                  ctx + ": unknown host_type \"" + type_name + "\"");
    }
    h.type = *type;
    for (const auto& name :
         require_as<std::vector<std::string>>(jh, "exploits", ctx)) {
      bool* flag = nullptr;
      if (name == "PrivilegeEscalation") flag = &h.exploits.privilege_escalation;
      if (name == "CredentialHarvest") flag = &h.exploits.credential_harvest;
      if (flag == nullptr)
        throw Error(ErrorCode::ParseError,
                    ctx + ": unknown exploit \"" + name + "\"");
      if (*flag)
        throw Error(ErrorCode::ParseError,
                    ctx + ": exploit \"" + name + "\" listed twice");
      *flag = true;
    }
    h.recent_users = require_as<std::vector<UserId>>(jh, "recent_users", ctx);
    net.hosts.push_back(std::move(h));
  }

  const json& users = require(doc, "users", "network");
  if (!users.is_array())
    throw Error(ErrorCode::ParseError, "network: \"users\" must be an array");
  for (std::size_t i = 0; i < users.size(); ++i) {
    const std::string ctx = "users[" + std::to_string(i) + "]";
    const json& ju = users[i];
    User u;
    u.id = require_as<UserId>(ju, "id", ctx);
    u.privilege_level = require_as<int>(ju, "privilege_level", ctx);
    u.accessible_subnets =
        require_as<std::vector<SubnetId>>(ju, "accessible_subnets", ctx);
    u.accessed_hosts =
        require_as<std::vector<HostId>>(ju, "accessed_hosts", ctx);
    std::sort(u.accessible_subnets.begin(), u.accessible_subnets.end());
    std::sort(u.accessed_hosts.begin(), u.accessed_hosts.end());
    net.users.push_back(std::move(u));
  }

  if (auto violations = validate_network(net); !violations.empty()) {
    std::vector<std::string> text;
    for (const auto& v : violations) text.push_back(v.str());
    throw ValidationError(std::move(text));
  }
  return net;
}

}  // namespace lateralsim
