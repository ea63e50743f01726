#pragma once

// Small hand-built networks and episodes for unit tests.

#include <algorithm>
#include <initializer_list>
#include <vector>

#include "lateralsim/adversary.hpp"
#include "lateralsim/netsim.hpp"

namespace testutil {

using namespace lateralsim;

struct HostDef {
  SubnetId subnet = 0;
  int required_privilege = 0;
  HostType type = HostType::Workstation;
  bool escalation = false;
  bool harvest = false;
};

struct UserDef {
  int privilege = 0;
  std::vector<SubnetId> subnets;
  std::vector<HostId> history;
};

// Builds a network with consistent recent_users from the user histories.
inline Network build_network(int n_subnets, int privilege_levels,
                             const std::vector<HostDef>& hosts,
                             const std::vector<UserDef>& users) {
  Network net;
  net.config.n_subnets = n_subnets;
  net.config.n_hosts = static_cast<int>(hosts.size());
  net.config.n_users = static_cast<int>(users.size());
  net.config.privilege_levels = privilege_levels;
  net.config.user_privilege_weights.assign(static_cast<std::size_t>(privilege_levels),
                                           1.0 / privilege_levels);
  net.config.host_privilege_weights = net.config.user_privilege_weights;
  for (int s = 0; s < n_subnets; ++s) {
    net.subnets.push_back({s, "subnet-" + std::to_string(s)});
  }
  for (std::size_t i = 0; i < hosts.size(); ++i) {
    Host h;
    h.id = static_cast<HostId>(i);
    h.subnet = hosts[i].subnet;
    h.required_privilege = hosts[i].required_privilege;
    h.type = hosts[i].type;
    h.exploits = {hosts[i].escalation, hosts[i].harvest};
    net.hosts.push_back(h);
  }
  for (std::size_t i = 0; i < users.size(); ++i) {
    User u;
    u.id = static_cast<UserId>(i);
    u.privilege_level = users[i].privilege;
    u.accessible_subnets = users[i].subnets;
    std::sort(u.accessible_subnets.begin(), u.accessible_subnets.end());
    u.accessed_hosts = users[i].history;
    std::sort(u.accessed_hosts.begin(), u.accessed_hosts.end());
    for (HostId h : u.accessed_hosts) {
      net.hosts[static_cast<std::size_t>(h)].recent_users.push_back(u.id);
    }
    net.users.push_back(u);
  }
  return net;
}

inline AdversaryState state_with(std::vector<HostId> compromised,
                                 std::vector<Credential> credentials,
                                 HostId goal = 0) {
  AdversaryState s;
  s.compromised_hosts = compromised;
  std::sort(compromised.begin(), compromised.end());
  s.evaluated_hosts = compromised;
  std::sort(credentials.begin(), credentials.end());
  s.credentials = std::move(credentials);
  s.goal_host = goal;
  return s;
}

inline GenerationConfig small_config(int hosts = 40, int users = 40,
                                     int subnets = 5) {
  GenerationConfig c;
  c.n_hosts = hosts;
  c.n_users = users;
  c.n_subnets = subnets;
  return c;
}

}  // namespace testutil
