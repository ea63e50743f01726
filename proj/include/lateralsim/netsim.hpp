#pragma once

// Randomized enterprise networks: subnets, hosts, users and the bipartite
// user/host access history that the adversary harvests credentials from.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lateralsim {

using SubnetId = std::int32_t;
using HostId = std::int32_t;
using UserId = std::int32_t;

enum class HostType : std::uint8_t {
  Workstation,
  Server,
  DomainController,
  FileServer,
  Database,
};
inline constexpr int kHostTypeCount = 5;

std::string_view to_string(HostType type);
std::optional<HostType> parse_host_type(std::string_view name);

// One flag per exploit class, so the "at most one of each" invariant holds by
// construction.
struct ExploitSet {
  bool privilege_escalation = false;
  bool credential_harvest = false;

  bool empty() const { return !privilege_escalation && !credential_harvest; }
  bool operator==(const ExploitSet&) const = default;
};

struct Subnet {
  SubnetId id = 0;
  std::string name;

  bool operator==(const Subnet&) const = default;
};

struct Host {
  HostId id = 0;
  SubnetId subnet = 0;
  int required_privilege = 0;
  HostType type = HostType::Workstation;
  ExploitSet exploits;
  std::vector<UserId> recent_users;

  bool operator==(const Host&) const = default;
};

struct User {
  UserId id = 0;
  int privilege_level = 0;
  std::vector<SubnetId> accessible_subnets;  // sorted ascending
  std::vector<HostId> accessed_hosts;        // sorted ascending

  bool has_subnet(SubnetId subnet) const;
  bool operator==(const User&) const = default;
};

struct GenerationConfig {
  int n_hosts = 200;
  int n_users = 200;
  int n_subnets = 10;
  int privilege_levels = 3;  // 0=user, 1=admin, 2=domain admin
  double p_priv_escalation_exploit = 0.1;
  double p_cred_harvest_exploit = 0.1;
  double mean_history_per_user = 3.0;
  std::array<double, kHostTypeCount> host_type_weights = {0.6, 0.2, 0.05,
                                                          0.1, 0.05};
  std::vector<double> user_privilege_weights = {0.8, 0.15, 0.05};
  // Required privilege of hosts; not part of the entity description, so it is
  // an explicit knob here.
  std::vector<double> host_privilege_weights = {0.6, 0.3, 0.1};
  double subnets_per_user_mean = 2.0;
  int max_placement_retries = 100;

  bool operator==(const GenerationConfig&) const = default;
};

// Field-named problems with the config; empty when valid.
std::vector<std::string> config_problems(const GenerationConfig& config);

struct Network {
  std::vector<Subnet> subnets;
  std::vector<Host> hosts;
  std::vector<User> users;
  GenerationConfig config;
  std::uint64_t seed = 0;

  int privilege_levels() const { return config.privilege_levels; }
  const Host& host(HostId id) const {
    return hosts[static_cast<std::size_t>(id)];
  }
  const User& user(UserId id) const {
    return users[static_cast<std::size_t>(id)];
  }
  // Base-privilege legality: subnet access plus privilege.
  bool user_can_access(const User& u, const Host& h) const;

  bool operator==(const Network&) const = default;
};

// Deterministic in (config, seed). Throws Error{InvalidConfig} or
// Error{Infeasible}.
Network generate_network(const GenerationConfig& config, std::uint64_t seed);

enum class ViolationKind {
  EmptyNetwork,
  NonContiguousId,
  InvalidConfig,
  DanglingReference,
  DuplicateEntry,
  BipartiteMismatch,
  IllegalHistory,
  PrivilegeOutOfRange,
};

std::string_view to_string(ViolationKind kind);

struct Violation {
  ViolationKind kind;
  std::string description;  // names the entity and the broken invariant

  std::string str() const;
};

std::vector<Violation> validate_network(const Network& network);

// Stable identifier of (seed, config): what episodes use to refer to the
// network they ran on.
std::string network_fingerprint(const Network& network);
std::string network_fingerprint(const GenerationConfig& config,
                                std::uint64_t seed);

// Network file (JSON document). load_network throws Error{ParseError} with
// line/field context, or ValidationError when the parsed network is invalid.
std::string save_network(const Network& network);
Network load_network(std::string_view document);

}  // namespace lateralsim
