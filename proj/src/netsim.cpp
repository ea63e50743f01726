#include "lateralsim/netsim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <sstream>

#include "lateralsim/error.hpp"
#include "lateralsim/hash.hpp"
#include "lateralsim/random.hpp"

namespace lateralsim {

namespace {

constexpr std::array<std::string_view, kHostTypeCount> kHostTypeNames = {
    "Workstation", "Server", "DomainController", "FileServer", "Database"};

bool distribution_ok(std::span<const double> weights) {
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) return false;
    sum += w;
  }
  return std::abs(sum - 1.0) <= 1e-9;
}

bool probability_ok(double p) { return p >= 0.0 && p <= 1.0; }

}  // namespace

std::string_view to_string(HostType type) {
  return kHostTypeNames[static_cast<std::size_t>(type)];
}

std::optional<HostType> parse_host_type(std::string_view name) {
  for (std::size_t i = 0; i < kHostTypeNames.size(); ++i) {
    if (kHostTypeNames[i] == name) return static_cast<HostType>(i);
  }
  return std::nullopt;
}

bool User::has_subnet(SubnetId subnet) const {
  return std::binary_search(accessible_subnets.begin(),
                            accessible_subnets.end(), subnet);
}

bool Network::user_can_access(const User& u, const Host& h) const {
  return u.privilege_level >= h.required_privilege && u.has_subnet(h.subnet);
}

std::vector<std::string> config_problems(const GenerationConfig& c) {
  std::vector<std::string> out;
  if (c.n_hosts < 1) out.emplace_back("n_hosts must be >= 1");
  if (c.n_users < 1) out.emplace_back("n_users must be >= 1");
  if (c.n_subnets < 1) out.emplace_back("n_subnets must be >= 1");
  if (c.privilege_levels < 1) out.emplace_back("privilege_levels must be >= 1");
  if (!probability_ok(c.p_priv_escalation_exploit))
    out.emplace_back("p_priv_escalation_exploit must be in [0,1]");
  if (!probability_ok(c.p_cred_harvest_exploit))
    out.emplace_back("p_cred_harvest_exploit must be in [0,1]");
  if (!(c.mean_history_per_user > 0.0))
    out.emplace_back("mean_history_per_user must be > 0");
  if (!(c.subnets_per_user_mean > 0.0))
    out.emplace_back("subnets_per_user_mean must be > 0");
  if (c.max_placement_retries < 1)
    out.emplace_back("max_placement_retries must be >= 1");
  if (!distribution_ok(c.host_type_weights))
    out.emplace_back("host_type_weights must be non-negative and sum to 1");
  if (c.privilege_levels >= 1) {
    const auto levels = static_cast<std::size_t>(c.privilege_levels);
    if (c.user_privilege_weights.size() != levels ||
        !distribution_ok(c.user_privilege_weights))
      out.emplace_back(
          "user_privilege_weights must have privilege_levels entries summing "
          "to 1");
    if (c.host_privilege_weights.size() != levels ||
        !distribution_ok(c.host_privilege_weights))
      out.emplace_back(
          "host_privilege_weights must have privilege_levels entries summing "
          "to 1");
  }
  return out;
}

Network generate_network(const GenerationConfig& config, std::uint64_t seed) {
  if (auto problems = config_problems(config); !problems.empty()) {
    throw Error(ErrorCode::InvalidConfig, problems.front());
  }
  Rng rng(seed);
  Network net;
  net.config = config;
  net.seed = seed;

  net.subnets.reserve(static_cast<std::size_t>(config.n_subnets));
  for (SubnetId s = 0; s < config.n_subnets; ++s) {
    net.subnets.push_back({s, "subnet-" + std::to_string(s)});
  }

  std::vector<std::vector<HostId>> hosts_by_subnet(net.subnets.size());
  net.hosts.reserve(static_cast<std::size_t>(config.n_hosts));
  for (HostId h = 0; h < config.n_hosts; ++h) {
    Host host;
    host.id = h;
    host.subnet = static_cast<SubnetId>(
        uniform_index(rng, static_cast<std::size_t>(config.n_subnets)));
    host.type = static_cast<HostType>(
        sample_categorical(rng, config.host_type_weights));
    host.required_privilege = static_cast<int>(
        sample_categorical(rng, config.host_privilege_weights));
    host.exploits.privilege_escalation =
        bernoulli(rng, config.p_priv_escalation_exploit);
    host.exploits.credential_harvest =
        bernoulli(rng, config.p_cred_harvest_exploit);
    hosts_by_subnet[static_cast<std::size_t>(host.subnet)].push_back(h);
    net.hosts.push_back(std::move(host));
  }

  net.users.reserve(static_cast<std::size_t>(config.n_users));
  std::vector<HostId> legal;
  for (UserId u = 0; u < config.n_users; ++u) {
    User user;
    user.id = u;
    bool placed = false;
    for (int attempt = 0; attempt < config.max_placement_retries; ++attempt) {
      user.privilege_level = static_cast<int>(
          sample_categorical(rng, config.user_privilege_weights));
      const int n_subnets = std::clamp(
          poisson(rng, config.subnets_per_user_mean), 1, config.n_subnets);
      user.accessible_subnets =
          sample_without_replacement(rng, config.n_subnets, n_subnets);
      std::sort(user.accessible_subnets.begin(), user.accessible_subnets.end());

      legal.clear();
      for (SubnetId s : user.accessible_subnets) {
        for (HostId h : hosts_by_subnet[static_cast<std::size_t>(s)]) {
          if (net.host(h).required_privilege <= user.privilege_level) {
            legal.push_back(h);
          }
        }
      }
      if (!legal.empty()) {
        placed = true;
        break;
      }
    }
    if (!placed) {
      throw Error(ErrorCode::Infeasible,
                  "user " + std::to_string(u) +
                      " has no accessible host after " +
                      std::to_string(config.max_placement_retries) +
                      " placement attempts");
    }
    std::sort(legal.begin(), legal.end());
    const int history =
        std::clamp(poisson(rng, config.mean_history_per_user), 1,
                   static_cast<int>(legal.size()));
    for (int idx : sample_without_replacement(
             rng, static_cast<int>(legal.size()), history)) {
      user.accessed_hosts.push_back(legal[static_cast<std::size_t>(idx)]);
    }
    std::sort(user.accessed_hosts.begin(), user.accessed_hosts.end());
    net.users.push_back(std::move(user));
  }

  // Users are visited in id order, so each host's history is ascending.
  for (const User& user : net.users) {
    for (HostId h : user.accessed_hosts) {
      net.hosts[static_cast<std::size_t>(h)].recent_users.push_back(user.id);
    }
  }
  return net;
}

std::string_view to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::EmptyNetwork: return "EmptyNetwork";
    case ViolationKind::NonContiguousId: return "NonContiguousId";
    case ViolationKind::InvalidConfig: return "InvalidConfig";
    case ViolationKind::DanglingReference: return "DanglingReference";
    case ViolationKind::DuplicateEntry: return "DuplicateEntry";
    case ViolationKind::BipartiteMismatch: return "BipartiteMismatch";
    case ViolationKind::IllegalHistory: return "IllegalHistory";
    case ViolationKind::PrivilegeOutOfRange: return "PrivilegeOutOfRange";
  }
  return "Unknown";
}

std::string Violation::str() const {
  return std::string(to_string(kind)) + ": " + description;
}

namespace {

template <typename T>
bool has_duplicates(std::vector<T> values) {
  std::sort(values.begin(), values.end());
  return std::adjacent_find(values.begin(), values.end()) != values.end();
}

template <typename T>
bool contains(const std::vector<T>& values, T v) {
  return std::find(values.begin(), values.end(), v) != values.end();
}

}  // namespace

std::vector<Violation> validate_network(const Network& net) {
  std::vector<Violation> out;
  auto add = [&out](ViolationKind kind, std::string text) {
    out.push_back({kind, std::move(text)});
  };

  if (net.subnets.empty()) add(ViolationKind::EmptyNetwork, "no subnets");
  if (net.hosts.empty()) add(ViolationKind::EmptyNetwork, "no hosts");
  if (net.users.empty()) add(ViolationKind::EmptyNetwork, "no users");
  for (const auto& problem : config_problems(net.config)) {
    add(ViolationKind::InvalidConfig, "config: " + problem);
  }

  for (std::size_t i = 0; i < net.subnets.size(); ++i) {
    if (net.subnets[i].id != static_cast<SubnetId>(i))
      add(ViolationKind::NonContiguousId,
          "subnet at index " + std::to_string(i) + " has id " +
              std::to_string(net.subnets[i].id));
  }
  for (std::size_t i = 0; i < net.hosts.size(); ++i) {
    if (net.hosts[i].id != static_cast<HostId>(i))
      add(ViolationKind::NonContiguousId,
          "host at index " + std::to_string(i) + " has id " +
              std::to_string(net.hosts[i].id));
  }
  for (std::size_t i = 0; i < net.users.size(); ++i) {
    if (net.users[i].id != static_cast<UserId>(i))
      add(ViolationKind::NonContiguousId,
          "user at index " + std::to_string(i) + " has id " +
              std::to_string(net.users[i].id));
  }

  const auto n_subnets = static_cast<SubnetId>(net.subnets.size());
  const auto n_hosts = static_cast<HostId>(net.hosts.size());
  const auto n_users = static_cast<UserId>(net.users.size());
  const int levels = net.config.privilege_levels;

  for (const Host& h : net.hosts) {
    const std::string name = "host " + std::to_string(h.id);
    if (h.subnet < 0 || h.subnet >= n_subnets)
      add(ViolationKind::DanglingReference,
          name + " references missing subnet " + std::to_string(h.subnet));
    if (h.required_privilege < 0 || h.required_privilege >= levels)
      add(ViolationKind::PrivilegeOutOfRange,
          name + " requires privilege " + std::to_string(h.required_privilege) +
              " outside [0," + std::to_string(levels) + ")");
    if (has_duplicates(h.recent_users))
      add(ViolationKind::DuplicateEntry, name + " repeats a recent user");
    for (UserId u : h.recent_users) {
      if (u < 0 || u >= n_users) {
        add(ViolationKind::DanglingReference,
            name + " lists missing user " + std::to_string(u));
        add(ViolationKind::BipartiteMismatch,
            name + " lists user " + std::to_string(u) +
                " which cannot list it back");
      } else if (!contains(net.user(u).accessed_hosts, h.id)) {
        add(ViolationKind::BipartiteMismatch,
            name + " lists user " + std::to_string(u) + " but user " +
                std::to_string(u) + " does not list " + name);
      }
    }
  }

  for (const User& u : net.users) {
    const std::string name = "user " + std::to_string(u.id);
    if (u.privilege_level < 0 || u.privilege_level >= levels)
      add(ViolationKind::PrivilegeOutOfRange,
          name + " has privilege " + std::to_string(u.privilege_level) +
              " outside [0," + std::to_string(levels) + ")");
    if (has_duplicates(u.accessible_subnets))
      add(ViolationKind::DuplicateEntry, name + " repeats a subnet");
    if (has_duplicates(u.accessed_hosts))
      add(ViolationKind::DuplicateEntry, name + " repeats an accessed host");
    for (SubnetId s : u.accessible_subnets) {
      if (s < 0 || s >= n_subnets)
        add(ViolationKind::DanglingReference,
            name + " references missing subnet " + std::to_string(s));
    }
    for (HostId hid : u.accessed_hosts) {
      if (hid < 0 || hid >= n_hosts) {
        add(ViolationKind::DanglingReference,
            name + " lists missing host " + std::to_string(hid));
        add(ViolationKind::BipartiteMismatch,
            name + " lists host " + std::to_string(hid) +
                " which cannot list it back");
        continue;
      }
      const Host& h = net.host(hid);
      if (!contains(h.recent_users, u.id)) {
        add(ViolationKind::BipartiteMismatch,
            name + " lists host " + std::to_string(hid) + " but host " +
                std::to_string(hid) + " does not list " + name);
      }
      if (!contains(u.accessible_subnets, h.subnet) ||
          u.privilege_level < h.required_privilege) {
        add(ViolationKind::IllegalHistory,
            name + " (privilege " + std::to_string(u.privilege_level) +
                ") accessed host " + std::to_string(hid) + " (subnet " +
                std::to_string(h.subnet) + ", privilege " +
                std::to_string(h.required_privilege) +
                ") it could not legally reach");
      }
    }
  }
  return out;
}

std::string network_fingerprint(const GenerationConfig& c,
                                std::uint64_t seed) {
  std::ostringstream os;
  os.precision(17);
  os << "seed=" << seed << ";hosts=" << c.n_hosts << ";users=" << c.n_users
     << ";subnets=" << c.n_subnets << ";levels=" << c.privilege_levels
     << ";pe=" << c.p_priv_escalation_exploit
     << ";ch=" << c.p_cred_harvest_exploit
     << ";hist=" << c.mean_history_per_user
     << ";spu=" << c.subnets_per_user_mean
     << ";retries=" << c.max_placement_retries << ";types=";
  for (double w : c.host_type_weights) os << w << ',';
  os << ";uprivs=";
  for (double w : c.user_privilege_weights) os << w << ',';
  os << ";hprivs=";
  for (double w : c.host_privilege_weights) os << w << ',';
  return to_hex(fnv1a(os.str()));
}

std::string network_fingerprint(const Network& network) {
  return network_fingerprint(network.config, network.seed);
}

}  // namespace lateralsim
