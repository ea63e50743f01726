#include "lateralsim/adversary.hpp"

#include <algorithm>
#include <cassert>
#include <exception>

#include "lateralsim/error.hpp"

namespace lateralsim {

namespace {

template <typename T>
bool sorted_contains(const std::vector<T>& v, const T& x) {
  return std::binary_search(v.begin(), v.end(), x);
}

template <typename T>
void sorted_insert(std::vector<T>& v, const T& x) {
  auto it = std::lower_bound(v.begin(), v.end(), x);
  if (it == v.end() || *it != x) v.insert(it, x);
}

bool credential_reaches(const Credential& c, const Host& host,
                        const Network& network) {
  return c.effective_privilege >= host.required_privilege &&
         network.user(c.user).has_subnet(host.subnet);
}

void fire_exploits(AdversaryState& state, const Host& host,
                   const Network& network) {
  if (!state.is_compromised(host.id)) return;
  if (host.exploits.credential_harvest) {
    for (UserId u : host.recent_users) {
      if (state.find_credential(u) != nullptr) continue;
      sorted_insert(state.credentials,
                    Credential{u, network.user(u).privilege_level});
    }
  }
  if (host.exploits.privilege_escalation) {
    const int top = network.privilege_levels() - 1;
    for (Credential& c : state.credentials) {
      if (!credential_reaches(c, host, network)) continue;
      const std::pair<HostId, UserId> key{host.id, c.user};
      if (sorted_contains(state.escalations, key)) continue;
      sorted_insert(state.escalations, key);
      c.effective_privilege = std::min(c.effective_privilege + 1, top);
    }
  }
}

}  // namespace

const Credential* AdversaryState::find_credential(UserId user) const {
  auto it = std::lower_bound(
      credentials.begin(), credentials.end(), user,
      [](const Credential& c, UserId u) { return c.user < u; });
  if (it == credentials.end() || it->user != user) return nullptr;
  return &*it;
}

bool AdversaryState::is_compromised(HostId host) const {
  return std::find(compromised_hosts.begin(), compromised_hosts.end(), host) !=
         compromised_hosts.end();
}

bool HeuristicWeights::valid() const {
  const double w[] = {w_higher_privilege, w_unexplored_subnet, w_toward_goal,
                      w_random};
  bool any_positive = false;
  for (double x : w) {
    if (!(x >= 0.0)) return false;
    any_positive = any_positive || x > 0.0;
  }
  return any_positive;
}

AdversaryState initial_state(const Network& network, HostId foothold,
                             UserId user, HostId goal) {
  AdversaryState state;
  state.compromised_hosts = {foothold};
  state.evaluated_hosts = {foothold};
  state.credentials = {Credential{user, network.user(user).privilege_level}};
  state.goal_host = goal;
  return state;
}

bool can_access(const AdversaryState& state, const Host& host,
                const Network& network) {
  return std::any_of(state.credentials.begin(), state.credentials.end(),
                     [&](const Credential& c) {
                       return credential_reaches(c, host, network);
                     });
}

std::vector<int> subnet_reach(const AdversaryState& state,
                              const Network& network) {
  return subnet_reach(state.credentials, network);
}

std::vector<int> subnet_reach(std::span<const Credential> credentials,
                              const Network& network) {
  std::vector<int> reach(network.subnets.size(), -1);
  for (const Credential& c : credentials) {
    for (SubnetId s : network.user(c.user).accessible_subnets) {
      int& r = reach[static_cast<std::size_t>(s)];
      r = std::max(r, c.effective_privilege);
    }
  }
  return reach;
}

AdversaryState apply_exploits(AdversaryState state, const Host& host,
                              const Network& network) {
  fire_exploits(state, host, network);
  return state;
}

std::vector<HostId> enumerate_moves(const AdversaryState& state,
                                    const Network& network) {
  const std::vector<int> reach = subnet_reach(state, network);
  std::vector<HostId> moves;
  for (const Host& h : network.hosts) {
    if (reach[static_cast<std::size_t>(h.subnet)] < h.required_privilege)
      continue;
    if (sorted_contains(state.evaluated_hosts, h.id)) continue;
    moves.push_back(h.id);
  }
  return moves;
}

double score_move(const AdversaryState& state, const Host& candidate,
                  const Network& network, const HeuristicWeights& weights) {
  const int top = network.privilege_levels() - 1;
  const double privilege =
      top > 0 ? static_cast<double>(candidate.required_privilege) / top : 0.0;
  const bool unexplored = std::none_of(
      state.compromised_hosts.begin(), state.compromised_hosts.end(),
      [&](HostId h) { return network.host(h).subnet == candidate.subnet; });
  const Host& goal = network.host(state.goal_host);
  const bool toward_goal =
      candidate.id == goal.id || candidate.subnet == goal.subnet;
  return weights.w_higher_privilege * privilege +
         weights.w_unexplored_subnet * (unexplored ? 1.0 : 0.0) +
         weights.w_toward_goal * (toward_goal ? 1.0 : 0.0) +
         weights.w_random;
}

std::optional<StepOutcome> step(AdversaryState state, const Network& network,
                                const HeuristicWeights& weights, Rng& rng) {
  const std::vector<HostId> moves = enumerate_moves(state, network);
  if (moves.empty()) return std::nullopt;
  std::vector<double> scores;
  scores.reserve(moves.size());
  for (HostId h : moves) {
    scores.push_back(score_move(state, network.host(h), network, weights));
  }
  const HostId next = moves[sample_categorical(rng, scores)];
  state.compromised_hosts.push_back(next);
  sorted_insert(state.evaluated_hosts, next);
  state = apply_exploits(std::move(state), network.host(next), network);
  return StepOutcome{std::move(state), next};
}

std::string_view to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::GoalReached: return "GoalReached";
    case Outcome::Blocked: return "Blocked";
    case Outcome::StepBudgetExhausted: return "StepBudgetExhausted";
  }
  return "Unknown";
}

std::vector<HostId> Episode::host_sequence() const {
  std::vector<HostId> out;
  out.reserve(steps.size());
  for (const auto& s : steps) out.push_back(s.host);
  return out;
}

StepSnapshot snapshot(const AdversaryState& state, const Host& host) {
  return StepSnapshot{host.id,   host.subnet,   host.required_privilege,
                      host.type, host.exploits, state.credentials};
}

Episode run_episode(const Network& network, HostId start_host,
                    UserId start_user, HostId goal_host,
                    const HeuristicWeights& weights, std::uint64_t seed,
                    EpisodeLimits limits) {
  const auto n_hosts = static_cast<HostId>(network.hosts.size());
  const auto n_users = static_cast<UserId>(network.users.size());
  if (start_host < 0 || start_host >= n_hosts || goal_host < 0 ||
      goal_host >= n_hosts || start_user < 0 || start_user >= n_users) {
    throw Error(ErrorCode::InvalidStart, "start/goal ids out of range");
  }
  if (goal_host == start_host) {
    throw Error(ErrorCode::InvalidStart, "goal host equals start host " +
                                             std::to_string(start_host));
  }
  if (!network.user_can_access(network.user(start_user),
                               network.host(start_host))) {
    throw Error(ErrorCode::InvalidStart,
                "user " + std::to_string(start_user) + " cannot access host " +
                    std::to_string(start_host));
  }

  Episode ep;
  ep.network = {network.seed, network_fingerprint(network), network.config};
  ep.start_host = start_host;
  ep.start_user = start_user;
  ep.goal_host = goal_host;
  ep.weights = weights;
  ep.seed = seed;
  ep.max_steps = std::max(limits.max_steps, 0);

  Rng rng(seed);
  AdversaryState state =
      apply_exploits(initial_state(network, start_host, start_user, goal_host),
                     network.host(start_host), network);
  ep.steps.push_back(snapshot(state, network.host(start_host)));
  ep.outcome = Outcome::Blocked;
  while (true) {
    if (ep.max_steps > 0 &&
        ep.steps.size() > static_cast<std::size_t>(ep.max_steps)) {
      if (!enumerate_moves(state, network).empty()) {
        ep.outcome = Outcome::StepBudgetExhausted;
      }
      break;
    }
    auto next = step(std::move(state), network, weights, rng);
    if (!next) break;
    state = std::move(next->state);
    ep.steps.push_back(snapshot(state, network.host(next->host)));
    assert(ep.steps.size() <= network.hosts.size());
    if (next->host == goal_host) {
      ep.outcome = Outcome::GoalReached;
      break;
    }
  }
  return ep;
}

Episode simulate_campaign_episode(const GenerationConfig& config,
                                  const HeuristicWeights& weights,
                                  std::uint64_t master_seed,
                                  std::uint64_t index,
                                  const CampaignOptions& options) {
  const std::uint64_t child = mix_seed(master_seed, index);
  const Network network = generate_network(config, mix_seed(child, 0));
  if (network.hosts.size() < 2) {
    throw Error(ErrorCode::Infeasible,
                "campaigns need at least two hosts for a distinct goal");
  }
  Rng setup(mix_seed(child, 1));

  // Footholds are drawn uniformly among hosts that some user can reach.
  std::vector<std::vector<UserId>> legal_users(network.hosts.size());
  std::vector<HostId> footholds;
  for (const Host& h : network.hosts) {
    for (const User& u : network.users) {
      if (network.user_can_access(u, h)) legal_users[h.id].push_back(u.id);
    }
    if (!legal_users[h.id].empty()) footholds.push_back(h.id);
  }
  if (footholds.empty()) {
    throw Error(ErrorCode::Infeasible, "no host is reachable by any user");
  }
  const HostId start = footholds[uniform_index(setup, footholds.size())];
  const auto& users = legal_users[static_cast<std::size_t>(start)];
  const UserId user = users[uniform_index(setup, users.size())];

  std::vector<HostId> goals;
  for (const Host& h : network.hosts) {
    if (h.id == start) continue;
    if (options.goal_host_type && h.type != *options.goal_host_type) continue;
    goals.push_back(h.id);
  }
  if (goals.empty()) {
    for (const Host& h : network.hosts) {
      if (h.id != start) goals.push_back(h.id);
    }
  }
  const HostId goal = goals[uniform_index(setup, goals.size())];

  Episode ep = run_episode(network, start, user, goal, weights,
                           mix_seed(child, 2), {options.max_steps});
  ep.id = index;
  return ep;
}

std::vector<Episode> run_campaigns_serial(const GenerationConfig& config,
                                          const HeuristicWeights& weights,
                                          int n_episodes,
                                          std::uint64_t master_seed,
                                          const CampaignOptions& options) {
  if (n_episodes < 1) {
    throw Error(ErrorCode::InvalidConfig, "n_episodes must be >= 1");
  }
  std::vector<Episode> out;
  out.reserve(static_cast<std::size_t>(n_episodes));
  for (int i = 0; i < n_episodes; ++i) {
    out.push_back(simulate_campaign_episode(
        config, weights, master_seed,
        options.first_index + static_cast<std::uint64_t>(i), options));
  }
  return out;
}

std::vector<Episode> run_campaigns(const GenerationConfig& config,
                                   const HeuristicWeights& weights,
                                   int n_episodes, std::uint64_t master_seed,
                                   const CampaignOptions& options) {
  if (n_episodes < 1) {
    throw Error(ErrorCode::InvalidConfig, "n_episodes must be >= 1");
  }
  std::vector<Episode> out(static_cast<std::size_t>(n_episodes));
  std::vector<std::exception_ptr> errors(out.size());
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n_episodes; ++i) {
    try {
      out[static_cast<std::size_t>(i)] = simulate_campaign_episode(
          config, weights, master_seed,
          options.first_index + static_cast<std::uint64_t>(i), options);
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

Network network_for(const Episode& episode) {
  Network net = generate_network(episode.network.config, episode.network.seed);
  if (network_fingerprint(net) != episode.network.fingerprint) {
    throw Error(ErrorCode::FingerprintMismatch,
                "episode " + std::to_string(episode.id) +
                    " references network " + episode.network.fingerprint +
                    " but regeneration gives " + network_fingerprint(net));
  }
  return net;
}

std::vector<std::string> check_episode(const Episode& ep,
                                       const Network& network) {
  std::vector<std::string> problems;
  auto fail = [&](std::string text) {
    problems.push_back("episode " + std::to_string(ep.id) + ": " +
                       std::move(text));
  };
  if (ep.steps.empty()) {
    fail("no steps");
    return problems;
  }
  if (ep.steps.size() > network.hosts.size()) fail("longer than n_hosts");
  if (ep.steps.front().host != ep.start_host) fail("steps[0] is not the start");
  if (!network.user_can_access(network.user(ep.start_user),
                               network.host(ep.start_host)))
    fail("start user cannot access the foothold");

  AdversaryState state = apply_exploits(
      initial_state(network, ep.start_host, ep.start_user, ep.goal_host),
      network.host(ep.start_host), network);
  for (std::size_t k = 0; k < ep.steps.size(); ++k) {
    const StepSnapshot& s = ep.steps[k];
    const std::string where = "step " + std::to_string(k);
    if (k > 0) {
      if (state.is_compromised(s.host)) fail(where + " revisits a host");
      if (!can_access(state, network.host(s.host), network))
        fail(where + " moves to an inaccessible host");
      const AdversaryState before = state;
      state.compromised_hosts.push_back(s.host);
      sorted_insert(state.evaluated_hosts, s.host);
      state = apply_exploits(std::move(state), network.host(s.host), network);
      for (const Credential& c : before.credentials) {
        const Credential* now = state.find_credential(c.user);
        if (now == nullptr || now->effective_privilege < c.effective_privilege)
          fail(where + " lost a credential");
      }
    }
    if (snapshot(state, network.host(s.host)) != s)
      fail(where + " snapshot disagrees with replay");
  }
  const bool reached = ep.steps.back().host == ep.goal_host;
  const bool no_moves = enumerate_moves(state, network).empty();
  if (ep.outcome == Outcome::GoalReached && !reached)
    fail("GoalReached but the last host is not the goal");
  if (ep.outcome == Outcome::Blocked && (reached || !no_moves))
    fail("Blocked but moves remain or the goal was reached");
  if (ep.outcome == Outcome::StepBudgetExhausted &&
      (reached || no_moves || ep.max_steps <= 0 ||
       ep.steps.size() != static_cast<std::size_t>(ep.max_steps) + 1))
    fail("StepBudgetExhausted without a spent budget and remaining moves");
  if (ep.max_steps > 0 &&
      ep.steps.size() > static_cast<std::size_t>(ep.max_steps) + 1)
    fail("exceeds its step budget");
  return problems;
}

}  // namespace lateralsim
