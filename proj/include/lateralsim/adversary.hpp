#pragma once

// Goal-directed adversary: weighted one-step heuristics with a uniform
// fallback, greedy exploit use on owned hosts, and campaign fan-out.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lateralsim/netsim.hpp"
#include "lateralsim/random.hpp"

namespace lateralsim {

struct Credential {
  UserId user = 0;
  int effective_privilege = 0;  // >= the user's base privilege

  auto operator<=>(const Credential&) const = default;
};

struct AdversaryState {
  std::vector<HostId> compromised_hosts;  // arrival order, [0] = foothold
  std::vector<Credential> credentials;    // sorted by user, one per user
  std::vector<HostId> evaluated_hosts;    // sorted
  HostId goal_host = 0;
  // (host, user) pairs a PrivilegeEscalation exploit has already raised.
  std::vector<std::pair<HostId, UserId>> escalations;  // sorted

  const Credential* find_credential(UserId user) const;
  bool is_compromised(HostId host) const;
  bool operator==(const AdversaryState&) const = default;
};

struct HeuristicWeights {
  double w_higher_privilege = 4.0;
  double w_unexplored_subnet = 2.0;
  double w_toward_goal = 8.0;
  double w_random = 1.0;

  static HeuristicWeights uniform() { return {0.0, 0.0, 0.0, 1.0}; }
  bool valid() const;
  bool operator==(const HeuristicWeights&) const = default;
};

// Initial state: compromised = {foothold}, one credential at base privilege.
// Exploits are not yet applied.
AdversaryState initial_state(const Network& network, HostId foothold,
                             UserId user, HostId goal);

bool can_access(const AdversaryState& state, const Host& host,
                const Network& network);

// Highest effective privilege reaching each subnet via held credentials,
// -1 where none does. can_access(h) == reach[h.subnet] >= h.required_privilege.
std::vector<int> subnet_reach(std::span<const Credential> credentials,
                              const Network& network);
std::vector<int> subnet_reach(const AdversaryState& state,
                              const Network& network);

// Fires the host's exploits for the current credential set; a no-op unless
// the host is compromised. Harvest runs first so harvested users can be
// escalated by the same host. Escalation happens at most once per
// (host, user), so repeated calls are idempotent.
AdversaryState apply_exploits(AdversaryState state, const Host& host,
                              const Network& network);

// Uncompromised hosts reachable with current credentials, ascending.
std::vector<HostId> enumerate_moves(const AdversaryState& state,
                                    const Network& network);

double score_move(const AdversaryState& state, const Host& candidate,
                  const Network& network, const HeuristicWeights& weights);

struct StepOutcome {
  AdversaryState state;
  HostId host;
};

// Samples the next host proportionally to score_move; nullopt when blocked.
std::optional<StepOutcome> step(AdversaryState state, const Network& network,
                                const HeuristicWeights& weights, Rng& rng);

// StepBudgetExhausted: the episode hit its step budget with moves left.
enum class Outcome { GoalReached, Blocked, StepBudgetExhausted };
std::string_view to_string(Outcome outcome);

// Host metadata plus the credentials held after this host's exploits fired,
// i.e. the state the next move is chosen from.
struct StepSnapshot {
  HostId host = 0;
  SubnetId subnet = 0;
  int required_privilege = 0;
  HostType host_type = HostType::Workstation;
  ExploitSet exploits;
  std::vector<Credential> credentials;

  bool operator==(const StepSnapshot&) const = default;
};

struct NetworkRef {
  std::uint64_t seed = 0;
  std::string fingerprint;
  GenerationConfig config;

  bool operator==(const NetworkRef&) const = default;
};

struct Episode {
  std::uint64_t id = 0;
  NetworkRef network;
  HostId start_host = 0;
  UserId start_user = 0;
  HostId goal_host = 0;
  std::vector<StepSnapshot> steps;
  Outcome outcome = Outcome::Blocked;
  HeuristicWeights weights;
  std::uint64_t seed = 0;

  int max_steps = 0;  // limit the episode ran under, 0 = unlimited

  std::vector<HostId> host_sequence() const;
  bool operator==(const Episode&) const = default;
};

StepSnapshot snapshot(const AdversaryState& state, const Host& host);

// Cap on moves after the foothold; 0 means unlimited (bounded by n_hosts).
struct EpisodeLimits {
  int max_steps = 0;
};

// Throws Error{InvalidStart} when the user cannot reach the foothold or the
// goal equals the foothold.
Episode run_episode(const Network& network, HostId start_host,
                    UserId start_user, HostId goal_host,
                    const HeuristicWeights& weights, std::uint64_t seed,
                    EpisodeLimits limits = {});

struct CampaignOptions {
  // Episode ids (and seeds) are first_index .. first_index + n - 1, so train
  // and test streams from one master seed stay disjoint.
  std::uint64_t first_index = 0;
  // When set, goals are drawn among hosts of this type (falls back to any
  // host if the network has none besides the foothold).
  std::optional<HostType> goal_host_type;
  // Moves per episode. Without a horizon every move order exhausts the same
  // reachable closure, so goal-reach would not depend on the heuristics.
  int max_steps = kDefaultMaxSteps;

  static constexpr int kDefaultMaxSteps = 25;
};

// The per-episode recipe: child seed, fresh network, random foothold/user/goal.
Episode simulate_campaign_episode(const GenerationConfig& config,
                                  const HeuristicWeights& weights,
                                  std::uint64_t master_seed,
                                  std::uint64_t index,
                                  const CampaignOptions& options = {});

// OpenMP fan-out over episodes, merged in index order.
std::vector<Episode> run_campaigns(const GenerationConfig& config,
                                   const HeuristicWeights& weights,
                                   int n_episodes, std::uint64_t master_seed,
                                   const CampaignOptions& options = {});

// Serial reference for run_campaigns.
std::vector<Episode> run_campaigns_serial(const GenerationConfig& config,
                                          const HeuristicWeights& weights,
                                          int n_episodes,
                                          std::uint64_t master_seed,
                                          const CampaignOptions& options = {});

// Regenerates the network an episode ran on and checks the fingerprint.
Network network_for(const Episode& episode);

// Replays an episode against its network: every transition legal, no
// revisits, snapshots consistent, knowledge monotone, Blocked iff no moves
// remain. Returns human-readable problems; empty when the episode is sound.
std::vector<std::string> check_episode(const Episode& episode,
                                       const Network& network);

// Episode stream file (JSON Lines).
std::string episode_to_json_line(const Episode& episode);
Episode episode_from_json_line(std::string_view line);
std::string save_episodes(std::span<const Episode> episodes);
std::vector<Episode> load_episodes(std::string_view text);

}  // namespace lateralsim
