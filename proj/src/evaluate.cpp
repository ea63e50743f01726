#include "lateralsim/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>

#include "lateralsim/error.hpp"

namespace lateralsim {

double percentile_of_actual(const PredictionRanking& ranking, HostId actual) {
  const auto it = std::find_if(ranking.entries.begin(), ranking.entries.end(),
                               [&](const auto& e) { return e.host == actual; });
  if (it == ranking.entries.end()) {
    throw Error(ErrorCode::ActualNotInRanking,
                "host " + std::to_string(actual) + " is not a candidate");
  }
  const double p = it->probability;
  std::size_t below = 0;
  std::size_t tied = 0;
  for (const auto& e : ranking.entries) {
    if (e.probability < p) {
      ++below;
    } else if (e.probability == p) {
      ++tied;
    }
  }
  return 100.0 * (static_cast<double>(below) + 0.5 * static_cast<double>(tied)) /
         static_cast<double>(ranking.entries.size());
}

std::vector<StepPercentile> score_transitions(
    const MlpModel& model, std::span<const StepSnapshot> steps,
    const Network& network, const FeatureSchema& schema,
    std::uint64_t episode_id, const PredictOptions& options) {
  std::vector<StepPercentile> out;
  for (std::size_t k = 1; k < steps.size(); ++k) {
    const PredictionRanking ranking =
        predict_next(model, steps.first(k), network, schema, options);
    out.push_back({episode_id, static_cast<int>(k),
                   percentile_of_actual(ranking, steps[k].host),
                   static_cast<int>(ranking.entries.size())});
  }
  return out;
}

namespace {

void check_corpus(std::span<const Episode> episodes,
                  std::span<const Network> networks) {
  if (episodes.size() != networks.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                "got " + std::to_string(episodes.size()) + " episodes but " +
                    std::to_string(networks.size()) + " networks");
  }
}

}  // namespace

std::vector<StepPercentile> evaluate_corpus_serial(
    const MlpModel& model, std::span<const Episode> episodes,
    std::span<const Network> networks, const FeatureSchema& schema,
    const PredictOptions& options) {
  check_corpus(episodes, networks);
  std::vector<StepPercentile> out;
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    auto part = score_transitions(model, episodes[i].steps, networks[i], schema,
                                  episodes[i].id, options);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

std::vector<StepPercentile> evaluate_corpus(const MlpModel& model,
                                            std::span<const Episode> episodes,
                                            std::span<const Network> networks,
                                            const FeatureSchema& schema,
                                            const PredictOptions& options) {
  check_corpus(episodes, networks);
  std::vector<std::vector<StepPercentile>> parts(episodes.size());
  std::vector<std::exception_ptr> errors(episodes.size());
  const auto n = static_cast<std::ptrdiff_t>(episodes.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    try {
      parts[u] = score_transitions(model, episodes[u].steps, networks[u],
                                   schema, episodes[u].id, options);
    } catch (...) {
      errors[u] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<StepPercentile> out;
  for (auto& part : parts) out.insert(out.end(), part.begin(), part.end());
  return out;
}

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) {
    throw Error(ErrorCode::InvalidConfig, "quantile of an empty sample");
  }
  if (!(q >= 0.0 && q <= 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "quantile level outside [0, 1]");
  }
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  if (frac == 0.0) return sorted[lo];
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double quantile(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  return quantile_sorted(values, q);
}

void PercentileReport::append(const PercentileReport& other) {
  rows.insert(rows.end(), other.rows.begin(), other.rows.end());
}

PercentileReport aggregate(std::span<const StepPercentile> values,
                           const std::string& condition) {
  std::map<int, std::vector<double>> by_k;
  for (const auto& v : values) by_k[v.k].push_back(v.percentile);
  PercentileReport report;
  for (auto& [k, xs] : by_k) {
    std::sort(xs.begin(), xs.end());
    report.rows.push_back({condition, k, static_cast<int>(xs.size()),
                           quantile_sorted(xs, 0.1), quantile_sorted(xs, 0.5),
                           quantile_sorted(xs, 0.9)});
  }
  return report;
}

OverallSummary summarize(std::span<const StepPercentile> values) {
  OverallSummary s;
  if (values.empty()) return s;
  std::vector<double> xs;
  xs.reserve(values.size());
  double total = 0.0;
  for (const auto& v : values) {
    xs.push_back(v.percentile);
    total += v.percentile;
  }
  std::sort(xs.begin(), xs.end());
  s.n = static_cast<int>(xs.size());
  s.mean = total / static_cast<double>(xs.size());
  s.median = quantile_sorted(xs, 0.5);
  s.p10 = quantile_sorted(xs, 0.1);
  s.p90 = quantile_sorted(xs, 0.9);
  return s;
}

CompromiseSequence sequence_of(const Episode& episode) {
  CompromiseSequence seq;
  seq.source = "episode " + std::to_string(episode.id);
  for (std::size_t i = 0; i < episode.steps.size(); ++i) {
    CompromiseEntry e{episode.steps[i].host, std::nullopt};
    if (i == 0) e.user = episode.start_user;
    seq.entries.push_back(e);
  }
  return seq;
}

bool CompromiseSequence::has_user_information() const {
  return std::any_of(entries.begin(), entries.end(),
                     [](const auto& e) { return e.user.has_value(); });
}

std::vector<StepSnapshot> reconstruct_steps(const CompromiseSequence& sequence,
                                            const Network& network) {
  if (sequence.entries.empty()) {
    throw Error(ErrorCode::InvalidSequence, "compromise sequence is empty");
  }
  const auto n_hosts = static_cast<HostId>(network.hosts.size());
  const auto n_users = static_cast<UserId>(network.users.size());
  std::vector<char> seen(network.hosts.size(), 0);
  for (std::size_t i = 0; i < sequence.entries.size(); ++i) {
    const CompromiseEntry& e = sequence.entries[i];
    if (e.host < 0 || e.host >= n_hosts) {
      throw Error(ErrorCode::UnknownHost,
                  "sequence entry " + std::to_string(i) + " names host " +
                      std::to_string(e.host) + ", which is not in the network");
    }
    if (seen[static_cast<std::size_t>(e.host)]) {
      throw Error(ErrorCode::InvalidSequence,
                  "host " + std::to_string(e.host) + " appears twice");
    }
    seen[static_cast<std::size_t>(e.host)] = 1;
    if (e.user && (*e.user < 0 || *e.user >= n_users)) {
      throw Error(ErrorCode::InvalidSequence,
                  "sequence entry " + std::to_string(i) + " names user " +
                      std::to_string(*e.user) + ", which is not in the network");
    }
  }
  const bool with_users = sequence.has_user_information();
  const CompromiseEntry& first = sequence.entries.front();
  if (with_users && !first.user) {
    throw Error(ErrorCode::InvalidSequence,
                "the foothold entry must name a user when any entry does");
  }

  std::vector<StepSnapshot> steps;
  AdversaryState state;
  for (std::size_t i = 0; i < sequence.entries.size(); ++i) {
    const CompromiseEntry& e = sequence.entries[i];
    const Host& host = network.host(e.host);
    if (i == 0) {
      if (with_users) {
        state = initial_state(network, e.host, *e.user, e.host);
      } else {
        state.compromised_hosts = {e.host};
        state.evaluated_hosts = {e.host};
        state.goal_host = e.host;
      }
    } else {
      state.compromised_hosts.push_back(e.host);
      auto it = std::lower_bound(state.evaluated_hosts.begin(),
                                 state.evaluated_hosts.end(), e.host);
      if (it == state.evaluated_hosts.end() || *it != e.host) {
        state.evaluated_hosts.insert(it, e.host);
      }
      if (e.user && state.find_credential(*e.user) == nullptr) {
        const Credential c{*e.user, network.user(*e.user).privilege_level};
        state.credentials.insert(std::lower_bound(state.credentials.begin(),
                                                  state.credentials.end(), c),
                                 c);
      }
    }
    if (with_users) state = apply_exploits(std::move(state), host, network);
    steps.push_back(snapshot(state, host));
  }
  return steps;
}

std::vector<StepPercentile> replay_sequence(const MlpModel& model,
                                            const CompromiseSequence& sequence,
                                            const Network& network,
                                            const FeatureSchema& schema,
                                            const PredictOptions& options) {
  const std::vector<StepSnapshot> steps = reconstruct_steps(sequence, network);
  if (sequence.has_user_information()) {
    return score_transitions(model, steps, network, schema, 0, options);
  }
  if (options.restrict_to_reachable) {
    throw Error(ErrorCode::InvalidSequence,
                "restricting to reachable hosts needs user ids in the sequence");
  }
  const FeatureSchema ablation(schema.n_subnets(), schema.n_privilege_levels(),
                               false, schema.include_type_cross());
  return score_transitions(model, steps, network, ablation, 0, options);
}

}  // namespace lateralsim
