#pragma once

// Percentile-of-actual-next-host scoring, per-step aggregation into medians
// with 10th/90th percentile bands, report export, and replay of externally
// observed compromise sequences.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lateralsim/mlp.hpp"

namespace lateralsim {

struct StepPercentile {
  std::uint64_t episode = 0;
  int k = 0;  // hosts compromised before the prediction
  double percentile = 0.0;
  int n_candidates = 0;

  bool operator==(const StepPercentile&) const = default;
};

// Mid-rank percentile: 100 * (#below + 0.5 * #tied) / n. Throws
// Error{ActualNotInRanking}.
double percentile_of_actual(const PredictionRanking& ranking, HostId actual);

// Scores every transition k -> k+1 (k >= 1) of one observed host sequence.
std::vector<StepPercentile> score_transitions(
    const MlpModel& model, std::span<const StepSnapshot> steps,
    const Network& network, const FeatureSchema& schema,
    std::uint64_t episode_id, const PredictOptions& options = {});

// networks[i] is the network of episodes[i]. OpenMP over episodes, results
// concatenated in input order.
std::vector<StepPercentile> evaluate_corpus(
    const MlpModel& model, std::span<const Episode> episodes,
    std::span<const Network> networks, const FeatureSchema& schema,
    const PredictOptions& options = {});
std::vector<StepPercentile> evaluate_corpus_serial(
    const MlpModel& model, std::span<const Episode> episodes,
    std::span<const Network> networks, const FeatureSchema& schema,
    const PredictOptions& options = {});

// Linear interpolation between order statistics of `sorted` (ascending):
// position q * (n - 1). Requires a non-empty input and q in [0, 1].
double quantile_sorted(std::span<const double> sorted, double q);
double quantile(std::vector<double> values, double q);

struct ReportRow {
  std::string condition;
  int k = 0;
  int n = 0;
  double p10 = 0.0;
  double median = 0.0;
  double p90 = 0.0;

  bool operator==(const ReportRow&) const = default;
};

struct PercentileReport {
  std::vector<ReportRow> rows;  // by condition (insertion order), then k

  static constexpr double kChance = 50.0;
  void append(const PercentileReport& other);
  bool operator==(const PercentileReport&) const = default;
};

PercentileReport aggregate(std::span<const StepPercentile> values,
                           const std::string& condition);

struct OverallSummary {
  int n = 0;
  double mean = 0.0;
  double median = 0.0;
  double p10 = 0.0;
  double p90 = 0.0;
};
OverallSummary summarize(std::span<const StepPercentile> values);

// CSV with columns condition,k,n,p10,median,p90; numbers round-trip exactly.
std::string report_to_csv(const PercentileReport& report);
PercentileReport report_from_csv(std::string_view text);
// Plot data: the chance series at 50 plus one series per condition.
std::string report_plot_json(const PercentileReport& report);

// Per-transition records, CSV with columns episode,k,percentile,n_candidates.
std::string step_percentiles_to_csv(std::span<const StepPercentile> values);
std::vector<StepPercentile> step_percentiles_from_csv(std::string_view text);

struct CompromiseEntry {
  HostId host = 0;
  std::optional<UserId> user;

  bool operator==(const CompromiseEntry&) const = default;
};

struct CompromiseSequence {
  std::string network;  // path of the network file, relative to the sequence
  std::string source;
  std::vector<CompromiseEntry> entries;

  bool has_user_information() const;
  bool operator==(const CompromiseSequence&) const = default;
};

CompromiseSequence load_sequence(std::string_view document);
std::string save_sequence(const CompromiseSequence& sequence);

// Rebuilds what the adversary held after each compromise: the first entry's
// user at base privilege, later named users added on arrival, and each
// host's exploits fired as in the simulator. Throws Error{UnknownHost},
// Error{InvalidSequence} (empty, duplicate hosts, unknown user). Observed
// moves are not checked against the model's access rules.
std::vector<StepSnapshot> reconstruct_steps(const CompromiseSequence& sequence,
                                            const Network& network);

// Without any user ids the sequence is scored under the ablation variant of
// `schema`, which the model must have been trained on.
std::vector<StepPercentile> replay_sequence(const MlpModel& model,
                                            const CompromiseSequence& sequence,
                                            const Network& network,
                                            const FeatureSchema& schema,
                                            const PredictOptions& options = {});

// The sequence an episode followed, with the foothold user attached.
CompromiseSequence sequence_of(const Episode& episode);

}  // namespace lateralsim
