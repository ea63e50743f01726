#pragma once

// File-driven experiment: simulate train/test campaigns, encode, train,
// evaluate, with a manifest recording the hashes each stage consumed and
// produced so unchanged stages are skipped on rerun.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lateralsim/evaluate.hpp"

namespace lateralsim {

struct ExperimentConfig {
  GenerationConfig generation;
  HeuristicWeights weights;
  TrainConfig train;
  int n_train_episodes = 2000;
  int n_test_episodes = 300;
  bool ablation = false;
  bool include_type_cross = false;
  bool restrict_to_reachable = false;
  std::uint64_t master_seed = 0;
  std::string output_dir = "out";
  int max_episode_steps = CampaignOptions::kDefaultMaxSteps;
  std::optional<HostType> goal_host_type;

  std::vector<std::string> problems() const;
  FeatureSchema schema() const;
  CampaignOptions campaign_options(std::uint64_t first_index) const;
  // "no-user-info" under the ablation, otherwise "<n_hosts>-host".
  std::string condition() const;
  bool operator==(const ExperimentConfig&) const = default;
};

// Missing fields keep their defaults. Throws Error{ParseError} or
// Error{InvalidConfig}.
ExperimentConfig load_experiment_config(std::string_view document);
std::string experiment_config_json(const ExperimentConfig& config);

std::string train_config_json(const TrainConfig& config);
TrainConfig train_config_from_json(std::string_view document);

// Per-epoch training log, CSV with columns epoch,mean_loss.
std::string train_log_csv(const TrainLog& log);

// Regenerates each episode's network (fingerprint-checked).
std::vector<Network> networks_for(std::span<const Episode> episodes);

// Whole-file helpers; errors become Error{IoError} naming the path.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);
std::string file_hash(const std::filesystem::path& path);

struct StageRecord {
  std::string name;
  std::vector<std::pair<std::string, std::string>> inputs;   // label -> hash
  std::vector<std::pair<std::string, std::string>> outputs;  // file -> hash
  bool skipped = false;

  bool operator==(const StageRecord&) const = default;
};

struct PipelineResult {
  std::vector<StageRecord> stages;
  OverallSummary summary;
  PercentileReport report;
};

// Runs simulate, encode, train and evaluate into config.output_dir and
// writes manifest.json. `log` receives one progress line per stage.
PipelineResult run_pipeline(
    const ExperimentConfig& config,
    const std::function<void(const std::string&)>& log = {});

}  // namespace lateralsim
