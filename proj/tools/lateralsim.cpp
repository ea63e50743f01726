// Command-line driver: generate, simulate, encode, train, evaluate, replay,
// pipeline. Failures print one line "error: <Code>: <message>" to stderr and
// exit with status 1.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "lateralsim/error.hpp"
#include "lateralsim/experiment.hpp"
#include "lateralsim/parallel.hpp"

namespace fs = std::filesystem;
using namespace lateralsim;

namespace {

ExperimentConfig config_or_default(const std::string& path) {
  if (path.empty()) return {};
  return load_experiment_config(read_file(path));
}

// The schema among the full/ablation and cross/no-cross variants that the
// model was trained on.
FeatureSchema schema_for_model(const MlpModel& model,
                               const GenerationConfig& generation) {
  for (bool user : {true, false}) {
    for (bool cross : {false, true}) {
      FeatureSchema s = FeatureSchema::for_config(generation, user, cross);
      if (s.fingerprint() == model.schema_fingerprint) return s;
    }
  }
  throw Error(ErrorCode::FingerprintMismatch,
              "model schema " + model.schema_fingerprint +
                  " does not fit networks with " +
                  std::to_string(generation.n_subnets) + " subnets and " +
                  std::to_string(generation.privilege_levels) +
                  " privilege levels");
}

void print_summary(const OverallSummary& s) {
  std::cout << "transitions " << s.n << ", median percentile " << s.median
            << ", p10 " << s.p10 << ", p90 " << s.p90 << ", mean " << s.mean
            << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lateral-movement campaign simulator and next-host predictor"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads,
                 "Worker threads (default: LATERALSIM_THREADS or all cores)");

  std::string config_path;
  std::string out_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> episodes;
  std::uint64_t first_index = 0;
  bool ablation = false;
  bool restrict_reachable = false;
  std::string input_a;
  std::string input_b;
  std::string condition;
  std::string log_path;

  auto* generate = app.add_subcommand("generate", "Generate one network file");
  generate->add_option("--config", config_path, "Experiment config (JSON)");
  generate->add_option("--seed", seed, "Network seed");
  generate->add_option("--out", out_path, "Network file to write")->required();

  auto* simulate = app.add_subcommand("simulate", "Run campaigns to an episode file");
  simulate->add_option("--config", config_path, "Experiment config (JSON)");
  simulate->add_option("--seed", seed, "Master seed");
  simulate->add_option("--episodes", episodes, "Number of episodes");
  simulate->add_option("--first-index", first_index,
                       "Index of the first episode (keeps test streams disjoint)");
  simulate->add_option("--out", out_path, "Episode file (JSON Lines)")->required();

  auto* encode = app.add_subcommand("encode", "Encode episodes into a dataset file");
  encode->add_option("episodes", input_a, "Episode file")->required();
  encode->add_option("--config", config_path, "Experiment config (JSON)");
  encode->add_flag("--ablation", ablation, "Drop user and credential features");
  encode->add_option("--out", out_path, "Dataset file")->required();

  auto* train_cmd = app.add_subcommand("train", "Train a model on a dataset file");
  train_cmd->add_option("dataset", input_a, "Dataset file")->required();
  train_cmd->add_option("--config", config_path, "Experiment config (JSON)");
  train_cmd->add_option("--seed", seed, "Training seed");
  train_cmd->add_option("--out", out_path, "Model file")->required();
  train_cmd->add_option("--log", log_path, "Per-epoch loss CSV");

  auto* evaluate = app.add_subcommand("evaluate", "Score a model on held-out episodes");
  evaluate->add_option("model", input_a, "Model file")->required();
  evaluate->add_option("episodes", input_b, "Episode file")->required();
  evaluate->add_flag("--restrict-reachable", restrict_reachable,
                     "Rank only hosts the held credentials can reach");
  evaluate->add_option("--condition", condition, "Report condition label");
  evaluate->add_option("--out", out_path, "Output directory")->required();

  auto* replay = app.add_subcommand("replay", "Score an observed compromise sequence");
  replay->add_option("model", input_a, "Model file")->required();
  replay->add_option("sequence", input_b, "Compromise-sequence file")->required();
  replay->add_flag("--restrict-reachable", restrict_reachable,
                   "Rank only hosts the held credentials can reach");
  replay->add_option("--out", out_path, "Percentile CSV to write");

  auto* pipeline = app.add_subcommand("pipeline", "Run every stage from a config");
  pipeline->add_option("--config", config_path, "Experiment config (JSON)")->required();
  pipeline->add_option("--seed", seed, "Master seed");
  pipeline->add_option("--episodes", episodes, "Training episodes");
  pipeline->add_option("--out", out_path, "Output directory");
  pipeline->add_flag("--ablation", ablation, "Drop user and credential features");
  pipeline->add_flag("--restrict-reachable", restrict_reachable,
                     "Rank only hosts the held credentials can reach");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    set_thread_count(resolve_thread_count(threads));

    if (*generate) {
      const ExperimentConfig cfg = config_or_default(config_path);
      const Network net = generate_network(cfg.generation, seed.value_or(cfg.master_seed));
      write_file(out_path, save_network(net) + "\n");
      std::cout << "network " << network_fingerprint(net) << ": "
                << net.hosts.size() << " hosts, " << net.users.size()
                << " users\n";
    } else if (*simulate) {
      const ExperimentConfig cfg = config_or_default(config_path);
      const int n = episodes.value_or(cfg.n_train_episodes);
      if (n < 1) throw Error(ErrorCode::InvalidConfig, "--episodes must be >= 1");
      const auto eps = run_campaigns(cfg.generation, cfg.weights, n,
                                     seed.value_or(cfg.master_seed),
                                     cfg.campaign_options(first_index));
      write_file(out_path, save_episodes(eps));
      std::size_t reached = 0;
      for (const auto& e : eps) reached += e.outcome == Outcome::GoalReached;
      std::cout << "goal reached in " << reached << " of " << eps.size()
                << " episodes ("
                << 100.0 * static_cast<double>(reached) / static_cast<double>(eps.size())
                << "%)\n";
    } else if (*encode) {
      const auto eps = load_episodes(read_file(input_a));
      if (eps.empty()) throw Error(ErrorCode::InvalidConfig, input_a + " holds no episodes");
      ExperimentConfig cfg = config_or_default(config_path);
      const FeatureSchema schema = FeatureSchema::for_config(
          eps.front().network.config, !ablation, cfg.include_type_cross);
      const auto nets = networks_for(eps);
      std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
      if (!out) throw Error(ErrorCode::IoError, "cannot write " + out_path);
      write_dataset(out, eps, nets, schema);
      std::cout << "dataset schema " << schema.fingerprint() << ", input width "
                << schema.input_width() << "\n";
    } else if (*train_cmd) {
      ExperimentConfig cfg = config_or_default(config_path);
      if (seed) cfg.train.seed = *seed;
      std::ifstream in(input_a, std::ios::binary);
      if (!in) throw Error(ErrorCode::IoError, "cannot open " + input_a);
      const Dataset ds = read_dataset(in);
      const TrainResult result = train(ds, cfg.train);
      write_file(out_path, save_model(result.model));
      if (!log_path.empty()) write_file(log_path, train_log_csv(result.log));
      std::cout << "trained on " << ds.groups.size() << " groups, final loss "
                << result.log.epoch_mean_loss.back() << "\n";
    } else if (*evaluate) {
      const MlpModel model = load_model(read_file(input_a));
      const auto eps = load_episodes(read_file(input_b));
      if (eps.empty()) throw Error(ErrorCode::InvalidConfig, input_b + " holds no episodes");
      const FeatureSchema schema = schema_for_model(model, eps.front().network.config);
      const auto nets = networks_for(eps);
      PredictOptions opts;
      opts.restrict_to_reachable = restrict_reachable;
      const auto values = evaluate_corpus(model, eps, nets, schema, opts);
      if (condition.empty()) {
        condition = schema.include_user_features()
                        ? std::to_string(eps.front().network.config.n_hosts) + "-host"
                        : "no-user-info";
      }
      const PercentileReport report = aggregate(values, condition);
      const fs::path dir = out_path;
      fs::create_directories(dir);
      write_file(dir / "percentiles.csv", step_percentiles_to_csv(values));
      write_file(dir / "report.csv", report_to_csv(report));
      write_file(dir / "report_plot.json", report_plot_json(report) + "\n");
      print_summary(summarize(values));
    } else if (*replay) {
      const MlpModel model = load_model(read_file(input_a));
      const CompromiseSequence seq = load_sequence(read_file(input_b));
      const fs::path net_path = fs::path(input_b).parent_path() / seq.network;
      const Network net = load_network(read_file(net_path));
      const FeatureSchema schema = schema_for_model(model, net.config);
      PredictOptions opts;
      opts.restrict_to_reachable = restrict_reachable;
      const auto values = replay_sequence(model, seq, net, schema, opts);
      if (!seq.source.empty()) std::cout << "source: " << seq.source << "\n";
      for (const auto& v : values) {
        std::cout << "transition " << v.k << " -> host "
                  << seq.entries[static_cast<std::size_t>(v.k)].host
                  << ": percentile " << v.percentile << " of " << v.n_candidates
                  << " candidates\n";
      }
      if (!out_path.empty()) write_file(out_path, step_percentiles_to_csv(values));
    } else if (*pipeline) {
      ExperimentConfig cfg = config_or_default(config_path);
      if (seed) cfg.master_seed = *seed;
      if (episodes) cfg.n_train_episodes = *episodes;
      if (!out_path.empty()) cfg.output_dir = out_path;
      if (ablation) cfg.ablation = true;
      if (restrict_reachable) cfg.restrict_to_reachable = true;
      const PipelineResult result = run_pipeline(
          cfg, [](const std::string& line) { std::cout << line << "\n" << std::flush; });
      std::cout << "condition " << cfg.condition() << ": ";
      print_summary(result.summary);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const CLI::Error& e) {
    std::cerr << "error: InvalidConfig: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: Internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
