#include "lateralsim/experiment.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "json_codec.hpp"
#include "lateralsim/error.hpp"
#include "lateralsim/hash.hpp"

namespace lateralsim {

namespace fs = std::filesystem;
using detail::json;

namespace {

json train_to_json(const TrainConfig& c) {
  return json{{"learning_rate", c.learning_rate},
              {"batch_size", c.batch_size},
              {"epochs", c.epochs},
              {"hidden_dims", c.hidden_dims},
              {"seed", c.seed},
              {"l2", c.l2}};
}

TrainConfig train_from_json(const json& j, const std::string& ctx) {
  if (!j.is_object()) throw Error(ErrorCode::ParseError, ctx + ": expected an object");
  TrainConfig c;
  c.learning_rate = detail::optional_as(j, "learning_rate", c.learning_rate, ctx);
  c.batch_size = detail::optional_as(j, "batch_size", c.batch_size, ctx);
  c.epochs = detail::optional_as(j, "epochs", c.epochs, ctx);
  c.hidden_dims = detail::optional_as(j, "hidden_dims", c.hidden_dims, ctx);
  c.seed = detail::optional_as(j, "seed", c.seed, ctx);
  c.l2 = detail::optional_as(j, "l2", c.l2, ctx);
  return c;
}

json experiment_to_json(const ExperimentConfig& c) {
  json j{{"generation", detail::config_to_json(c.generation)},
         {"weights", detail::weights_json(c.weights)},
         {"train", train_to_json(c.train)},
         {"n_train_episodes", c.n_train_episodes},
         {"n_test_episodes", c.n_test_episodes},
         {"ablation", c.ablation},
         {"include_type_cross", c.include_type_cross},
         {"restrict_to_reachable", c.restrict_to_reachable},
         {"master_seed", c.master_seed},
         {"output_dir", c.output_dir},
         {"max_episode_steps", c.max_episode_steps}};
  j["goal_host_type"] =
      c.goal_host_type ? json(std::string(to_string(*c.goal_host_type))) : json();
  return j;
}

std::string hash_of(std::string_view text) { return to_hex(fnv1a(text)); }

json pairs_to_json(const std::vector<std::pair<std::string, std::string>>& v) {
  json out = json::array();
  for (const auto& [k, h] : v) out.push_back({{"name", k}, {"hash", h}});
  return out;
}

std::vector<std::pair<std::string, std::string>> pairs_from_json(
    const json& j, const std::string& ctx) {
  std::vector<std::pair<std::string, std::string>> out;
  if (!j.is_array()) throw Error(ErrorCode::ParseError, ctx + ": expected a list");
  for (const json& e : j) {
    out.emplace_back(detail::require_as<std::string>(e, "name", ctx),
                     detail::require_as<std::string>(e, "hash", ctx));
  }
  return out;
}

std::vector<StageRecord> load_manifest(const fs::path& path) {
  std::vector<StageRecord> out;
  if (!fs::exists(path)) return out;
  const std::string ctx = path.string();
  const json j = detail::parse_document(read_file(path), ctx);
  for (const json& s : detail::require(j, "stages", ctx)) {
    StageRecord r;
    r.name = detail::require_as<std::string>(s, "name", ctx);
    r.inputs = pairs_from_json(detail::require(s, "inputs", ctx), ctx);
    r.outputs = pairs_from_json(detail::require(s, "outputs", ctx), ctx);
    out.push_back(std::move(r));
  }
  return out;
}

void save_manifest(const fs::path& path, const ExperimentConfig& config,
                   const std::vector<StageRecord>& stages) {
  json list = json::array();
  for (const auto& s : stages) {
    list.push_back({{"name", s.name},
                    {"inputs", pairs_to_json(s.inputs)},
                    {"outputs", pairs_to_json(s.outputs)}});
  }
  const json config_json = experiment_to_json(config);
  const json j{{"config", config_json},
               {"config_hash", hash_of(config_json.dump())},
               {"stages", std::move(list)}};
  write_file(path, j.dump(2) + "\n");
}

// Tracks stage provenance against the previous manifest in the same
// directory.
class StageRunner {
 public:
  StageRunner(fs::path dir, std::vector<StageRecord> previous,
              const std::function<void(const std::string&)>& log)
      : dir_(std::move(dir)), previous_(std::move(previous)), log_(log) {}

  // Runs `body` unless a previous record has the same inputs and its outputs
  // are still on disk unchanged.
  void run(const std::string& name,
           std::vector<std::pair<std::string, std::string>> inputs,
           const std::vector<std::string>& outputs,
           const std::function<void()>& body) {
    StageRecord record{name, std::move(inputs), {}, false};
    if (const StageRecord* old = find(name);
        old && old->inputs == record.inputs && outputs_intact(*old, outputs)) {
      record.outputs = old->outputs;
      record.skipped = true;
      say(name + ": up to date, skipped");
    } else {
      body();
      for (const auto& file : outputs) {
        record.outputs.emplace_back(file, file_hash(dir_ / file));
      }
      say(name + ": done");
    }
    stages_.push_back(std::move(record));
  }

  std::string output_hash(const std::string& file) const {
    for (const auto& s : stages_) {
      for (const auto& [f, h] : s.outputs) {
        if (f == file) return h;
      }
    }
    throw Error(ErrorCode::IoError, "no stage produced " + file);
  }

  const std::vector<StageRecord>& stages() const { return stages_; }

 private:
  const StageRecord* find(const std::string& name) const {
    for (const auto& s : previous_) {
      if (s.name == name) return &s;
    }
    return nullptr;
  }

  bool outputs_intact(const StageRecord& old,
                      const std::vector<std::string>& outputs) const {
    if (old.outputs.size() != outputs.size()) return false;
    for (std::size_t i = 0; i < outputs.size(); ++i) {
      if (old.outputs[i].first != outputs[i]) return false;
      if (!fs::exists(dir_ / outputs[i])) return false;
      if (file_hash(dir_ / outputs[i]) != old.outputs[i].second) return false;
    }
    return true;
  }

  void say(const std::string& line) const {
    if (log_) log_(line);
  }

  fs::path dir_;
  std::vector<StageRecord> previous_;
  std::vector<StageRecord> stages_;
  const std::function<void(const std::string&)>& log_;
};

std::string goal_reach_summary(std::span<const Episode> episodes) {
  std::size_t reached = 0;
  for (const auto& e : episodes) reached += e.outcome == Outcome::GoalReached;
  std::ostringstream os;
  os << reached << "/" << episodes.size() << " reached the goal";
  return os.str();
}

}  // namespace

std::vector<std::string> ExperimentConfig::problems() const {
  std::vector<std::string> out = config_problems(generation);
  if (!weights.valid()) out.emplace_back("weights must be finite and >= 0 with a positive sum");
  for (auto& p : train.problems()) out.push_back("train." + p);
  if (n_train_episodes < 1) out.emplace_back("n_train_episodes must be >= 1");
  if (n_test_episodes < 1) out.emplace_back("n_test_episodes must be >= 1");
  if (max_episode_steps < 0) out.emplace_back("max_episode_steps must be >= 0");
  if (output_dir.empty()) out.emplace_back("output_dir must not be empty");
  return out;
}

FeatureSchema ExperimentConfig::schema() const {
  return FeatureSchema::for_config(generation, !ablation, include_type_cross);
}

CampaignOptions ExperimentConfig::campaign_options(
    std::uint64_t first_index) const {
  CampaignOptions o;
  o.first_index = first_index;
  o.goal_host_type = goal_host_type;
  o.max_steps = max_episode_steps;
  return o;
}

std::string ExperimentConfig::condition() const {
  if (ablation) return "no-user-info";
  return std::to_string(generation.n_hosts) + "-host";
}

ExperimentConfig load_experiment_config(std::string_view document) {
  const std::string ctx = "experiment config";
  const json j = detail::parse_document(document, ctx);
  if (!j.is_object()) throw Error(ErrorCode::ParseError, ctx + ": expected an object");
  ExperimentConfig c;
  if (j.contains("generation")) {
    c.generation = detail::config_from_json(j["generation"], ctx + " generation");
  }
  if (j.contains("weights")) {
    c.weights = detail::weights_from_json(j["weights"], ctx + " weights");
  }
  if (j.contains("train")) c.train = train_from_json(j["train"], ctx + " train");
  c.n_train_episodes = detail::optional_as(j, "n_train_episodes", c.n_train_episodes, ctx);
  c.n_test_episodes = detail::optional_as(j, "n_test_episodes", c.n_test_episodes, ctx);
  c.ablation = detail::optional_as(j, "ablation", c.ablation, ctx);
  c.include_type_cross =
      detail::optional_as(j, "include_type_cross", c.include_type_cross, ctx);
  c.restrict_to_reachable =
      detail::optional_as(j, "restrict_to_reachable", c.restrict_to_reachable, ctx);
  c.master_seed = detail::optional_as(j, "master_seed", c.master_seed, ctx);
  c.output_dir = detail::optional_as(j, "output_dir", c.output_dir, ctx);
  c.max_episode_steps =
      detail::optional_as(j, "max_episode_steps", c.max_episode_steps, ctx);
  if (j.contains("goal_host_type") && !j["goal_host_type"].is_null()) {
    const auto name = detail::require_as<std::string>(j, "goal_host_type", ctx);
    c.goal_host_type = parse_host_type(name);
    if (!c.goal_host_type) {
      throw Error(ErrorCode::InvalidConfig, ctx + ": unknown host type " + name);
    }
  }
  if (auto p = c.problems(); !p.empty()) {
    throw Error(ErrorCode::InvalidConfig, ctx + ": " + p.front());
  }
  return c;
}

std::string experiment_config_json(const ExperimentConfig& config) {
  return experiment_to_json(config).dump(2);
}

std::string train_config_json(const TrainConfig& config) {
  return train_to_json(config).dump(2);
}

TrainConfig train_config_from_json(std::string_view document) {
  const std::string ctx = "train config";
  TrainConfig c = train_from_json(detail::parse_document(document, ctx), ctx);
  if (auto p = c.problems(); !p.empty()) {
    throw Error(ErrorCode::InvalidConfig, ctx + ": " + p.front());
  }
  return c;
}

std::string train_log_csv(const TrainLog& log) {
  std::string out = "epoch,mean_loss\n";
  char buf[32];
  for (std::size_t e = 0; e < log.epoch_mean_loss.size(); ++e) {
    const auto res = std::to_chars(buf, buf + sizeof buf, log.epoch_mean_loss[e]);
    out += std::to_string(e) + ',';
    out.append(buf, res.ptr);
    out += '\n';
  }
  return out;
}

std::vector<Network> networks_for(std::span<const Episode> episodes) {
  std::vector<Network> out(episodes.size());
  std::vector<std::exception_ptr> errors(episodes.size());
  const auto n = static_cast<std::ptrdiff_t>(episodes.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    try {
      out[u] = network_for(episodes[u]);
    } catch (...) {
      errors[u] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const fs::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

std::string file_hash(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  std::vector<char> buf(1 << 20);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    h = fnv1a(std::string_view(buf.data(), static_cast<std::size_t>(in.gcount())), h);
  }
  return to_hex(h);
}

PipelineResult run_pipeline(const ExperimentConfig& config,
                            const std::function<void(const std::string&)>& log) {
  if (auto p = config.problems(); !p.empty()) {
    throw Error(ErrorCode::InvalidConfig, p.front());
  }
  const fs::path dir = config.output_dir;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string());
  const fs::path manifest = dir / "manifest.json";
  StageRunner runner(dir, load_manifest(manifest), log);
  const FeatureSchema schema = config.schema();

  json sim_inputs{{"generation", detail::config_to_json(config.generation)},
                  {"weights", detail::weights_json(config.weights)},
                  {"n_train_episodes", config.n_train_episodes},
                  {"n_test_episodes", config.n_test_episodes},
                  {"master_seed", config.master_seed},
                  {"max_episode_steps", config.max_episode_steps}};
  sim_inputs["goal_host_type"] =
      config.goal_host_type ? json(std::string(to_string(*config.goal_host_type)))
                            : json();
  runner.run("simulate", {{"campaign", hash_of(sim_inputs.dump())}},
             {"train_episodes.jsonl", "test_episodes.jsonl"}, [&] {
               const auto n_train = static_cast<std::uint64_t>(config.n_train_episodes);
               const auto train_eps =
                   run_campaigns(config.generation, config.weights,
                                 config.n_train_episodes, config.master_seed,
                                 config.campaign_options(0));
               const auto test_eps =
                   run_campaigns(config.generation, config.weights,
                                 config.n_test_episodes, config.master_seed,
                                 config.campaign_options(n_train));
               write_file(dir / "train_episodes.jsonl", save_episodes(train_eps));
               write_file(dir / "test_episodes.jsonl", save_episodes(test_eps));
               if (log) {
                 log("simulate: train " + goal_reach_summary(train_eps) +
                     "; test " + goal_reach_summary(test_eps));
               }
             });

  runner.run("encode",
             {{"train_episodes.jsonl", runner.output_hash("train_episodes.jsonl")},
              {"schema", schema.fingerprint()}},
             {"dataset.jsonl"}, [&] {
               const auto episodes =
                   load_episodes(read_file(dir / "train_episodes.jsonl"));
               const auto networks = networks_for(episodes);
               std::ofstream out(dir / "dataset.jsonl",
                                 std::ios::binary | std::ios::trunc);
               if (!out) throw Error(ErrorCode::IoError, "cannot write dataset.jsonl");
               write_dataset(out, episodes, networks, schema);
               if (!out) throw Error(ErrorCode::IoError, "write failed for dataset.jsonl");
             });

  runner.run("train",
             {{"dataset.jsonl", runner.output_hash("dataset.jsonl")},
              {"train_config", hash_of(train_to_json(config.train).dump())}},
             {"model.json", "train_log.csv"}, [&] {
               std::ifstream in(dir / "dataset.jsonl", std::ios::binary);
               if (!in) throw Error(ErrorCode::IoError, "cannot open dataset.jsonl");
               const Dataset dataset = read_dataset(in);
               const TrainResult result = train(dataset, config.train);
               write_file(dir / "model.json", save_model(result.model));
               write_file(dir / "train_log.csv", train_log_csv(result.log));
             });

  PipelineResult out;
  std::vector<StepPercentile> percentiles;
  const json eval_options{{"condition", config.condition()},
                          {"restrict_to_reachable", config.restrict_to_reachable}};
  runner.run("evaluate",
             {{"model.json", runner.output_hash("model.json")},
              {"test_episodes.jsonl", runner.output_hash("test_episodes.jsonl")},
              {"options", hash_of(eval_options.dump())}},
             {"percentiles.csv", "report.csv", "report_plot.json"}, [&] {
               const MlpModel model = load_model(read_file(dir / "model.json"));
               const auto episodes =
                   load_episodes(read_file(dir / "test_episodes.jsonl"));
               const auto networks = networks_for(episodes);
               PredictOptions opts;
               opts.restrict_to_reachable = config.restrict_to_reachable;
               percentiles = evaluate_corpus(model, episodes, networks, schema, opts);
               const PercentileReport report = aggregate(percentiles, config.condition());
               write_file(dir / "percentiles.csv", step_percentiles_to_csv(percentiles));
               write_file(dir / "report.csv", report_to_csv(report));
               write_file(dir / "report_plot.json", report_plot_json(report) + "\n");
             });
  if (runner.stages().back().skipped) {
    percentiles = step_percentiles_from_csv(read_file(dir / "percentiles.csv"));
  }
  out.summary = summarize(percentiles);
  out.report = report_from_csv(read_file(dir / "report.csv"));
  out.stages = runner.stages();
  save_manifest(manifest, config, out.stages);
  return out;
}

}  // namespace lateralsim
