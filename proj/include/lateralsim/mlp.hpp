#pragma once

// Four-layer feed-forward scorer for (state, candidate) pairs. Logits of one
// prediction step are normalized together (grouped softmax) and trained with
// grouped cross-entropy by mini-batch gradient descent.
//
// Each layer stores its weights row-major as in x out, so the forward inner
// loop runs over contiguous outputs. The first `state_width` inputs are the
// prefix encoding, shared by every candidate of a group: their contribution
// to the first layer is computed once per group.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lateralsim/features.hpp"

namespace lateralsim {

inline constexpr int kLayerCount = 4;

enum class Activation { Relu };
std::string_view to_string(Activation activation);

struct DenseLayer {
  int in = 0;
  int out = 0;
  std::vector<double> weights;  // in x out, row-major
  std::vector<double> bias;     // out

  bool operator==(const DenseLayer&) const = default;
};

struct MlpModel {
  std::array<int, kLayerCount + 1> layer_dims{};
  std::array<DenseLayer, kLayerCount> layers;
  Activation activation = Activation::Relu;
  std::string schema_fingerprint;
  int state_width = 0;

  int input_width() const { return layer_dims[0]; }
  std::size_t parameter_count() const;
  bool all_finite() const;
  // Throws Error{FingerprintMismatch} unless trained against `schema`.
  void check_schema(const FeatureSchema& schema) const;
  bool operator==(const MlpModel&) const = default;
};

struct TrainConfig {
  double learning_rate = 0.01;
  int batch_size = 32;  // groups per update
  int epochs = 20;
  std::array<int, 3> hidden_dims = {64, 64, 32};
  std::uint64_t seed = 0;
  double l2 = 0.0;

  // Field-named problems; empty when valid.
  std::vector<std::string> problems() const;
  bool operator==(const TrainConfig&) const = default;
};

// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], zero biases,
// deterministic in config.seed.
MlpModel init_model(int input_dim, const TrainConfig& config,
                    std::string schema_fingerprint = {}, int state_width = 0);
MlpModel init_model(const FeatureSchema& schema, const TrainConfig& config);

// Single pre-softmax logit for one concatenated input. Throws
// Error{DimensionMismatch}.
double forward(const MlpModel& model, std::span<const double> input);
// Checks fingerprints and widths, then scores state ++ candidate.
double forward(const MlpModel& model, const FeatureVector& state,
               const FeatureVector& candidate);

// Row-wise logits of an n x input_width matrix; OpenMP over rows.
std::vector<double> forward_batch(const MlpModel& model,
                                  std::span<const double> inputs);
std::vector<double> forward_batch_serial(const MlpModel& model,
                                         std::span<const double> inputs);

// Logits for each candidate row against one shared state.
std::vector<double> group_logits(const MlpModel& model,
                                 std::span<const double> state,
                                 std::span<const double> candidates);

// Max-subtracted softmax.
std::vector<double> group_softmax(std::span<const double> logits);

struct Gradients {
  std::array<std::vector<double>, kLayerCount> weights;
  std::array<std::vector<double>, kLayerCount> bias;

  static Gradients zeros_like(const MlpModel& model);
  void set_zero();
  void add(const Gradients& other);
  void scale(double factor);
  double max_abs() const;
};

struct LossAndGradients {
  double loss = 0.0;
  Gradients gradients;
};

// -log p(actual) + l2 * sum of squared weights (biases are not penalized).
// Throws Error{DegenerateGroup} for a malformed group.
LossAndGradients loss_and_gradients(const MlpModel& model,
                                    const TrainingGroup& group, double l2);
LossAndGradients loss_and_gradients(const MlpModel& model,
                                    std::span<const TrainingExample> group,
                                    double l2);

// Mean loss and mean gradient over a batch of groups. Per-group gradients
// are summed in index order, so the parallel and serial kernels agree bit
// for bit.
LossAndGradients batch_loss_and_gradients(
    const MlpModel& model, std::span<const TrainingGroup* const> batch,
    double l2);
LossAndGradients batch_loss_and_gradients_serial(
    const MlpModel& model, std::span<const TrainingGroup* const> batch,
    double l2);

struct TrainLog {
  std::vector<double> epoch_mean_loss;
};

struct TrainResult {
  MlpModel model;
  TrainLog log;
};

// Groups are reshuffled across episodes (and networks) every epoch. Throws
// Error{NonFiniteLoss} with epoch/batch context.
TrainResult train(const Dataset& dataset, const TrainConfig& config);

struct PredictionRanking {
  struct Entry {
    HostId host;
    double probability;
  };
  std::vector<Entry> entries;  // descending probability, ascending host on ties
};

struct PredictOptions {
  // Score only hosts the held credentials can currently reach.
  bool restrict_to_reachable = false;
};

// Ranks every host not yet in the prefix. Throws Error{EmptyCandidates} when
// nothing is left, Error{FingerprintMismatch} on a schema mismatch.
PredictionRanking predict_next(const MlpModel& model,
                               std::span<const StepSnapshot> prefix,
                               const Network& network,
                               const FeatureSchema& schema,
                               const PredictOptions& options = {});

// Model file (JSON). load_model throws Error{ParseError}.
std::string save_model(const MlpModel& model);
MlpModel load_model(std::string_view document);

}  // namespace lateralsim
