#include "lateralsim/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lateralsim/error.hpp"
#include "lateralsim/random.hpp"

namespace lateralsim {

std::string_view to_string(Activation activation) {
  switch (activation) {
    case Activation::Relu: return "relu";
  }
  return "unknown";
}

std::size_t MlpModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weights.size() + l.bias.size();
  return n;
}

bool MlpModel::all_finite() const {
  for (const auto& l : layers) {
    for (double w : l.weights) {
      if (!std::isfinite(w)) return false;
    }
    for (double b : l.bias) {
      if (!std::isfinite(b)) return false;
    }
  }
  return true;
}

void MlpModel::check_schema(const FeatureSchema& schema) const {
  if (schema.fingerprint() != schema_fingerprint) {
    throw Error(ErrorCode::FingerprintMismatch,
                "model was trained against schema " + schema_fingerprint +
                    ", not " + schema.fingerprint());
  }
  if (schema.input_width() != input_width() ||
      schema.state_width() != state_width) {
    throw Error(ErrorCode::DimensionMismatch,
                "schema widths do not match the model input");
  }
}

std::vector<std::string> TrainConfig::problems() const {
  std::vector<std::string> out;
  if (!(learning_rate > 0.0)) out.emplace_back("learning_rate must be > 0");
  if (batch_size < 1) out.emplace_back("batch_size must be >= 1");
  if (epochs < 1) out.emplace_back("epochs must be >= 1");
  for (int h : hidden_dims) {
    if (h < 1) out.emplace_back("hidden_dims must all be >= 1");
  }
  if (!(l2 >= 0.0)) out.emplace_back("l2 must be >= 0");
  return out;
}

MlpModel init_model(int input_dim, const TrainConfig& config,
                    std::string schema_fingerprint, int state_width) {
  if (input_dim < 1) {
    throw Error(ErrorCode::DimensionMismatch, "input_dim must be >= 1");
  }
  if (auto p = config.problems(); !p.empty()) {
    throw Error(ErrorCode::InvalidConfig, p.front());
  }
  MlpModel m;
  m.layer_dims = {input_dim, config.hidden_dims[0], config.hidden_dims[1],
                  config.hidden_dims[2], 1};
  m.schema_fingerprint = std::move(schema_fingerprint);
  m.state_width = std::clamp(state_width, 0, input_dim);
  Rng rng(config.seed);
  for (int l = 0; l < kLayerCount; ++l) {
    DenseLayer& layer = m.layers[static_cast<std::size_t>(l)];
    layer.in = m.layer_dims[static_cast<std::size_t>(l)];
    layer.out = m.layer_dims[static_cast<std::size_t>(l) + 1];
    const double scale = 1.0 / std::sqrt(static_cast<double>(layer.in));
    layer.weights.resize(static_cast<std::size_t>(layer.in) *
                         static_cast<std::size_t>(layer.out));
    for (double& w : layer.weights) w = (2.0 * uniform01(rng) - 1.0) * scale;
    layer.bias.assign(static_cast<std::size_t>(layer.out), 0.0);
  }
  return m;
}

MlpModel init_model(const FeatureSchema& schema, const TrainConfig& config) {
  return init_model(schema.input_width(), config, schema.fingerprint(),
                    schema.state_width());
}

namespace {

// out[j] += sum_i x[i] * W[i, j] over rows of W starting at `row0`. Zero
// inputs are skipped; one-hot inputs make this the dominant saving.
void accumulate_rows(const DenseLayer& layer, int row0,
                     std::span<const double> x, double* __restrict out) {
  const auto width = static_cast<std::size_t>(layer.out);
  const double* __restrict w =
      layer.weights.data() + static_cast<std::size_t>(row0) * width;
  for (std::size_t i = 0; i < x.size(); ++i, w += width) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    for (std::size_t j = 0; j < width; ++j) out[j] += xi * w[j];
  }
}

void relu_inplace(std::span<double> v) {
  for (double& x : v) x = x > 0.0 ? x : 0.0;
}

// First-layer pre-activation contribution of the shared state part.
std::vector<double> state_preactivation(const MlpModel& m,
                                        std::span<const double> state) {
  const DenseLayer& first = m.layers[0];
  std::vector<double> base = first.bias;
  accumulate_rows(first, 0, state, base.data());
  return base;
}

using HiddenBuffers = std::array<double*, kLayerCount - 1>;

// Finishes the forward pass of one candidate: acts[l] receives hidden layer
// l's post-ReLU output (sized layer_dims[l + 1]).
double forward_into(const MlpModel& m, const std::vector<double>& base,
                    std::span<const double> candidate, const HiddenBuffers& acts) {
  std::copy(base.begin(), base.end(), acts[0]);
  accumulate_rows(m.layers[0], m.state_width, candidate, acts[0]);
  for (std::size_t l = 0; l + 1 < kLayerCount; ++l) {
    const auto n = static_cast<std::size_t>(m.layer_dims[l + 1]);
    relu_inplace({acts[l], n});
    const DenseLayer& next = m.layers[l + 1];
    double* out = l + 2 < kLayerCount ? acts[l + 1] : nullptr;
    double logit = 0.0;
    if (!out) {
      logit = next.bias[0];
      out = &logit;
    } else {
      std::copy(next.bias.begin(), next.bias.end(), out);
    }
    accumulate_rows(next, 0, {acts[l], n}, out);
    if (l + 2 == kLayerCount) return logit;
  }
  return 0.0;
}

double forward_with_base(const MlpModel& m, const std::vector<double>& base,
                         std::span<const double> candidate) {
  std::vector<double> scratch(static_cast<std::size_t>(
      m.layer_dims[1] + m.layer_dims[2] + m.layer_dims[3]));
  const HiddenBuffers acts{
      scratch.data(), scratch.data() + m.layer_dims[1],
      scratch.data() + m.layer_dims[1] + m.layer_dims[2]};
  return forward_into(m, base, candidate, acts);
}

void check_width(const MlpModel& m, std::size_t width) {
  if (width != static_cast<std::size_t>(m.input_width())) {
    throw Error(ErrorCode::DimensionMismatch,
                "input width " + std::to_string(width) + " != model input " +
                    std::to_string(m.input_width()));
  }
}

}  // namespace

double forward(const MlpModel& model, std::span<const double> input) {
  check_width(model, input.size());
  const auto sw = static_cast<std::size_t>(model.state_width);
  return forward_with_base(model,
                           state_preactivation(model, input.first(sw)),
                           input.subspan(sw));
}

double forward(const MlpModel& model, const FeatureVector& state,
               const FeatureVector& candidate) {
  if (state.schema_fingerprint != model.schema_fingerprint ||
      candidate.schema_fingerprint != model.schema_fingerprint) {
    throw Error(ErrorCode::FingerprintMismatch,
                "feature vectors were encoded with a different schema than "
                "model " + model.schema_fingerprint);
  }
  if (state.values.size() != static_cast<std::size_t>(model.state_width)) {
    throw Error(ErrorCode::DimensionMismatch,
                "state width " + std::to_string(state.values.size()) +
                    " != model state width " +
                    std::to_string(model.state_width));
  }
  check_width(model, state.values.size() + candidate.values.size());
  return forward_with_base(model, state_preactivation(model, state.values),
                           candidate.values);
}

std::vector<double> forward_batch_serial(const MlpModel& model,
                                         std::span<const double> inputs) {
  const auto d = static_cast<std::size_t>(model.input_width());
  if (inputs.size() % d != 0) {
    throw Error(ErrorCode::DimensionMismatch,
                "batch size is not a multiple of the input width");
  }
  std::vector<double> out(inputs.size() / d);
  for (std::size_t r = 0; r < out.size(); ++r) {
    out[r] = forward(model, inputs.subspan(r * d, d));
  }
  return out;
}

std::vector<double> forward_batch(const MlpModel& model,
                                  std::span<const double> inputs) {
  const auto d = static_cast<std::size_t>(model.input_width());
  if (inputs.size() % d != 0) {
    throw Error(ErrorCode::DimensionMismatch,
                "batch size is not a multiple of the input width");
  }
  std::vector<double> out(inputs.size() / d);
  const auto n = static_cast<std::ptrdiff_t>(out.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < n; ++r) {
    const auto u = static_cast<std::size_t>(r);
    out[u] = forward(model, inputs.subspan(u * d, d));
  }
  return out;
}

std::vector<double> group_logits(const MlpModel& model,
                                 std::span<const double> state,
                                 std::span<const double> candidates) {
  if (state.size() != static_cast<std::size_t>(model.state_width)) {
    throw Error(ErrorCode::DimensionMismatch, "state width mismatch");
  }
  const auto cw =
      static_cast<std::size_t>(model.input_width() - model.state_width);
  if (cw == 0 || candidates.size() % cw != 0) {
    throw Error(ErrorCode::DimensionMismatch, "candidate width mismatch");
  }
  const std::vector<double> base = state_preactivation(model, state);
  std::vector<double> out(candidates.size() / cw);
  for (std::size_t r = 0; r < out.size(); ++r) {
    out[r] = forward_with_base(model, base, candidates.subspan(r * cw, cw));
  }
  return out;
}

std::vector<double> group_softmax(std::span<const double> logits) {
  if (logits.empty()) return {};
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - top);
    total += p[i];
  }
  for (double& x : p) x /= total;
  return p;
}

Gradients Gradients::zeros_like(const MlpModel& model) {
  Gradients g;
  for (std::size_t l = 0; l < kLayerCount; ++l) {
    g.weights[l].assign(model.layers[l].weights.size(), 0.0);
    g.bias[l].assign(model.layers[l].bias.size(), 0.0);
  }
  return g;
}

void Gradients::set_zero() {
  for (std::size_t l = 0; l < kLayerCount; ++l) {
    std::fill(weights[l].begin(), weights[l].end(), 0.0);
    std::fill(bias[l].begin(), bias[l].end(), 0.0);
  }
}

void Gradients::add(const Gradients& other) {
  for (std::size_t l = 0; l < kLayerCount; ++l) {
    for (std::size_t i = 0; i < weights[l].size(); ++i)
      weights[l][i] += other.weights[l][i];
    for (std::size_t i = 0; i < bias[l].size(); ++i)
      bias[l][i] += other.bias[l][i];
  }
}

void Gradients::scale(double factor) {
  for (std::size_t l = 0; l < kLayerCount; ++l) {
    for (double& x : weights[l]) x *= factor;
    for (double& x : bias[l]) x *= factor;
  }
}

double Gradients::max_abs() const {
  double m = 0.0;
  for (std::size_t l = 0; l < kLayerCount; ++l) {
    for (double x : weights[l]) m = std::max(m, std::abs(x));
    for (double x : bias[l]) m = std::max(m, std::abs(x));
  }
  return m;
}

namespace {

void check_group(const MlpModel& m, const TrainingGroup& g) {
  const auto cw = static_cast<std::size_t>(m.input_width() - m.state_width);
  if (g.state.size() != static_cast<std::size_t>(m.state_width) ||
      g.candidates.size() != cw * g.multiplicity.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                "group " + std::to_string(g.id.episode) + "/" +
                    std::to_string(g.id.step) + " does not match model widths");
  }
  if (g.multiplicity.empty() || g.positive < 0 || g.positive >= g.rows() ||
      std::any_of(g.multiplicity.begin(), g.multiplicity.end(),
                  [](int m) { return m < 1; })) {
    throw Error(ErrorCode::DegenerateGroup,
                "group " + std::to_string(g.id.episode) + "/" +
                    std::to_string(g.id.step) + " has no valid positive row");
  }
}

// Per-thread scratch for accumulate_group: hidden activations of every row.
struct GroupWorkspace {
  std::array<std::vector<double>, kLayerCount - 1> acts;
  std::vector<double> logits, mass, delta, below, state_delta;
};

// Weights of layers 1..3 stored out x in, so the backward pass can push a
// delta down with contiguous axpy updates.
struct TransposedWeights {
  std::array<std::vector<double>, kLayerCount> weights;

  explicit TransposedWeights(const MlpModel& m) {
    for (std::size_t l = 1; l < kLayerCount; ++l) {
      const DenseLayer& layer = m.layers[l];
      const auto in = static_cast<std::size_t>(layer.in);
      const auto out = static_cast<std::size_t>(layer.out);
      weights[l].resize(in * out);
      for (std::size_t i = 0; i < in; ++i) {
        for (std::size_t j = 0; j < out; ++j) {
          weights[l][j * in + i] = layer.weights[i * out + j];
        }
      }
    }
  }
};

// Adds this group's cross-entropy gradient into `grad`; returns its loss.
double accumulate_group(const MlpModel& m, const TransposedWeights& tw,
                        const TrainingGroup& g, Gradients& grad) {
  check_group(m, g);
  thread_local GroupWorkspace ws;
  const auto cw = static_cast<std::size_t>(m.input_width() - m.state_width);
  const std::size_t rows = g.multiplicity.size();
  const std::vector<double> base = state_preactivation(m, g.state);

  std::array<std::size_t, kLayerCount - 1> width{};
  for (std::size_t l = 0; l + 1 < kLayerCount; ++l) {
    width[l] = static_cast<std::size_t>(m.layer_dims[l + 1]);
    ws.acts[l].resize(rows * width[l]);
  }
  ws.logits.resize(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    HiddenBuffers acts{};
    for (std::size_t l = 0; l + 1 < kLayerCount; ++l) {
      acts[l] = ws.acts[l].data() + r * width[l];
    }
    ws.logits[r] = forward_into(
        m, base, std::span<const double>(g.candidates).subspan(r * cw, cw),
        acts);
  }

  // Softmax over hosts: row r stands for multiplicity[r] identical hosts.
  const double top = *std::max_element(ws.logits.begin(), ws.logits.end());
  ws.mass.resize(rows);
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    ws.mass[r] = g.multiplicity[r] * std::exp(ws.logits[r] - top);
    total += ws.mass[r];
  }
  const auto pos = static_cast<std::size_t>(g.positive);
  const double loss = -(ws.logits[pos] - top) + std::log(total);

  ws.state_delta.assign(width[0], 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    ws.delta.assign(1, ws.mass[r] / total - (r == pos ? 1.0 : 0.0));
    // Layers 3..1. An inactive ReLU input contributes neither a weight
    // gradient nor a delta below, so those rows are skipped.
    for (std::size_t l = kLayerCount - 1; l >= 1; --l) {
      const DenseLayer& layer = m.layers[l];
      const double* input = ws.acts[l - 1].data() + r * width[l - 1];
      const auto out = static_cast<std::size_t>(layer.out);
      const double* __restrict delta = ws.delta.data();
      for (std::size_t j = 0; j < out; ++j) grad.bias[l][j] += delta[j];
      const std::size_t in = width[l - 1];
      for (std::size_t i = 0; i < in; ++i) {
        const double xi = input[i];
        if (xi == 0.0) continue;
        double* __restrict gwi = grad.weights[l].data() + i * out;
        for (std::size_t j = 0; j < out; ++j) gwi[j] += xi * delta[j];
      }
      ws.below.assign(in, 0.0);
      double* __restrict below = ws.below.data();
      const double* wt = tw.weights[l].data();
      for (std::size_t j = 0; j < out; ++j) {
        const double dj = delta[j];
        if (dj == 0.0) continue;
        const double* row = wt + j * in;
        for (std::size_t i = 0; i < in; ++i) below[i] += dj * row[i];
      }
      for (std::size_t i = 0; i < in; ++i) {
        if (input[i] == 0.0) below[i] = 0.0;
      }
      ws.delta.swap(ws.below);
    }
    // First layer: candidate rows now, state rows once for the whole group.
    const std::size_t out = width[0];
    const double* delta = ws.delta.data();
    for (std::size_t j = 0; j < out; ++j) {
      grad.bias[0][j] += delta[j];
      ws.state_delta[j] += delta[j];
    }
    const double* cand = g.candidates.data() + r * cw;
    for (std::size_t i = 0; i < cw; ++i) {
      if (cand[i] == 0.0) continue;
      double* gwi = grad.weights[0].data() +
                    (static_cast<std::size_t>(m.state_width) + i) * out;
      for (std::size_t j = 0; j < out; ++j) gwi[j] += cand[i] * delta[j];
    }
  }
  for (std::size_t i = 0; i < g.state.size(); ++i) {
    if (g.state[i] == 0.0) continue;
    double* gwi = grad.weights[0].data() + i * width[0];
    for (std::size_t j = 0; j < width[0]; ++j) {
      gwi[j] += g.state[i] * ws.state_delta[j];
    }
  }
  return loss;
}

double l2_penalty(const MlpModel& m, double l2) {
  if (l2 == 0.0) return 0.0;
  double s = 0.0;
  for (const auto& layer : m.layers) {
    for (double w : layer.weights) s += w * w;
  }
  return l2 * s;
}

void add_l2_gradient(const MlpModel& m, double l2, Gradients& grad) {
  if (l2 == 0.0) return;
  for (std::size_t l = 0; l < kLayerCount; ++l) {
    const auto& w = m.layers[l].weights;
    for (std::size_t i = 0; i < w.size(); ++i) grad.weights[l][i] += 2.0 * l2 * w[i];
  }
}

LossAndGradients finish_batch(const MlpModel& m, double loss_sum,
                              Gradients grad, std::size_t n, double l2) {
  const double inv = 1.0 / static_cast<double>(n);
  grad.scale(inv);
  add_l2_gradient(m, l2, grad);
  return {loss_sum * inv + l2_penalty(m, l2), std::move(grad)};
}

}  // namespace

LossAndGradients loss_and_gradients(const MlpModel& model,
                                    const TrainingGroup& group, double l2) {
  Gradients grad = Gradients::zeros_like(model);
  const double loss = accumulate_group(model, TransposedWeights(model), group, grad);
  add_l2_gradient(model, l2, grad);
  return {loss + l2_penalty(model, l2), std::move(grad)};
}

LossAndGradients loss_and_gradients(const MlpModel& model,
                                    std::span<const TrainingExample> group,
                                    double l2) {
  return loss_and_gradients(model, compact_group(group), l2);
}

LossAndGradients batch_loss_and_gradients_serial(
    const MlpModel& model, std::span<const TrainingGroup* const> batch,
    double l2) {
  if (batch.empty()) {
    throw Error(ErrorCode::DegenerateGroup, "empty batch");
  }
  const TransposedWeights tw(model);
  Gradients total = Gradients::zeros_like(model);
  Gradients one = Gradients::zeros_like(model);
  double loss_sum = 0.0;
  for (const TrainingGroup* g : batch) {
    one.set_zero();
    loss_sum += accumulate_group(model, tw, *g, one);
    total.add(one);
  }
  return finish_batch(model, loss_sum, std::move(total), batch.size(), l2);
}

LossAndGradients batch_loss_and_gradients(
    const MlpModel& model, std::span<const TrainingGroup* const> batch,
    double l2) {
  if (batch.empty()) {
    throw Error(ErrorCode::DegenerateGroup, "empty batch");
  }
  const TransposedWeights tw(model);
  const auto n = static_cast<std::ptrdiff_t>(batch.size());
  std::vector<Gradients> parts(batch.size());
  std::vector<double> losses(batch.size());
  std::vector<std::exception_ptr> errors(batch.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    try {
      parts[u] = Gradients::zeros_like(model);
      losses[u] = accumulate_group(model, tw, *batch[u], parts[u]);
    } catch (...) {
      errors[u] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  Gradients total = Gradients::zeros_like(model);
  double loss_sum = 0.0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    loss_sum += losses[i];
    total.add(parts[i]);
  }
  return finish_batch(model, loss_sum, std::move(total), batch.size(), l2);
}

TrainResult train(const Dataset& dataset, const TrainConfig& config) {
  if (auto p = config.problems(); !p.empty()) {
    throw Error(ErrorCode::InvalidConfig, p.front());
  }
  if (dataset.groups.empty()) {
    throw Error(ErrorCode::DegenerateGroup, "training dataset is empty");
  }
  TrainResult result{init_model(dataset.schema, config), {}};
  MlpModel& model = result.model;

  std::vector<std::size_t> order(dataset.groups.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<const TrainingGroup*> batch;
  const auto batch_size = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng(mix_seed(config.seed, static_cast<std::uint64_t>(epoch) + 1));
    shuffle(order, rng);
    double epoch_loss = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size();
         start += batch_size, ++batch_index) {
      batch.clear();
      for (std::size_t i = start; i < std::min(order.size(), start + batch_size);
           ++i) {
        batch.push_back(&dataset.groups[order[i]]);
      }
      LossAndGradients lg = batch_loss_and_gradients(model, batch, config.l2);
      if (!std::isfinite(lg.loss)) {
        throw Error(ErrorCode::NonFiniteLoss,
                    "epoch " + std::to_string(epoch) + " batch " +
                        std::to_string(batch_index) + ": loss is not finite");
      }
      epoch_loss += lg.loss * static_cast<double>(batch.size());
      for (std::size_t l = 0; l < kLayerCount; ++l) {
        auto& w = model.layers[l].weights;
        auto& b = model.layers[l].bias;
        const auto& gw = lg.gradients.weights[l];
        const auto& gb = lg.gradients.bias[l];
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= config.learning_rate * gw[i];
        for (std::size_t i = 0; i < b.size(); ++i) b[i] -= config.learning_rate * gb[i];
      }
    }
    result.log.epoch_mean_loss.push_back(
        epoch_loss / static_cast<double>(order.size()));
  }
  return result;
}

PredictionRanking predict_next(const MlpModel& model,
                               std::span<const StepSnapshot> prefix,
                               const Network& network,
                               const FeatureSchema& schema,
                               const PredictOptions& options) {
  model.check_schema(schema);
  const CandidateSet set = encode_candidates(prefix, network, schema,
                                             options.restrict_to_reachable);
  if (set.hosts.empty()) {
    throw Error(ErrorCode::EmptyCandidates, "no unvisited candidate hosts");
  }
  const std::vector<double> logits = group_logits(model, set.state, set.rows);
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> weight(logits.size());
  double total = 0.0;
  for (std::size_t r = 0; r < logits.size(); ++r) {
    weight[r] = std::exp(logits[r] - top);
    total += set.multiplicity[r] * weight[r];
  }
  PredictionRanking ranking;
  ranking.entries.reserve(set.hosts.size());
  for (std::size_t i = 0; i < set.hosts.size(); ++i) {
    ranking.entries.push_back(
        {set.hosts[i],
         weight[static_cast<std::size_t>(set.host_row[i])] / total});
  }
  std::stable_sort(ranking.entries.begin(), ranking.entries.end(),
                   [](const auto& a, const auto& b) {
                     if (a.probability != b.probability)
                       return a.probability > b.probability;
                     return a.host < b.host;
                   });
  return ranking;
}

}  // namespace lateralsim
