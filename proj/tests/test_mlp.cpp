#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "helpers.hpp"
#include "lateralsim/error.hpp"
#include "lateralsim/mlp.hpp"
#include "oracles.hpp"

using namespace lateralsim;

namespace {

TrainConfig tiny_config(std::uint64_t seed = 0) {
  TrainConfig c;
  c.hidden_dims = {8, 8, 8};
  c.seed = seed;
  return c;
}

MlpModel zero_model(int input_dim) {
  MlpModel m = init_model(input_dim, tiny_config());
  for (auto& layer : m.layers) {
    std::fill(layer.weights.begin(), layer.weights.end(), 0.0);
  }
  return m;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::IoError;
}

std::vector<double> random_inputs(int n, int width, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> x(static_cast<std::size_t>(n * width));
  for (double& v : x) v = uniform01(rng) < 0.5 ? 0.0 : uniform01(rng);
  return x;
}

double squared_weights(const MlpModel& m) {
  double s = 0.0;
  for (const auto& layer : m.layers) {
    for (double w : layer.weights) s += w * w;
  }
  return s;
}

// The same group with every row repeated `multiplicity` times.
TrainingGroup expand(const TrainingGroup& g, int width) {
  TrainingGroup out;
  out.id = g.id;
  out.state = g.state;
  for (int r = 0; r < g.rows(); ++r) {
    for (int k = 0; k < g.multiplicity[static_cast<std::size_t>(r)]; ++k) {
      if (r == g.positive && k == 0) out.positive = out.rows();
      const auto row = g.row(r, width);
      out.candidates.insert(out.candidates.end(), row.begin(), row.end());
      out.multiplicity.push_back(1);
    }
  }
  return out;
}

std::vector<Episode> toy_corpus(int n, std::uint64_t seed) {
  return run_campaigns(testutil::small_config(), HeuristicWeights{}, n, seed);
}

Dataset toy_dataset(const std::vector<Episode>& eps, bool user = true) {
  std::vector<Network> nets;
  for (const auto& e : eps) nets.push_back(network_for(e));
  return build_dataset(eps, nets,
                       FeatureSchema::for_config(eps[0].network.config, user));
}

}  // namespace

TEST_CASE("init_model") {
  const MlpModel a = init_model(10, tiny_config(3));
  CHECK(a == init_model(10, tiny_config(3)));
  CHECK_FALSE(a == init_model(10, tiny_config(4)));
  CHECK(a.layer_dims == std::array<int, 5>{10, 8, 8, 8, 1});
  const std::array<std::pair<int, int>, 4> shapes = {{{10, 8}, {8, 8}, {8, 8}, {8, 1}}};
  for (std::size_t l = 0; l < kLayerCount; ++l) {
    CHECK(a.layers[l].in == shapes[l].first);
    CHECK(a.layers[l].out == shapes[l].second);
    CHECK(a.layers[l].weights.size() ==
          static_cast<std::size_t>(shapes[l].first * shapes[l].second));
    CHECK(std::all_of(a.layers[l].bias.begin(), a.layers[l].bias.end(),
                      [](double b) { return b == 0.0; }));
    const double bound = 1.0 / std::sqrt(static_cast<double>(shapes[l].first));
    CHECK(std::all_of(a.layers[l].weights.begin(), a.layers[l].weights.end(),
                      [bound](double w) { return std::abs(w) <= bound; }));
  }
  CHECK(a.parameter_count() == 10 * 8 + 8 + 2 * (8 * 8 + 8) + 8 + 1);
  CHECK(a.all_finite());

  TrainConfig wide;
  wide.hidden_dims = {400, 4, 4};
  const MlpModel big = init_model(100, wide);
  const auto& w = big.layers[0].weights;
  const double mean = std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(w.size());
  double var = 0.0;
  for (double x : w) var += (x - mean) * (x - mean);
  var /= static_cast<double>(w.size());
  CHECK(std::abs(mean) < 0.005);
  // Uniform on [-b, b] has variance b^2 / 3 with b = 0.1.
  CHECK(var == doctest::Approx(0.01 / 3.0).epsilon(0.03));

  TrainConfig bad;
  bad.hidden_dims = {0, 4, 4};
  CHECK(code_of([&] { init_model(5, bad); }) == ErrorCode::InvalidConfig);
  CHECK(!TrainConfig{0.0, 0, 0, {1, 1, 1}, 0, -1.0}.problems().empty());
  CHECK(TrainConfig{}.problems().empty());
}

TEST_CASE("forward") {
  SUBCASE("zero-weight model scores 0") {
    const MlpModel m = zero_model(6);
    for (const auto& x : {std::vector<double>{0, 0, 0, 0, 0, 0},
                          std::vector<double>{1, 0.5, 1, 0, 1, 1}}) {
      CHECK(forward(m, x) == 0.0);
    }
  }
  SUBCASE("perturbing an input moves the output") {
    MlpModel m = init_model(4, tiny_config(1));
    for (auto& layer : m.layers) {
      for (double& w : layer.weights) w = std::abs(w) + 0.01;
    }
    const std::vector<double> x = {0.2, 0.4, 0.0, 1.0};
    for (std::size_t i = 0; i < x.size(); ++i) {
      auto y = x;
      y[i] += 0.1;
      CHECK(forward(m, y) != forward(m, x));
    }
    for (double& w : m.layers[0].weights) w = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      auto y = x;
      y[i] += 0.1;
      CHECK(forward(m, y) == forward(m, x));
    }
  }
  SUBCASE("batch forward equals single forwards") {
    const MlpModel m = init_model(12, tiny_config(2), "", 5);
    const auto x = random_inputs(300, 12, 8);
    const auto batch = forward_batch(m, x);
    REQUIRE(batch.size() == 300);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const double single = forward(m, std::span(x).subspan(i * 12, 12));
      CHECK(std::abs(batch[i] - single) <= 1e-12);
    }
    CHECK(batch == forward_batch_serial(m, x));
  }
  SUBCASE("group logits equal forwards of the concatenation") {
    const MlpModel m = init_model(12, tiny_config(2), "", 5);
    const auto state = random_inputs(1, 5, 3);
    const auto cands = random_inputs(40, 7, 4);
    const auto logits = group_logits(m, state, cands);
    for (std::size_t r = 0; r < 40; ++r) {
      std::vector<double> x = state;
      x.insert(x.end(), cands.begin() + static_cast<long>(r * 7),
               cands.begin() + static_cast<long>(r * 7 + 7));
      CHECK(std::abs(logits[r] - forward(m, x)) <= 1e-12);
    }
  }
  SUBCASE("dimension and fingerprint checks") {
    const FeatureSchema schema(3, 2, true);
    const MlpModel m = init_model(schema, tiny_config());
    CHECK(code_of([&] { forward(m, std::vector<double>(3)); }) ==
          ErrorCode::DimensionMismatch);
    FeatureVector s{std::vector<double>(static_cast<std::size_t>(schema.state_width())),
                    schema.fingerprint()};
    FeatureVector c{std::vector<double>(static_cast<std::size_t>(schema.candidate_width())),
                    schema.fingerprint()};
    CHECK(std::isfinite(forward(m, s, c)));
    c.schema_fingerprint = "other";
    CHECK(code_of([&] { forward(m, s, c); }) == ErrorCode::FingerprintMismatch);
  }
}

TEST_CASE("group_softmax") {
  CHECK(group_softmax(std::vector<double>{0, 0}) == std::vector<double>{0.5, 0.5});
  for (double x : {-3.0, 0.0, 7.5, 1e6}) {
    const auto p = group_softmax(std::vector<double>(4, x));
    for (double v : p) CHECK(v == 0.25);
  }
  const auto big = group_softmax(std::vector<double>{1000, 0});
  CHECK(big[0] == doctest::Approx(1.0));
  CHECK(big[1] < 1e-300);
  CHECK(std::isfinite(big[1]));

  Rng rng(5);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> z(1 + uniform_index(rng, 50));
    for (double& v : z) v = 40.0 * uniform01(rng) - 20.0;
    const auto p = group_softmax(z);
    CHECK(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) <= 1e-12);
    auto shifted = z;
    for (double& v : shifted) v += 123.0;
    const auto q = group_softmax(shifted);
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(std::abs(p[i] - q[i]) <= 1e-12);
  }
}

TEST_CASE("gradient oracle") {
  SUBCASE("ten-parameter model") {
    TrainConfig c;
    c.hidden_dims = {1, 1, 1};
    MlpModel m = init_model(3, c, "", 1);
    CHECK(m.parameter_count() == 10);
    for (auto& layer : m.layers) {
      for (double& w : layer.weights) w = std::abs(w) + 0.2;
      layer.bias[0] = 0.1;
    }
    TrainingGroup g;
    g.state = {0.7};
    g.candidates = {1.0, 0.0, 0.3, 0.9, 0.5, 0.5};
    g.multiplicity = {1, 2, 1};
    g.positive = 1;
    CHECK(oracle::max_gradient_relative_error(m, g, 0.0) < 1e-4);
    CHECK(oracle::max_gradient_relative_error(m, g, 0.01) < 1e-4);
  }
  SUBCASE("100 random small models") {
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 100; ++s) {
      const auto p = oracle::random_gradient_problem(s);
      worst = std::max(worst, oracle::max_gradient_relative_error(p.model, p.group, p.l2));
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("loss values") {
  const MlpModel m = init_model(5, tiny_config(7), "", 2);
  SUBCASE("group of one host costs only the penalty") {
    TrainingGroup g{{}, {0.3, 0.1}, {1, 0, 1}, {1}, 0};
    CHECK(loss_and_gradients(m, g, 0.0).loss == 0.0);
    CHECK(loss_and_gradients(m, g, 0.01).loss ==
          doctest::Approx(0.01 * squared_weights(m)).epsilon(1e-12));
  }
  SUBCASE("uniform logits cost log g") {
    MlpModel flat = m;
    std::fill(flat.layers[3].weights.begin(), flat.layers[3].weights.end(), 0.0);
    flat.layers[3].bias[0] = 0.7;
    TrainingGroup g{{}, {0.3, 0.1}, random_inputs(4, 3, 1), {2, 1, 3, 1}, 2};
    CHECK(loss_and_gradients(flat, g, 0.0).loss == doctest::Approx(std::log(7.0)));
    CHECK(loss_and_gradients(flat, g, 0.5).loss ==
          doctest::Approx(std::log(7.0) + 0.5 * squared_weights(flat)));
  }
  SUBCASE("multiplicities match the expanded group") {
    for (std::uint64_t s = 0; s < 30; ++s) {
      const auto p = oracle::random_gradient_problem(s);
      const int width = p.model.input_width() - p.model.state_width;
      const auto a = loss_and_gradients(p.model, p.group, p.l2);
      const auto b = loss_and_gradients(p.model, expand(p.group, width), p.l2);
      CHECK(std::abs(a.loss - b.loss) <= 1e-12);
      Gradients diff = a.gradients;
      Gradients neg = b.gradients;
      neg.scale(-1.0);
      diff.add(neg);
      CHECK(diff.max_abs() <= 1e-12);
    }
  }
  SUBCASE("example spans agree with compacted groups") {
    const auto eps = toy_corpus(3, 2);
    const Network net = network_for(eps[0]);
    const FeatureSchema schema = FeatureSchema::for_config(net.config, true);
    const MlpModel model = init_model(schema, tiny_config(1));
    const auto ex = build_examples(eps[0], net, schema);
    const auto groups = build_groups(eps[0], net, schema);
    std::size_t begin = 0;
    for (const TrainingGroup& g : groups) {
      std::size_t end = begin;
      while (end < ex.size() && ex[end].group == g.id) ++end;
      const auto a = loss_and_gradients(model, std::span(ex).subspan(begin, end - begin), 0.0);
      CHECK(a.loss == loss_and_gradients(model, g, 0.0).loss);
      begin = end;
    }
  }
  SUBCASE("malformed groups") {
    TrainingGroup g{{}, {0.3, 0.1}, {1, 0, 1}, {1}, 1};
    CHECK(code_of([&] { loss_and_gradients(m, g, 0.0); }) == ErrorCode::DegenerateGroup);
    g.positive = 0;
    g.candidates.pop_back();
    CHECK_THROWS_AS(loss_and_gradients(m, g, 0.0), Error);
  }
}

TEST_CASE("parallel batch gradient equals the serial reference bit for bit") {
  const Dataset ds = toy_dataset(toy_corpus(20, 3));
  const MlpModel m = init_model(ds.schema, tiny_config(1));
  std::vector<const TrainingGroup*> batch;
  for (const auto& g : ds.groups) batch.push_back(&g);
  const auto a = batch_loss_and_gradients(m, batch, 0.01);
  const auto b = batch_loss_and_gradients_serial(m, batch, 0.01);
  CHECK(a.loss == b.loss);
  for (std::size_t l = 0; l < kLayerCount; ++l) {
    CHECK(a.gradients.weights[l] == b.gradients.weights[l]);
    CHECK(a.gradients.bias[l] == b.gradients.bias[l]);
  }
}

TEST_CASE("training") {
  SUBCASE("loss falls on a 50-episode corpus") {
    const Dataset ds = toy_dataset(toy_corpus(50, 4));
    TrainConfig c = tiny_config(0);
    c.epochs = 8;
    const TrainResult r = train(ds, c);
    REQUIRE(r.log.epoch_mean_loss.size() == 8);
    CHECK(r.log.epoch_mean_loss.back() < r.log.epoch_mean_loss.front());
    CHECK(r.model.all_finite());
    CHECK(r.model.schema_fingerprint == ds.schema.fingerprint());
    CHECK(r.model.state_width == ds.schema.state_width());
    const TrainResult again = train(ds, c);
    CHECK(again.model == r.model);
    CHECK(again.log.epoch_mean_loss == r.log.epoch_mean_loss);
  }
  SUBCASE("one group is learned") {
    // A group whose actual host has a metadata profile of its own, so its
    // probability is not capped by indistinguishable twins.
    Dataset ds = toy_dataset(toy_corpus(4, 5));
    const auto it = std::find_if(ds.groups.begin(), ds.groups.end(), [](const auto& g) {
      return g.multiplicity[static_cast<std::size_t>(g.positive)] == 1;
    });
    REQUIRE(it != ds.groups.end());
    ds.groups = {*it};
    TrainConfig c = tiny_config(0);
    c.learning_rate = 0.1;
    c.epochs = 400;
    const TrainResult r = train(ds, c);
    const TrainingGroup& g = ds.groups[0];
    const auto z = group_logits(r.model, g.state, g.candidates);
    const double top = *std::max_element(z.begin(), z.end());
    double total = 0.0;
    for (int i = 0; i < g.rows(); ++i) {
      total += g.multiplicity[static_cast<std::size_t>(i)] * std::exp(z[static_cast<std::size_t>(i)] - top);
    }
    const double p = std::exp(z[static_cast<std::size_t>(g.positive)] - top) / total;
    CHECK(g.multiplicity[static_cast<std::size_t>(g.positive)] == 1);
    CHECK(p > 0.99);
  }
  SUBCASE("non-finite loss aborts with context") {
    Dataset ds = toy_dataset(toy_corpus(3, 6));
    std::fill(ds.groups[0].candidates.begin(), ds.groups[0].candidates.end(),
              std::numeric_limits<double>::max());
    TrainConfig c = tiny_config(0);
    c.batch_size = 1000;
    try {
      train(ds, c);
      FAIL("expected NonFiniteLoss");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NonFiniteLoss);
      const std::string what = e.what();
      CHECK(what.find("epoch ") != std::string::npos);
      CHECK(what.find(" batch ") != std::string::npos);
    }
  }
}

TEST_CASE("predict_next") {
  SUBCASE("two hosts") {
    const Network net = testutil::build_network(1, 1, {{0}, {0}}, {{0, {0}, {0, 1}}});
    const FeatureSchema schema = FeatureSchema::for_config(net.config, true);
    const Episode ep = run_episode(net, 0, 0, 1, HeuristicWeights{}, 1);
    const MlpModel m = init_model(schema, tiny_config(2));
    const auto r = predict_next(m, std::span(ep.steps).first(1), net, schema);
    REQUIRE(r.entries.size() == 1);
    CHECK(r.entries[0].host == 1);
    CHECK(r.entries[0].probability == 1.0);
    CHECK(code_of([&] { predict_next(m, ep.steps, net, schema); }) ==
          ErrorCode::EmptyCandidates);
  }
  SUBCASE("ranking over a 1000-host network") {
    GenerationConfig cfg = testutil::small_config(1000, 1000, 10);
    const Episode ep = simulate_campaign_episode(cfg, HeuristicWeights{}, 3, 0);
    const Network net = network_for(ep);
    const FeatureSchema schema = FeatureSchema::for_config(cfg, true);
    const MlpModel m = init_model(schema, tiny_config(4));
    const auto prefix = std::span(ep.steps).first(1);
    const auto r = predict_next(m, prefix, net, schema);
    CHECK(r.entries.size() == 999);
    double total = 0.0;
    for (const auto& e : r.entries) total += e.probability;
    CHECK(std::abs(total - 1.0) <= 1e-9);
    for (std::size_t i = 1; i < r.entries.size(); ++i) {
      const auto& a = r.entries[i - 1];
      const auto& b = r.entries[i];
      CHECK((a.probability > b.probability ||
             (a.probability == b.probability && a.host < b.host)));
    }
    // Hosts with equal metadata receive exactly equal probabilities.
    std::map<HostId, double> prob;
    for (const auto& e : r.entries) prob[e.host] = e.probability;
    const auto ctx = make_prefix_context(prefix, net);
    std::map<std::vector<double>, double> by_vector;
    for (const auto& [host, p] : prob) {
      const auto v = encode_candidate(net.host(host), ctx, schema).values;
      const auto [it, inserted] = by_vector.emplace(v, p);
      if (!inserted) CHECK(it->second == p);
    }
    CHECK(by_vector.size() < prob.size());
    // Logits straight from forward() give the same probabilities.
    const auto state = encode_state(prefix, net, schema);
    std::vector<double> z;
    std::vector<HostId> hosts;
    for (const auto& [host, p] : prob) {
      hosts.push_back(host);
      z.push_back(forward(m, state, encode_candidate(net.host(host), ctx, schema)));
    }
    const auto p = group_softmax(z);
    for (std::size_t i = 0; i < hosts.size(); ++i) {
      CHECK(std::abs(p[i] - prob[hosts[i]]) <= 1e-12);
    }
  }
  SUBCASE("ablation model against the full schema") {
    const Episode ep = toy_corpus(1, 7)[0];
    const Network net = network_for(ep);
    const MlpModel m =
        init_model(FeatureSchema::for_config(net.config, false), tiny_config(1));
    const FeatureSchema full = FeatureSchema::for_config(net.config, true);
    CHECK(code_of([&] { predict_next(m, std::span(ep.steps).first(1), net, full); }) ==
          ErrorCode::FingerprintMismatch);
  }
}

TEST_CASE("permuting candidates permutes the logits") {
  const MlpModel m = init_model(9, tiny_config(3), "", 4);
  const auto state = random_inputs(1, 4, 1);
  const auto cands = random_inputs(30, 5, 2);
  const auto z = group_logits(m, state, cands);
  std::vector<int> order(30);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(9);
  shuffle(order, rng);
  std::vector<double> permuted;
  for (int i : order) {
    permuted.insert(permuted.end(), cands.begin() + i * 5, cands.begin() + i * 5 + 5);
  }
  const auto zp = group_logits(m, state, permuted);
  for (std::size_t i = 0; i < order.size(); ++i) {
    CHECK(zp[i] == z[static_cast<std::size_t>(order[i])]);
  }
}

TEST_CASE("model file") {
  const FeatureSchema schema(4, 3, true);
  MlpModel m = init_model(schema, tiny_config(11));
  m.layers[1].bias[2] = 1.0 / 3.0;
  const std::string text = save_model(m);
  const MlpModel back = load_model(text);
  CHECK(back == m);
  const auto x = random_inputs(50, schema.input_width(), 3);
  CHECK(forward_batch_serial(back, x) == forward_batch_serial(m, x));
  CHECK(code_of([&] { load_model(text.substr(0, text.size() / 2)); }) ==
        ErrorCode::ParseError);
  CHECK(code_of([&] { load_model("{}"); }) == ErrorCode::ParseError);
  std::string wrong = text;
  wrong.replace(wrong.find("relu"), 4, "tanh");
  CHECK(code_of([&] { load_model(wrong); }) == ErrorCode::ParseError);
  CHECK(code_of([&] { m.check_schema(FeatureSchema(4, 3, false)); }) ==
        ErrorCode::FingerprintMismatch);
}
