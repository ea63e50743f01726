#include "json_codec.hpp"
#include "lateralsim/error.hpp"
#include "lateralsim/mlp.hpp"

namespace lateralsim {

using detail::json;

namespace {
constexpr std::string_view kModelFormat = "lateralsim-model/1";
}

std::string save_model(const MlpModel& model) {
  json layers = json::array();
  for (const DenseLayer& l : model.layers) {
    layers.push_back({{"in", l.in},
                      {"out", l.out},
                      {"weights", l.weights},
                      {"bias", l.bias}});
  }
  json j{{"format", kModelFormat},
         {"layer_dims", model.layer_dims},
         {"activation", to_string(model.activation)},
         {"schema_fingerprint", model.schema_fingerprint},
         {"state_width", model.state_width},
         {"layers", std::move(layers)}};
  return j.dump();
}

MlpModel load_model(std::string_view document) {
  const std::string ctx = "model";
  const json j = detail::parse_document(document, ctx);
  if (detail::require_as<std::string>(j, "format", ctx) != kModelFormat) {
    throw Error(ErrorCode::ParseError, ctx + ": unknown format");
  }
  MlpModel m;
  const auto dims = detail::require_as<std::vector<int>>(j, "layer_dims", ctx);
  if (dims.size() != m.layer_dims.size()) {
    throw Error(ErrorCode::ParseError,
                ctx + ": layer_dims must have " +
                    std::to_string(m.layer_dims.size()) + " entries");
  }
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (dims[i] < 1) {
      throw Error(ErrorCode::ParseError, ctx + ": layer_dims must be >= 1");
    }
    m.layer_dims[i] = dims[i];
  }
  if (m.layer_dims.back() != 1) {
    throw Error(ErrorCode::ParseError, ctx + ": output width must be 1");
  }
  if (detail::require_as<std::string>(j, "activation", ctx) != "relu") {
    throw Error(ErrorCode::ParseError, ctx + ": unsupported activation");
  }
  m.schema_fingerprint =
      detail::require_as<std::string>(j, "schema_fingerprint", ctx);
  m.state_width = detail::require_as<int>(j, "state_width", ctx);
  if (m.state_width < 0 || m.state_width > m.layer_dims[0]) {
    throw Error(ErrorCode::ParseError, ctx + ": state_width out of range");
  }
  const json& layers = detail::require(j, "layers", ctx);
  if (!layers.is_array() || layers.size() != kLayerCount) {
    throw Error(ErrorCode::ParseError,
                ctx + ": expected " + std::to_string(kLayerCount) + " layers");
  }
  for (std::size_t l = 0; l < kLayerCount; ++l) {
    const std::string lctx = ctx + " layer " + std::to_string(l);
    DenseLayer& layer = m.layers[l];
    layer.in = m.layer_dims[l];
    layer.out = m.layer_dims[l + 1];
    layer.weights =
        detail::require_as<std::vector<double>>(layers[l], "weights", lctx);
    layer.bias = detail::require_as<std::vector<double>>(layers[l], "bias", lctx);
    if (layer.weights.size() != static_cast<std::size_t>(layer.in) *
                                    static_cast<std::size_t>(layer.out) ||
        layer.bias.size() != static_cast<std::size_t>(layer.out)) {
      throw Error(ErrorCode::ParseError,
                  lctx + ": parameter count does not match layer_dims");
    }
  }
  return m;
}

}  // namespace lateralsim
