#include "lateralsim/features.hpp"

#include <algorithm>
#include <exception>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "lateralsim/error.hpp"
#include "lateralsim/hash.hpp"

namespace lateralsim {

namespace {

void append_block(std::vector<FeatureBlock>& blocks, int& width,
                  std::string name, int block_width, bool user_info = false) {
  blocks.push_back({std::move(name), width, block_width, user_info});
  width += block_width;
}

const FeatureBlock& find_block(const std::vector<FeatureBlock>& blocks,
                               std::string_view name) {
  for (const auto& b : blocks) {
    if (b.name == name) return b;
  }
  throw std::out_of_range("no feature block named " + std::string(name));
}

}  // namespace

FeatureSchema::FeatureSchema(int n_subnets, int n_privilege_levels,
                             bool include_user_features,
                             bool include_type_cross)
    : n_subnets_(n_subnets),
      n_privilege_levels_(n_privilege_levels),
      include_user_features_(include_user_features),
      include_type_cross_(include_type_cross) {
  if (n_subnets < 1 || n_privilege_levels < 1) {
    throw Error(ErrorCode::InvalidConfig,
                "feature schema needs at least one subnet and privilege level");
  }
  const int s = n_subnets;
  const int p = n_privilege_levels;
  const int t = kHostTypeCount;

  append_block(state_, state_width_, "subnets", s);
  append_block(state_, state_width_, "host_privileges", p);
  append_block(state_, state_width_, "host_types", t);
  append_block(state_, state_width_, "subnet_x_privilege", s * p);
  if (include_type_cross) {
    append_block(state_, state_width_, "privilege_x_type", p * t);
  }
  if (include_user_features) {
    append_block(state_, state_width_, "credential_privileges", p, true);
    append_block(state_, state_width_, "credential_subnets", s, true);
    append_block(state_, state_width_, "credential_count", 1, true);
  }
  append_block(state_, state_width_, "compromised_count", 1);

  append_block(candidate_, candidate_width_, "subnet", s);
  append_block(candidate_, candidate_width_, "privilege", p);
  append_block(candidate_, candidate_width_, "type", t);
  append_block(candidate_, candidate_width_, "subnet_explored", 1);
  if (include_user_features) {
    append_block(candidate_, candidate_width_, "accessible", 1, true);
  }

  std::ostringstream canon;
  canon << "lateralsim-features/1|" << s << '|' << p << '|' << t << '|'
        << include_user_features << '|' << include_type_cross;
  for (const auto* blocks : {&state_, &candidate_}) {
    canon << "||";
    for (const auto& b : *blocks) {
      canon << b.name << ':' << b.offset << ':' << b.width << ':'
            << b.user_info << ';';
    }
  }
  fingerprint_ = to_hex(fnv1a(canon.str()));
}

FeatureSchema FeatureSchema::for_config(const GenerationConfig& config,
                                        bool include_user_features,
                                        bool include_type_cross) {
  return FeatureSchema(config.n_subnets, config.privilege_levels,
                       include_user_features, include_type_cross);
}

const FeatureBlock& FeatureSchema::state_block(std::string_view name) const {
  return find_block(state_, name);
}

const FeatureBlock& FeatureSchema::candidate_block(
    std::string_view name) const {
  return find_block(candidate_, name);
}

void FeatureSchema::check_network(const Network& network) const {
  if (static_cast<int>(network.subnets.size()) > n_subnets_ ||
      network.privilege_levels() > n_privilege_levels_) {
    throw Error(ErrorCode::SchemaMismatch,
                "network has " + std::to_string(network.subnets.size()) +
                    " subnets / " +
                    std::to_string(network.privilege_levels()) +
                    " privilege levels; schema allows " +
                    std::to_string(n_subnets_) + " / " +
                    std::to_string(n_privilege_levels_));
  }
}

PrefixContext make_prefix_context(std::span<const StepSnapshot> prefix,
                                  const Network& network) {
  PrefixContext ctx;
  ctx.compromised.assign(network.hosts.size(), 0);
  ctx.explored.assign(network.subnets.size(), 0);
  for (const StepSnapshot& s : prefix) {
    ctx.compromised[static_cast<std::size_t>(s.host)] = 1;
    ctx.explored[static_cast<std::size_t>(s.subnet)] = 1;
  }
  if (!prefix.empty()) {
    ctx.reach = subnet_reach(prefix.back().credentials, network);
  } else {
    ctx.reach.assign(network.subnets.size(), -1);
  }
  return ctx;
}

FeatureVector encode_state(std::span<const StepSnapshot> prefix,
                           const Network& network,
                           const FeatureSchema& schema) {
  schema.check_network(network);
  if (prefix.empty()) {
    throw Error(ErrorCode::DimensionMismatch, "state prefix must be non-empty");
  }
  FeatureVector fv;
  fv.schema_fingerprint = schema.fingerprint();
  fv.values.assign(static_cast<std::size_t>(schema.state_width()), 0.0);
  auto set = [&fv](const FeatureBlock& b, int index) {
    fv.values[static_cast<std::size_t>(b.offset + index)] = 1.0;
  };
  const int p = schema.n_privilege_levels();
  const auto& subnets = schema.state_block("subnets");
  const auto& privileges = schema.state_block("host_privileges");
  const auto& types = schema.state_block("host_types");
  const auto& cross = schema.state_block("subnet_x_privilege");
  for (const StepSnapshot& s : prefix) {
    const int type = static_cast<int>(s.host_type);
    set(subnets, s.subnet);
    set(privileges, s.required_privilege);
    set(types, type);
    set(cross, s.subnet * p + s.required_privilege);
    if (schema.include_type_cross()) {
      set(schema.state_block("privilege_x_type"),
          s.required_privilege * kHostTypeCount + type);
    }
  }
  if (schema.include_user_features()) {
    const auto& creds = prefix.back().credentials;
    const auto& cred_privileges = schema.state_block("credential_privileges");
    const auto& cred_subnets = schema.state_block("credential_subnets");
    for (const Credential& c : creds) {
      set(cred_privileges, c.effective_privilege);
      for (SubnetId sub : network.user(c.user).accessible_subnets) {
        set(cred_subnets, sub);
      }
    }
    fv.values[static_cast<std::size_t>(
        schema.state_block("credential_count").offset)] =
        static_cast<double>(creds.size()) /
        static_cast<double>(network.users.size());
  }
  // Count of distinct hosts, so duplicated snapshots cannot inflate it.
  std::vector<HostId> hosts;
  for (const auto& s : prefix) hosts.push_back(s.host);
  std::sort(hosts.begin(), hosts.end());
  hosts.erase(std::unique(hosts.begin(), hosts.end()), hosts.end());
  fv.values[static_cast<std::size_t>(
      schema.state_block("compromised_count").offset)] =
      static_cast<double>(hosts.size()) /
      static_cast<double>(network.hosts.size());
  return fv;
}

namespace {

// Writes the candidate encoding into `out` (candidate_width entries, zeroed
// by the caller). Shared by the vector and the grouped encoders.
void write_candidate(const Host& host, const PrefixContext& ctx,
                     const FeatureSchema& schema, double* out) {
  const auto& blocks = schema.candidate_blocks();
  // Layout is fixed by the constructor: subnet, privilege, type, explored,
  // [accessible].
  out[blocks[0].offset + host.subnet] = 1.0;
  out[blocks[1].offset + host.required_privilege] = 1.0;
  out[blocks[2].offset + static_cast<int>(host.type)] = 1.0;
  out[blocks[3].offset] =
      ctx.explored[static_cast<std::size_t>(host.subnet)] ? 1.0 : 0.0;
  if (schema.include_user_features()) {
    out[blocks[4].offset] =
        ctx.reach[static_cast<std::size_t>(host.subnet)] >=
                host.required_privilege
            ? 1.0
            : 0.0;
  }
}

}  // namespace

FeatureVector encode_candidate(const Host& host, const PrefixContext& context,
                               const FeatureSchema& schema) {
  FeatureVector fv;
  fv.schema_fingerprint = schema.fingerprint();
  fv.values.assign(static_cast<std::size_t>(schema.candidate_width()), 0.0);
  write_candidate(host, context, schema, fv.values.data());
  return fv;
}

FeatureVector encode_candidate(const Host& host,
                               std::span<const StepSnapshot> prefix,
                               const Network& network,
                               const FeatureSchema& schema) {
  schema.check_network(network);
  return encode_candidate(host, make_prefix_context(prefix, network), schema);
}

std::vector<TrainingExample> build_examples(const Episode& episode,
                                            const Network& network,
                                            const FeatureSchema& schema) {
  schema.check_network(network);
  std::vector<TrainingExample> out;
  const std::span<const StepSnapshot> steps(episode.steps);
  for (std::size_t k = 1; k < steps.size(); ++k) {
    const auto prefix = steps.first(k);
    const GroupId group{episode.id, static_cast<int>(k)};
    const FeatureVector state = encode_state(prefix, network, schema);
    const PrefixContext ctx = make_prefix_context(prefix, network);
    const HostId actual = steps[k].host;
    for (const Host& h : network.hosts) {
      if (ctx.compromised[static_cast<std::size_t>(h.id)]) continue;
      out.push_back({state, encode_candidate(h, ctx, schema),
                     h.id == actual ? 1 : 0, group, h.id});
    }
  }
  return out;
}

namespace {

// Incremental row de-duplication keyed by a hash of the row bytes.
class RowCompactor {
 public:
  RowCompactor(std::vector<double>& rows, std::vector<int>& multiplicity,
               int width)
      : rows_(rows), multiplicity_(multiplicity), width_(width) {}

  int add(std::span<const double> row) {
    const std::string_view bytes(reinterpret_cast<const char*>(row.data()),
                                 row.size_bytes());
    auto& bucket = index_[fnv1a(bytes)];
    const auto w = static_cast<std::size_t>(width_);
    for (int r : bucket) {
      if (std::equal(row.begin(), row.end(),
                     rows_.begin() + static_cast<std::ptrdiff_t>(
                                         static_cast<std::size_t>(r) * w))) {
        ++multiplicity_[static_cast<std::size_t>(r)];
        return r;
      }
    }
    const int r = static_cast<int>(multiplicity_.size());
    rows_.insert(rows_.end(), row.begin(), row.end());
    multiplicity_.push_back(1);
    bucket.push_back(r);
    return r;
  }

 private:
  std::vector<double>& rows_;
  std::vector<int>& multiplicity_;
  int width_;
  std::unordered_map<std::uint64_t, std::vector<int>> index_;
};

}  // namespace

CandidateSet encode_candidates(std::span<const StepSnapshot> prefix,
                               const Network& network,
                               const FeatureSchema& schema,
                               bool restrict_to_reachable) {
  CandidateSet set;
  set.state = encode_state(prefix, network, schema).values;
  const PrefixContext ctx = make_prefix_context(prefix, network);
  const int width = schema.candidate_width();
  RowCompactor compactor(set.rows, set.multiplicity, width);
  std::vector<double> row(static_cast<std::size_t>(width));
  for (const Host& h : network.hosts) {
    if (ctx.compromised[static_cast<std::size_t>(h.id)]) continue;
    if (restrict_to_reachable &&
        ctx.reach[static_cast<std::size_t>(h.subnet)] < h.required_privilege)
      continue;
    std::fill(row.begin(), row.end(), 0.0);
    write_candidate(h, ctx, schema, row.data());
    set.hosts.push_back(h.id);
    set.host_row.push_back(compactor.add(row));
  }
  return set;
}

std::vector<TrainingGroup> build_groups(const Episode& episode,
                                        const Network& network,
                                        const FeatureSchema& schema) {
  schema.check_network(network);
  std::vector<TrainingGroup> out;
  const std::span<const StepSnapshot> steps(episode.steps);
  for (std::size_t k = 1; k < steps.size(); ++k) {
    CandidateSet set = encode_candidates(steps.first(k), network, schema);
    TrainingGroup group;
    group.id = {episode.id, static_cast<int>(k)};
    const auto it =
        std::lower_bound(set.hosts.begin(), set.hosts.end(), steps[k].host);
    if (it == set.hosts.end() || *it != steps[k].host) {
      throw Error(ErrorCode::DegenerateGroup,
                  "episode " + std::to_string(episode.id) + " step " +
                      std::to_string(k) + " revisits host " +
                      std::to_string(steps[k].host));
    }
    group.positive = set.host_row[static_cast<std::size_t>(
        it - set.hosts.begin())];
    group.state = std::move(set.state);
    group.candidates = std::move(set.rows);
    group.multiplicity = std::move(set.multiplicity);
    out.push_back(std::move(group));
  }
  return out;
}

TrainingGroup compact_group(std::span<const TrainingExample> examples) {
  if (examples.empty()) {
    throw Error(ErrorCode::DegenerateGroup, "empty group");
  }
  TrainingGroup group;
  group.id = examples.front().group;
  group.state = examples.front().state.values;
  const int width = static_cast<int>(examples.front().candidate.values.size());
  RowCompactor compactor(group.candidates, group.multiplicity, width);
  int positives = 0;
  for (const TrainingExample& ex : examples) {
    if (ex.group != group.id || ex.state.values != group.state ||
        static_cast<int>(ex.candidate.values.size()) != width) {
      throw Error(ErrorCode::DegenerateGroup,
                  "examples of group " + std::to_string(group.id.episode) +
                      "/" + std::to_string(group.id.step) +
                      " disagree on group, state or width");
    }
    const int r = compactor.add(ex.candidate.values);
    if (ex.label == 1) {
      ++positives;
      group.positive = r;
    }
  }
  if (positives != 1) {
    throw Error(ErrorCode::DegenerateGroup,
                "group " + std::to_string(group.id.episode) + "/" +
                    std::to_string(group.id.step) + " has " +
                    std::to_string(positives) + " positives");
  }
  return group;
}

Dataset build_dataset_serial(std::span<const Episode> episodes,
                             std::span<const Network> networks,
                             const FeatureSchema& schema) {
  if (episodes.size() != networks.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                "one network per episode is required");
  }
  Dataset ds{schema, {}};
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    for (auto& g : build_groups(episodes[i], networks[i], schema)) {
      ds.groups.push_back(std::move(g));
    }
  }
  return ds;
}

Dataset build_dataset(std::span<const Episode> episodes,
                      std::span<const Network> networks,
                      const FeatureSchema& schema) {
  if (episodes.size() != networks.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                "one network per episode is required");
  }
  const auto n = static_cast<std::ptrdiff_t>(episodes.size());
  std::vector<std::vector<TrainingGroup>> parts(episodes.size());
  std::vector<std::exception_ptr> errors(episodes.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    try {
      parts[u] = build_groups(episodes[u], networks[u], schema);
    } catch (...) {
      errors[u] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  Dataset ds{schema, {}};
  for (auto& part : parts) {
    for (auto& g : part) ds.groups.push_back(std::move(g));
  }
  return ds;
}

}  // namespace lateralsim
