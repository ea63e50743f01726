#pragma once

// Set-based encoding of an episode prefix (what the defender has seen
// compromised so far) and of each candidate next host, plus the labeled
// groups the ranking model trains on.

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lateralsim/adversary.hpp"
#include "lateralsim/netsim.hpp"

namespace lateralsim {

struct FeatureBlock {
  std::string name;
  int offset = 0;
  int width = 0;
  bool user_info = false;  // removed by the no-user-information ablation

  bool operator==(const FeatureBlock&) const = default;
};

class FeatureSchema {
 public:
  FeatureSchema() = default;
  FeatureSchema(int n_subnets, int n_privilege_levels,
                bool include_user_features, bool include_type_cross = false);

  static FeatureSchema for_config(const GenerationConfig& config,
                                  bool include_user_features,
                                  bool include_type_cross = false);

  int n_subnets() const { return n_subnets_; }
  int n_privilege_levels() const { return n_privilege_levels_; }
  int n_host_types() const { return kHostTypeCount; }
  bool include_user_features() const { return include_user_features_; }
  bool include_type_cross() const { return include_type_cross_; }

  const std::vector<FeatureBlock>& state_blocks() const { return state_; }
  const std::vector<FeatureBlock>& candidate_blocks() const {
    return candidate_;
  }
  int state_width() const { return state_width_; }
  int candidate_width() const { return candidate_width_; }
  int input_width() const { return state_width_ + candidate_width_; }
  const std::string& fingerprint() const { return fingerprint_; }

  // Throws std::out_of_range for unknown names.
  const FeatureBlock& state_block(std::string_view name) const;
  const FeatureBlock& candidate_block(std::string_view name) const;

  // Throws Error{SchemaMismatch} when the network does not fit.
  void check_network(const Network& network) const;

  bool operator==(const FeatureSchema& other) const {
    return fingerprint_ == other.fingerprint_;
  }

 private:
  int n_subnets_ = 0;
  int n_privilege_levels_ = 0;
  bool include_user_features_ = true;
  bool include_type_cross_ = false;
  std::vector<FeatureBlock> state_;
  std::vector<FeatureBlock> candidate_;
  int state_width_ = 0;
  int candidate_width_ = 0;
  std::string fingerprint_;
};

struct FeatureVector {
  std::vector<double> values;
  std::string schema_fingerprint;

  bool operator==(const FeatureVector&) const = default;
};

// What the defender knows after a prefix: compromised hosts, explored
// subnets and (for the full schema) the reach of held credentials.
struct PrefixContext {
  std::vector<char> compromised;  // per host
  std::vector<char> explored;     // per subnet
  std::vector<int> reach;         // per subnet, see subnet_reach
};

PrefixContext make_prefix_context(std::span<const StepSnapshot> prefix,
                                  const Network& network);

FeatureVector encode_state(std::span<const StepSnapshot> prefix,
                           const Network& network, const FeatureSchema& schema);

FeatureVector encode_candidate(const Host& host, const PrefixContext& context,
                               const FeatureSchema& schema);
FeatureVector encode_candidate(const Host& host,
                               std::span<const StepSnapshot> prefix,
                               const Network& network,
                               const FeatureSchema& schema);

// Every unvisited host of a prefix, encoded once per distinct metadata
// profile: hosts[i] maps to row host_row[i].
struct CandidateSet {
  std::vector<double> state;
  std::vector<double> rows;  // distinct candidate vectors, row-major
  std::vector<int> multiplicity;
  std::vector<HostId> hosts;  // ascending
  std::vector<int> host_row;

  int row_count() const { return static_cast<int>(multiplicity.size()); }
};

CandidateSet encode_candidates(std::span<const StepSnapshot> prefix,
                               const Network& network,
                               const FeatureSchema& schema,
                               bool restrict_to_reachable = false);

struct GroupId {
  std::uint64_t episode = 0;
  int step = 0;  // hosts compromised before the prediction

  auto operator<=>(const GroupId&) const = default;
};

struct TrainingExample {
  FeatureVector state;
  FeatureVector candidate;
  int label = 0;
  GroupId group;
  HostId host = 0;

  bool operator==(const TrainingExample&) const = default;
};

// One prediction step, with identical candidate rows merged. The softmax over
// hosts is recovered by weighting each row by its multiplicity, so losses and
// probabilities are exactly those of the expanded group.
struct TrainingGroup {
  GroupId id;
  std::vector<double> state;
  std::vector<double> candidates;  // rows x candidate_width, row-major
  std::vector<int> multiplicity;
  int positive = 0;  // row holding the actual next host

  int rows() const { return static_cast<int>(multiplicity.size()); }
  std::span<const double> row(int r, int width) const {
    return std::span<const double>(candidates)
        .subspan(static_cast<std::size_t>(r) * static_cast<std::size_t>(width),
                 static_cast<std::size_t>(width));
  }
  bool operator==(const TrainingGroup&) const = default;
};

struct Dataset {
  FeatureSchema schema;
  std::vector<TrainingGroup> groups;
};

// Exhaustive expansion: for every transition k -> k+1, one positive and one
// negative per other unvisited host.
std::vector<TrainingExample> build_examples(const Episode& episode,
                                            const Network& network,
                                            const FeatureSchema& schema);

// Same groups as build_examples, compacted.
std::vector<TrainingGroup> build_groups(const Episode& episode,
                                        const Network& network,
                                        const FeatureSchema& schema);

// Compacts one group's worth of examples. Throws Error{DegenerateGroup}
// unless exactly one example is positive.
TrainingGroup compact_group(std::span<const TrainingExample> examples);

// Encodes a whole corpus; OpenMP over episodes, merged in input order.
Dataset build_dataset(std::span<const Episode> episodes,
                      std::span<const Network> networks,
                      const FeatureSchema& schema);
Dataset build_dataset_serial(std::span<const Episode> episodes,
                             std::span<const Network> networks,
                             const FeatureSchema& schema);

// Dataset file: a header line carrying the schema, then one example per line.
std::string schema_header_line(const FeatureSchema& schema);
FeatureSchema schema_from_header_line(std::string_view line);

void write_examples(std::ostream& out, const FeatureSchema& schema,
                    std::span<const TrainingExample> examples,
                    bool with_header = true);
std::string write_examples(const FeatureSchema& schema,
                           std::span<const TrainingExample> examples);

// Throws Error{FingerprintMismatch} when the header disagrees with
// `expected`, Error{ParseError} on malformed lines. An empty document yields
// no examples.
std::vector<TrainingExample> read_examples(std::string_view text,
                                           const FeatureSchema& expected);

// Reads a dataset file into compacted groups, taking the schema from the
// header. Examples of one group must be contiguous.
Dataset read_dataset(std::string_view text);
Dataset read_dataset(std::istream& in);

// Streams a corpus to a dataset file one episode at a time, so the expanded
// examples are never all held in memory.
void write_dataset(std::ostream& out, std::span<const Episode> episodes,
                   std::span<const Network> networks,
                   const FeatureSchema& schema);

}  // namespace lateralsim
