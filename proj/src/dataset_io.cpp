#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "json_codec.hpp"
#include "lateralsim/features.hpp"

namespace lateralsim {

using detail::json;

namespace {

constexpr std::string_view kDatasetFormat = "lateralsim-dataset/1";

void write_number(std::string& out, double v) {
  char buf[32];
  std::to_chars_result res;
  if (v == std::floor(v) && std::abs(v) < 1e15) {
    res = std::to_chars(buf, buf + sizeof buf, static_cast<long long>(v));
  } else {
    res = std::to_chars(buf, buf + sizeof buf, v);
  }
  out.append(buf, res.ptr);
}

void write_array(std::string& out, const std::vector<double>& values) {
  out += '[';
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    write_number(out, values[i]);
  }
  out += ']';
}

json blocks_to_json(const std::vector<FeatureBlock>& blocks) {
  json out = json::array();
  for (const auto& b : blocks) {
    out.push_back({{"name", b.name},
                   {"offset", b.offset},
                   {"width", b.width},
                   {"user_info", b.user_info}});
  }
  return out;
}

// Yields non-blank lines with their 1-based numbers.
template <typename F>
void for_each_line(std::string_view text, F&& fn) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    const std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{}
                                        : text.substr(nl + 1);
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    fn(line, line_no);
  }
}

TrainingExample parse_record(std::string_view line, std::size_t line_no,
                             const FeatureSchema& schema) {
  const std::string ctx = "dataset line " + std::to_string(line_no);
  const json j = detail::parse_document(line, ctx);
  TrainingExample ex;
  const auto group = detail::require_as<std::vector<std::int64_t>>(j, "group", ctx);
  if (group.size() != 2 || group[0] < 0) {
    throw Error(ErrorCode::ParseError, ctx + ": group must be [episode, step]");
  }
  ex.group = {static_cast<std::uint64_t>(group[0]), static_cast<int>(group[1])};
  ex.host = detail::require_as<HostId>(j, "host", ctx);
  ex.label = detail::require_as<int>(j, "label", ctx);
  if (ex.label != 0 && ex.label != 1) {
    throw Error(ErrorCode::ParseError, ctx + ": label must be 0 or 1");
  }
  ex.state.values = detail::require_as<std::vector<double>>(j, "state", ctx);
  ex.candidate.values =
      detail::require_as<std::vector<double>>(j, "candidate", ctx);
  if (static_cast<int>(ex.state.values.size()) != schema.state_width() ||
      static_cast<int>(ex.candidate.values.size()) != schema.candidate_width()) {
    throw Error(ErrorCode::ParseError,
                ctx + ": vector widths do not match the schema header");
  }
  ex.state.schema_fingerprint = schema.fingerprint();
  ex.candidate.schema_fingerprint = schema.fingerprint();
  return ex;
}

}  // namespace

std::string schema_header_line(const FeatureSchema& schema) {
  json j{{"format", kDatasetFormat},
         {"n_subnets", schema.n_subnets()},
         {"n_privilege_levels", schema.n_privilege_levels()},
         {"n_host_types", schema.n_host_types()},
         {"include_user_features", schema.include_user_features()},
         {"include_type_cross", schema.include_type_cross()},
         {"state_width", schema.state_width()},
         {"candidate_width", schema.candidate_width()},
         {"state_blocks", blocks_to_json(schema.state_blocks())},
         {"candidate_blocks", blocks_to_json(schema.candidate_blocks())},
         {"fingerprint", schema.fingerprint()}};
  return j.dump();
}

FeatureSchema schema_from_header_line(std::string_view line) {
  const std::string ctx = "dataset header";
  const json j = detail::parse_document(line, ctx);
  if (detail::require_as<std::string>(j, "format", ctx) != kDatasetFormat) {
    throw Error(ErrorCode::ParseError, ctx + ": unknown format");
  }
  FeatureSchema schema(
      detail::require_as<int>(j, "n_subnets", ctx),
      detail::require_as<int>(j, "n_privilege_levels", ctx),
      detail::require_as<bool>(j, "include_user_features", ctx),
      detail::require_as<bool>(j, "include_type_cross", ctx));
  const auto fingerprint = detail::require_as<std::string>(j, "fingerprint", ctx);
  if (fingerprint != schema.fingerprint()) {
    throw Error(ErrorCode::FingerprintMismatch,
                ctx + ": fingerprint " + fingerprint +
                    " does not match its own schema (" + schema.fingerprint() +
                    ")");
  }
  return schema;
}

void write_examples(std::ostream& out, const FeatureSchema& schema,
                    std::span<const TrainingExample> examples,
                    bool with_header) {
  if (with_header) out << schema_header_line(schema) << '\n';
  std::string line;
  for (const TrainingExample& ex : examples) {
    line.clear();
    line += "{\"group\":[";
    line += std::to_string(ex.group.episode);
    line += ',';
    line += std::to_string(ex.group.step);
    line += "],\"host\":";
    line += std::to_string(ex.host);
    line += ",\"label\":";
    line += std::to_string(ex.label);
    line += ",\"state\":";
    write_array(line, ex.state.values);
    line += ",\"candidate\":";
    write_array(line, ex.candidate.values);
    line += "}\n";
    out << line;
  }
}

std::string write_examples(const FeatureSchema& schema,
                           std::span<const TrainingExample> examples) {
  std::ostringstream os;
  write_examples(os, schema, examples);
  return os.str();
}

std::vector<TrainingExample> read_examples(std::string_view text,
                                           const FeatureSchema& expected) {
  std::vector<TrainingExample> out;
  bool header_seen = false;
  FeatureSchema schema;
  for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    if (!header_seen) {
      schema = schema_from_header_line(line);
      if (schema.fingerprint() != expected.fingerprint()) {
        throw Error(ErrorCode::FingerprintMismatch,
                    "dataset schema " + schema.fingerprint() +
                        " differs from expected " + expected.fingerprint());
      }
      header_seen = true;
      return;
    }
    out.push_back(parse_record(line, line_no, schema));
  });
  return out;
}

namespace {

// Accumulates records into groups as they arrive.
class DatasetReader {
 public:
  void feed(std::string_view line, std::size_t line_no) {
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) return;
    if (!header_seen_) {
      ds_.schema = schema_from_header_line(line);
      header_seen_ = true;
      return;
    }
    TrainingExample ex = parse_record(line, line_no, ds_.schema);
    if (!pending_.empty() && pending_.front().group != ex.group) flush();
    pending_.push_back(std::move(ex));
  }

  Dataset finish() {
    flush();
    if (!header_seen_) {
      throw Error(ErrorCode::ParseError, "dataset file has no header line");
    }
    return std::move(ds_);
  }

 private:
  void flush() {
    if (pending_.empty()) return;
    ds_.groups.push_back(compact_group(pending_));
    pending_.clear();
  }

  Dataset ds_;
  bool header_seen_ = false;
  std::vector<TrainingExample> pending_;
};

}  // namespace

Dataset read_dataset(std::string_view text) {
  DatasetReader reader;
  for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    reader.feed(line, line_no);
  });
  return reader.finish();
}

Dataset read_dataset(std::istream& in) {
  DatasetReader reader;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) reader.feed(line, ++line_no);
  return reader.finish();
}

void write_dataset(std::ostream& out, std::span<const Episode> episodes,
                   std::span<const Network> networks,
                   const FeatureSchema& schema) {
  if (episodes.size() != networks.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                "got " + std::to_string(episodes.size()) + " episodes but " +
                    std::to_string(networks.size()) + " networks");
  }
  out << schema_header_line(schema) << '\n';
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    const auto examples = build_examples(episodes[i], networks[i], schema);
    write_examples(out, schema, examples, false);
  }
}

}  // namespace lateralsim
