#include <charconv>
#include <map>

#include "json_codec.hpp"
#include "lateralsim/error.hpp"
#include "lateralsim/evaluate.hpp"

namespace lateralsim {

using detail::json;

namespace {

void append_number(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  while (true) {
    const auto pos = line.find(sep);
    out.push_back(line.substr(0, pos));
    if (pos == std::string_view::npos) break;
    line.remove_prefix(pos + 1);
  }
  return out;
}

template <typename T>
T parse_field(std::string_view text, const std::string& context) {
  T value{};
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw Error(ErrorCode::ParseError,
                context + ": cannot parse \"" + std::string(text) + "\"");
  }
  return value;
}

// Calls fn(fields, context) for each non-blank line after the header.
template <typename F>
void for_each_csv_row(std::string_view text, std::string_view header,
                      std::string_view what, F&& fn) {
  std::size_t line_no = 0;
  bool header_seen = false;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    const std::string ctx = std::string(what) + " line " + std::to_string(line_no);
    if (!header_seen) {
      if (line != header) {
        throw Error(ErrorCode::ParseError, ctx + ": expected header \"" +
                                               std::string(header) + "\"");
      }
      header_seen = true;
      continue;
    }
    fn(split(line, ','), ctx);
  }
  if (!header_seen) {
    throw Error(ErrorCode::ParseError, std::string(what) + " has no header");
  }
}

constexpr std::string_view kReportHeader = "condition,k,n,p10,median,p90";
constexpr std::string_view kStepHeader = "episode,k,percentile,n_candidates";

}  // namespace

std::string report_to_csv(const PercentileReport& report) {
  std::string out(kReportHeader);
  out += '\n';
  for (const ReportRow& r : report.rows) {
    out += r.condition;
    out += ',' + std::to_string(r.k) + ',' + std::to_string(r.n) + ',';
    append_number(out, r.p10);
    out += ',';
    append_number(out, r.median);
    out += ',';
    append_number(out, r.p90);
    out += '\n';
  }
  return out;
}

PercentileReport report_from_csv(std::string_view text) {
  PercentileReport report;
  for_each_csv_row(text, kReportHeader, "report CSV",
                   [&](const auto& f, const std::string& ctx) {
                     if (f.size() != 6) {
                       throw Error(ErrorCode::ParseError, ctx + ": expected 6 fields");
                     }
                     report.rows.push_back({std::string(f[0]),
                                            parse_field<int>(f[1], ctx),
                                            parse_field<int>(f[2], ctx),
                                            parse_field<double>(f[3], ctx),
                                            parse_field<double>(f[4], ctx),
                                            parse_field<double>(f[5], ctx)});
                   });
  return report;
}

std::string report_plot_json(const PercentileReport& report) {
  std::vector<std::string> order;
  std::map<std::string, json> points;
  int k_min = 0;
  int k_max = 0;
  bool any = false;
  for (const ReportRow& r : report.rows) {
    if (!points.contains(r.condition)) {
      order.push_back(r.condition);
      points[r.condition] = json::array();
    }
    points[r.condition].push_back({{"k", r.k},
                                   {"n", r.n},
                                   {"p10", r.p10},
                                   {"median", r.median},
                                   {"p90", r.p90}});
    k_min = any ? std::min(k_min, r.k) : r.k;
    k_max = any ? std::max(k_max, r.k) : r.k;
    any = true;
  }
  json series = json::array();
  json chance_points = json::array();
  if (any) {
    chance_points.push_back({{"k", k_min}, {"value", PercentileReport::kChance}});
    chance_points.push_back({{"k", k_max}, {"value", PercentileReport::kChance}});
  }
  series.push_back(
      {{"name", "chance"}, {"kind", "line"}, {"points", chance_points}});
  for (const auto& name : order) {
    series.push_back({{"name", name}, {"kind", "median_band"}, {"points", points[name]}});
  }
  return json{{"x", "hosts compromised"},
              {"y", "percentile of actual next host"},
              {"series", series}}
      .dump(2);
}

std::string step_percentiles_to_csv(std::span<const StepPercentile> values) {
  std::string out(kStepHeader);
  out += '\n';
  for (const StepPercentile& v : values) {
    out += std::to_string(v.episode) + ',' + std::to_string(v.k) + ',';
    append_number(out, v.percentile);
    out += ',' + std::to_string(v.n_candidates) + '\n';
  }
  return out;
}

std::vector<StepPercentile> step_percentiles_from_csv(std::string_view text) {
  std::vector<StepPercentile> out;
  for_each_csv_row(text, kStepHeader, "percentile CSV",
                   [&](const auto& f, const std::string& ctx) {
                     if (f.size() != 4) {
                       throw Error(ErrorCode::ParseError, ctx + ": expected 4 fields");
                     }
                     out.push_back({parse_field<std::uint64_t>(f[0], ctx),
                                    parse_field<int>(f[1], ctx),
                                    parse_field<double>(f[2], ctx),
                                    parse_field<int>(f[3], ctx)});
                   });
  return out;
}

CompromiseSequence load_sequence(std::string_view document) {
  const std::string ctx = "compromise sequence";
  const json j = detail::parse_document(document, ctx);
  CompromiseSequence seq;
  seq.network = detail::require_as<std::string>(j, "network", ctx);
  seq.source = detail::optional_as<std::string>(j, "source", "", ctx);
  const json& entries = detail::require(j, "sequence", ctx);
  if (!entries.is_array()) {
    throw Error(ErrorCode::ParseError, ctx + ": \"sequence\" must be a list");
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const std::string ectx = ctx + " entry " + std::to_string(i);
    CompromiseEntry e;
    e.host = detail::require_as<HostId>(entries[i], "host", ectx);
    if (entries[i].contains("user") && !entries[i]["user"].is_null()) {
      e.user = detail::require_as<UserId>(entries[i], "user", ectx);
    }
    seq.entries.push_back(e);
  }
  return seq;
}

std::string save_sequence(const CompromiseSequence& sequence) {
  json entries = json::array();
  for (const auto& e : sequence.entries) {
    json item{{"host", e.host}};
    if (e.user) item["user"] = *e.user;
    entries.push_back(std::move(item));
  }
  return json{{"network", sequence.network},
              {"source", sequence.source},
              {"sequence", std::move(entries)}}
      .dump(2);
}

}  // namespace lateralsim
