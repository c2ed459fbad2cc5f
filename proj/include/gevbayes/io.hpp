#pragma once

#include "diagnostics.hpp"
#include "gev.hpp"
#include "numerics.hpp"

#include <json.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace gevbayes {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kStudySchema = "gevbayes.study/1";

/// Malformed input; the message carries the line number.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest decimal text that reads back to the same double (at most 17 digits).
inline std::string format_double(double x) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

namespace detail {
inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline bool parse_double(const std::string& t, double& out) {
  const char* first = t.data();
  if (!t.empty() && t[0] == '+') ++first;
  const auto r = std::from_chars(first, t.data() + t.size(), out);
  return r.ec == std::errc() && r.ptr == t.data() + t.size();
}
}  // namespace detail

/// One observation per line. A non-numeric first line is taken as a header;
/// blank lines and lines starting with '#' are skipped.
inline Sample parse_sample(std::istream& in, const std::string& source = "<input>") {
  std::vector<double> v;
  std::string line;
  std::size_t lineno = 0;
  bool first_content = true;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    double x;
    if (!detail::parse_double(t, x)) {
      if (first_content) {
        first_content = false;
        continue;  // header
      }
      throw ParseError(source + ":" + std::to_string(lineno) + ": cannot parse '" + t + "' as a number");
    }
    first_content = false;
    if (!std::isfinite(x))
      throw ParseError(source + ":" + std::to_string(lineno) + ": observation is not finite");
    v.push_back(x);
  }
  if (v.empty()) throw ParseError(source + ": no observations");
  return Sample(std::move(v));
}

inline Sample load_sample(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return parse_sample(in, path);
}

inline void write_values(std::ostream& out, const std::vector<double>& v, const std::string& header = "y") {
  if (!header.empty()) out << header << '\n';
  char buf[40];
  for (double x : v) {
    std::snprintf(buf, sizeof buf, "%.17g", x);
    out << buf << '\n';
  }
}

inline void save_sample(const std::string& path, const std::vector<double>& v, const std::string& header = "y") {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  write_values(out, v, header);
  if (!out) throw IoError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// JSON helpers; NaN and infinities travel as null / strings

inline nlohmann::json jnum(double x) {
  if (std::isnan(x)) return nullptr;
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

inline double jget(const nlohmann::json& j) {
  if (j.is_null()) return kNaN;
  if (j.is_string()) return j.get<std::string>() == "inf" ? kInf : -kInf;
  return j.get<double>();
}

inline nlohmann::json to_json(const GevParams& p) { return nlohmann::json::array({jnum(p.tau), jnum(p.mu), jnum(p.xi)}); }
inline GevParams params_from_json(const nlohmann::json& j) { return {jget(j.at(0)), jget(j.at(1)), jget(j.at(2))}; }

inline nlohmann::json to_json(const Thresholds& t) {
  return {{"box_deviation", t.box_deviation},
          {"c2_deviation", t.c2_deviation},
          {"lower_bound_slack", t.lower_bound_slack},
          {"rate_deviation", t.rate_deviation},
          {"shell_fraction", t.shell_fraction},
          {"note", "empirical calibration thresholds; the limit theory gives no finite-n rates"}};
}

inline Thresholds thresholds_from_json(const nlohmann::json& j) {
  Thresholds t;
  t.box_deviation = j.at("box_deviation").get<double>();
  t.c2_deviation = j.at("c2_deviation").get<double>();
  t.lower_bound_slack = j.at("lower_bound_slack").get<double>();
  t.rate_deviation = j.at("rate_deviation").get<double>();
  t.shell_fraction = j.at("shell_fraction").get<double>();
  return t;
}

inline nlohmann::json to_json(const StudyConfig& c) {
  return {{"theta0", to_json(c.theta0)}, {"prior", c.prior},       {"ns", c.ns},
          {"seeds", c.seeds},           {"tol", c.tol},           {"regions", c.regions},
          {"region_r", c.region_r},     {"jobs", c.jobs},         {"thresholds", to_json(c.thresholds)}};
}

inline StudyConfig study_config_from_json(const nlohmann::json& j) {
  StudyConfig c;
  c.theta0 = params_from_json(j.at("theta0"));
  c.prior = j.at("prior").get<std::string>();
  c.ns = j.at("ns").get<std::vector<std::size_t>>();
  c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  c.tol = j.at("tol").get<double>();
  c.regions = j.at("regions").get<bool>();
  c.region_r = j.at("region_r").get<double>();
  c.jobs = j.at("jobs").get<unsigned>();
  c.thresholds = thresholds_from_json(j.at("thresholds"));
  return c;
}

inline nlohmann::json to_json(const StudyRecord& r) {
  nlohmann::json reg = nlohmann::json::array();
  for (double x : r.region_log_fraction) reg.push_back(jnum(x));
  return {{"type", "record"},          {"n", r.n},
          {"seed", r.seed},            {"ok", r.ok},
          {"error", r.error},          {"theta_hat", to_json(r.theta_hat)},
          {"log_Bn", jnum(r.log_Bn)},  {"log_Cn", jnum(r.log_Cn)},
          {"log_Cn_err", jnum(r.log_Cn_err)}, {"log_ratio", jnum(r.log_ratio)},
          {"rate", jnum(r.rate)},      {"rate_ref", jnum(r.rate_ref)},
          {"c1", jnum(r.c1)},          {"has_regions", r.has_regions},
          {"region_log_fraction", reg}};
}

inline StudyRecord record_from_json(const nlohmann::json& j) {
  StudyRecord r;
  r.n = j.at("n").get<std::size_t>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.ok = j.at("ok").get<bool>();
  r.error = j.at("error").get<std::string>();
  r.theta_hat = params_from_json(j.at("theta_hat"));
  r.log_Bn = jget(j.at("log_Bn"));
  r.log_Cn = jget(j.at("log_Cn"));
  r.log_Cn_err = jget(j.at("log_Cn_err"));
  r.log_ratio = jget(j.at("log_ratio"));
  r.rate = jget(j.at("rate"));
  r.rate_ref = jget(j.at("rate_ref"));
  r.c1 = jget(j.at("c1"));
  r.has_regions = j.at("has_regions").get<bool>();
  const auto& reg = j.at("region_log_fraction");
  for (std::size_t k = 0; k < r.region_log_fraction.size(); ++k) r.region_log_fraction[k] = jget(reg.at(k));
  return r;
}

inline nlohmann::json to_json(const StudySummaryRow& s) {
  nlohmann::json reg = nlohmann::json::array();
  for (double x : s.median_region_log_fraction) reg.push_back(jnum(x));
  return {{"n", s.n},
          {"cells", s.cells},
          {"failed", s.failed},
          {"median_log_ratio", jnum(s.median_log_ratio)},
          {"median_rate_dev", jnum(s.median_rate_dev)},
          {"median_c1", jnum(s.median_c1)},
          {"median_shell_fraction", jnum(s.median_shell_fraction)},
          {"median_region_log_fraction", reg}};
}

/// JSON-lines: a header line (schema, version, config), one line per cell,
/// and a summary line.
inline void write_study_jsonl(std::ostream& out, const StudyReport& rep) {
  const nlohmann::json head = {
      {"type", "header"}, {"schema", kStudySchema}, {"tool_version", kToolVersion}, {"config", to_json(rep.config)}};
  out << head.dump() << '\n';
  for (const auto& r : rep.records) out << to_json(r).dump() << '\n';
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& s : rep.summary) rows.push_back(to_json(s));
  const nlohmann::json sum = {{"type", "summary"},
                              {"rows", rows},
                              {"ratio_decreasing", rep.ratio_decreasing},
                              {"lower_bound_holds", rep.lower_bound_holds},
                              {"regions_decreasing", rep.regions_decreasing}};
  out << sum.dump() << '\n';
}

inline std::string study_jsonl(const StudyReport& rep) {
  std::ostringstream os;
  write_study_jsonl(os, rep);
  return os.str();
}

/// Reads a report written by write_study_jsonl; the summary is recomputed.
inline StudyReport read_study_jsonl(std::istream& in) {
  StudyReport rep;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
      throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
    }
    const std::string type = j.value("type", "");
    if (type == "header") {
      if (j.at("schema").get<std::string>() != kStudySchema)
        throw ParseError("line " + std::to_string(lineno) + ": unsupported schema");
      rep.config = study_config_from_json(j.at("config"));
      have_header = true;
    } else if (type == "record") {
      rep.records.push_back(record_from_json(j));
    } else if (type != "summary") {
      throw ParseError("line " + std::to_string(lineno) + ": unknown record type '" + type + "'");
    }
  }
  if (!have_header) throw ParseError("study report has no header line");
  summarize(rep);
  return rep;
}

inline void write_study_csv(std::ostream& out, const StudyReport& rep) {
  out << "n,cells,failed,median_log_ratio,median_rate_dev,median_c1,median_shell_fraction\n";
  for (const auto& s : rep.summary)
    out << s.n << ',' << s.cells << ',' << s.failed << ',' << format_double(s.median_log_ratio) << ','
        << format_double(s.median_rate_dev) << ',' << format_double(s.median_c1) << ','
        << format_double(s.median_shell_fraction) << '\n';
}

}  // namespace gevbayes
