#pragma once

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "graphsmooth/detectors.hpp"
#include "graphsmooth/simulate.hpp"

namespace graphsmooth {

/// 17 significant digits: enough for a lossless double round-trip.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

/// Write-temp-then-rename so error paths never leave partial output behind.
inline void write_file_atomic(const std::string& path,
                              const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      fail(ErrorCode::ParseError, "cannot open " + tmp.string() + " for writing");
    }
    out << content;
    if (!out.good()) {
      fail(ErrorCode::ParseError, "write failed for " + tmp.string());
    }
  }
  fs::rename(tmp, target);
}

namespace detail {

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) fields.push_back(field);
  if (!line.empty() && line.back() == sep) fields.emplace_back();
  return fields;
}

inline std::optional<double> parse_number(const std::string& s) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) {
      ++pos;
    }
    if (pos != s.size()) return std::nullopt;
    return v;
  } catch (...) {
    return std::nullopt;
  }
}

inline std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace detail

/// Edge-list CSV with the exact header `src,dst,weight`, 0-based ids, one row
/// per undirected edge. Node count is one past the largest id seen.
inline WeightedGraph parse_graph_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    fail(ErrorCode::ParseError, "cannot open " + path);
  }
  std::string line;
  if (!std::getline(in, line)) {
    fail(ErrorCode::ParseError, path + ":1: empty file");
  }
  if (detail::strip_cr(line) != "src,dst,weight") {
    fail(ErrorCode::ParseError, path + ":1: expected header 'src,dst,weight'");
  }
  std::vector<Edge> edges;
  std::set<std::pair<int, int>> seen;
  int max_id = -1;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = detail::strip_cr(line);
    if (line.empty()) continue;
    const auto where = path + ":" + std::to_string(line_no) + ": ";
    const auto fields = detail::split(line, ',');
    if (fields.size() != 3) {
      fail(ErrorCode::ParseError, where + "expected 3 fields, got " +
                                      std::to_string(fields.size()));
    }
    const auto src = detail::parse_number(fields[0]);
    const auto dst = detail::parse_number(fields[1]);
    const auto weight = detail::parse_number(fields[2]);
    if (!src || !dst || !weight) {
      fail(ErrorCode::ParseError, where + "non-numeric field");
    }
    if (*src != static_cast<int>(*src) || *dst != static_cast<int>(*dst) ||
        *src < 0 || *dst < 0) {
      fail(ErrorCode::ParseError, where + "node ids must be nonnegative integers");
    }
    const int s = static_cast<int>(*src);
    const int d = static_cast<int>(*dst);
    if (s == d) {
      fail(ErrorCode::InvalidEdge, where + "self-loop");
    }
    if (!(*weight > 0.0)) {
      fail(ErrorCode::InvalidEdge, where + "weight must be positive");
    }
    if (!seen.insert(std::minmax(s, d)).second) {
      fail(ErrorCode::InvalidEdge, where + "duplicate undirected edge");
    }
    max_id = std::max({max_id, s, d});
    edges.push_back({s, d, *weight});
  }
  if (edges.empty()) {
    fail(ErrorCode::ParseError, path + ": no edges");
  }
  return WeightedGraph(max_id + 1, std::move(edges));
}

inline std::string graph_csv_string(const WeightedGraph& g) {
  std::string out = "src,dst,weight\n";
  for (const Edge& e : g.edges()) {
    out += std::to_string(e.src) + "," + std::to_string(e.dst) + "," +
           format_double(e.weight) + "\n";
  }
  return out;
}

inline void write_graph_csv(const std::string& path, const WeightedGraph& g) {
  write_file_atomic(path, graph_csv_string(g));
}

/// M rows by n_nodes numeric columns, optional non-numeric header row.
inline SignalBatch parse_signals_csv(const std::string& path, int n_nodes) {
  std::ifstream in(path);
  if (!in) {
    fail(ErrorCode::ParseError, "cannot open " + path);
  }
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  bool first_content = true;
  while (std::getline(in, line)) {
    ++line_no;
    line = detail::strip_cr(line);
    if (line.empty()) continue;
    const auto fields = detail::split(line, ',');
    std::vector<double> row;
    row.reserve(fields.size());
    bool numeric = true;
    for (const auto& f : fields) {
      const auto v = detail::parse_number(f);
      if (!v) {
        numeric = false;
        break;
      }
      row.push_back(*v);
    }
    if (!numeric) {
      if (first_content) {
        first_content = false;  // header row
        continue;
      }
      fail(ErrorCode::ParseError,
           path + ":" + std::to_string(line_no) + ": non-numeric field");
    }
    first_content = false;
    if (static_cast<int>(row.size()) != n_nodes) {
      fail(ErrorCode::ColumnCountMismatch,
           path + ":" + std::to_string(line_no) + ": row " +
               std::to_string(rows.size()) + " has " +
               std::to_string(row.size()) + " columns, expected " +
               std::to_string(n_nodes));
    }
    rows.push_back(std::move(row));
  }
  Matrix values(static_cast<Eigen::Index>(rows.size()), n_nodes);
  for (std::size_t m = 0; m < rows.size(); ++m) {
    for (int n = 0; n < n_nodes; ++n) {
      values(static_cast<Eigen::Index>(m), n) = rows[m][static_cast<std::size_t>(n)];
    }
  }
  return SignalBatch(std::move(values));
}

inline std::string signals_csv_string(const SignalBatch& batch) {
  std::string out;
  for (int m = 0; m < batch.n_samples(); ++m) {
    for (int n = 0; n < batch.n_nodes(); ++n) {
      if (n) out += ",";
      out += format_double(batch.values()(m, n));
    }
    out += "\n";
  }
  return out;
}

inline void write_signals_csv(const std::string& path, const SignalBatch& batch) {
  write_file_atomic(path, signals_csv_string(batch));
}

/// FILTERSPEC grammar: kind[:key=val,...]. List values (coeffs, values) use
/// bare comma-separated numbers after their key, e.g. "poly:coeffs=1,0.5".
inline FilterConfig parse_filter_spec(const std::string& spec) {
  FilterConfig config;
  const auto colon = spec.find(':');
  const std::string kind = spec.substr(0, colon);
  if (kind == "allpass") {
    config.kind = FilterKind::allpass;
  } else if (kind == "gmrf") {
    config.kind = FilterKind::gmrf;
  } else if (kind == "tikhonov") {
    config.kind = FilterKind::tikhonov;
  } else if (kind == "diffusion") {
    config.kind = FilterKind::diffusion;
  } else if (kind == "poly") {
    config.kind = FilterKind::polynomial;
    config.normalize = false;
  } else if (kind == "tabulated") {
    config.kind = FilterKind::tabulated;
    config.normalize = false;
  } else {
    fail(ErrorCode::ParseError, "unknown filter kind '" + kind + "'");
  }
  if (colon == std::string::npos) return config;

  std::vector<double>* current_list = nullptr;
  for (const std::string& token : detail::split(spec.substr(colon + 1), ',')) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) {
      const auto v = detail::parse_number(token);
      if (!current_list || !v) {
        fail(ErrorCode::ParseError, "stray token '" + token + "' in filter spec");
      }
      current_list->push_back(*v);
      continue;
    }
    const std::string key = token.substr(0, eq);
    const std::string value = token.substr(eq + 1);
    current_list = nullptr;
    if (key == "alpha" || key == "tau" || key == "scale") {
      const auto v = detail::parse_number(value);
      if (!v) {
        fail(ErrorCode::ParseError, "non-numeric value for '" + key + "'");
      }
      if (key == "alpha") config.alpha = *v;
      if (key == "tau") config.tau = *v;
      if (key == "scale") config.scale = *v;
    } else if (key == "normalize") {
      if (value == "true" || value == "1") {
        config.normalize = true;
      } else if (value == "false" || value == "0") {
        config.normalize = false;
      } else {
        fail(ErrorCode::ParseError, "normalize must be true or false");
      }
    } else if (key == "coeffs" || key == "values") {
      current_list = key == "coeffs" ? &config.coeffs : &config.values;
      const auto v = detail::parse_number(value);
      if (!v) {
        fail(ErrorCode::ParseError, "non-numeric value for '" + key + "'");
      }
      current_list->push_back(*v);
    } else {
      fail(ErrorCode::ParseError, "unknown filter key '" + key + "'");
    }
  }
  return config;
}

inline DetectorName parse_detector_name(const std::string& name) {
  if (name == "lrt") return DetectorName::lrt;
  if (name == "lrt-gmrf") return DetectorName::lrt_gmrf;
  if (name == "lrt-tikhonov") return DetectorName::lrt_tikhonov;
  if (name == "lrt-diffusion") return DetectorName::lrt_diffusion;
  if (name == "semi") return DetectorName::semi;
  if (name == "tv") return DetectorName::tv;
  if (name == "lpf") return DetectorName::lpf;
  fail(ErrorCode::ParseError, "unknown detector '" + name + "'");
}

inline nlohmann::json report_to_json(const DetectionReport& report) {
  nlohmann::json j;
  j["detector"] = report.detector;
  j["statistic"] = report.statistic;
  j["threshold"] = report.threshold;
  if (report.target_pfa) j["target_pfa"] = *report.target_pfa;
  j["decision"] = decision_name(report.decision);
  nlohmann::json meta;
  meta["n_nodes"] = report.meta.n_nodes;
  meta["n_samples"] = report.meta.n_samples;
  meta["lambda_avg"] = report.meta.lambda_avg;
  if (report.meta.r_hat) meta["r_hat"] = *report.meta.r_hat;
  if (report.meta.seed) meta["seed"] = *report.meta.seed;
  if (!report.meta.h0_desc.empty()) meta["h0"] = report.meta.h0_desc;
  if (!report.meta.h1_desc.empty()) meta["h1"] = report.meta.h1_desc;
  if (!report.meta.warnings.empty()) meta["warnings"] = report.meta.warnings;
  j["meta"] = meta;
  return j;
}

inline std::string roc_csv_string(const RocCurve& curve) {
  std::string out = "threshold,pfa,pd\n";
  for (const RocPoint& p : curve.points) {
    out += format_double(p.threshold) + "," + format_double(p.pfa) + "," +
           format_double(p.pd) + "\n";
  }
  return out;
}

inline nlohmann::json roc_summary_json(const RocCurve& curve,
                                       std::uint64_t seed) {
  nlohmann::json j;
  j["auc"] = curve.auc;
  j["trials"] = curve.trials;
  j["seed"] = seed;
  return j;
}

inline const char* sweep_parameter_name(SweepParameter p) {
  switch (p) {
    case SweepParameter::m_samples: return "m";
    case SweepParameter::alpha: return "alpha";
    case SweepParameter::r: return "r";
  }
  return "unknown";
}

inline SweepParameter parse_sweep_parameter(const std::string& name) {
  if (name == "m" || name == "M") return SweepParameter::m_samples;
  if (name == "alpha") return SweepParameter::alpha;
  if (name == "r") return SweepParameter::r;
  fail(ErrorCode::ParseError, "unknown sweep parameter '" + name + "'");
}

inline std::string sweep_csv_string(const SweepTable& table) {
  std::string out = "param,detector,pd\n";
  for (const SweepRow& row : table.rows) {
    out += format_double(row.parameter) + "," + row.detector + "," +
           format_double(row.pd) + "\n";
  }
  return out;
}

}  // namespace graphsmooth
