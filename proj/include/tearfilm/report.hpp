#pragma once

// Fit reports as JSON, relative-error CSV, and the summary table that
// collects several reports.

#include "tearfilm/inverse.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

namespace tearfilm {

inline nlohmann::json named_parameters(const ParameterLayout& layout, const VectorXd& p) {
  nlohmann::json j = nlohmann::json::object();
  const auto names = layout.names();
  for (std::size_t i = 0; i < names.size() && Index(i) < p.size(); ++i) j[names[i]] = p[Index(i)];
  return j;
}

inline nlohmann::json to_json(const FitResult& r, const std::string& case_name = "") {
  nlohmann::json j;
  j["case"] = case_name;
  j["layout"] = r.layout.tag();
  j["parameter_names"] = r.layout.names();
  j["algorithm"] = to_string(r.algorithm);
  j["iterations"] = r.iterations;
  j["evaluations"] = r.evaluations;
  j["status"] = r.status;
  j["objective"] = r.objective;
  j["initial"] = named_parameters(r.layout, r.p0);
  j["optimized"] = named_parameters(r.layout, r.p);
  j["history"] = r.history;
  nlohmann::json rel = nlohmann::json::array();
  for (double v : r.rel_err) rel.push_back(std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr));
  j["rel_err"] = rel;
  j["times"] = r.times;
  j["rom_rebuilds"] = r.rom_rebuilds;
  j["seconds"] = r.seconds;
  return j;
}

inline void write_rel_err_csv(const std::string& path, const FitResult& r) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  os << std::setprecision(12) << "frame,t,rel_err\n";
  for (std::size_t k = 0; k < r.rel_err.size(); ++k) {
    os << k << ',' << (k < r.times.size() ? r.times[k] : 0.0) << ',';
    if (std::isfinite(r.rel_err[k])) os << r.rel_err[k];
    os << '\n';
  }
}

struct ReportRow {
  std::string source;
  std::string case_name;
  std::string layout;
  std::string algorithm;
  int iterations = 0;
  std::vector<std::pair<std::string, double>> parameters;
  double final_rel_err = std::numeric_limits<double>::quiet_NaN();
};

inline ReportRow read_report_row(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  nlohmann::json j;
  try {
    is >> j;
    ReportRow r;
    r.source = path;
    r.case_name = j.value("case", "");
    r.layout = j.at("layout").get<std::string>();
    r.algorithm = j.at("algorithm").get<std::string>();
    r.iterations = j.at("iterations").get<int>();
    const auto names = j.at("parameter_names").get<std::vector<std::string>>();
    for (const auto& n : names) r.parameters.emplace_back(n, j.at("optimized").at(n).get<double>());
    const auto& rel = j.at("rel_err");
    if (!rel.empty() && rel.back().is_number()) r.final_rel_err = rel.back().get<double>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path + ": " + e.what());
  }
}

struct ReportTable {
  std::vector<std::string> parameter_columns;  // union over rows, first-seen order
  std::vector<ReportRow> rows;
  std::vector<std::string> skipped;            // "path: reason"
};

inline ReportTable build_report(const std::vector<std::string>& paths) {
  ReportTable t;
  for (const auto& p : paths) {
    try {
      t.rows.push_back(read_report_row(p));
    } catch (const Error& e) {
      t.skipped.push_back(e.what());
      continue;
    }
    for (const auto& [name, _] : t.rows.back().parameters)
      if (std::find(t.parameter_columns.begin(), t.parameter_columns.end(), name) == t.parameter_columns.end())
        t.parameter_columns.push_back(name);
  }
  return t;
}

/// CSV with a blank cell where a row's layout lacks a parameter.
inline std::string report_csv(const ReportTable& t) {
  std::ostringstream os;
  os << std::setprecision(10) << "case,layout,algorithm,iterations";
  for (const auto& c : t.parameter_columns) os << ',' << c;
  os << ",final_rel_err\n";
  for (const auto& r : t.rows) {
    os << r.case_name << ',' << r.layout << ',' << r.algorithm << ',' << r.iterations;
    for (const auto& c : t.parameter_columns) {
      os << ',';
      for (const auto& [n, v] : r.parameters)
        if (n == c) os << v;
    }
    os << ',';
    if (std::isfinite(r.final_rel_err)) os << r.final_rel_err;
    os << '\n';
  }
  return os.str();
}

inline std::string report_text(const ReportTable& t) {
  std::ostringstream os;
  std::vector<std::string> header = {"case", "layout", "algorithm", "iter"};
  header.insert(header.end(), t.parameter_columns.begin(), t.parameter_columns.end());
  header.push_back("RelErr(end)");
  std::vector<std::vector<std::string>> cells{header};
  for (const auto& r : t.rows) {
    std::vector<std::string> row = {r.case_name.empty() ? "-" : r.case_name, r.layout, r.algorithm,
                                    std::to_string(r.iterations)};
    for (const auto& c : t.parameter_columns) {
      std::string v = "";
      for (const auto& [n, x] : r.parameters)
        if (n == c) {
          std::ostringstream s;
          s << std::setprecision(4) << x;
          v = s.str();
        }
      row.push_back(v);
    }
    std::ostringstream s;
    if (std::isfinite(r.final_rel_err)) s << std::setprecision(3) << 100.0 * r.final_rel_err << "%";
    row.push_back(s.str());
    cells.push_back(row);
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& row : cells)
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  for (const auto& row : cells) {
    for (std::size_t i = 0; i < row.size(); ++i) os << std::left << std::setw(int(width[i]) + 2) << row[i];
    os << '\n';
  }
  for (const auto& s : t.skipped) os << "skipped: " << s << '\n';
  return os.str();
}

}  // namespace tearfilm
