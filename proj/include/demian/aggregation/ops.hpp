#pragma once

// Aggregation algebra over a ResultsMatrix: oracle rows, macro averages,
// benchmark-family summaries, and the caption-loss reference metric.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "demian/aggregation/matrix.hpp"
#include "demian/aggregation/rounding.hpp"
#include "demian/error.hpp"

namespace demian {

// Cell-wise max over the listed condition rows.
inline std::vector<double> oracle_row(const ResultsMatrix& m, const std::vector<std::string>& over) {
  if (over.empty()) throw ValidationError("oracle_row: row set is empty");
  std::vector<double> out = m.row(over.front());
  for (std::size_t i = 1; i < over.size(); ++i) {
    const auto r = m.row(over[i]);
    for (std::size_t c = 0; c < out.size(); ++c) out[c] = std::max(out[c], r[c]);
  }
  return out;
}

inline double macro_avg(std::span<const double> row) {
  if (row.empty()) throw ValidationError("macro_avg: empty row");
  return std::accumulate(row.begin(), row.end(), 0.0) / static_cast<double>(row.size());
}

inline void append_oracle_row(ResultsMatrix& m, const std::vector<std::string>& over,
                              const std::string& id = "oracle") {
  const auto best = oracle_row(m, over);
  m.add_row(id, std::vector<std::optional<double>>(best.begin(), best.end()));
}

// Adds a column holding each row's mean over the existing columns.
inline void append_avg_col(ResultsMatrix& m, const std::string& id = "Avg") {
  std::vector<std::optional<double>> avgs;
  for (const auto& r : m.rows()) {
    const auto values = m.row(r);
    avgs.push_back(macro_avg(values));
  }
  m.add_col(id, avgs);
}

struct Family {
  enum class Rule { mean, select };

  std::string name;
  Rule rule = Rule::mean;
  std::vector<std::string> members;  // select uses members[0]
};

struct FamilySpec {
  std::vector<Family> families;
  std::string avg_column;     // empty: no average column
  bool keep_members = false;  // also emit the detail columns, ahead of the families
};

inline void from_json(const nlohmann::json& j, Family& f) {
  f.name = j.at("name").get<std::string>();
  const auto rule = j.value("rule", std::string("mean"));
  if (rule == "mean") {
    f.rule = Family::Rule::mean;
    f.members = j.at("members").get<std::vector<std::string>>();
  } else if (rule == "select") {
    f.rule = Family::Rule::select;
    f.members = {j.at("member").get<std::string>()};
  } else {
    throw ValidationError("family '" + f.name + "': unknown rule '" + rule + "'");
  }
  if (f.members.empty()) throw ValidationError("family '" + f.name + "' has no members");
}

inline void to_json(nlohmann::json& j, const Family& f) {
  if (f.rule == Family::Rule::select) {
    j = {{"name", f.name}, {"rule", "select"}, {"member", f.members.at(0)}};
  } else {
    j = {{"name", f.name}, {"rule", "mean"}, {"members", f.members}};
  }
}

inline void from_json(const nlohmann::json& j, FamilySpec& s) {
  s.families = j.at("families").get<std::vector<Family>>();
  s.avg_column = j.value("avg", std::string());
  s.keep_members = j.value("keep_members", false);
  if (s.families.empty()) throw ValidationError("family spec lists no families");
}

inline void to_json(nlohmann::json& j, const FamilySpec& s) {
  j = {{"families", s.families}};
  if (!s.avg_column.empty()) j["avg"] = s.avg_column;
  if (s.keep_members) j["keep_members"] = true;
}

inline FamilySpec load_family_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open family spec " + path.string());
  try {
    return nlohmann::json::parse(in).get<FamilySpec>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("family spec " + path.string() + ": " + e.what());
  }
}

// One column per family (plus the average column when the spec names one).
// The average is taken over full-precision family values.
inline ResultsMatrix summarize_families(const ResultsMatrix& detail, const FamilySpec& spec) {
  std::vector<std::string> cols;
  if (spec.keep_members) cols = detail.cols();
  const std::size_t first = cols.size();
  for (const auto& f : spec.families) {
    for (const auto& mem : f.members) {
      if (!detail.has_col(mem)) throw LookupError("family '" + f.name + "': unknown member '" + mem + "'");
    }
    cols.push_back(f.name);
  }
  if (!spec.avg_column.empty()) cols.push_back(spec.avg_column);
  ResultsMatrix out(detail.rows(), cols, detail.metadata());

  for (std::size_t r = 0; r < detail.rows().size(); ++r) {
    const auto& row = detail.rows()[r];
    for (std::size_t c = 0; c < first; ++c) out.set(r, c, detail.cell(r, c));
    std::vector<double> family_values;
    for (std::size_t k = 0; k < spec.families.size(); ++k) {
      const auto& f = spec.families[k];
      double v = 0.0;
      if (f.rule == Family::Rule::select) {
        v = detail.at(row, f.members.front());
      } else {
        std::vector<double> xs;
        for (const auto& mem : f.members) xs.push_back(detail.at(row, mem));
        v = macro_avg(xs);
      }
      family_values.push_back(v);
      out.set(r, first + k, v);
    }
    if (!spec.avg_column.empty()) out.set(r, first + spec.families.size(), macro_avg(family_values));
  }
  return out;
}

struct AggregateRequest {
  std::optional<FamilySpec> families;
  std::vector<std::string> oracle_over;  // empty: no oracle row
  std::string oracle_id = "oracle";
  std::string avg_column;  // row-mean column when no family spec supplies one
};

// Builds a summary table. The oracle row takes the max over base columns
// only (benchmarks, or families when member columns are dropped); derived
// columns in that row are recomputed from the oracle's own base cells.
inline ResultsMatrix aggregate_view(const ResultsMatrix& m, const AggregateRequest& req) {
  m.require_dense();
  const bool oracle = !req.oracle_over.empty();
  if (!req.families) {
    ResultsMatrix out = m;
    if (oracle) append_oracle_row(out, req.oracle_over, req.oracle_id);
    if (!req.avg_column.empty()) append_avg_col(out, req.avg_column);
    return out;
  }
  FamilySpec spec = *req.families;
  if (spec.keep_members) {
    ResultsMatrix detail = m;
    if (oracle) append_oracle_row(detail, req.oracle_over, req.oracle_id);
    return summarize_families(detail, spec);
  }
  const std::string avg = spec.avg_column.empty() ? req.avg_column : spec.avg_column;
  spec.avg_column.clear();
  ResultsMatrix out = summarize_families(m, spec);
  if (oracle) append_oracle_row(out, req.oracle_over, req.oracle_id);
  if (!avg.empty()) append_avg_col(out, avg);
  return out;
}

// Masked mean negative log-likelihood over next-token target probabilities.
inline double lcap_reference(std::span<const double> target_probs, std::span<const int> mask) {
  if (target_probs.size() != mask.size()) throw ValidationError("lcap_reference: length mismatch");
  double sum = 0.0;
  long count = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i] != 0 && mask[i] != 1) throw ValidationError("lcap_reference: mask entries must be 0 or 1");
    if (!(target_probs[i] > 0.0 && target_probs[i] <= 1.0)) {
      throw ValidationError("lcap_reference: probability outside (0, 1]");
    }
    if (mask[i]) {
      sum += std::log(target_probs[i]);
      ++count;
    }
  }
  if (count == 0) throw ValidationError("lcap_reference: mask selects no tokens");
  return -sum / static_cast<double>(count);
}

inline constexpr double kDefaultCaptionLossWeight = 0.1;

inline double combined_loss(double l_fm, double l_cap, double lambda = kDefaultCaptionLossWeight) {
  return l_fm + lambda * l_cap;
}

}  // namespace demian
