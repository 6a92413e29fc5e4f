#pragma once

// Detection matrix: one row per (optimisation shape, dispatch mode) sample,
// one O/X cell per structural role. Un-optimised samples are expected to show
// every role; merged samples are expected to lose VM start and VM end while
// keeping the dispatcher and handlers.

#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "vmtag/detector.hpp"
#include "vmtag/report.hpp"
#include "vmtag/synth.hpp"

namespace vmtag {

struct MatrixRow {
  std::string opt_level;  // "-O0" or "-O3"
  std::string mode;
  std::string sample;
  RoleSummary summary;
  std::optional<bool> exact;  // ground-truth agreement, un-merged samples only
  bool matches_expected = false;
};

struct Matrix {
  std::vector<MatrixRow> rows;

  bool ok() const {
    for (const auto& r : rows)
      if (!r.matches_expected || r.exact == false) return false;
    return true;
  }
};

inline bool cell(RoleStatus s) { return s == RoleStatus::Detected; }

inline bool matches_expected_pattern(const RoleSummary& s, bool merged) {
  if (!merged) return s.all_detected();
  return !cell(s.vm_start) && cell(s.dispatch_start) && cell(s.handlers) && !cell(s.vm_end);
}

// Scores one sample against its ground truth.
inline MatrixRow score_sample(const IrModule& m, const GroundTruth& truth, std::string sample,
                              const DetectOptions& options = {}) {
  MatrixRow row;
  row.opt_level = truth.merged ? "-O3" : "-O0";
  row.mode = std::string(to_string(truth.mode));
  row.sample = std::move(sample);
  const auto results = detect(m, options);
  if (const auto* r = find_result(results, truth.function_name)) {
    row.summary = summarize(*r);
    if (!truth.merged) row.exact = matches_truth(*r, truth);
  } else if (!truth.merged) {
    row.exact = false;
  }
  row.matches_expected = matches_expected_pattern(row.summary, truth.merged);
  return row;
}

// Default synthetic matrix: every mode un-merged, then every mode merged.
inline Matrix synthetic_matrix(const std::vector<DispatchMode>& modes, const DetectOptions& options = {},
                               const SynthConfig& base = {}) {
  Matrix mx;
  for (const bool merged : {false, true}) {
    for (const auto mode : modes) {
      SynthConfig cfg = base;
      cfg.mode = mode;
      auto sample = generate(cfg);
      if (merged) {
        sample.module = merge_transform(sample.module);
        sample.truth.merged = true;
      }
      mx.rows.push_back(score_sample(sample.module, sample.truth,
                                     "synth seed " + std::to_string(cfg.seed), options));
    }
  }
  return mx;
}

inline std::string render_text(const Matrix& mx) {
  std::ostringstream os;
  auto pad = [](std::string s, std::size_t w) {
    if (s.size() < w) s.append(w - s.size(), ' ');
    return s + ' ';
  };
  auto ox = [](RoleStatus s) { return std::string(cell(s) ? "O" : "X"); };
  std::size_t sample_w = 6;
  for (const auto& r : mx.rows) sample_w = std::max(sample_w, r.sample.size());
  os << pad("Opt.", 4) << pad("Dispatch", 8) << pad("Sample", sample_w) << pad("VM Start", 8)
     << pad("Disp.", 5) << pad("Hand.", 5) << pad("VM End", 6) << pad("Exact", 5) << "Verdict\n";
  for (const auto& r : mx.rows) {
    os << pad(r.opt_level, 4) << pad(r.mode, 8) << pad(r.sample, sample_w)
       << pad(ox(r.summary.vm_start), 8) << pad(ox(r.summary.dispatch_start), 5)
       << pad(ox(r.summary.handlers), 5) << pad(ox(r.summary.vm_end), 6)
       << pad(r.exact ? (*r.exact ? "yes" : "no") : "n/a", 5)
       << (r.matches_expected && r.exact != false ? "ok" : "MISMATCH") << '\n';
  }
  os << (mx.ok() ? "matrix matches the expected pattern\n" : "matrix does NOT match the expected pattern\n");
  return os.str();
}

inline nlohmann::json to_json(const Matrix& mx) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : mx.rows) {
    rows.push_back({
        {"opt_level", r.opt_level},
        {"mode", r.mode},
        {"sample", r.sample},
        {"summary", to_json(r.summary)},
        {"exact", r.exact ? nlohmann::json(*r.exact) : nlohmann::json(nullptr)},
        {"matches_expected", r.matches_expected},
    });
  }
  return {{"tool_version", std::string(kToolVersion)}, {"rows", std::move(rows)}, {"ok", mx.ok()}};
}

}  // namespace vmtag
