#pragma once

// Serializable outcome of analysing one module, and the JSON forms of
// detection results and generator ground truth.

#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "vmtag/detector.hpp"
#include "vmtag/error.hpp"
#include "vmtag/synth.hpp"

namespace vmtag {

inline constexpr std::string_view kToolVersion = "0.1.0";

enum class RoleStatus { Detected, Absent, Ambiguous };

inline std::string_view to_string(RoleStatus s) {
  switch (s) {
    case RoleStatus::Detected: return "Detected";
    case RoleStatus::Absent: return "Absent";
    case RoleStatus::Ambiguous: return "Ambiguous";
  }
  return "?";
}

struct RoleSummary {
  RoleStatus dispatch_start = RoleStatus::Absent;
  RoleStatus handlers = RoleStatus::Absent;
  RoleStatus vm_start = RoleStatus::Absent;
  RoleStatus vm_end = RoleStatus::Absent;

  bool all_detected() const {
    return dispatch_start == RoleStatus::Detected && handlers == RoleStatus::Detected &&
           vm_start == RoleStatus::Detected && vm_end == RoleStatus::Detected;
  }

  bool operator==(const RoleSummary&) const = default;
};

// Handlers inherit the dispatcher's ambiguity: they are derived from a
// tie-broken choice.
inline RoleSummary summarize(const DetectionResult& r) {
  RoleSummary s;
  const bool tied = r.has(DiagnosticCode::TiedDispatcher);
  if (r.dispatch_start) s.dispatch_start = tied ? RoleStatus::Ambiguous : RoleStatus::Detected;
  if (!r.handlers.empty()) s.handlers = tied ? RoleStatus::Ambiguous : RoleStatus::Detected;
  if (r.vm_start)
    s.vm_start = r.has(DiagnosticCode::MultipleVmStarts) ? RoleStatus::Ambiguous : RoleStatus::Detected;
  if (!r.vm_ends.empty()) s.vm_end = RoleStatus::Detected;
  return s;
}

// Index of the function whose dispatcher has the highest out-degree; the
// earliest such function on ties.
inline std::optional<std::size_t> primary_candidate(const std::vector<DetectionResult>& results) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (!results[i].dispatch_start) continue;
    if (!best || results[i].dispatch_out_degree > results[*best].dispatch_out_degree) best = i;
  }
  return best;
}

struct Report {
  std::string tool_version{kToolVersion};
  std::string input_path;
  std::vector<DetectionResult> per_function;
  std::optional<std::string> primary_candidate;
  RoleSummary summary;
  double timing_ms = 0.0;
};

inline Report make_report(std::string input_path, std::vector<DetectionResult> results,
                          double timing_ms) {
  Report r;
  r.input_path = std::move(input_path);
  r.per_function = std::move(results);
  r.timing_ms = timing_ms;
  if (const auto idx = primary_candidate(r.per_function)) {
    r.primary_candidate = r.per_function[*idx].function_name;
    r.summary = summarize(r.per_function[*idx]);
  }
  return r;
}

// 0: clean. 2: no function has a dispatcher, or a function with a dispatcher
// carries diagnostics. Functions without any hub (NoDispatcher,
// DegenerateFunction) are ordinary code and do not count.
inline int exit_code(const Report& r) {
  if (!r.primary_candidate) return 2;
  for (const auto& f : r.per_function)
    if (f.dispatch_start && !f.diagnostics.empty()) return 2;
  return 0;
}

// Exact agreement on dispatcher, handler list, VM start and VM ends.
inline bool matches_truth(const DetectionResult& r, const GroundTruth& t) {
  return r.function_name == t.function_name && r.dispatch_start == t.dispatch_label &&
         r.handlers == t.handler_labels && r.vm_start == std::optional<std::string>(t.vm_start_label) &&
         r.vm_ends == t.vm_end_labels;
}

inline const DetectionResult* find_result(const std::vector<DetectionResult>& results,
                                          std::string_view function_name) {
  for (const auto& r : results)
    if (r.function_name == function_name) return &r;
  return nullptr;
}

namespace detail {

inline nlohmann::json optional_json(const std::optional<std::string>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace detail

inline nlohmann::json to_json(const DetectionResult& r) {
  nlohmann::json diags = nlohmann::json::array();
  for (const auto& d : r.diagnostics)
    diags.push_back({{"code", std::string(to_string(d.code))}, {"detail", d.detail}});
  return {
      {"function_name", r.function_name},
      {"dispatch_start", detail::optional_json(r.dispatch_start)},
      {"dispatch_out_degree", r.dispatch_out_degree},
      {"dispatch_candidates", r.dispatch_candidates},
      {"handlers", r.handlers},
      {"vm_start", detail::optional_json(r.vm_start)},
      {"vm_start_candidates", r.vm_start_candidates},
      {"vm_ends", r.vm_ends},
      {"diagnostics", std::move(diags)},
  };
}

inline nlohmann::json to_json(const RoleSummary& s) {
  return {
      {"dispatch_start", std::string(to_string(s.dispatch_start))},
      {"handlers", std::string(to_string(s.handlers))},
      {"vm_start", std::string(to_string(s.vm_start))},
      {"vm_end", std::string(to_string(s.vm_end))},
  };
}

inline nlohmann::json to_json(const Report& r) {
  nlohmann::json functions = nlohmann::json::array();
  for (const auto& f : r.per_function) functions.push_back(to_json(f));
  return {
      {"tool_version", r.tool_version},
      {"input_path", r.input_path},
      {"primary_candidate", detail::optional_json(r.primary_candidate)},
      {"summary", to_json(r.summary)},
      {"per_function", std::move(functions)},
      {"timing_ms", r.timing_ms},
  };
}

inline std::string render_text(const Report& r) {
  std::ostringstream os;
  auto list = [](const std::vector<std::string>& v) {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "%" : ", %") + x;
    return s.empty() ? std::string("-") : s;
  };
  os << "vmtag " << r.tool_version << "  " << r.input_path << '\n';
  for (const auto& f : r.per_function) {
    os << "\n@" << f.function_name << '\n';
    os << "  dispatch start : " << (f.dispatch_start ? "%" + *f.dispatch_start : "-");
    if (f.dispatch_start) os << " (out-degree " << f.dispatch_out_degree << ")";
    os << "\n  handlers       : " << f.handlers.size();
    if (!f.handlers.empty()) os << "  [" << list(f.handlers) << "]";
    os << "\n  vm start       : " << (f.vm_start ? "%" + *f.vm_start : "-");
    os << "\n  vm end         : " << list(f.vm_ends) << '\n';
    for (const auto& d : f.diagnostics) os << "  ! " << to_string(d.code) << ": " << d.detail << '\n';
  }
  os << "\nprimary candidate: " << (r.primary_candidate ? "@" + *r.primary_candidate : "none") << '\n';
  os << "  dispatch start " << to_string(r.summary.dispatch_start) << ", handlers "
     << to_string(r.summary.handlers) << ", vm start " << to_string(r.summary.vm_start)
     << ", vm end " << to_string(r.summary.vm_end) << '\n';
  return os.str();
}

inline nlohmann::json to_json(const GroundTruth& t) {
  return {
      {"function_name", t.function_name},
      {"dispatch_label", detail::optional_json(t.dispatch_label)},
      {"handler_labels", t.handler_labels},
      {"vm_start_label", t.vm_start_label},
      {"vm_end_labels", t.vm_end_labels},
      {"mode", std::string(to_string(t.mode))},
      {"funnel", t.funnel},
      {"merged", t.merged},
  };
}

// Throws Error on a malformed document.
inline GroundTruth ground_truth_from_json(const nlohmann::json& j) {
  try {
    GroundTruth t;
    t.function_name = j.at("function_name").get<std::string>();
    if (!j.at("dispatch_label").is_null()) t.dispatch_label = j.at("dispatch_label").get<std::string>();
    t.handler_labels = j.at("handler_labels").get<std::vector<std::string>>();
    t.vm_start_label = j.at("vm_start_label").get<std::string>();
    t.vm_end_labels = j.at("vm_end_labels").get<std::vector<std::string>>();
    const auto mode = parse_dispatch_mode(j.value("mode", std::string("switch")));
    if (!mode) throw Error("ground truth: unknown mode");
    t.mode = *mode;
    t.funnel = j.value("funnel", true);
    t.merged = j.value("merged", false);
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("ground truth: ") + e.what());
  }
}

}  // namespace vmtag
