#pragma once

// Structural recognition of a virtualization interpreter inside one function:
//
//   dispatch start  block with the largest number of distinct successors
//   handlers        every successor of the dispatch start
//   VM start        predecessor of the dispatch start that enters the loop
//   VM end          handler from which the dispatch start is never reached
//
// Anything the graph leaves undecided (ties, several entries, no exit) is
// reported through diagnostics instead of being guessed silently.

#include <algorithm>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "vmtag/cfg.hpp"
#include "vmtag/ir.hpp"

namespace vmtag {

enum class DiagnosticCode {
  TiedDispatcher,
  NoDispatcher,
  MultipleVmStarts,
  NoVmStart,
  NoVmEnd,
  VmStartIsHandler,
  DegenerateFunction,
};

inline std::string_view to_string(DiagnosticCode code) {
  switch (code) {
    case DiagnosticCode::TiedDispatcher: return "TiedDispatcher";
    case DiagnosticCode::NoDispatcher: return "NoDispatcher";
    case DiagnosticCode::MultipleVmStarts: return "MultipleVmStarts";
    case DiagnosticCode::NoVmStart: return "NoVmStart";
    case DiagnosticCode::NoVmEnd: return "NoVmEnd";
    case DiagnosticCode::VmStartIsHandler: return "VmStartIsHandler";
    case DiagnosticCode::DegenerateFunction: return "DegenerateFunction";
  }
  return "?";
}

struct Diagnostic {
  DiagnosticCode code;
  std::string detail;
  bool operator==(const Diagnostic&) const = default;
};

// How "instead of branching back to the dispatcher" is read for VM ends.
enum class VmEndMode {
  Reachability,  // the dispatcher is not reachable at all from the handler
  Direct,        // the handler's own terminator does not target the dispatcher
};

// Whether VM start/end blocks must be separate from code outside the VM.
enum class BoundaryMode {
  // A VM start that is the function entry block, or a VM end that returns or
  // traps by itself, shares its block with non-VM code and is not reported.
  Isolated,
  // Plain graph definitions with no separation requirement.
  Structural,
};

struct DetectOptions {
  VmEndMode vm_end_mode = VmEndMode::Reachability;
  BoundaryMode boundary_mode = BoundaryMode::Isolated;
};

struct DetectionResult {
  std::string function_name;
  std::optional<std::string> dispatch_start;
  std::size_t dispatch_out_degree = 0;
  std::vector<std::string> dispatch_candidates;
  std::vector<std::string> handlers;
  std::optional<std::string> vm_start;
  std::vector<std::string> vm_start_candidates;
  std::vector<std::string> vm_ends;
  std::vector<Diagnostic> diagnostics;

  bool has(DiagnosticCode code) const {
    return std::any_of(diagnostics.begin(), diagnostics.end(),
                       [&](const Diagnostic& d) { return d.code == code; });
  }

  bool operator==(const DetectionResult&) const = default;
};

struct DispatchSearch {
  std::optional<std::string> dispatch;
  std::vector<std::string> candidates;
  std::vector<Diagnostic> diagnostics;
};

struct VmStartSearch {
  std::optional<std::string> vm_start;
  std::vector<std::string> candidates;
  std::vector<Diagnostic> diagnostics;
};

struct VmEndSearch {
  std::vector<std::string> vm_ends;
  std::vector<Diagnostic> diagnostics;
};

inline DispatchSearch find_dispatch_start(const Cfg& g) {
  DispatchSearch out;
  if (g.size() < 2) {
    out.diagnostics.push_back({DiagnosticCode::DegenerateFunction,
                               "function has " + std::to_string(g.size()) + " block(s)"});
    return out;
  }
  std::size_t best = 0;
  for (const auto& label : g.nodes()) best = std::max(best, g.out_degree(label));
  if (best <= 1) {
    out.diagnostics.push_back({DiagnosticCode::NoDispatcher, "no block has more than one successor"});
    return out;
  }
  for (const auto& label : g.nodes())
    if (g.out_degree(label) == best) out.candidates.push_back(label);
  out.dispatch = out.candidates.front();
  if (out.candidates.size() > 1) {
    std::string detail = std::to_string(out.candidates.size()) + " blocks share out-degree " +
                         std::to_string(best) + ":";
    for (const auto& c : out.candidates) detail += " %" + c;
    out.diagnostics.push_back({DiagnosticCode::TiedDispatcher, std::move(detail)});
  }
  return out;
}

inline std::vector<std::string> find_handlers(const Cfg& g, std::string_view dispatch) {
  return g.successors(dispatch);
}

// `caller` is the function being searched for VM start blocks. When it is the
// function that owns `dispatch` (the usual case), candidates are the
// dispatcher's predecessors that are neither handlers nor themselves reached
// from the dispatcher, i.e. edges entering the interpreter loop rather than
// returning to it. When `caller` is another function, candidates are its
// blocks that call the dispatcher's function.
inline VmStartSearch find_vm_start(const Cfg& g, const IrFunction& caller, std::string_view dispatch,
                                   const std::vector<std::string>& handlers,
                                   const DetectOptions& options = {}) {
  VmStartSearch out;
  const auto is_handler = [&](const std::string& label) {
    return std::find(handlers.begin(), handlers.end(), label) != handlers.end();
  };
  std::string rejected_entry;

  if (caller.name == g.function_name()) {
    const auto in_loop = g.reachable_from(dispatch);
    const auto& preds = g.predecessors(dispatch);
    // Predecessor lists are already in layout order.
    for (const auto& p : preds) {
      if (is_handler(p) || in_loop.contains(p)) continue;
      if (options.boundary_mode == BoundaryMode::Isolated && p == g.entry()) {
        rejected_entry = p;
        continue;
      }
      out.candidates.push_back(p);
    }
  } else {
    for (const auto& block : caller.blocks) {
      const bool calls = std::any_of(block.body.begin(), block.body.end(), [&](const Instruction& i) {
        return i.is_call() && i.callee == g.function_name();
      });
      if (calls) out.candidates.push_back(block.label);
    }
  }

  if (out.candidates.empty()) {
    std::string detail = "dispatcher %" + std::string(dispatch) + " has no entering predecessor";
    if (!rejected_entry.empty())
      detail = "VM start is merged with the function entry %" + rejected_entry;
    out.diagnostics.push_back({DiagnosticCode::NoVmStart, std::move(detail)});
    return out;
  }
  out.vm_start = out.candidates.front();
  if (out.candidates.size() > 1) {
    std::string detail = std::to_string(out.candidates.size()) + " entering blocks:";
    for (const auto& c : out.candidates) detail += " %" + c;
    out.diagnostics.push_back({DiagnosticCode::MultipleVmStarts, std::move(detail)});
  }
  if (is_handler(*out.vm_start)) {
    out.diagnostics.push_back(
        {DiagnosticCode::VmStartIsHandler, "%" + *out.vm_start + " is also a handler"});
  }
  return out;
}

inline VmStartSearch find_vm_start(const Cfg& g, std::string_view dispatch,
                                   const std::vector<std::string>& handlers,
                                   const DetectOptions& options = {}) {
  IrFunction self;
  self.name = g.function_name();
  return find_vm_start(g, self, dispatch, handlers, options);
}

inline VmEndSearch find_vm_end(const Cfg& g, std::string_view dispatch,
                               const std::vector<std::string>& handlers,
                               const DetectOptions& options = {}) {
  VmEndSearch out;
  std::vector<std::string> self_terminating;
  for (const auto& h : handlers) {
    bool returns_to_dispatch = false;
    if (options.vm_end_mode == VmEndMode::Reachability) {
      returns_to_dispatch = g.reaches(h, dispatch);
    } else {
      const auto& succ = g.successors(h);
      returns_to_dispatch = std::find(succ.begin(), succ.end(), dispatch) != succ.end();
    }
    if (returns_to_dispatch) continue;
    if (options.boundary_mode == BoundaryMode::Isolated && g.out_degree(h) == 0) {
      self_terminating.push_back(h);
      continue;
    }
    out.vm_ends.push_back(h);
  }
  if (out.vm_ends.empty()) {
    std::string detail = "every handler branches back to %" + std::string(dispatch);
    if (!self_terminating.empty()) {
      detail = "exit handler(s) merged with code after the VM:";
      for (const auto& h : self_terminating) detail += " %" + h;
    }
    out.diagnostics.push_back({DiagnosticCode::NoVmEnd, std::move(detail)});
  }
  return out;
}

inline DetectionResult detect_function(const IrFunction& fn, const DetectOptions& options = {}) {
  DetectionResult r;
  r.function_name = fn.name;
  const Cfg g(fn);
  auto dispatch = find_dispatch_start(g);
  r.diagnostics = std::move(dispatch.diagnostics);
  r.dispatch_candidates = std::move(dispatch.candidates);
  if (!dispatch.dispatch) return r;

  const std::string& hub = *dispatch.dispatch;
  r.dispatch_start = hub;
  r.dispatch_out_degree = g.out_degree(hub);
  r.handlers = find_handlers(g, hub);

  auto start = find_vm_start(g, fn, hub, r.handlers, options);
  r.vm_start = std::move(start.vm_start);
  r.vm_start_candidates = std::move(start.candidates);
  r.diagnostics.insert(r.diagnostics.end(), start.diagnostics.begin(), start.diagnostics.end());

  auto end = find_vm_end(g, hub, r.handlers, options);
  r.vm_ends = std::move(end.vm_ends);
  r.diagnostics.insert(r.diagnostics.end(), end.diagnostics.begin(), end.diagnostics.end());
  return r;
}

// One result per defined function, in module order.
inline std::vector<DetectionResult> detect(const IrModule& m, const DetectOptions& options = {}) {
  std::vector<DetectionResult> out;
  out.reserve(m.functions.size());
  for (const auto& fn : m.functions) out.push_back(detect_function(fn, options));
  return out;
}

}  // namespace vmtag
