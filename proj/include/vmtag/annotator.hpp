#pragma once

// Carries detection results into the IR itself: every recognised block gets
// a call to an empty marker function as its first instruction, so the roles
// survive later lowering. Markers add no control flow.

#include <algorithm>
#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "vmtag/detector.hpp"
#include "vmtag/error.hpp"
#include "vmtag/ir.hpp"
#include "vmtag/printer.hpp"

namespace vmtag {

struct MarkerSpec {
  std::string dispatch_marker = "__vmtag_dispatch_start";
  std::string handler_marker = "__vmtag_handler";
  std::string vm_start_marker = "__vmtag_vm_start";
  std::string vm_end_marker = "__vmtag_vm_end";

  static MarkerSpec with_prefix(const std::string& prefix) {
    return {prefix + "dispatch_start", prefix + "handler", prefix + "vm_start", prefix + "vm_end"};
  }

  std::array<const std::string*, 4> names() const {
    return {&dispatch_marker, &handler_marker, &vm_start_marker, &vm_end_marker};
  }

  bool is_marker(std::string_view callee) const {
    const auto all = names();
    return std::any_of(all.begin(), all.end(), [&](const std::string* n) { return *n == callee; });
  }
};

namespace detail {

inline Instruction marker_call(const std::string& name) {
  return Instruction::call(name, 0, "call " + global_ref(name) + "()");
}

inline Instruction handler_call(const std::string& name, std::size_t ordinal) {
  return Instruction::call(name, 1, "call " + global_ref(name) + "(i32 " + std::to_string(ordinal) + ")");
}

}  // namespace detail

// Throws MarkerCollision when a marker name is not pairwise distinct or is
// already defined or declared in `m`.
inline IrModule annotate(const IrModule& m, const std::vector<DetectionResult>& results,
                         const MarkerSpec& spec = {}) {
  const auto names = spec.names();
  for (std::size_t i = 0; i < names.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j)
      if (*names[i] == *names[j]) throw MarkerCollision(*names[i]);
    if (m.find_function(*names[i]) || m.declares(*names[i])) throw MarkerCollision(*names[i]);
  }

  IrModule out = m;
  std::array<bool, 4> used{};
  for (const auto& r : results) {
    auto fn = std::find_if(out.functions.begin(), out.functions.end(),
                           [&](const IrFunction& f) { return f.name == r.function_name; });
    if (fn == out.functions.end()) continue;
    for (auto& block : fn->blocks) {
      std::vector<Instruction> markers;
      if (r.dispatch_start == block.label) {
        markers.push_back(detail::marker_call(spec.dispatch_marker));
        used[0] = true;
      }
      const auto h = std::find(r.handlers.begin(), r.handlers.end(), block.label);
      if (h != r.handlers.end()) {
        markers.push_back(detail::handler_call(
            spec.handler_marker, static_cast<std::size_t>(h - r.handlers.begin())));
        used[1] = true;
      }
      if (r.vm_start == block.label) {
        markers.push_back(detail::marker_call(spec.vm_start_marker));
        used[2] = true;
      }
      if (std::find(r.vm_ends.begin(), r.vm_ends.end(), block.label) != r.vm_ends.end()) {
        markers.push_back(detail::marker_call(spec.vm_end_marker));
        used[3] = true;
      }
      block.body.insert(block.body.begin(), markers.begin(), markers.end());
    }
  }
  for (std::size_t i = 0; i < names.size(); ++i)
    if (used[i]) out.declared_externals.push_back(*names[i]);
  return out;
}

inline IrModule strip_markers(const IrModule& m, const MarkerSpec& spec = {}) {
  IrModule out = m;
  for (auto& fn : out.functions) {
    for (auto& block : fn.blocks) {
      std::erase_if(block.body,
                    [&](const Instruction& i) { return i.is_call() && spec.is_marker(i.callee); });
    }
  }
  std::erase_if(out.declared_externals, [&](const std::string& n) { return spec.is_marker(n); });
  return out;
}

}  // namespace vmtag
