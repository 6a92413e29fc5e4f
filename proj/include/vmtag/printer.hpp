#pragma once

#include <sstream>
#include <string>
#include <type_traits>
#include <variant>

#include "vmtag/ir.hpp"

namespace vmtag {

inline std::string global_ref(const std::string& name) {
  for (char c : name) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '_' || c == '.' || c == '$' || c == '-';
    if (!ok) return "@\"" + name + "\"";
  }
  return "@" + name;
}

inline std::string print_terminator(const Terminator& t) {
  return std::visit(
      [](const auto& term) -> std::string {
        using T = std::decay_t<decltype(term)>;
        if constexpr (std::is_same_v<T, Ret>) {
          return term.value.empty() ? "ret" : "ret " + term.value;
        } else if constexpr (std::is_same_v<T, Unreachable>) {
          return "unreachable";
        } else if constexpr (std::is_same_v<T, Br>) {
          return "br label %" + term.target;
        } else if constexpr (std::is_same_v<T, CondBr>) {
          return "br " + term.cond + ", label %" + term.then_target + ", label %" + term.else_target;
        } else if constexpr (std::is_same_v<T, Switch>) {
          std::string out = "switch " + term.scrutinee + ", label %" + term.default_target + " [";
          for (const auto& c : term.cases) {
            out += ' ';
            if (!term.case_type.empty()) out += term.case_type + ' ';
            out += std::to_string(c.value) + ", label %" + c.target;
          }
          return out + " ]";
        } else {
          std::string out = "indirectbr " + term.address + ", [";
          for (std::size_t i = 0; i < term.targets.size(); ++i) {
            out += i ? ", label %" : " label %";
            out += term.targets[i];
          }
          return out + " ]";
        }
      },
      t);
}

inline void print_function(std::ostream& os, const IrFunction& fn) {
  os << "define " << global_ref(fn.name) << '(';
  for (std::size_t i = 0; i < fn.params.size(); ++i) {
    const auto& p = fn.params[i];
    if (i) os << ", ";
    os << p.type;
    if (!p.name.empty()) os << (p.type.empty() ? "%" : " %") << p.name;
  }
  os << ") {\n";
  for (const auto& block : fn.blocks) {
    os << block.label << ":\n";
    for (const auto& inst : block.body) os << "  " << inst.raw_text << '\n';
    os << "  " << print_terminator(block.terminator) << '\n';
  }
  os << "}\n";
}

// Declarations first, then one definition per function separated by a blank
// line. Every block label is written explicitly.
inline std::string print_module(const IrModule& m) {
  std::ostringstream os;
  for (const auto& name : m.declared_externals) os << "declare " << global_ref(name) << '\n';
  for (std::size_t i = 0; i < m.functions.size(); ++i) {
    if (i || !m.declared_externals.empty()) os << '\n';
    print_function(os, m.functions[i]);
  }
  return os.str();
}

}  // namespace vmtag
