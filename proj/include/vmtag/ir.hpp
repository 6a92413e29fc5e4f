#pragma once

// In-memory model of the textual IR subset: modules, functions, basic blocks,
// instructions and terminators. Operands are kept as opaque text; only the
// control-flow skeleton and direct call sites are interpreted.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

namespace vmtag {

struct Instruction {
  enum class Kind { Call, Assign, Store, Load, Other };

  Kind kind = Kind::Other;
  // Only meaningful for Kind::Call.
  std::string callee;
  std::size_t arg_count = 0;
  // Source line with surrounding whitespace removed.
  std::string raw_text;

  static Instruction call(std::string callee, std::size_t arg_count,
                          std::string raw_text) {
    return {Kind::Call, std::move(callee), arg_count, std::move(raw_text)};
  }
  static Instruction opaque(Kind kind, std::string raw_text) {
    return {kind, {}, 0, std::move(raw_text)};
  }

  bool is_call() const noexcept { return kind == Kind::Call; }

  bool operator==(const Instruction&) const = default;
};

struct Ret {
  // Returned operand, e.g. "i32 0". Empty for a bare `ret`.
  std::string value;
  bool operator==(const Ret&) const = default;
};

struct Unreachable {
  bool operator==(const Unreachable&) const = default;
};

struct Br {
  std::string target;
  bool operator==(const Br&) const = default;
};

struct CondBr {
  std::string cond;
  std::string then_target;
  std::string else_target;
  bool operator==(const CondBr&) const = default;
};

struct SwitchCase {
  std::int64_t value = 0;
  std::string target;
  bool operator==(const SwitchCase&) const = default;
};

struct Switch {
  std::string scrutinee;
  std::string default_target;
  // Type written in front of each case constant in `.ll` input ("i32");
  // empty for the bare `<int>, label %L` form.
  std::string case_type;
  std::vector<SwitchCase> cases;
  bool operator==(const Switch&) const = default;
};

struct IndirectBr {
  std::string address;
  std::vector<std::string> targets;
  bool operator==(const IndirectBr&) const = default;
};

using Terminator = std::variant<Ret, Unreachable, Br, CondBr, Switch, IndirectBr>;

// Every label named by `t`, in textual order, duplicates included.
inline std::vector<std::string> branch_targets(const Terminator& t) {
  return std::visit(
      [](const auto& term) -> std::vector<std::string> {
        using T = std::decay_t<decltype(term)>;
        if constexpr (std::is_same_v<T, Br>) {
          return {term.target};
        } else if constexpr (std::is_same_v<T, CondBr>) {
          return {term.then_target, term.else_target};
        } else if constexpr (std::is_same_v<T, Switch>) {
          std::vector<std::string> out{term.default_target};
          for (const auto& c : term.cases) out.push_back(c.target);
          return out;
        } else if constexpr (std::is_same_v<T, IndirectBr>) {
          return term.targets;
        } else {
          return {};
        }
      },
      t);
}

inline std::string_view terminator_name(const Terminator& t) {
  constexpr std::string_view names[] = {"ret",    "unreachable", "br",
                                        "br",     "switch",      "indirectbr"};
  return names[t.index()];
}

struct BasicBlock {
  std::string label;
  std::vector<Instruction> body;
  Terminator terminator = Unreachable{};

  bool operator==(const BasicBlock&) const = default;
};

struct Param {
  std::string type;
  // Without the leading '%'. May be empty for unnamed parameters.
  std::string name;
  bool operator==(const Param&) const = default;
};

struct IrFunction {
  std::string name;
  std::vector<Param> params;
  // Layout order. The first block is the entry.
  std::vector<BasicBlock> blocks;

  const std::string& entry() const { return blocks.front().label; }

  const BasicBlock* find_block(std::string_view label) const {
    auto it = std::find_if(blocks.begin(), blocks.end(),
                           [&](const BasicBlock& b) { return b.label == label; });
    return it == blocks.end() ? nullptr : &*it;
  }

  bool operator==(const IrFunction&) const = default;
};

struct IrModule {
  std::string source_name;
  std::vector<IrFunction> functions;
  std::vector<std::string> declared_externals;

  const IrFunction* find_function(std::string_view name) const {
    auto it = std::find_if(functions.begin(), functions.end(),
                           [&](const IrFunction& f) { return f.name == name; });
    return it == functions.end() ? nullptr : &*it;
  }

  bool declares(std::string_view name) const {
    return std::find(declared_externals.begin(), declared_externals.end(),
                     name) != declared_externals.end();
  }

  bool operator==(const IrModule&) const = default;
};

// Equality of everything the printer preserves: functions, blocks,
// instructions, terminators and declarations. `source_name` is ignored.
inline bool structurally_equal(const IrModule& a, const IrModule& b) {
  return a.functions == b.functions &&
         a.declared_externals == b.declared_externals;
}

}  // namespace vmtag
