#pragma once

// Generator for interpreter-shaped functions with known structure, plus the
// single-branch block merging that optimizing compilers apply to them.
//
// Generated layout of the virtualized function:
//
//   entry        prologue (allocas), falls into the VM
//   init         VM start: sets up the virtual program counter
//   dispatch     hub: `switch` on the opcode, or `indirectbr` through the
//                common computed-goto block for both threaded modes
//   h*, h*.k     handlers, each a chain of `body_blocks` blocks; non-exit
//                handlers branch back to the hub
//   default      switch mode only: the switch default, loops back
//   exit*        one epilogue per exit handler, ends in `ret`

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "vmtag/cfg.hpp"
#include "vmtag/error.hpp"
#include "vmtag/ir.hpp"

namespace vmtag {

enum class DispatchMode { SwitchLoop, DirectThreaded, IndirectThreaded };

inline std::string_view to_string(DispatchMode mode) {
  switch (mode) {
    case DispatchMode::SwitchLoop: return "switch";
    case DispatchMode::DirectThreaded: return "direct";
    case DispatchMode::IndirectThreaded: return "indirect";
  }
  return "?";
}

inline std::optional<DispatchMode> parse_dispatch_mode(std::string_view s) {
  if (s == "switch") return DispatchMode::SwitchLoop;
  if (s == "direct") return DispatchMode::DirectThreaded;
  if (s == "indirect") return DispatchMode::IndirectThreaded;
  return std::nullopt;
}

struct SynthConfig {
  DispatchMode mode = DispatchMode::SwitchLoop;
  std::size_t handler_count = 12;
  std::size_t exit_handler_count = 1;
  std::size_t handler_body_blocks = 1;
  std::uint64_t seed = 7;
  std::size_t extra_plain_functions = 2;
  // false: no common dispatch block; every handler ends in its own computed
  // goto over all handlers. Only meaningful for the threaded modes.
  bool funnel = true;

  void validate() const {
    if (handler_count < 2) throw InvalidConfig("handler_count must be at least 2");
    if (exit_handler_count < 1 || exit_handler_count > handler_count)
      throw InvalidConfig("exit_handler_count must be in [1, handler_count]");
    if (handler_body_blocks < 1) throw InvalidConfig("handler_body_blocks must be at least 1");
    if (!funnel && mode == DispatchMode::SwitchLoop)
      throw InvalidConfig("the funnel-less variant applies to threaded modes only");
  }
};

struct GroundTruth {
  std::string function_name;
  // Absent for funnel-less output, which has no hub.
  std::optional<std::string> dispatch_label;
  std::vector<std::string> handler_labels;
  std::string vm_start_label;
  std::vector<std::string> vm_end_labels;

  DispatchMode mode = DispatchMode::SwitchLoop;
  bool funnel = true;
  bool merged = false;

  bool operator==(const GroundTruth&) const = default;
};

struct SynthOutput {
  IrModule module;
  GroundTruth truth;
};

namespace detail {

class Synthesizer {
 public:
  explicit Synthesizer(const SynthConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {}

  SynthOutput run() {
    cfg_.validate();
    char tag[8];
    std::snprintf(tag, sizeof tag, "%04x", static_cast<unsigned>(draw(0x10000)));
    tag_ = tag;

    SynthOutput out;
    out.module.source_name = "synth-" + std::string(to_string(cfg_.mode)) + "-" +
                             std::to_string(cfg_.seed) + ".vmir";
    out.module.declared_externals.push_back("printf");
    for (std::size_t k = 0; k < cfg_.extra_plain_functions; ++k) {
      plain_names_.push_back("fn_" + tag_ + "_" + std::to_string(k));
      out.module.functions.push_back(plain_function(plain_names_.back(), k % 2 == 1));
    }
    out.module.functions.push_back(vm_function(out.truth));
    out.truth.mode = cfg_.mode;
    out.truth.funnel = cfg_.funnel;
    return out;
  }

 private:
  std::uint64_t draw(std::uint64_t n) { return rng_() % n; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[draw(i)]);
  }

  std::string temp() { return "%t" + std::to_string(next_temp_++); }

  // One or two lines of register-machine noise.
  void filler(std::vector<Instruction>& body, bool allow_calls) {
    const std::size_t lines = 1 + draw(2);
    for (std::size_t i = 0; i < lines; ++i) {
      const std::string prev = last_temp_.empty() ? "0" : last_temp_;
      const std::string t = temp();
      switch (draw(allow_calls && !plain_names_.empty() ? 5 : 4)) {
        case 0:
          body.push_back(Instruction::opaque(
              Instruction::Kind::Load,
              t + " = load i32, ptr %regs." + std::to_string(draw(8)) + ", align 4"));
          break;
        case 1:
          body.push_back(Instruction::opaque(
              Instruction::Kind::Assign,
              t + " = add nsw i32 " + prev + ", " + std::to_string(1 + draw(255))));
          break;
        case 2:
          body.push_back(Instruction::opaque(
              Instruction::Kind::Store,
              "store i32 " + prev + ", ptr %regs." + std::to_string(draw(8)) + ", align 4"));
          continue;  // no new temp defined
        case 3:
          body.push_back(Instruction::opaque(
              Instruction::Kind::Assign,
              t + " = xor i32 " + prev + ", " + std::to_string(draw(65536))));
          break;
        default: {
          const auto& callee = plain_names_[draw(plain_names_.size())];
          body.push_back(Instruction::call(callee, 1, t + " = call i32 @" + callee + "(i32 " + prev + ")"));
          break;
        }
      }
      last_temp_ = t;
    }
  }

  IrFunction plain_function(const std::string& name, bool single_branch) {
    IrFunction fn;
    fn.name = name;
    fn.params.push_back({"i32", "x"});
    last_temp_ = "%x";
    BasicBlock entry{"entry", {}, Unreachable{}};
    filler(entry.body, false);
    if (!single_branch) {
      entry.terminator = Ret{"i32 " + last_temp_};
      fn.blocks.push_back(std::move(entry));
      return fn;
    }
    entry.terminator = Br{"tail"};
    BasicBlock tail{"tail", {}, Unreachable{}};
    filler(tail.body, false);
    tail.terminator = Ret{"i32 " + last_temp_};
    fn.blocks.push_back(std::move(entry));
    fn.blocks.push_back(std::move(tail));
    return fn;
  }

  IrFunction vm_function(GroundTruth& truth) {
    const std::string p = "vz" + tag_ + ".";
    const std::size_t n = cfg_.handler_count;
    const bool threaded = cfg_.mode != DispatchMode::SwitchLoop;

    IrFunction fn;
    fn.name = "main";
    fn.params = {{"i32", "argc"}, {"ptr", "argv"}};
    last_temp_.clear();

    // Opcode of handler k, and the handler label numbering, are both seeded.
    std::vector<std::size_t> opcode(n);
    std::iota(opcode.begin(), opcode.end(), std::size_t{0});
    shuffle(opcode);
    const std::size_t label_base = draw(1000);
    std::vector<std::string> handler(n);
    for (std::size_t k = 0; k < n; ++k) handler[k] = p + "h" + std::to_string(label_base + k);

    std::vector<std::size_t> by_opcode(n);
    for (std::size_t k = 0; k < n; ++k) by_opcode[opcode[k]] = k;
    std::vector<std::string> jump_table;
    for (std::size_t op = 0; op < n; ++op) jump_table.push_back(handler[by_opcode[op]]);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(order);
    std::set<std::size_t> exits(order.begin(), order.begin() + cfg_.exit_handler_count);

    const std::string dispatch = p + "dispatch";
    const std::string init = p + "init";
    const std::string dflt = p + "default";
    const std::string code = "@_TIG_VZ_" + tag_ + "_main_$array";

    auto computed_goto = [&](const std::string& pc_slot) {
      IndirectBr ib;
      ib.address = "ptr " + pc_slot;
      ib.targets = jump_table;
      return ib;
    };

    BasicBlock entry{"entry", {}, Br{init}};
    entry.body.push_back(Instruction::opaque(Instruction::Kind::Assign, "%vpc = alloca ptr, align 8"));
    entry.body.push_back(Instruction::opaque(Instruction::Kind::Assign, "%regs = alloca [8 x i32], align 16"));
    fn.blocks.push_back(std::move(entry));

    BasicBlock start{init, {}, Br{dispatch}};
    start.body.push_back(Instruction::opaque(Instruction::Kind::Store, "store ptr " + code + ", ptr %vpc, align 8"));
    if (!cfg_.funnel) {
      start.body.push_back(Instruction::opaque(Instruction::Kind::Load, "%target.init = load ptr, ptr %vpc, align 8"));
      start.terminator = computed_goto("%target.init");
    }
    fn.blocks.push_back(std::move(start));

    if (cfg_.funnel) {
      BasicBlock hub{dispatch, {}, Unreachable{}};
      hub.body.push_back(Instruction::opaque(Instruction::Kind::Load, "%pc = load ptr, ptr %vpc, align 8"));
      if (cfg_.mode == DispatchMode::SwitchLoop) {
        hub.body.push_back(Instruction::opaque(Instruction::Kind::Load, "%op = load i32, ptr %pc, align 4"));
        Switch sw;
        sw.scrutinee = "i32 %op";
        sw.default_target = dflt;
        sw.case_type = "i32";
        for (std::size_t op = 0; op < n; ++op)
          sw.cases.push_back({static_cast<std::int64_t>(op), jump_table[op]});
        hub.terminator = std::move(sw);
      } else if (cfg_.mode == DispatchMode::DirectThreaded) {
        hub.body.push_back(Instruction::opaque(Instruction::Kind::Load, "%target = load ptr, ptr %pc, align 8"));
        hub.terminator = computed_goto("%target");
      } else {
        hub.body.push_back(Instruction::opaque(Instruction::Kind::Load, "%op = load i32, ptr %pc, align 4"));
        hub.body.push_back(Instruction::opaque(
            Instruction::Kind::Assign, "%slot = getelementptr inbounds [" + std::to_string(n) +
                                           " x ptr], ptr @_TIG_VZ_" + tag_ + "_jumptab, i64 0, i32 %op"));
        hub.body.push_back(Instruction::opaque(Instruction::Kind::Load, "%target = load ptr, ptr %slot, align 8"));
        hub.terminator = computed_goto("%target");
      }
      fn.blocks.push_back(std::move(hub));
    }

    std::vector<BasicBlock> handler_blocks;
    std::vector<BasicBlock> epilogues;
    for (std::size_t k : order) {
      const bool is_exit = exits.contains(k);
      for (std::size_t j = 0; j < cfg_.handler_body_blocks; ++j) {
        BasicBlock b{j == 0 ? handler[k] : handler[k] + "." + std::to_string(j), {}, Unreachable{}};
        filler(b.body, true);
        if (j + 1 < cfg_.handler_body_blocks) {
          b.terminator = Br{handler[k] + "." + std::to_string(j + 1)};
        } else if (is_exit) {
          const std::string epi = p + "exit" + std::to_string(epilogues.size());
          b.terminator = Br{epi};
          BasicBlock e{epi, {}, Unreachable{}};
          e.body.push_back(Instruction::call(
              "printf", 2, "%r" + std::to_string(epilogues.size()) +
                               " = call i32 @printf(ptr @.str, i32 " + last_temp_ + ")"));
          e.terminator = Ret{"i32 0"};
          epilogues.push_back(std::move(e));
        } else if (cfg_.funnel) {
          b.terminator = Br{dispatch};
        } else {
          const std::string slot = "%target." + handler[k].substr(p.size());
          b.body.push_back(Instruction::opaque(Instruction::Kind::Load, slot + " = load ptr, ptr %vpc, align 8"));
          b.terminator = computed_goto(slot);
        }
        handler_blocks.push_back(std::move(b));
      }
    }
    for (auto& b : handler_blocks) fn.blocks.push_back(std::move(b));
    if (!threaded) {
      BasicBlock d{dflt, {}, Br{dispatch}};
      filler(d.body, false);
      fn.blocks.push_back(std::move(d));
    }
    for (auto& e : epilogues) fn.blocks.push_back(std::move(e));

    truth.function_name = fn.name;
    truth.vm_start_label = init;
    if (cfg_.funnel) truth.dispatch_label = dispatch;
    if (!threaded) truth.handler_labels.push_back(dflt);
    for (const auto& h : jump_table) {
      truth.handler_labels.push_back(h);
    }
    for (const auto& h : truth.handler_labels) {
      const auto k = std::find(handler.begin(), handler.end(), h) - handler.begin();
      if (static_cast<std::size_t>(k) < n && exits.contains(static_cast<std::size_t>(k)))
        truth.vm_end_labels.push_back(h);
    }
    return fn;
  }

  SynthConfig cfg_;
  std::mt19937_64 rng_;
  std::string tag_;
  std::vector<std::string> plain_names_;
  std::size_t next_temp_ = 0;
  std::string last_temp_;
};

}  // namespace detail

// Deterministic in `cfg.seed`. Throws InvalidConfig.
inline SynthOutput generate(const SynthConfig& cfg) { return detail::Synthesizer(cfg).run(); }

// Folds every block `b` into `a` when `a` ends in `br label %b` and `a` is
// b's only predecessor. The merged block keeps a's label and b's terminator.
// Runs to a fixpoint; the entry block is never folded into a predecessor.
inline IrFunction merge_blocks(const IrFunction& fn) {
  IrFunction out = fn;
  bool changed = true;
  while (changed) {
    changed = false;
    const Cfg g(out);
    std::vector<char> removed(out.blocks.size(), 0);
    for (std::size_t a = 0; a < out.blocks.size(); ++a) {
      if (removed[a]) continue;
      while (const Br* br = std::get_if<Br>(&out.blocks[a].terminator)) {
        const std::size_t b = g.id(br->target);
        if (b == a || b == 0 || removed[b] || g.predecessors(br->target).size() != 1) break;
        auto& dst = out.blocks[a];
        auto& src = out.blocks[b];
        dst.body.insert(dst.body.end(), std::make_move_iterator(src.body.begin()),
                        std::make_move_iterator(src.body.end()));
        dst.terminator = std::move(src.terminator);
        removed[b] = 1;
        changed = true;
      }
    }
    std::vector<BasicBlock> kept;
    kept.reserve(out.blocks.size());
    for (std::size_t i = 0; i < out.blocks.size(); ++i)
      if (!removed[i]) kept.push_back(std::move(out.blocks[i]));
    out.blocks = std::move(kept);
  }
  return out;
}

inline IrModule merge_transform(const IrModule& m) {
  IrModule out = m;
  for (auto& fn : out.functions) fn = merge_blocks(fn);
  return out;
}

}  // namespace vmtag
