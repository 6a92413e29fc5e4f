#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <string>

#include "oracles.hpp"
#include "vmtag/detector.hpp"
#include "vmtag/parser.hpp"
#include "vmtag/printer.hpp"
#include "vmtag/synth.hpp"

namespace vmtag {
namespace {

bool contains(const std::vector<std::string>& v, const std::string& x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

const IrFunction& vm_fn(const SynthOutput& s) { return *s.module.find_function(s.truth.function_name); }

TEST(FindDispatchStart, SwitchCorpusPicksTheSwitchBlock) {
  const auto gen = generate({});
  const auto graphs = testing::text_graphs(print_module(gen.module));
  // Independent max scan over the printed terminators.
  std::string best;
  std::size_t best_degree = 0;
  for (const auto& b : vm_fn(gen).blocks) {
    const auto d = graphs.at("main").at(b.label).size();
    if (d > best_degree) {
      best = b.label;
      best_degree = d;
    }
  }
  const auto r = find_dispatch_start(Cfg(vm_fn(gen)));
  ASSERT_TRUE(r.dispatch);
  EXPECT_EQ(*r.dispatch, best);
  EXPECT_EQ(*r.dispatch, *gen.truth.dispatch_label);
  EXPECT_EQ(best_degree, 13u);
  EXPECT_EQ(r.candidates, std::vector<std::string>{best});
  EXPECT_TRUE(r.diagnostics.empty());
}

TEST(FindDispatchStart, SingleBlockIsDegenerate) {
  const auto r = find_dispatch_start(Cfg(parse_module("define @f() {\nentry:\n  ret\n}\n").functions[0]));
  EXPECT_FALSE(r.dispatch);
  ASSERT_EQ(r.diagnostics.size(), 1u);
  EXPECT_EQ(r.diagnostics[0].code, DiagnosticCode::DegenerateFunction);
}

TEST(FindDispatchStart, StraightLineHasNoDispatcher) {
  const auto r = find_dispatch_start(
      Cfg(parse_module("define @f() {\na:\n  br label %b\nb:\n  ret\n}\n").functions[0]));
  EXPECT_FALSE(r.dispatch);
  EXPECT_TRUE(r.candidates.empty());
  ASSERT_EQ(r.diagnostics.size(), 1u);
  EXPECT_EQ(r.diagnostics[0].code, DiagnosticCode::NoDispatcher);
}

// A -> {B, C}; B -> D; C -> {D, E}; D -> E; E returns.
constexpr const char* kDiamond =
    "define @f() {\n"
    "A:\n  br i1 %p, label %B, label %C\n"
    "B:\n  br label %D\n"
    "C:\n  br i1 %q, label %D, label %E\n"
    "D:\n  br label %E\n"
    "E:\n  ret\n}\n";

TEST(FindDispatchStart, TieGoesToEarliestBlock) {
  const auto m = parse_module(kDiamond);
  const auto graphs = testing::text_graphs(kDiamond);
  std::vector<std::string> maximal;
  std::size_t best = 0;
  for (const auto& b : m.functions[0].blocks) best = std::max(best, graphs.at("f").at(b.label).size());
  for (const auto& b : m.functions[0].blocks)
    if (graphs.at("f").at(b.label).size() == best) maximal.push_back(b.label);
  ASSERT_EQ(maximal, (std::vector<std::string>{"A", "C"}));

  const auto r = find_dispatch_start(Cfg(m.functions[0]));
  EXPECT_EQ(r.dispatch, "A");
  EXPECT_EQ(r.candidates, maximal);
  ASSERT_EQ(r.diagnostics.size(), 1u);
  EXPECT_EQ(r.diagnostics[0].code, DiagnosticCode::TiedDispatcher);
}

TEST(FindHandlers, SwitchCorpusMatchesCaseList) {
  const auto gen = generate({});
  const auto& fn = vm_fn(gen);
  const auto& sw = std::get<Switch>(fn.find_block(*gen.truth.dispatch_label)->terminator);
  std::vector<std::string> expected{sw.default_target};
  for (const auto& c : sw.cases) expected.push_back(c.target);
  const auto handlers = find_handlers(Cfg(fn), *gen.truth.dispatch_label);
  EXPECT_EQ(handlers.size(), 13u);
  EXPECT_EQ(handlers, expected);
}

TEST(FindHandlers, SelfLoopKeepsDispatcher) {
  const auto m = parse_module(
      "define @f() {\nhub:\n  switch i32 %x, label %hub [ 0, label %a 1, label %b ]\n"
      "a:\n  br label %hub\nb:\n  ret\n}\n");
  const Cfg g(m.functions[0]);
  EXPECT_EQ(find_handlers(g, "hub"), (std::vector<std::string>{"hub", "a", "b"}));
  const auto r = detect_function(m.functions[0]);
  EXPECT_TRUE(contains(r.handlers, "hub"));
}

TEST(FindHandlers, IndirectCorpusIsTheJumpTable) {
  SynthConfig cfg;
  cfg.mode = DispatchMode::IndirectThreaded;
  const auto gen = generate(cfg);
  const auto& ib = std::get<IndirectBr>(vm_fn(gen).find_block(*gen.truth.dispatch_label)->terminator);
  std::vector<std::string> dedup;
  for (const auto& t : ib.targets)
    if (!contains(dedup, t)) dedup.push_back(t);
  EXPECT_EQ(find_handlers(Cfg(vm_fn(gen)), *gen.truth.dispatch_label), dedup);
  EXPECT_EQ(dedup, gen.truth.handler_labels);

  const auto m = parse_module(
      "define @f() {\nhub:\n  indirectbr ptr %t, [ label %a, label %b, label %a ]\n"
      "a:\n  br label %hub\nb:\n  ret\n}\n");
  EXPECT_EQ(find_handlers(Cfg(m.functions[0]), "hub"), (std::vector<std::string>{"a", "b"}));
}

TEST(FindVmStart, InitBlockOfUnmergedCorpus) {
  for (auto mode : {DispatchMode::SwitchLoop, DispatchMode::DirectThreaded, DispatchMode::IndirectThreaded}) {
    SynthConfig cfg;
    cfg.mode = mode;
    cfg.handler_body_blocks = 3;
    const auto gen = generate(cfg);
    const Cfg g(vm_fn(gen));
    const auto& hub = *gen.truth.dispatch_label;
    const auto r = find_vm_start(g, vm_fn(gen), hub, find_handlers(g, hub));
    EXPECT_EQ(r.vm_start, gen.truth.vm_start_label);
    EXPECT_EQ(r.candidates.size(), 1u);
    EXPECT_TRUE(r.diagnostics.empty());
    // Handlers that branch back are never candidates.
    for (const auto& p : g.predecessors(hub)) {
      if (p != gen.truth.vm_start_label) {
        EXPECT_FALSE(contains(r.candidates, p));
      }
    }
  }
}

TEST(FindVmStart, MergedCorpusHasNoVmStart) {
  const auto merged = merge_transform(generate({}).module);
  const auto r = detect_function(*merged.find_function("main"));
  EXPECT_FALSE(r.vm_start);
  EXPECT_TRUE(r.has(DiagnosticCode::NoVmStart));

  DetectOptions structural;
  structural.boundary_mode = BoundaryMode::Structural;
  const auto literal = detect_function(*merged.find_function("main"), structural);
  EXPECT_EQ(literal.vm_start, "entry");
}

TEST(FindVmStart, EntryIsDispatcher) {
  const auto m = parse_module(
      "define @f() {\nhub:\n  switch i32 %x, label %a [ 0, label %b ]\n"
      "a:\n  br label %hub\nb:\n  ret\n}\n");
  for (auto mode : {BoundaryMode::Isolated, BoundaryMode::Structural}) {
    DetectOptions opt;
    opt.boundary_mode = mode;
    const auto r = detect_function(m.functions[0], opt);
    EXPECT_FALSE(r.vm_start);
    EXPECT_TRUE(r.has(DiagnosticCode::NoVmStart));
  }
}

TEST(FindVmStart, SeveralEntriesAreReported) {
  const auto m = parse_module(
      "define @f() {\n"
      "entry:\n  br i1 %c, label %s1, label %s2\n"
      "s1:\n  br label %hub\n"
      "s2:\n  br label %hub\n"
      "hub:\n  indirectbr ptr %t, [ label %a, label %b, label %x ]\n"
      "a:\n  br label %hub\nb:\n  br label %hub\nx:\n  ret\n}\n");
  const auto r = detect_function(m.functions[0]);
  EXPECT_EQ(r.vm_start, "s1");
  EXPECT_EQ(r.vm_start_candidates, (std::vector<std::string>{"s1", "s2"}));
  EXPECT_TRUE(r.has(DiagnosticCode::MultipleVmStarts));
}

TEST(FindVmStart, CallClauseForDispatcherInAnotherFunction) {
  const auto m = parse_module(
      "define @vm() {\n"
      "hub:\n  switch i32 %x, label %a [ 0, label %b ]\n"
      "a:\n  br label %hub\nb:\n  ret\n}\n"
      "define @caller() {\n"
      "entry:\n  br label %a\n"
      "a:\n  call @vm()\n  br label %done\n"
      "done:\n  ret\n}\n");
  const Cfg g(m.functions[0]);
  const auto handlers = find_handlers(g, "hub");
  const auto r = find_vm_start(g, m.functions[1], "hub", handlers);
  EXPECT_EQ(r.vm_start, "a");
  EXPECT_EQ(r.candidates, std::vector<std::string>{"a"});
  // Label "a" is also a handler name in @vm.
  ASSERT_EQ(r.diagnostics.size(), 1u);
  EXPECT_EQ(r.diagnostics[0].code, DiagnosticCode::VmStartIsHandler);
}

TEST(FindVmEnd, ExitHandlerOfSwitchCorpus) {
  const auto gen = generate({});
  const auto r = detect_function(vm_fn(gen));
  EXPECT_EQ(r.vm_ends, gen.truth.vm_end_labels);
  ASSERT_EQ(r.vm_ends.size(), 1u);
}

TEST(FindVmEnd, HandlerEndingInRet) {
  // Exit handler %x returns directly: a VM end under the literal rule; under
  // the isolation rule it has absorbed the code after the VM.
  const auto m = parse_module(
      "define @f() {\nentry:\n  br label %init\ninit:\n  br label %hub\n"
      "hub:\n  switch i32 %x, label %a [ 0, label %b 1, label %x ]\n"
      "a:\n  br label %hub\nb:\n  br label %hub\nx:\n  ret\n}\n");
  const Cfg g(m.functions[0]);
  DetectOptions structural;
  structural.boundary_mode = BoundaryMode::Structural;
  EXPECT_EQ(find_vm_end(g, "hub", find_handlers(g, "hub"), structural).vm_ends, std::vector<std::string>{"x"});
  const auto isolated = find_vm_end(g, "hub", find_handlers(g, "hub"));
  EXPECT_TRUE(isolated.vm_ends.empty());
  ASSERT_EQ(isolated.diagnostics.size(), 1u);
  EXPECT_EQ(isolated.diagnostics[0].code, DiagnosticCode::NoVmEnd);
}

TEST(FindVmEnd, AllHandlersLoopBack) {
  const auto m = parse_module(
      "define @f() {\nentry:\n  br label %init\ninit:\n  br label %hub\n"
      "hub:\n  switch i32 %x, label %a [ 0, label %b ]\n"
      "a:\n  br label %hub\nb:\n  br label %hub\n}\n");
  const auto r = detect_function(m.functions[0]);
  EXPECT_TRUE(r.vm_ends.empty());
  EXPECT_TRUE(r.has(DiagnosticCode::NoVmEnd));
}

TEST(FindVmEnd, MultiBlockHandlerRejoiningIsNotAnEnd) {
  const std::string text =
      "define @f() {\nentry:\n  br label %init\ninit:\n  br label %hub\n"
      "hub:\n  switch i32 %x, label %h0 [ 0, label %h1 1, label %h2 ]\n"
      "h0:\n  br label %hub\n"
      "h1:\n  br label %h1.1\n"
      "h1.1:\n  br label %hub\n"
      "h2:\n  br label %out\n"
      "out:\n  ret\n}\n";
  const auto m = parse_module(text);
  const auto graphs = testing::text_graphs(text);
  ASSERT_TRUE(testing::bfs_path(graphs.at("f"), "h1", "hub"));
  const auto r = detect_function(m.functions[0]);
  EXPECT_EQ(r.vm_ends, std::vector<std::string>{"h2"});

  DetectOptions direct;
  direct.vm_end_mode = VmEndMode::Direct;
  const auto literal = detect_function(m.functions[0], direct);
  EXPECT_EQ(literal.vm_ends, (std::vector<std::string>{"h1", "h2"}));
}

TEST(Detect, OneObfuscatedAmongPlainFunctions) {
  const auto gen = generate({});  // two plain functions
  const auto results = detect(gen.module);
  ASSERT_EQ(results.size(), 3u);
  std::size_t hubs = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    EXPECT_EQ(results[i].function_name, gen.module.functions[i].name);
    if (results[i].dispatch_start && results[i].dispatch_out_degree > 2) ++hubs;
  }
  EXPECT_EQ(hubs, 1u);
}

TEST(Detect, EmptyModule) { EXPECT_TRUE(detect(IrModule{}).empty()); }

TEST(Detect, EveryModeUnmergedShowsAllFourStructures) {
  for (auto mode : {DispatchMode::SwitchLoop, DispatchMode::DirectThreaded, DispatchMode::IndirectThreaded}) {
    SynthConfig cfg;
    cfg.mode = mode;
    const auto gen = generate(cfg);
    const auto r = detect_function(vm_fn(gen));
    EXPECT_TRUE(r.dispatch_start);
    EXPECT_FALSE(r.handlers.empty());
    EXPECT_TRUE(r.vm_start);
    EXPECT_FALSE(r.vm_ends.empty());
    EXPECT_TRUE(r.diagnostics.empty());
  }
}

TEST(Detect, FunnelLessThreadedCodeTies) {
  SynthConfig cfg;
  cfg.mode = DispatchMode::DirectThreaded;
  cfg.funnel = false;
  const auto r = detect_function(vm_fn(generate(cfg)));
  EXPECT_TRUE(r.has(DiagnosticCode::TiedDispatcher));
  EXPECT_GT(r.dispatch_candidates.size(), 1u);
}

// Layout permutations (entry kept first) must not matter when nothing is tie-broken.
TEST(DetectProperties, InvariantsOnRandomAndGeneratedFunctions) {
  std::mt19937_64 rng(2024);
  std::vector<IrFunction> fns;
  for (int i = 0; i < 300; ++i) fns.push_back(testing::random_function(rng, 2 + rng() % 11));
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SynthConfig cfg;
    cfg.mode = static_cast<DispatchMode>(seed % 3);
    cfg.handler_count = 2 + seed % 7;
    cfg.exit_handler_count = 1 + seed % 2;
    cfg.handler_body_blocks = 1 + seed % 4;
    cfg.seed = seed;
    fns.push_back(vm_fn(generate(cfg)));
  }

  for (const auto& fn : fns) {
    for (auto boundary : {BoundaryMode::Isolated, BoundaryMode::Structural}) {
      DetectOptions opt;
      opt.boundary_mode = boundary;
      const Cfg g(fn);
      const auto r = detect_function(fn, opt);
      EXPECT_EQ(r, detect_function(fn, opt));  // determinism
      EXPECT_EQ(r.has(DiagnosticCode::TiedDispatcher), r.dispatch_candidates.size() > 1);
      if (!r.dispatch_start) {
        EXPECT_TRUE(r.handlers.empty());
        continue;
      }
      for (const auto& label : g.nodes()) EXPECT_GE(r.dispatch_out_degree, g.out_degree(label));
      EXPECT_EQ(r.dispatch_out_degree, g.out_degree(*r.dispatch_start));
      EXPECT_TRUE(contains(r.dispatch_candidates, *r.dispatch_start));
      EXPECT_EQ(r.handlers, g.successors(*r.dispatch_start));
      if (r.vm_start && !r.has(DiagnosticCode::VmStartIsHandler)) {
        EXPECT_FALSE(contains(r.handlers, *r.vm_start));
      }

      IrModule single;
      single.functions.push_back(fn);
      const auto graphs = testing::text_graphs(print_module(single));
      const auto& tg = graphs.at(fn.name);
      for (const auto& h : r.handlers) {
        const bool path = testing::bfs_path(tg, h, *r.dispatch_start);
        if (contains(r.vm_ends, h)) {
          EXPECT_FALSE(path) << h;
        } else if (boundary == BoundaryMode::Structural) {
          EXPECT_TRUE(path) << h;
        } else {
          EXPECT_TRUE(path || g.out_degree(h) == 0) << h;
        }
      }

      if (r.dispatch_candidates.size() == 1 && r.vm_start_candidates.size() <= 1) {
        IrFunction shuffled = fn;
        for (int k = 0; k < 3; ++k) {
          std::shuffle(shuffled.blocks.begin() + 1, shuffled.blocks.end(), rng);
          EXPECT_EQ(detect_function(shuffled, opt), r);
        }
      }
    }
  }
}

}  // namespace
}  // namespace vmtag
