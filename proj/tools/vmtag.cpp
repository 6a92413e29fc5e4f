// vmtag: locate the dispatcher, handlers and VM entry/exit of
// virtualization-obfuscated functions in textual IR.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "vmtag/vmtag.hpp"

namespace fs = std::filesystem;

namespace {

struct GlobalOptions {
  std::string format = "json";
  std::string out;
  std::string dot;
  std::string vm_end_mode = "reachability";
  std::string boundary_mode = "isolated";
  std::string marker_prefix = "__vmtag_";
};

std::optional<std::string> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool write_output(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return true;
  }
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) {
    std::cerr << "error: cannot write " << path << '\n';
    return false;
  }
  return true;
}

vmtag::DetectOptions detect_options(const GlobalOptions& g) {
  vmtag::DetectOptions o;
  o.vm_end_mode = g.vm_end_mode == "direct" ? vmtag::VmEndMode::Direct : vmtag::VmEndMode::Reachability;
  o.boundary_mode =
      g.boundary_mode == "structural" ? vmtag::BoundaryMode::Structural : vmtag::BoundaryMode::Isolated;
  return o;
}

std::optional<vmtag::IrModule> load_module(const std::string& path) {
  const auto text = read_file(path);
  if (!text) {
    std::cerr << "error: cannot read " << path << '\n';
    return std::nullopt;
  }
  try {
    return vmtag::parse_module(*text, path);
  } catch (const vmtag::Error& e) {
    std::cerr << path << ": " << e.what() << '\n';
    return std::nullopt;
  }
}

bool write_dot(const GlobalOptions& g, const vmtag::IrModule& m) {
  if (g.dot.empty()) return true;
  std::string text;
  for (const auto& fn : m.functions) text += vmtag::to_dot(vmtag::build_cfg(fn));
  std::ofstream out(g.dot, std::ios::binary);
  out << text;
  if (!out) {
    std::cerr << "error: cannot write " << g.dot << '\n';
    return false;
  }
  return true;
}

int cmd_analyze(const GlobalOptions& g, const std::string& path) {
  const auto module = load_module(path);
  if (!module) return 1;
  const auto t0 = std::chrono::steady_clock::now();
  auto results = vmtag::detect(*module, detect_options(g));
  const double ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  const auto report = vmtag::make_report(path, std::move(results), ms);
  const std::string text =
      g.format == "text" ? vmtag::render_text(report) : vmtag::to_json(report).dump(2) + "\n";
  if (!write_output(g.out, text) || !write_dot(g, *module)) return 1;
  return vmtag::exit_code(report);
}

int cmd_annotate(const GlobalOptions& g, const std::string& path) {
  const auto module = load_module(path);
  if (!module) return 1;
  try {
    const auto results = vmtag::detect(*module, detect_options(g));
    const auto annotated =
        vmtag::annotate(*module, results, vmtag::MarkerSpec::with_prefix(g.marker_prefix));
    if (!write_output(g.out, vmtag::print_module(annotated)) || !write_dot(g, *module)) return 1;
  } catch (const vmtag::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

struct SynthFlags {
  std::string mode = "switch";
  std::size_t handlers = 12;
  std::size_t exits = 1;
  std::size_t body_blocks = 1;
  std::uint64_t seed = 7;
  std::size_t plain = 2;
  bool merge = false;
  bool no_funnel = false;
};

int cmd_synth(const GlobalOptions& g, const SynthFlags& f) {
  vmtag::SynthConfig cfg;
  cfg.mode = *vmtag::parse_dispatch_mode(f.mode);
  cfg.handler_count = f.handlers;
  cfg.exit_handler_count = f.exits;
  cfg.handler_body_blocks = f.body_blocks;
  cfg.seed = f.seed;
  cfg.extra_plain_functions = f.plain;
  cfg.funnel = !f.no_funnel;
  try {
    auto sample = vmtag::generate(cfg);
    if (f.merge) {
      sample.module = vmtag::merge_transform(sample.module);
      sample.truth.merged = true;
    }
    if (!write_output(g.out, vmtag::print_module(sample.module))) return 1;
    if (!g.out.empty()) {
      fs::path truth = g.out;
      if (truth.extension() == ".vmir") truth.replace_extension();
      truth += ".truth.json";
      if (!write_output(truth.string(), vmtag::to_json(sample.truth).dump(2) + "\n")) return 1;
    }
  } catch (const vmtag::InvalidConfig& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

int cmd_matrix(const GlobalOptions& g, bool format_given, const std::vector<std::string>& modes,
               const std::string& corpus_dir) {
  const auto options = detect_options(g);
  vmtag::Matrix mx;
  if (corpus_dir.empty()) {
    std::vector<vmtag::DispatchMode> selected;
    for (const auto& m : modes) selected.push_back(*vmtag::parse_dispatch_mode(m));
    mx = vmtag::synthetic_matrix(selected, options);
  } else {
    std::error_code ec;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(corpus_dir, ec))
      if (entry.path().extension() == ".vmir") files.push_back(entry.path());
    if (ec) {
      std::cerr << "error: cannot list " << corpus_dir << ": " << ec.message() << '\n';
      return 1;
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      fs::path truth_path = file;
      truth_path.replace_extension();
      truth_path += ".truth.json";
      const auto truth_text = read_file(truth_path);
      if (!truth_text) {
        std::cerr << "error: missing ground truth " << truth_path.string() << '\n';
        return 1;
      }
      const auto module = load_module(file.string());
      if (!module) return 1;
      try {
        const auto truth = vmtag::ground_truth_from_json(nlohmann::json::parse(*truth_text));
        mx.rows.push_back(vmtag::score_sample(*module, truth, file.filename().string(), options));
      } catch (const std::exception& e) {
        std::cerr << truth_path.string() << ": " << e.what() << '\n';
        return 1;
      }
    }
  }
  const bool json = format_given && g.format == "json";
  const std::string text = json ? vmtag::to_json(mx).dump(2) + "\n" : vmtag::render_text(mx);
  if (!write_output(g.out, text)) return 1;
  return mx.ok() ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Static detection of virtualization-obfuscation structure in textual IR"};
  app.set_version_flag("--version", std::string(vmtag::kToolVersion));
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  auto* format_opt =
      app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"json", "text"}));
  app.add_option("--out", g.out, "Write output to PATH instead of stdout");
  app.add_option("--dot", g.dot, "Write the CFG of every function as Graphviz DOT to PATH");
  app.add_option("--vm-end-mode", g.vm_end_mode, "How a handler counts as returning to the dispatcher")
      ->check(CLI::IsMember({"reachability", "direct"}));
  app.add_option("--boundary-mode", g.boundary_mode,
                 "Whether VM start/end must be separate from non-VM code")
      ->check(CLI::IsMember({"isolated", "structural"}));
  app.add_option("--marker-prefix", g.marker_prefix, "Prefix of the marker function names");

  std::string input;
  auto* analyze = app.add_subcommand("analyze", "Detect structures and print a report");
  analyze->add_option("path", input, "IR file (.vmir or .ll)")->required();

  auto* annotate = app.add_subcommand("annotate", "Insert marker calls and print the IR");
  annotate->add_option("path", input, "IR file (.vmir or .ll)")->required();

  SynthFlags sf;
  auto* synth = app.add_subcommand("synth", "Generate an obfuscated sample with ground truth");
  synth->add_option("--mode", sf.mode)->check(CLI::IsMember({"switch", "direct", "indirect"}));
  synth->add_option("--handlers", sf.handlers);
  synth->add_option("--exits", sf.exits);
  synth->add_option("--body-blocks", sf.body_blocks);
  synth->add_option("--seed", sf.seed);
  synth->add_option("--plain", sf.plain);
  synth->add_flag("--merge", sf.merge, "Apply single-branch block merging");
  synth->add_flag("--no-funnel", sf.no_funnel, "Threaded modes: no common dispatch block");

  std::vector<std::string> modes{"switch", "direct", "indirect"};
  std::string corpus_dir;
  auto* matrix = app.add_subcommand("matrix", "Print the O/X detection matrix");
  matrix->add_option("--modes", modes, "Dispatch modes to include")
      ->delimiter(',')
      ->check(CLI::IsMember({"switch", "direct", "indirect"}));
  matrix->add_option("--corpus-dir", corpus_dir, "Directory of .vmir + .truth.json pairs");

  CLI11_PARSE(app, argc, argv);

  if (*analyze) return cmd_analyze(g, input);
  if (*annotate) return cmd_annotate(g, input);
  if (*synth) return cmd_synth(g, sf);
  return cmd_matrix(g, format_opt->count() > 0, modes, corpus_dir);
}
