#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "vmtag/error.hpp"
#include "vmtag/ir.hpp"

namespace vmtag {

// Directed control-flow graph of one function. Successor lists hold distinct
// labels in order of first appearance in the terminator; predecessor lists
// follow layout order of the source block. Immutable once built.
class Cfg {
 public:
  explicit Cfg(const IrFunction& fn) : function_name_(fn.name) {
    nodes_.reserve(fn.blocks.size());
    for (const auto& block : fn.blocks) {
      index_.emplace(block.label, nodes_.size());
      nodes_.push_back(block.label);
    }
    succ_.resize(nodes_.size());
    pred_.resize(nodes_.size());
    succ_ids_.resize(nodes_.size());
    for (std::size_t i = 0; i < fn.blocks.size(); ++i) {
      for (const auto& target : branch_targets(fn.blocks[i].terminator)) {
        const std::size_t j = id(target);
        auto& ids = succ_ids_[i];
        if (std::find(ids.begin(), ids.end(), j) != ids.end()) continue;
        ids.push_back(j);
        succ_[i].push_back(target);
        pred_[j].push_back(nodes_[i]);
      }
    }
  }

  const std::string& function_name() const noexcept { return function_name_; }
  std::span<const std::string> nodes() const noexcept { return nodes_; }
  const std::string& entry() const { return nodes_.front(); }
  std::size_t size() const noexcept { return nodes_.size(); }

  bool contains(std::string_view label) const { return index_.find(label) != index_.end(); }

  // Position of `label` in layout order. Throws UnknownBlock.
  std::size_t id(std::string_view label) const {
    const auto it = index_.find(label);
    if (it == index_.end()) throw UnknownBlock(std::string(label));
    return it->second;
  }

  const std::vector<std::string>& successors(std::string_view label) const { return succ_[id(label)]; }
  const std::vector<std::string>& predecessors(std::string_view label) const { return pred_[id(label)]; }
  const std::vector<std::size_t>& successor_ids(std::size_t node) const { return succ_ids_[node]; }

  std::size_t out_degree(std::string_view label) const { return successors(label).size(); }

  std::size_t edge_count() const {
    std::size_t n = 0;
    for (const auto& s : succ_) n += s.size();
    return n;
  }

  // Labels reachable from `src` over one or more edges. `src` itself is in
  // the result only when it lies on a cycle.
  std::set<std::string> reachable_from(std::string_view src) const {
    std::vector<char> seen(nodes_.size(), 0);
    std::vector<std::size_t> stack(succ_ids_[id(src)]);
    for (auto n : stack) seen[n] = 1;
    while (!stack.empty()) {
      const auto n = stack.back();
      stack.pop_back();
      for (auto m : succ_ids_[n]) {
        if (!seen[m]) {
          seen[m] = 1;
          stack.push_back(m);
        }
      }
    }
    std::set<std::string> out;
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      if (seen[i]) out.insert(nodes_[i]);
    return out;
  }

  bool reaches(std::string_view from, std::string_view to) const {
    return reachable_from(from).contains(std::string(to));
  }

 private:
  std::string function_name_;
  std::vector<std::string> nodes_;
  std::map<std::string, std::size_t, std::less<>> index_;
  std::vector<std::vector<std::string>> succ_;
  std::vector<std::vector<std::string>> pred_;
  std::vector<std::vector<std::size_t>> succ_ids_;
};

inline Cfg build_cfg(const IrFunction& fn) { return Cfg(fn); }

inline std::size_t out_degree(const Cfg& g, std::string_view label) { return g.out_degree(label); }

inline std::set<std::string> reachable_from(const Cfg& g, std::string_view src) {
  return g.reachable_from(src);
}

// Graphviz rendering; edges are emitted in successor-list order.
inline std::string to_dot(const Cfg& g) {
  auto quote = [](const std::string& s) { return "\"" + s + "\""; };
  std::ostringstream os;
  os << "digraph " << quote(g.function_name()) << " {\n";
  os << "  node [shape=box];\n";
  for (const auto& n : g.nodes()) os << "  " << quote(n) << ";\n";
  for (const auto& n : g.nodes())
    for (const auto& s : g.successors(n)) os << "  " << quote(n) << " -> " << quote(s) << ";\n";
  os << "}\n";
  return os.str();
}

}  // namespace vmtag
