#pragma once

// Line-oriented reader for the IR subset (`.vmir`) that also tolerates real
// textual LLVM modules (`.ll`): top-level constructs other than `define` and
// `declare` are skipped and unrecognised in-body lines become opaque
// instructions. Only terminators must parse.

#include <charconv>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "vmtag/error.hpp"
#include "vmtag/ir.hpp"

namespace vmtag {
namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline bool starts_with_word(std::string_view s, std::string_view word) {
  return s.starts_with(word) &&
         (s.size() == word.size() || s[word.size()] == ' ' || s[word.size()] == '\t');
}

// Drops a trailing `; comment`, ignoring semicolons inside string literals.
inline std::string_view strip_comment(std::string_view s) {
  bool in_quote = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') in_quote = !in_quote;
    else if (s[i] == ';' && !in_quote) return s.substr(0, i);
  }
  return s;
}

inline bool is_ident_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
         c == '_' || c == '.' || c == '$' || c == '-';
}

inline bool is_identifier(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!is_ident_char(c)) return false;
  return true;
}

// Splits on commas that are not nested in (), [], {}, <> or quotes.
inline std::vector<std::string_view> split_top_level(std::string_view s) {
  std::vector<std::string_view> parts;
  int depth = 0;
  bool in_quote = false;
  std::size_t start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (c == '"') in_quote = !in_quote;
    if (in_quote) continue;
    if (c == '(' || c == '[' || c == '{' || c == '<') ++depth;
    else if (c == ')' || c == ']' || c == '}' || c == '>') --depth;
    else if (c == ',' && depth == 0) {
      parts.push_back(trim(s.substr(start, i - start)));
      start = i + 1;
    }
  }
  parts.push_back(trim(s.substr(start)));
  return parts;
}

// Index of the parenthesis matching the one at `open`, or npos.
inline std::size_t matching_paren(std::string_view s, std::size_t open) {
  int depth = 0;
  bool in_quote = false;
  for (std::size_t i = open; i < s.size(); ++i) {
    if (s[i] == '"') in_quote = !in_quote;
    if (in_quote) continue;
    if (s[i] == '(') ++depth;
    else if (s[i] == ')' && --depth == 0) return i;
  }
  return std::string_view::npos;
}

// Reads a global name starting right after '@'. Handles `@"quoted name"`.
inline std::optional<std::pair<std::string, std::size_t>> read_global_name(
    std::string_view s, std::size_t at) {
  std::size_t i = at + 1;
  if (i < s.size() && s[i] == '"') {
    const auto close = s.find('"', i + 1);
    if (close == std::string_view::npos) return std::nullopt;
    return std::pair{std::string(s.substr(i + 1, close - i - 1)), close + 1};
  }
  const std::size_t begin = i;
  while (i < s.size() && is_ident_char(s[i])) ++i;
  if (i == begin) return std::nullopt;
  return std::pair{std::string(s.substr(begin, i - begin)), i};
}

inline std::size_t count_args(std::string_view args) {
  args = trim(args);
  if (args.empty()) return 0;
  return split_top_level(args).size();
}

// `%x = load ...`, `store ...`, `call @f(...)` and friends.
inline Instruction classify_instruction(std::string_view line) {
  std::string raw(line);
  std::string_view rest = line;
  bool assigns = false;
  if (rest.starts_with('%')) {
    const auto eq = rest.find('=');
    if (eq != std::string_view::npos) {
      assigns = true;
      rest = trim(rest.substr(eq + 1));
    }
  }
  for (std::string_view prefix : {"tail", "musttail", "notail"}) {
    if (starts_with_word(rest, prefix)) {
      rest = trim(rest.substr(prefix.size()));
      break;
    }
  }
  if (starts_with_word(rest, "call")) {
    // Direct callee: the first `@name(` after the keyword.
    for (std::size_t at = rest.find('@'); at != std::string_view::npos;
         at = rest.find('@', at + 1)) {
      const auto name = read_global_name(rest, at);
      if (!name || name->second >= rest.size() || rest[name->second] != '(') continue;
      const auto close = matching_paren(rest, name->second);
      if (close == std::string_view::npos) break;
      return Instruction::call(
          name->first, count_args(rest.substr(name->second + 1, close - name->second - 1)),
          std::move(raw));
    }
    return Instruction::opaque(Instruction::Kind::Other, std::move(raw));
  }
  if (starts_with_word(rest, "store")) return Instruction::opaque(Instruction::Kind::Store, std::move(raw));
  if (assigns && starts_with_word(rest, "load"))
    return Instruction::opaque(Instruction::Kind::Load, std::move(raw));
  if (assigns) return Instruction::opaque(Instruction::Kind::Assign, std::move(raw));
  return Instruction::opaque(Instruction::Kind::Other, std::move(raw));
}

inline bool is_terminator_keyword(std::string_view line) {
  for (std::string_view kw : {"ret", "br", "switch", "indirectbr", "unreachable", "invoke",
                              "resume", "callbr", "catchswitch", "catchret", "cleanupret"}) {
    if (starts_with_word(line, kw) || line == kw) return true;
  }
  return false;
}

class ModuleParser {
 public:
  ModuleParser(std::string_view text, std::string source_name) : text_(text) {
    module_.source_name = std::move(source_name);
  }

  IrModule run() {
    while (next_line()) {
      if (line_.empty()) continue;
      if (starts_with_word(line_, "define")) {
        parse_function();
      } else if (starts_with_word(line_, "declare")) {
        parse_declaration();
      }
      // Anything else at top level (globals, attributes, metadata) is skipped.
    }
    for (const auto& name : module_.declared_externals) {
      if (module_.find_function(name))
        throw ParseError(line_no_, "@" + name + " is both declared and defined");
    }
    return std::move(module_);
  }

 private:
  // Advances to the next line; `line_` holds it trimmed and comment-free.
  bool next_line() {
    if (pos_ >= text_.size()) return false;
    auto end = text_.find('\n', pos_);
    if (end == std::string_view::npos) end = text_.size();
    line_ = trim(strip_comment(text_.substr(pos_, end - pos_)));
    pos_ = end + 1;
    ++line_no_;
    return true;
  }

  [[noreturn]] void fail(const std::string& reason) const { throw ParseError(line_no_, reason); }

  void parse_declaration() {
    const auto at = line_.find('@');
    if (at == std::string_view::npos) fail("declaration without a function name");
    const auto name = read_global_name(line_, at);
    if (!name) fail("malformed declaration");
    if (module_.declares(name->first)) fail("duplicate declaration of @" + name->first);
    module_.declared_externals.push_back(name->first);
  }

  void parse_function() {
    IrFunction fn;
    const auto at = line_.find('@');
    if (at == std::string_view::npos) fail("function definition without a name");
    const auto name = read_global_name(line_, at);
    if (!name || name->second >= line_.size() || line_[name->second] != '(')
      fail("malformed function header");
    fn.name = name->first;
    if (module_.find_function(fn.name)) fail("duplicate definition of @" + fn.name);
    const auto close = matching_paren(line_, name->second);
    if (close == std::string_view::npos) fail("unterminated parameter list");
    if (!line_.ends_with('{')) fail("expected '{' at end of function header");
    const auto params = trim(line_.substr(name->second + 1, close - name->second - 1));
    if (!params.empty()) {
      for (auto p : split_top_level(params)) {
        const auto space = p.find_last_of(" \t");
        const auto last = space == std::string_view::npos ? p : p.substr(space + 1);
        if (last.starts_with('%')) {
          fn.params.push_back({std::string(trim(p.substr(0, p.size() - last.size()))),
                               std::string(last.substr(1))});
        } else {
          fn.params.push_back({std::string(p), {}});
        }
      }
    }

    std::set<std::string, std::less<>> labels;
    bool open = false;  // current block still awaits its terminator
    const std::size_t header_line = line_no_;
    bool closed = false;
    while (next_line()) {
      if (line_.empty()) continue;
      if (line_ == "}") {
        closed = true;
        break;
      }
      if (line_.ends_with(':') && is_identifier(line_.substr(0, line_.size() - 1))) {
        if (open) fail("block %" + fn.blocks.back().label + " has no terminator");
        std::string label(line_.substr(0, line_.size() - 1));
        if (!labels.insert(label).second) throw DuplicateLabel(fn.name, label);
        fn.blocks.push_back({std::move(label), {}, Unreachable{}});
        open = true;
        continue;
      }
      if (!open) {
        if (!fn.blocks.empty()) fail("instruction after terminator without a block label");
        labels.insert("entry");
        fn.blocks.push_back({"entry", {}, Unreachable{}});
        open = true;
      }
      if (is_terminator_keyword(line_)) {
        fn.blocks.back().terminator = parse_terminator(fn.name);
        open = false;
      } else {
        fn.blocks.back().body.push_back(classify_instruction(line_));
      }
    }
    if (!closed) throw ParseError(header_line, "function @" + fn.name + " is not closed by '}'");
    if (open) fail("block %" + fn.blocks.back().label + " has no terminator");
    if (fn.blocks.empty()) fail("function @" + fn.name + " has no blocks");

    for (const auto& block : fn.blocks) {
      for (const auto& target : branch_targets(block.terminator)) {
        if (!labels.contains(target)) throw UnresolvedLabel(fn.name, target);
      }
    }
    module_.functions.push_back(std::move(fn));
  }

  std::string label_ref(std::string_view s) const {
    s = trim(s);
    if (!starts_with_word(s, "label")) fail("expected 'label %<name>', got '" + std::string(s) + "'");
    s = trim(s.substr(5));
    if (!s.starts_with('%') || !is_identifier(s.substr(1)))
      fail("malformed label reference '" + std::string(s) + "'");
    return std::string(s.substr(1));
  }

  // Drops `, !name !N` metadata attachments from the end of a terminator.
  static std::string_view without_metadata(std::string_view s) {
    auto parts = split_top_level(s);
    std::size_t keep = parts.size();
    while (keep > 1 && parts[keep - 1].starts_with('!')) --keep;
    if (keep == parts.size()) return s;
    const auto* end = parts[keep - 1].data() + parts[keep - 1].size();
    return s.substr(0, static_cast<std::size_t>(end - s.data()));
  }

  Terminator parse_terminator(const std::string& fn_name) {
    std::string text(line_);
    const std::size_t start_line = line_no_;
    if ((starts_with_word(line_, "switch") || starts_with_word(line_, "indirectbr")) &&
        line_.find('[') != std::string_view::npos && line_.find(']') == std::string_view::npos) {
      while (true) {
        if (!next_line()) throw ParseError(start_line, "unterminated '[' in terminator");
        text += ' ';
        text += line_;
        if (line_.find(']') != std::string_view::npos) break;
      }
    }
    const std::string_view t = text;

    if (t == "unreachable") return Unreachable{};
    if (starts_with_word(t, "ret") || t == "ret") {
      return Ret{std::string(trim(without_metadata(trim(t.substr(3)))))};
    }
    if (starts_with_word(t, "br")) {
      const auto parts = split_top_level(without_metadata(trim(t.substr(2))));
      if (parts.size() == 1) return Br{label_ref(parts[0])};
      if (parts.size() == 3) {
        return CondBr{std::string(parts[0]), label_ref(parts[1]), label_ref(parts[2])};
      }
      throw ParseError(start_line, "malformed br");
    }
    if (starts_with_word(t, "switch")) return parse_switch(t, start_line);
    if (starts_with_word(t, "indirectbr")) {
      const auto open = t.find('[');
      const auto close = t.rfind(']');
      if (open == std::string_view::npos || close == std::string_view::npos || close < open)
        throw IndirectTargetsUnknown(fn_name, start_line);
      auto head = trim(t.substr(10, open - 10));
      if (!head.ends_with(',')) throw ParseError(start_line, "malformed indirectbr");
      IndirectBr out;
      out.address = std::string(trim(head.substr(0, head.size() - 1)));
      const auto list = trim(t.substr(open + 1, close - open - 1));
      if (list.empty()) throw IndirectTargetsUnknown(fn_name, start_line);
      for (auto item : split_top_level(list)) out.targets.push_back(label_ref(item));
      return out;
    }
    throw ParseError(start_line, "unsupported terminator '" + std::string(t.substr(0, t.find(' '))) + "'");
  }

  Switch parse_switch(std::string_view t, std::size_t start_line) const {
    const auto open = t.find('[');
    const auto close = t.rfind(']');
    if (open == std::string_view::npos || close == std::string_view::npos || close < open)
      throw ParseError(start_line, "switch without a case list");
    const auto head = trim(t.substr(6, open - 6));
    const auto comma = split_top_level(head);
    if (comma.size() != 2) throw ParseError(start_line, "malformed switch header");
    Switch sw;
    sw.scrutinee = std::string(comma[0]);
    sw.default_target = label_ref(comma[1]);

    // Cases: `[type] <int>, label %L` repeated, whitespace separated.
    std::vector<std::string_view> tokens;
    const auto body = t.substr(open + 1, close - open - 1);
    std::size_t i = 0;
    while (i < body.size()) {
      while (i < body.size() && (body[i] == ' ' || body[i] == '\t' || body[i] == ',')) ++i;
      const std::size_t b = i;
      while (i < body.size() && body[i] != ' ' && body[i] != '\t' && body[i] != ',') ++i;
      if (i > b) tokens.push_back(body.substr(b, i - b));
    }
    std::set<std::int64_t> seen;
    bool first = true;
    for (std::size_t k = 0; k < tokens.size();) {
      std::string type;
      if (k + 1 < tokens.size() && tokens[k + 1] != "label") type = std::string(tokens[k++]);
      if (k + 2 >= tokens.size() || tokens[k + 1] != "label")
        throw ParseError(start_line, "malformed switch case");
      std::int64_t value = 0;
      const auto num = tokens[k];
      const auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), value);
      if (ec != std::errc() || ptr != num.data() + num.size())
        throw ParseError(start_line, "switch case constant '" + std::string(num) + "' is not an integer");
      const auto target = tokens[k + 2];
      if (!target.starts_with('%') || !is_identifier(target.substr(1)))
        throw ParseError(start_line, "malformed switch case target");
      if (first) sw.case_type = type;
      else if (type != sw.case_type) throw ParseError(start_line, "inconsistent switch case types");
      first = false;
      if (!seen.insert(value).second)
        throw ParseError(start_line, "duplicate switch case " + std::to_string(value));
      sw.cases.push_back({value, std::string(target.substr(1))});
      k += 3;
    }
    return sw;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_no_ = 0;
  std::string_view line_;
  IrModule module_;
};

}  // namespace detail

// Parses IR-subset text. Throws ParseError, UnresolvedLabel, DuplicateLabel or
// IndirectTargetsUnknown.
inline IrModule parse_module(std::string_view text, std::string source_name = {}) {
  return detail::ModuleParser(text, std::move(source_name)).run();
}

}  // namespace vmtag
