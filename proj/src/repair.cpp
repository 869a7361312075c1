#include "scitikz/repair.hpp"

#include <algorithm>
#include <map>
#include <regex>

#include "scitikz/texlex.hpp"

namespace scitikz::dataengine {

const std::vector<std::string>& default_droppable_packages() {
  static const std::vector<std::string> list = {
      "microtype", "lmodern",  "times",   "mathptmx", "helvet", "courier",  "palatino",  "fourier",
      "libertine", "charter",  "newtxtext", "newtxmath", "inconsolata", "sourcesanspro", "hyperref",
      "bookmark",  "cleveref", "geometry", "fullpage", "setspace", "parskip", "ragged2e"};
  return list;
}

namespace {

struct Requirement {
  enum class What { library, package } what = What::library;
  std::string name;
};

// Keys, shapes and arrow tips provided by a tikz library or package.
const std::map<std::string, Requirement>& key_map() {
  using W = Requirement::What;
  static const std::map<std::string, Requirement> m = {
      {"on background layer", {W::library, "backgrounds"}},
      {"show background rectangle", {W::library, "backgrounds"}},
      {"circle split", {W::library, "shapes.multipart"}},
      {"rectangle split", {W::library, "shapes.multipart"}},
      {"circle solidus", {W::library, "shapes.multipart"}},
      {"ellipse split", {W::library, "shapes.multipart"}},
      {"cylinder", {W::library, "shapes.geometric"}},
      {"diamond", {W::library, "shapes.geometric"}},
      {"trapezium", {W::library, "shapes.geometric"}},
      {"regular polygon", {W::library, "shapes.geometric"}},
      {"star", {W::library, "shapes.geometric"}},
      {"semicircle", {W::library, "shapes.geometric"}},
      {"isosceles triangle", {W::library, "shapes.geometric"}},
      {"kite", {W::library, "shapes.geometric"}},
      {"dart", {W::library, "shapes.geometric"}},
      {"circular sector", {W::library, "shapes.geometric"}},
      {"rounded rectangle", {W::library, "shapes.misc"}},
      {"chamfered rectangle", {W::library, "shapes.misc"}},
      {"cross out", {W::library, "shapes.misc"}},
      {"strike out", {W::library, "shapes.misc"}},
      {"cloud", {W::library, "shapes.symbols"}},
      {"starburst", {W::library, "shapes.symbols"}},
      {"signal", {W::library, "shapes.symbols"}},
      {"tape", {W::library, "shapes.symbols"}},
      {"single arrow", {W::library, "shapes.arrows"}},
      {"double arrow", {W::library, "shapes.arrows"}},
      {"rectangle callout", {W::library, "shapes.callouts"}},
      {"ellipse callout", {W::library, "shapes.callouts"}},
      {"cloud callout", {W::library, "shapes.callouts"}},
      {"matrix of nodes", {W::library, "matrix"}},
      {"matrix of math nodes", {W::library, "matrix"}},
      {"fit", {W::library, "fit"}},
      {"drop shadow", {W::library, "shadows"}},
      {"circular drop shadow", {W::library, "shadows"}},
      {"copy shadow", {W::library, "shadows"}},
      {"double copy shadow", {W::library, "shadows"}},
      {"mindmap", {W::library, "mindmap"}},
      {"concept", {W::library, "mindmap"}},
      {"node distance", {W::library, "positioning"}},
      {"Stealth", {W::library, "arrows.meta"}},
      {"Latex", {W::library, "arrows.meta"}},
      {"Triangle", {W::library, "arrows.meta"}},
      {"Kite", {W::library, "arrows.meta"}},
      {"Square", {W::library, "arrows.meta"}},
      {"Circle", {W::library, "arrows.meta"}},
      {"Rays", {W::library, "arrows.meta"}},
      {"Bar", {W::library, "arrows.meta"}},
      {"Bracket", {W::library, "arrows.meta"}},
      {"Straight Barb", {W::library, "arrows.meta"}},
      {"Hooks", {W::library, "arrows.meta"}},
      {"Arc Barb", {W::library, "arrows.meta"}},
      {"latex'", {W::library, "arrows"}},
      {"stealth'", {W::library, "arrows"}},
      {"triangle 45", {W::library, "arrows"}},
      {"triangle 60", {W::library, "arrows"}},
      {"triangle 90", {W::library, "arrows"}},
      {"tikzcd", {W::package, "tikz-cd"}},
      {"axis", {W::package, "pgfplots"}},
      {"circuitikz", {W::package, "circuitikz"}},
  };
  return m;
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto comma = s.find(',', start);
    if (comma == std::string_view::npos) comma = s.size();
    std::string item(s.substr(start, comma - start));
    item.erase(0, item.find_first_not_of(" \t\n"));
    item.erase(item.find_last_not_of(" \t\n") + 1);
    if (!item.empty()) out.push_back(item);
    start = comma + 1;
  }
  return out;
}

bool listed_in(std::string_view code, const char* command, std::string_view name) {
  static const std::map<std::string, std::regex> cache = {
      {"usetikzlibrary", std::regex(R"(\\usetikzlibrary\s*\{([^}]*)\})")},
      {"usepackage", std::regex(R"(\\usepackage\s*(?:\[[^\]]*\])?\s*\{([^}]*)\})")},
  };
  const std::string norm = texlex::normalize(code);
  const auto& re = cache.at(command);
  for (auto it = std::sregex_iterator(norm.begin(), norm.end(), re); it != std::sregex_iterator(); ++it) {
    const auto items = split_list((*it)[1].str());
    if (std::find(items.begin(), items.end(), name) != items.end()) return true;
  }
  return false;
}

std::optional<std::string> require(std::string_view code, const std::vector<Requirement>& reqs) {
  std::string lines;
  for (const auto& r : reqs) {
    if (r.what == Requirement::What::library) {
      if (!listed_in(code, "usetikzlibrary", r.name)) lines += "\\usetikzlibrary{" + r.name + "}\n";
    } else if (!listed_in(code, "usepackage", r.name)) {
      lines += "\\usepackage{" + r.name + "}\n";
    }
  }
  if (lines.empty()) return std::nullopt;
  return insert_in_preamble(code, lines);
}

// TeX hard-wraps log lines without inserting spaces; undo that for matching.
std::string unwrap(std::string_view log) {
  std::string out;
  out.reserve(log.size());
  for (char c : log) {
    if (c != '\n' && c != '\r') out.push_back(c);
  }
  return out;
}

std::optional<std::string> missing_layer(std::string_view code, const std::string& log) {
  static const std::regex re(R"(requested layer '([^']+)' could not be found)");
  std::smatch m;
  if (!std::regex_search(log, m, re)) return std::nullopt;
  const std::string layer = m[1].str();
  const std::string norm = texlex::normalize(code);
  std::string lines;
  if (!listed_in(code, "usetikzlibrary", "backgrounds")) lines += "\\usetikzlibrary{backgrounds}\n";
  if (norm.find("\\pgfdeclarelayer{" + layer + "}") == std::string::npos) {
    lines += "\\pgfdeclarelayer{" + layer + "}\n";
  }
  if (norm.find("\\pgfsetlayers{") == std::string::npos) lines += "\\pgfsetlayers{" + layer + ",main}\n";
  if (lines.empty()) return std::nullopt;
  return insert_in_preamble(code, lines);
}

std::optional<std::string> missing_package(std::string_view code, const std::string& log,
                                           const RepairRuleOptions& opts) {
  static const std::regex re(R"(File `([^']+)\.sty' not found)");
  std::smatch m;
  if (!std::regex_search(log, m, re)) return std::nullopt;
  const std::string pkg = m[1].str();
  const auto& safe = opts.droppable_packages;
  if (std::find(safe.begin(), safe.end(), pkg) == safe.end()) return std::nullopt;

  static const std::regex use(R"(\\usepackage\s*(\[[^\]]*\])?\s*\{([^}]*)\})");
  std::string src(code);
  std::string out;
  bool changed = false;
  auto last = src.cbegin();
  for (auto it = std::sregex_iterator(src.begin(), src.end(), use); it != std::sregex_iterator(); ++it) {
    const auto& match = *it;
    auto items = split_list(match[2].str());
    const auto pos = std::find(items.begin(), items.end(), pkg);
    if (pos == items.end()) continue;
    items.erase(pos);
    changed = true;
    out.append(last, match[0].first);
    if (!items.empty()) {
      std::string joined;
      for (const auto& i : items) joined += (joined.empty() ? "" : ",") + i;
      out += "\\usepackage" + match[1].str() + "{" + joined + "}";
    }
    last = match[0].second;
    // Drop the newline of a line that is now empty.
    if (items.empty() && last != src.cend() && *last == '\n' && (out.empty() || out.back() == '\n')) ++last;
  }
  if (!changed) return std::nullopt;
  out.append(last, src.cend());
  return out;
}

std::optional<std::string> missing_library(std::string_view code, const std::string& log) {
  static const std::regex say(R"(You need to say \\usetikzlibrary\{([^}]+)\})");
  static const std::regex key(R"(I do not know the key '/tikz/([^']+)')");
  static const std::regex tip(R"(Unknown arrow tip kind '([^']+)')");
  static const std::regex shape(R"(No shape named `?([^'` ]+)'? is known)");
  static const std::regex env(R"(Environment ([A-Za-z@*]+) undefined)");
  static const std::regex of_fn(R"(Unknown function `of')");
  using W = Requirement::What;

  std::smatch m;
  if (std::regex_search(log, m, say)) {
    std::vector<Requirement> reqs;
    for (const auto& lib : split_list(m[1].str())) reqs.push_back({W::library, lib});
    return require(code, reqs);
  }
  if (log.find("You need to load a decoration library") != std::string::npos) {
    return require(code, {{W::library, "decorations.pathmorphing"},
                          {W::library, "decorations.pathreplacing"},
                          {W::library, "decorations.markings"}});
  }
  if (std::regex_search(log, m, of_fn)) return require(code, {{W::library, "positioning"}});
  for (const auto* re : {&key, &tip, &shape, &env}) {
    if (std::regex_search(log, m, *re)) {
      const auto& map = key_map();
      if (auto it = map.find(m[1].str()); it != map.end()) return require(code, {it->second});
      return std::nullopt;
    }
  }
  return std::nullopt;
}

}  // namespace

std::string insert_in_preamble(std::string_view code, std::string_view lines) {
  std::string out(code);
  const auto pos = out.find("\\begin{document}");
  if (pos == std::string::npos) return std::string(lines) + out;
  std::size_t at = pos;
  // Keep the insertion on its own lines.
  if (at > 0 && out[at - 1] != '\n') {
    out.insert(at, "\n");
    ++at;
  }
  out.insert(at, lines);
  return out;
}

std::optional<std::string> builtin_repair_rules(std::string_view code, std::string_view log_excerpt,
                                                const RepairRuleOptions& options) {
  const std::string log = unwrap(log_excerpt);
  if (auto r = missing_layer(code, log)) return r;
  if (auto r = missing_package(code, log, options)) return r;
  return missing_library(code, log);
}

}  // namespace scitikz::dataengine
