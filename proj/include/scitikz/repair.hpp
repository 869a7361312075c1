#pragma once

// Rule-based repair of common compile failures, used as the builtin repair
// agent.

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace scitikz::dataengine {

/// Packages whose absence can be survived by dropping the \usepackage.
const std::vector<std::string>& default_droppable_packages();

struct RepairRuleOptions {
  std::vector<std::string> droppable_packages = default_droppable_packages();
};

/// Applies the first matching rule once:
///  a) missing pgf layer: load backgrounds and declare the layer;
///  b) missing .sty from the droppable list: drop the package;
///  c) unknown key, arrow tip, shape or environment provided by a known
///     library: load that library.
/// Returns nullopt when no rule matches or the fix is already present.
std::optional<std::string> builtin_repair_rules(std::string_view code, std::string_view log_excerpt,
                                                const RepairRuleOptions& options = {});

/// Inserts `lines` right before \begin{document}, or at the top when the
/// code has no document environment.
std::string insert_in_preamble(std::string_view code, std::string_view lines);

}  // namespace scitikz::dataengine
