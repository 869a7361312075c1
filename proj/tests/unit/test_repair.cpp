#include <doctest.h>

#include "scitikz/repair.hpp"
#include "scitikz/sandbox.hpp"
#include "support.hpp"

using namespace scitikz;
using namespace scitikz::dataengine;

namespace {

const std::string kLayerDoc =
    "\\documentclass{standalone}\n\\usepackage{tikz}\n\\begin{document}\n\\begin{tikzpicture}\n"
    "\\begin{pgfonlayer}{background}\\fill[gray] (0,0) rectangle (1,1);\\end{pgfonlayer}\n"
    "\\draw (0,0) -- (1,1);\n\\end{tikzpicture}\n\\end{document}\n";

const std::string kLayerLog =
    "! Package pgf Error: Sorry, the requested layer 'background' could not be found. Maybe you forgot to use "
    "\\pgfsetlayers?\n";

}  // namespace

TEST_SUITE("repair") {

TEST_CASE("missing layer") {
  const auto fixed = builtin_repair_rules(kLayerDoc, kLayerLog);
  REQUIRE(fixed.has_value());
  CHECK(fixed->find("\\usetikzlibrary{backgrounds}") != std::string::npos);
  CHECK(fixed->find("\\pgfdeclarelayer{background}") != std::string::npos);
  CHECK(fixed->find("\\pgfsetlayers{background,main}") != std::string::npos);
  CHECK(fixed->find("\\pgfsetlayers") < fixed->find("\\begin{document}"));
  // applying the same rule again finds nothing left to add
  CHECK_FALSE(builtin_repair_rules(*fixed, kLayerLog).has_value());
}

TEST_CASE("hard-wrapped log lines still match") {
  const std::string wrapped = "! Package pgf Error: Sorry, the requested layer 'backgr\nound' could not be found.";
  const auto fixed = builtin_repair_rules(kLayerDoc, wrapped);
  REQUIRE(fixed.has_value());
  CHECK(fixed->find("\\pgfdeclarelayer{background}") != std::string::npos);
}

TEST_CASE("droppable package") {
  const std::string doc =
      "\\documentclass{standalone}\n\\usepackage{tikz,microtype}\n\\usepackage{lmodern}\n\\begin{document}\nx\n"
      "\\end{document}\n";
  const auto a = builtin_repair_rules(doc, "! LaTeX Error: File `microtype.sty' not found.");
  REQUIRE(a.has_value());
  CHECK(a->find("\\usepackage{tikz}\n") != std::string::npos);
  CHECK(a->find("microtype") == std::string::npos);
  const auto b = builtin_repair_rules(doc, "! LaTeX Error: File `lmodern.sty' not found.");
  REQUIRE(b.has_value());
  CHECK(b->find("lmodern") == std::string::npos);
  CHECK(b->find("\n\n\\begin{document}") == std::string::npos);
  // not on the droppable list
  CHECK_FALSE(builtin_repair_rules(doc, "! LaTeX Error: File `tikz.sty' not found.").has_value());
}

TEST_CASE("library rules") {
  const std::string doc =
      "\\documentclass{standalone}\n\\usepackage{tikz}\n\\begin{document}\n\\begin{tikzpicture}\n"
      "\\draw[-Stealth] (0,0) -- (1,0);\n\\end{tikzpicture}\n\\end{document}\n";
  const auto tip = builtin_repair_rules(doc, "! Package pgf Error: Unknown arrow tip kind 'Stealth'.");
  REQUIRE(tip.has_value());
  CHECK(tip->find("\\usetikzlibrary{arrows.meta}") != std::string::npos);
  CHECK_FALSE(builtin_repair_rules(*tip, "! Package pgf Error: Unknown arrow tip kind 'Stealth'.").has_value());

  const auto key = builtin_repair_rules(doc, "! Package pgfkeys Error: I do not know the key '/tikz/matrix of nodes'");
  REQUIRE(key.has_value());
  CHECK(key->find("\\usetikzlibrary{matrix}") != std::string::npos);

  const auto say = builtin_repair_rules(doc, "You need to say \\usetikzlibrary{calc,fit} for");
  REQUIRE(say.has_value());
  CHECK(say->find("\\usetikzlibrary{calc}\n\\usetikzlibrary{fit}\n") != std::string::npos);

  const auto env = builtin_repair_rules(doc, "! LaTeX Error: Environment tikzcd undefined.");
  REQUIRE(env.has_value());
  CHECK(env->find("\\usepackage{tikz-cd}") != std::string::npos);
}

TEST_CASE("no rule matches") {
  CHECK_FALSE(builtin_repair_rules(kLayerDoc, "! Undefined control sequence.\nl.5 \\Vhrulefill").has_value());
  CHECK_FALSE(builtin_repair_rules(kLayerDoc, "").has_value());
  CHECK_FALSE(builtin_repair_rules(kLayerDoc, "! Package pgf Error: Unknown arrow tip kind 'Zap'.").has_value());
}

TEST_CASE("preamble insertion") {
  CHECK(insert_in_preamble("a\\begin{document}b", "X\n") == "a\nX\n\\begin{document}b");
  CHECK(insert_in_preamble("\\begin{tikzpicture}", "X\n") == "X\n\\begin{tikzpicture}");
}

TEST_CASE("repaired layer fault compiles") {
  if (!testing::kHaveToolchain) {
    MESSAGE("no LaTeX toolchain; skipped");
    return;
  }
  const auto cfg = testing::toolchain_config();
  sandbox::Sandbox sb(cfg.sandbox);
  const auto before = sb.compile({kLayerDoc});
  REQUIRE(before.status == sandbox::CompileStatus::compile_error);
  const auto fixed = builtin_repair_rules(kLayerDoc, before.log_excerpt);
  REQUIRE(fixed.has_value());
  CHECK(sb.compile({*fixed}).status == sandbox::CompileStatus::success);
}

}  // TEST_SUITE
