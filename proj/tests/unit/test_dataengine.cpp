#include <doctest.h>

#include "scitikz/dataengine.hpp"
#include "scitikz/error.hpp"
#include "support.hpp"

using namespace scitikz;
using namespace scitikz::dataengine;
using backends::JudgeScores;

namespace {

JudgeScores js(int c, int l, int r, int s, int v) { return {c, l, r, s, v, c + l + r + s + v}; }

SampleRecord rec(std::string id, std::string code, std::size_t tokens = 400, double aspect = 1.0) {
  SampleRecord r;
  r.id = std::move(id);
  r.code = std::move(code);
  r.token_count = tokens;
  r.aspect_ratio = aspect;
  return r;
}

std::string words(int from, int to, const std::string& prefix = "w") {
  std::string s;
  for (int i = from; i < to; ++i) s += prefix + std::to_string(i) + " ";
  return s;
}

std::string picture(const std::string& body) {
  return "\\begin{tikzpicture}\n" + body + "\n\\end{tikzpicture}\n";
}

}  // namespace

TEST_SUITE("dataengine") {

TEST_CASE("sanitize rules and order") {
  const SanitizeLimits lim;
  CHECK(heuristic_sanitize(rec("a", "x", 8192), lim).reason == "too-long");
  CHECK(heuristic_sanitize(rec("a", "x", 8191), lim).keep);
  CHECK(heuristic_sanitize(rec("a", "x", 400, 16.0), lim).reason == "aspect-ratio");
  CHECK(heuristic_sanitize(rec("a", "x", 400, 1.0 / 16.0), lim).reason == "aspect-ratio");
  CHECK(heuristic_sanitize(rec("a", "x", 400, 15.0), lim).keep);
  CHECK(heuristic_sanitize(rec("a", "\\input{x}", 400), lim).reason == "external-dependency");
  // first failing rule wins
  CHECK(heuristic_sanitize(rec("a", "\\input{x}", 9000, 20.0), lim).reason == "too-long");
  CHECK(heuristic_sanitize(rec("a", "\\draw (0,0);"), lim).keep);
}

TEST_CASE("dedup boundaries") {
  const std::string base = words(0, 100);
  std::vector<SampleRecord> corpus = {
      rec("orig", base),
      rec("copy", base),
      rec("five", words(0, 54) + words(0, 60, "u")),   // 5 shared 50-grams
      rec("six", words(0, 55) + words(0, 60, "v")),    // 6 shared
      rec("short-1", words(0, 49, "s")),
      rec("short-2", words(0, 49, "s")),
  };
  const auto r = dedup(corpus);
  CHECK(r.retained == std::vector<std::string>{"orig", "five", "short-1", "short-2"});
  REQUIRE(r.removed.size() == 2);
  CHECK(r.removed[0].id == "copy");
  CHECK(r.removed[0].shared == 51);
  CHECK(r.removed[1].id == "six");
  CHECK(r.removed[1].shared == 6);
}

TEST_CASE("dedup keeps first occurrences regardless of order") {
  std::vector<SampleRecord> corpus;
  for (int i = 0; i < 6; ++i) corpus.push_back(rec("r" + std::to_string(i), words(i % 3 * 100, i % 3 * 100 + 80)));
  const auto r = dedup(corpus);
  CHECK(r.retained == std::vector<std::string>{"r0", "r1", "r2"});
}

TEST_CASE("quality gate") {
  const GateThresholds t;
  CHECK(quality_gate(js(5, 4, 4, 4, 3), t));
  CHECK_FALSE(quality_gate(js(2, 5, 5, 5, 5), t));
  CHECK_FALSE(quality_gate(js(4, 4, 4, 4, 1), t));
  CHECK_FALSE(quality_gate(js(5, 5, 5, 5, 1), t));
  CHECK(quality_gate(js(3, 5, 5, 3, 2), t));
  GateThresholds d;
  d.mode = GateMode::delta;
  CHECK(quality_gate(js(5, 4, 4, 4, 3), d));
  CHECK_FALSE(quality_gate(js(4, 4, 4, 4, 1), d));
  CHECK_FALSE(quality_gate(js(1, 5, 5, 5, 5), d));
}

TEST_CASE("benchmark stratification") {
  CHECK(stratify_benchmark(js(4, 4, 4, 4, 2)) == Tier::easy);
  CHECK(stratify_benchmark(js(4, 4, 4, 4, 1)) == Tier::easy);
  CHECK(stratify_benchmark(js(5, 4, 5, 4, 3)) == Tier::medium);
  CHECK(stratify_benchmark(js(5, 5, 5, 5, 5)) == Tier::hard);
  CHECK_THROWS_AS(stratify_benchmark(js(3, 5, 5, 5, 5)), PreScreenFailed);
  CHECK_THROWS_AS(stratify_benchmark(js(5, 5, 5, 5, 0)), PreScreenFailed);
}

TEST_CASE("jsonl round trip") {
  testing::TempDir dir;
  auto a = rec("a", "\\draw;");
  a.judge = js(5, 4, 4, 4, 3);
  a.status = Status::accepted;
  a.audit.push_back({"validate", 0, "\\draw;", "success", ""});
  auto b = rec("b", "x");
  b.reject("too-long");
  write_jsonl(dir / "c.jsonl", {a, b});
  const auto back = read_jsonl(dir / "c.jsonl");
  REQUIRE(back.size() == 2);
  CHECK(back[0].to_json() == a.to_json());
  CHECK(back[1].to_json() == b.to_json());
  CHECK(back[1].reject_reason == "too-long");

  testing::write_text(dir / "dup.jsonl", "{\"id\":\"x\",\"code\":\"a\"}\n\n{\"id\":\"x\",\"code\":\"b\"}\n");
  CHECK_THROWS_AS(read_jsonl(dir / "dup.jsonl"), ConfigError);
  testing::write_text(dir / "bad.jsonl", "{\"id\":\"x\"}\n");
  CHECK_THROWS_AS(read_jsonl(dir / "bad.jsonl"), ConfigError);
}

TEST_CASE("empty corpus gives a zeroed manifest") {
  Config cfg;
  backends::Backends be;
  const auto r = run_pipeline(std::vector<SampleRecord>{}, cfg, be);
  CHECK(r.records.empty());
  CHECK(r.manifest.at("input") == 0);
  CHECK(r.manifest.at("curated") == 0);
  for (const auto& s : r.manifest.at("stages")) CHECK(s.at("out") == 0);
}

TEST_CASE("missing toolchain aborts the pipeline") {
  Config cfg;
  cfg.sandbox.engine_command = {"scitikz-no-such-engine", "{input}"};
  backends::Backends be;
  std::vector<SampleRecord> corpus = {rec("a", picture("\\draw (0,0) -- (1,1);"))};
  CHECK_THROWS_AS(run_pipeline(corpus, cfg, be), EnvironmentError);
}

TEST_CASE("remediation without a toolchain") {
  // agent that never finds a fix; compile is never reached
  const sandbox::Sandbox sb;
  sandbox::CompileOutcome failed;
  failed.status = sandbox::CompileStatus::compile_error;
  const RepairAgent none = [](std::string_view, std::string_view) -> std::string {
    throw RepairUnavailable("no rule");
  };
  const auto r = remediation_loop(rec("a", "x"), failed, sb, none, 3, 1.0);
  CHECK(r.record.status == Status::rejected);
  CHECK(r.record.reject_reason == "repair-unavailable");

  const RepairAgent same = [](std::string_view code, std::string_view) { return std::string(code); };
  const std::string doc = sandbox::wrap_standalone(picture("\\draw (0,0);"));
  const auto s = remediation_loop(rec("b", doc), failed, sb, same, 3, 1.0);
  CHECK(s.record.reject_reason == "remediation-stalled");

  sandbox::CompileOutcome fine;
  fine.status = sandbox::CompileStatus::success;
  const auto ok = remediation_loop(rec("c", doc), fine, sb, none, 3, 1.0);
  CHECK(ok.record.status == Status::raw);
  REQUIRE(ok.record.audit.size() == 1);
  CHECK(ok.record.audit[0].status == "skipped");
}

TEST_CASE("remediation exhausts its rounds") {
  if (!testing::kHaveToolchain) {
    MESSAGE("no LaTeX toolchain; skipped");
    return;
  }
  const auto cfg = testing::toolchain_config();
  const sandbox::Sandbox sb(cfg.sandbox);
  int calls = 0;
  const RepairAgent garbage = [&](std::string_view, std::string_view) {
    ++calls;
    return picture("\\draw (0,0) -- (1," + std::to_string(calls) + ") \\undefinedmacro;");
  };
  const std::string doc = sandbox::wrap_standalone(picture("\\draw (0,0) \\undefinedmacro;"));
  auto first = sb.compile({doc, 10.0});
  REQUIRE(first.status == sandbox::CompileStatus::compile_error);
  const auto r = remediation_loop(rec("g", doc), first, sb, garbage, 3, 10.0);
  CHECK(calls == 3);
  CHECK(r.record.reject_reason == "remediation-exhausted");
  CHECK(r.record.repair_rounds == 3);
  CHECK(r.record.audit.size() == 3);
}

TEST_CASE("pipeline with a scripted judge") {
  if (!testing::kHaveToolchain) {
    MESSAGE("no LaTeX toolchain; skipped");
    return;
  }
  auto cfg = testing::toolchain_config();
  cfg.jobs = 2;
  backends::BackendsConfig bc;
  bc[backends::Kind::judge] = backends::parse_endpoint_spec(
      backends::Kind::judge,
      std::string("stdio:") + SCITIKZ_PYTHON + " " + testing::data_path("stub_backend.py").string() + " judge-by-code");
  backends::Backends be(bc);
  std::vector<SampleRecord> corpus = {
      rec("good", picture("\\draw (0,0) rectangle (2,1);")),
      rec("low", picture("\\draw[red] (0,0) circle (1);")),
      rec("prose", "just words"),
  };
  testing::TempDir dir;
  const auto r = run_pipeline(corpus, cfg, be, {dir.path(), true});
  CHECK(r.records[0].status == Status::accepted);
  REQUIRE(r.records[0].judge.has_value());
  CHECK(r.records[0].judge->total == 20);
  CHECK(r.records[0].image_ref == "images/good.png");
  CHECK(std::filesystem::exists(dir / "images/good.png"));
  CHECK(r.records[1].reject_reason == "quality-gate");
  CHECK(r.records[2].reject_reason == "no-drawable-content");
  CHECK(r.manifest.at("curated") == 1);
  CHECK(r.manifest.at("fragments_wrapped") == 2);
  const auto& stages = r.manifest.at("stages");
  CHECK(stages.back().at("stage") == "gate");
  CHECK(stages.back().at("out") == 1);
  CHECK_FALSE(stages.back().contains("skipped"));
}

}  // TEST_SUITE
