#include "scitikz/dataengine.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "scitikz/error.hpp"
#include "scitikz/parallel.hpp"

namespace scitikz::dataengine {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::array<std::pair<Status, std::string_view>, 8> kStatusNames = {{
    {Status::raw, "raw"},
    {Status::wrapped, "wrapped"},
    {Status::compiled, "compiled"},
    {Status::repaired, "repaired"},
    {Status::sanitized, "sanitized"},
    {Status::judged, "judged"},
    {Status::accepted, "accepted"},
    {Status::rejected, "rejected"},
}};

}  // namespace

std::string_view to_string(Status s) {
  for (const auto& [k, v] : kStatusNames) {
    if (k == s) return v;
  }
  return "raw";
}

Status status_from_string(std::string_view s) {
  for (const auto& [k, v] : kStatusNames) {
    if (v == s) return k;
  }
  throw ConfigError("unknown record status: " + std::string(s));
}

json SampleRecord::to_json(bool with_audit) const {
  json j = {{"schema", "scitikz/1"}, {"id", id}, {"source", source}, {"code", code}};
  j["image_ref"] = image_ref ? json(*image_ref) : json(nullptr);
  j["token_count"] = token_count;
  j["aspect_ratio"] = aspect_ratio;
  j["judge"] = judge ? judge->to_json() : json(nullptr);
  j["status"] = to_string(status);
  j["reject_reason"] = reject_reason ? json(*reject_reason) : json(nullptr);
  j["repair_rounds"] = repair_rounds;
  if (with_audit) {
    json a = json::array();
    for (const auto& e : audit) {
      a.push_back({{"stage", e.stage},
                   {"round", e.round},
                   {"code", e.code},
                   {"status", e.status},
                   {"log_excerpt", e.log_excerpt}});
    }
    j["audit"] = std::move(a);
  }
  return j;
}

SampleRecord SampleRecord::from_json(const json& j) {
  SampleRecord r;
  try {
    r.id = j.at("id").get<std::string>();
    r.code = j.at("code").get<std::string>();
    r.source = j.value("source", "");
    if (j.contains("image_ref") && !j["image_ref"].is_null()) r.image_ref = j["image_ref"].get<std::string>();
    r.token_count = j.value("token_count", std::size_t{0});
    r.aspect_ratio = j.value("aspect_ratio", 0.0);
    if (j.contains("judge") && !j["judge"].is_null()) r.judge = backends::JudgeScores::from_json(j["judge"]);
    if (j.contains("status")) r.status = status_from_string(j["status"].get<std::string>());
    if (j.contains("reject_reason") && !j["reject_reason"].is_null()) {
      r.reject_reason = j["reject_reason"].get<std::string>();
    }
    r.repair_rounds = j.value("repair_rounds", 0);
    if (j.contains("audit")) {
      for (const auto& e : j["audit"]) {
        r.audit.push_back({e.at("stage"), e.at("round"), e.at("code"), e.at("status"), e.at("log_excerpt")});
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed sample record: ") + e.what());
  } catch (const SchemaViolation& e) {
    throw ConfigError(std::string("malformed judge scores in record: ") + e.what());
  }
  if (r.id.empty()) throw ConfigError("sample record with empty id");
  return r;
}

std::vector<SampleRecord> read_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read corpus " + path.string());
  std::vector<SampleRecord> out;
  std::set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    auto rec = SampleRecord::from_json(j);
    if (!ids.insert(rec.id).second) throw ConfigError("duplicate record id: " + rec.id);
    out.push_back(std::move(rec));
  }
  return out;
}

void write_jsonl(const fs::path& path, const std::vector<SampleRecord>& records, bool with_audit) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw EnvironmentError("cannot write " + path.string());
  for (const auto& r : records) out << r.to_json(with_audit).dump() << '\n';
}

SanitizeDecision heuristic_sanitize(const SampleRecord& rec, const SanitizeLimits& limits) {
  if (rec.token_count >= limits.max_tokens) return {false, std::string(reason::too_long)};
  if (rec.aspect_ratio > limits.max_aspect || rec.aspect_ratio * limits.max_aspect < 1.0) {
    return {false, std::string(reason::aspect_ratio)};
  }
  if (!texlex::scan_dependencies(rec.code, limits.exclusion_list).empty()) {
    return {false, std::string(reason::external_dependency)};
  }
  return {true, std::nullopt};
}

DedupIndex::Verdict DedupIndex::offer(const texlex::TokenStream& stream) {
  const auto sh = texlex::shingles(stream, n_);
  Verdict v;
  for (const auto fp : sh) v.shared += index_.count(fp);
  v.retained = v.shared <= max_shared_;
  if (v.retained) index_.insert(sh.begin(), sh.end());
  return v;
}

DedupResult dedup(const std::vector<SampleRecord>& corpus, std::size_t n, std::size_t max_shared) {
  DedupIndex index(n, max_shared);
  DedupResult out;
  for (const auto& rec : corpus) {
    const auto v = index.offer(texlex::code_tokens(rec.code, rec.id));
    if (v.retained) out.retained.push_back(rec.id);
    else out.removed.push_back({rec.id, v.shared});
  }
  return out;
}

bool quality_gate(const backends::JudgeScores& s, const GateThresholds& t) {
  if (t.mode == GateMode::delta) {
    const int core = std::min({s.correctness, s.layout_precision, s.readability, s.scientific_plausibility});
    return s.total > t.delta_total && s.visual_complexity > t.delta_comp && core > t.delta_min;
  }
  const int others = std::min({s.layout_precision, s.readability, s.scientific_plausibility, s.visual_complexity});
  return s.total >= t.total_min && s.correctness > t.correctness_gt && others >= t.others_min;
}

std::string_view to_string(Tier t) {
  switch (t) {
    case Tier::easy: return "easy";
    case Tier::medium: return "medium";
    case Tier::hard: return "hard";
  }
  return "easy";
}

Tier stratify_benchmark(const backends::JudgeScores& s, const BenchmarkPreScreen& rule) {
  const int core = std::min({s.correctness, s.layout_precision, s.readability, s.scientific_plausibility});
  if (core < rule.core_min || s.visual_complexity < rule.complexity_min) {
    throw PreScreenFailed("record does not meet the benchmark pre-screen");
  }
  if (s.visual_complexity <= rule.easy_max) return Tier::easy;
  if (s.visual_complexity <= rule.medium_max) return Tier::medium;
  return Tier::hard;
}

RemediationResult remediation_loop(SampleRecord rec, sandbox::CompileOutcome failed, const sandbox::Sandbox& sb,
                                   const RepairAgent& agent, int max_iters, double timeout_s) {
  if (failed.ok()) {
    rec.audit.push_back({"repair", 0, rec.code, "skipped", "warning: record already compiles"});
    return {std::move(rec), std::move(failed)};
  }
  sandbox::CompileOutcome last = std::move(failed);
  for (int round = 1; round <= max_iters; ++round) {
    const std::string excerpt = last.log_excerpt;
    std::string candidate;
    try {
      candidate = agent(rec.code, excerpt);
    } catch (const RepairUnavailable& e) {
      rec.audit.push_back({"repair", round, rec.code, "unavailable", e.what()});
      rec.reject(reason::repair_unavailable);
      return {std::move(rec), std::move(last)};
    } catch (const BackendError& e) {
      rec.audit.push_back({"repair", round, rec.code, "backend-error", e.what()});
      rec.reject(reason::repair_unavailable);
      return {std::move(rec), std::move(last)};
    }
    std::string doc;
    try {
      doc = sandbox::wrap_standalone(candidate);
    } catch (const NoDrawableContent&) {
      rec.audit.push_back({"repair", round, candidate, "no-drawable-content", ""});
      rec.reject(reason::no_drawable_content);
      return {std::move(rec), std::move(last)};
    }
    if (doc == rec.code) {
      rec.audit.push_back({"repair", round, doc, "unchanged", ""});
      rec.reject(reason::remediation_stalled);
      return {std::move(rec), std::move(last)};
    }
    rec.code = std::move(doc);
    rec.repair_rounds = round;
    last = sb.compile({rec.code, timeout_s});
    if (last.status == sandbox::CompileStatus::toolchain_missing) {
      throw EnvironmentError("toolchain-missing: " + sb.config().engine_command.front());
    }
    rec.audit.push_back({"repair", round, rec.code, std::string(sandbox::to_string(last.status)), last.log_excerpt});
    if (last.ok()) {
      rec.status = Status::repaired;
      return {std::move(rec), std::move(last)};
    }
  }
  rec.reject(reason::remediation_exhausted);
  return {std::move(rec), std::move(last)};
}

namespace {

std::string file_stem_for(const std::string& id) {
  std::string s = id;
  for (auto& c : s) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    if (!ok) c = '_';
  }
  return s;
}

struct StageCount {
  std::string stage;
  std::size_t in = 0;
  std::size_t out = 0;
  bool skipped = false;
};

}  // namespace

PipelineResult run_pipeline(std::vector<SampleRecord> corpus, const Config& cfg, backends::Backends& be,
                            const PipelineOptions& options) {
  const sandbox::Sandbox sb(cfg.sandbox);
  const auto& de = cfg.dataengine;
  const std::size_t n = corpus.size();
  std::vector<std::optional<RasterImage>> images(n);
  std::vector<char> was_fragment(n, 0), wrapped_ok(n, 0), first_pass_ok(n, 0), repaired_ok(n, 0);

  if (!options.out_dir.empty() && options.write_images) fs::create_directories(options.out_dir / "images");

  const RepairAgent agent = [&](std::string_view code, std::string_view log) {
    if (be.configured(backends::Kind::repair)) return be.repair(code, log);
    RepairRuleOptions ro;
    ro.droppable_packages = de.droppable_packages;
    if (auto fixed = builtin_repair_rules(code, log, ro)) return *fixed;
    throw RepairUnavailable("no repair rule matches the compiler log");
  };

  // wrap -> validate -> remediate -> render, record-parallel.
  parallel_for(n, cfg.effective_jobs(), [&](std::size_t i) {
    SampleRecord& rec = corpus[i];
    rec.status = Status::raw;
    rec.reject_reason.reset();
    rec.audit.clear();
    rec.repair_rounds = 0;
    try {
      const bool fragment = !sandbox::is_full_document(rec.code);
      rec.code = sandbox::wrap_standalone(rec.code);
      was_fragment[i] = fragment;
    } catch (const NoDrawableContent& e) {
      rec.audit.push_back({"wrap", 0, rec.code, "no-drawable-content", e.what()});
      rec.reject(reason::no_drawable_content);
      return;
    }
    rec.status = Status::wrapped;
    wrapped_ok[i] = 1;

    auto outcome = sb.compile({rec.code, cfg.sandbox.validate_timeout_s});
    if (outcome.status == sandbox::CompileStatus::toolchain_missing) {
      throw EnvironmentError("toolchain-missing: " + cfg.sandbox.engine_command.front() + " not found");
    }
    rec.audit.push_back({"validate", 0, rec.code, std::string(sandbox::to_string(outcome.status)), outcome.log_excerpt});
    if (outcome.ok()) {
      rec.status = Status::compiled;
      first_pass_ok[i] = 1;
    } else {
      auto rr = remediation_loop(std::move(rec), std::move(outcome), sb, agent, de.max_repair_iters,
                                 cfg.sandbox.validate_timeout_s);
      rec = std::move(rr.record);
      outcome = std::move(rr.outcome);
      if (rec.status == Status::rejected) return;
      repaired_ok[i] = 1;
    }

    try {
      RasterImage img = sb.rasterize(*outcome.pdf_ref, cfg.sandbox.dpi);
      rec.aspect_ratio = static_cast<double>(img.width) / static_cast<double>(img.height);
      if (!options.out_dir.empty() && options.write_images) {
        const std::string rel = "images/" + file_stem_for(rec.id) + ".png";
        write_png(img, options.out_dir / rel);
        rec.image_ref = rel;
      }
      images[i] = std::move(img);
    } catch (const RenderFailed& e) {
      rec.audit.push_back({"render", 0, rec.code, "render-failed", e.what()});
      rec.reject(reason::render_failed);
    }
  });

  std::vector<StageCount> stages;
  auto alive = [&] {
    return static_cast<std::size_t>(
        std::count_if(corpus.begin(), corpus.end(), [](const auto& r) { return r.status != Status::rejected; }));
  };
  auto count = [](const std::vector<char>& v) { return static_cast<std::size_t>(std::count(v.begin(), v.end(), 1)); };
  const std::size_t fragments = count(was_fragment);
  const std::size_t first_ok = count(first_pass_ok);
  const std::size_t repaired = count(repaired_ok);
  stages.push_back({"wrap", n, count(wrapped_ok)});
  stages.push_back({"validate", count(wrapped_ok), first_ok});
  stages.push_back({"remediate", count(wrapped_ok) - first_ok, repaired});
  const std::size_t rendered = alive();
  stages.push_back({"render", first_ok + repaired, rendered});

  // sanitize
  const SanitizeLimits limits{de.max_tokens, de.max_aspect, de.exclusion_list};
  for (auto& rec : corpus) {
    if (rec.status == Status::rejected) continue;
    rec.token_count = texlex::lex(texlex::normalize(rec.code)).size();
    const auto d = heuristic_sanitize(rec, limits);
    if (d.keep) rec.status = Status::sanitized;
    else rec.reject(*d.reason);
  }
  stages.push_back({"sanitize", rendered, alive()});

  // dedup, sequential in input order
  {
    const std::size_t in = alive();
    DedupIndex index(de.dedup_n, de.dedup_max_shared);
    for (auto& rec : corpus) {
      if (rec.status == Status::rejected) continue;
      const auto v = index.offer(texlex::code_tokens(rec.code, rec.id));
      if (!v.retained) {
        rec.audit.push_back({"dedup", 0, "", "duplicate", std::to_string(v.shared) + " shared shingles"});
        rec.reject(reason::duplicate);
      }
    }
    stages.push_back({"dedup", in, alive()});
  }

  // judge + gate
  const bool judging = be.configured(backends::Kind::judge);
  {
    const std::size_t in = alive();
    if (judging) {
      parallel_for(n, cfg.effective_jobs(), [&](std::size_t i) {
        auto& rec = corpus[i];
        if (rec.status == Status::rejected) return;
        try {
          rec.judge = be.judge(*images[i], rec.code);
          rec.status = Status::judged;
        } catch (const BackendError& e) {
          rec.audit.push_back({"judge", 0, "", "judge-error", e.what()});
          rec.reject(reason::judge_error);
        }
      });
    }
    stages.push_back({"judge", in, alive(), !judging});
  }
  {
    const std::size_t in = alive();
    if (judging) {
      for (auto& rec : corpus) {
        if (rec.status == Status::rejected) continue;
        if (quality_gate(*rec.judge, de.gate)) rec.status = Status::accepted;
        else rec.reject(reason::quality_gate);
      }
    }
    stages.push_back({"gate", in, alive(), !judging});
  }

  json manifest;
  manifest["schema"] = "scitikz/1";
  manifest["config_hash"] = cfg.hash();
  json ids = json::object();
  for (auto k : backends::kAllKinds) ids[std::string(backends::to_string(k))] = be.identity(k);
  manifest["backends"] = ids;
  manifest["input"] = n;
  manifest["fragments_wrapped"] = fragments;
  json st = json::array();
  for (const auto& s : stages) {
    json e = {{"stage", s.stage}, {"in", s.in}, {"out", s.out}};
    if (s.skipped) e["skipped"] = true;
    st.push_back(std::move(e));
  }
  manifest["stages"] = st;
  std::map<std::string, std::size_t> by_reason;
  json rejected = json::array(), repaired_list = json::array();
  std::map<std::string, std::size_t> by_status;
  for (const auto& r : corpus) {
    ++by_status[std::string(to_string(r.status))];
    if (r.status == Status::rejected) {
      ++by_reason[*r.reject_reason];
      rejected.push_back({{"id", r.id}, {"reason", *r.reject_reason}});
    }
    if (r.repair_rounds > 0) repaired_list.push_back({{"id", r.id}, {"rounds", r.repair_rounds}, {"status", to_string(r.status)}});
  }
  manifest["final_status"] = by_status;
  manifest["reject_reasons"] = by_reason;
  manifest["rejected"] = rejected;
  manifest["repaired"] = repaired_list;
  manifest["curated"] = static_cast<std::size_t>(std::count_if(corpus.begin(), corpus.end(), [&](const auto& r) {
    return r.status == (judging ? Status::accepted : Status::sanitized);
  }));

  return {std::move(corpus), std::move(manifest)};
}

PipelineResult run_pipeline(const fs::path& input, const Config& cfg, backends::Backends& be,
                            const PipelineOptions& options) {
  auto corpus = read_jsonl(input);
  if (options.out_dir.empty()) throw ConfigError("run_pipeline: output directory required");
  fs::create_directories(options.out_dir);
  auto result = run_pipeline(std::move(corpus), cfg, be, options);
  write_jsonl(options.out_dir / "records.jsonl", result.records, true);
  std::vector<SampleRecord> curated;
  const bool judging = be.configured(backends::Kind::judge);
  for (const auto& r : result.records) {
    if (r.status == (judging ? Status::accepted : Status::sanitized)) curated.push_back(r);
  }
  write_jsonl(options.out_dir / "curated.jsonl", curated, false);
  std::ofstream(options.out_dir / "manifest.json", std::ios::binary) << result.manifest.dump(2) << '\n';
  return result;
}

}  // namespace scitikz::dataengine
