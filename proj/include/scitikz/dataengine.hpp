#pragma once

// The curation pipeline: wrap, validate, remediate, render, sanitize, dedup,
// judge and gate.

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "scitikz/backends.hpp"
#include "scitikz/config.hpp"
#include "scitikz/repair.hpp"
#include "scitikz/sandbox.hpp"
#include "scitikz/texlex.hpp"

namespace scitikz::dataengine {

enum class Status { raw, wrapped, compiled, repaired, sanitized, judged, accepted, rejected };

std::string_view to_string(Status s);
Status status_from_string(std::string_view s);

/// Stable reject reasons.
namespace reason {
inline constexpr std::string_view no_drawable_content = "no-drawable-content";
inline constexpr std::string_view remediation_exhausted = "remediation-exhausted";
inline constexpr std::string_view repair_unavailable = "repair-unavailable";
inline constexpr std::string_view remediation_stalled = "remediation-stalled";
inline constexpr std::string_view render_failed = "render-failed";
inline constexpr std::string_view too_long = "too-long";
inline constexpr std::string_view aspect_ratio = "aspect-ratio";
inline constexpr std::string_view external_dependency = "external-dependency";
inline constexpr std::string_view duplicate = "duplicate";
inline constexpr std::string_view judge_error = "judge-error";
inline constexpr std::string_view quality_gate = "quality-gate";
}  // namespace reason

struct AuditEntry {
  std::string stage;   // "validate", "repair", "render", ...
  int round = 0;
  std::string code;    // the code compiled or produced at this step
  std::string status;  // compile status or outcome note
  std::string log_excerpt;
};

struct SampleRecord {
  std::string id;
  std::string source;
  std::string code;
  std::optional<std::string> image_ref;
  std::size_t token_count = 0;
  double aspect_ratio = 0.0;
  std::optional<backends::JudgeScores> judge;
  Status status = Status::raw;
  std::optional<std::string> reject_reason;
  int repair_rounds = 0;
  std::vector<AuditEntry> audit;

  void reject(std::string_view why) {
    status = Status::rejected;
    reject_reason = std::string(why);
  }

  nlohmann::json to_json(bool with_audit = true) const;
  static SampleRecord from_json(const nlohmann::json& j);
};

/// One record per line; blank lines skipped. Throws ConfigError on
/// malformed lines or duplicate ids.
std::vector<SampleRecord> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<SampleRecord>& records, bool with_audit = true);

struct SanitizeLimits {
  std::size_t max_tokens = 8192;
  double max_aspect = 15.0;
  std::vector<std::string> exclusion_list = texlex::default_exclusion_list();
};

struct SanitizeDecision {
  bool keep = true;
  std::optional<std::string> reason;
};

/// Drops on token_count >= max_tokens, aspect outside [1/max, max], or any
/// dependency finding, checked in that order.
SanitizeDecision heuristic_sanitize(const SampleRecord& rec, const SanitizeLimits& limits);

/// Streaming near-duplicate filter over n-gram shingles. Only retained
/// records enter the index.
class DedupIndex {
 public:
  explicit DedupIndex(std::size_t n = 50, std::size_t max_shared = 5) : n_(n), max_shared_(max_shared) {}

  struct Verdict {
    bool retained = true;
    std::size_t shared = 0;
  };
  Verdict offer(const texlex::TokenStream& stream);

  std::size_t size() const noexcept { return index_.size(); }

 private:
  std::size_t n_;
  std::size_t max_shared_;
  std::unordered_set<texlex::Fingerprint> index_;
};

struct DedupRemoval {
  std::string id;
  std::size_t shared = 0;
};

struct DedupResult {
  std::vector<std::string> retained;
  std::vector<DedupRemoval> removed;
};

/// Shingles the document body of each record, in input order.
DedupResult dedup(const std::vector<SampleRecord>& corpus, std::size_t n = 50, std::size_t max_shared = 5);

bool quality_gate(const backends::JudgeScores& s, const GateThresholds& thr);

enum class Tier { easy, medium, hard };
std::string_view to_string(Tier t);

/// Throws PreScreenFailed unless the scores meet the benchmark pre-screen.
Tier stratify_benchmark(const backends::JudgeScores& s, const BenchmarkPreScreen& rule = {});

using RepairAgent = std::function<std::string(std::string_view code, std::string_view log_excerpt)>;

struct RemediationResult {
  SampleRecord record;
  /// Outcome of the last compile; success iff the record was repaired.
  sandbox::CompileOutcome outcome;
};

/// Up to max_iters rounds of excerpt -> repair -> wrap -> compile. The agent
/// signals "no fix" by throwing RepairUnavailable. A record whose outcome
/// already succeeded is returned unchanged with a warning in its audit.
RemediationResult remediation_loop(SampleRecord rec, sandbox::CompileOutcome failed, const sandbox::Sandbox& sb,
                                   const RepairAgent& agent, int max_iters, double timeout_s);

struct PipelineOptions {
  std::filesystem::path out_dir;
  /// Images are written under out_dir/images when set.
  bool write_images = true;
};

struct PipelineResult {
  std::vector<SampleRecord> records;
  nlohmann::json manifest;
};

/// Runs every stage over the corpus. Aborts (EnvironmentError) only when the
/// toolchain is missing; per-record failures are recorded.
PipelineResult run_pipeline(std::vector<SampleRecord> corpus, const Config& cfg, backends::Backends& backends,
                            const PipelineOptions& options = {});

/// Reads input JSONL, runs the pipeline and writes records.jsonl,
/// curated.jsonl and manifest.json into options.out_dir.
PipelineResult run_pipeline(const std::filesystem::path& input, const Config& cfg, backends::Backends& backends,
                            const PipelineOptions& options);

}  // namespace scitikz::dataengine
