#pragma once

// Clients for the external capabilities. See docs/protocol.md for the wire
// format.

#include <array>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "scitikz/imgmetrics.hpp"
#include "scitikz/raster.hpp"

namespace scitikz::backends {

enum class Kind { embed, perceptual, repair, judge, policy };
enum class Transport { builtin, http, stdio };

inline constexpr std::array<Kind, 5> kAllKinds = {Kind::embed, Kind::perceptual, Kind::repair, Kind::judge,
                                                  Kind::policy};

std::string_view to_string(Kind k);
std::string_view to_string(Transport t);
Kind kind_from_string(std::string_view s);
Transport transport_from_string(std::string_view s);

struct BackendEndpoint {
  Kind kind = Kind::embed;
  Transport transport = Transport::builtin;
  /// Base URL for http ("http://host:port"), command line for stdio.
  std::string address;
  double timeout_s = 30.0;
  int retries = 0;

  /// "builtin", "http:<url>" or "stdio:<command>".
  std::string identity() const;
};

struct BackendsConfig {
  std::array<BackendEndpoint, 5> endpoints;
  /// Empty disables the on-disk cache.
  std::filesystem::path cache_dir;

  BackendsConfig();
  BackendEndpoint& operator[](Kind k) { return endpoints[static_cast<std::size_t>(k)]; }
  const BackendEndpoint& operator[](Kind k) const { return endpoints[static_cast<std::size_t>(k)]; }

  /// {"cache_dir": ..., "embed": {"transport": "http", "address": ...,
  /// "timeout_s": ..., "retries": ...}, ...}. Missing kinds stay builtin.
  static BackendsConfig from_json(const nlohmann::json& j);
  static BackendsConfig load(const std::filesystem::path& path);

  /// SCITIKZ_<KIND>_BACKEND = builtin | http://... | stdio:<command>
  void apply_env_overrides();
};

/// Parses an endpoint spec as accepted by the env overrides.
BackendEndpoint parse_endpoint_spec(Kind kind, std::string_view spec);

struct JudgeScores {
  int correctness = 0;
  int layout_precision = 0;
  int readability = 0;
  int scientific_plausibility = 0;
  int visual_complexity = 0;
  int total = 0;

  nlohmann::json to_json() const;
  static JudgeScores from_json(const nlohmann::json& j);
  friend bool operator==(const JudgeScores&, const JudgeScores&) = default;
};

/// The final line of `reply` must be one JSON object with exactly the five
/// integer scores (0..5) and total_score equal to their sum. Trailing blank
/// lines are ignored; anything else after the object is a violation.
/// Throws SchemaViolation.
JudgeScores parse_judge_reply(std::string_view reply);

struct SamplingParams {
  double temperature = 0.1;
  double top_p = 0.95;
  int max_length = 4096;
};

/// Thread-safe facade over the configured endpoints.
class Backends {
 public:
  explicit Backends(BackendsConfig config = {});

  const BackendsConfig& config() const noexcept { return config_; }
  std::string identity(Kind k) const;
  bool configured(Kind k) const { return config_[k].transport != Transport::builtin; }

  /// Embedding dimension is pinned by the first response; later responses
  /// of another dimension raise DimensionMismatch.
  std::vector<double> embed(const RasterImage& img);
  double perceptual_distance(const imgmetrics::AlignedPair& pair);
  /// Builtin: the rule table. Throws RepairUnavailable when nothing applies.
  std::string repair(std::string_view code, std::string_view log_excerpt);
  /// No builtin judge: throws BackendError when none is configured.
  JudgeScores judge(const RasterImage& img, std::string_view code);
  /// Returns exactly n programs. No builtin policy.
  std::vector<std::string> policy(const RasterImage& img, int n, const SamplingParams& params);

  /// Sends one request envelope and returns the response payload. Exposed for
  /// protocol tests.
  nlohmann::json call(Kind kind, const nlohmann::json& payload, bool cacheable);

 private:
  nlohmann::json call_once(const BackendEndpoint& ep, const std::string& body);

  BackendsConfig config_;
  std::mutex mutex_;
  std::optional<std::size_t> embed_dim_;
  std::array<std::mutex, 5> stdio_locks_;
};

}  // namespace scitikz::backends
