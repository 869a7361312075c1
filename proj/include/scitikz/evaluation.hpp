#pragma once

// Render-and-compare evaluation with ALL/SUCCESS aggregation.

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "scitikz/backends.hpp"
#include "scitikz/codemetrics.hpp"
#include "scitikz/config.hpp"
#include "scitikz/dataengine.hpp"
#include "scitikz/renderer.hpp"

namespace scitikz::evaluation {

enum class Mode { all, success };
std::string_view to_string(Mode m);

enum class Direction { similarity, distance };

struct MetricInfo {
  std::string_view name;
  Direction direction;
};

/// Fixed metric order used by records, aggregates and tables. Every value is
/// reported on [0, 1]; the failure penalty is 0 for similarities and 1 for
/// distances.
inline constexpr MetricInfo kMetrics[] = {
    {"cosine", Direction::similarity},       {"ssim", Direction::similarity},
    {"d_perceptual", Direction::distance},   {"s_struct", Direction::similarity},
    {"d_eed", Direction::distance},          {"s_ted", Direction::similarity},
    {"crystal_bleu", Direction::similarity},
};

double penalty(Direction d);

struct VisualMetrics {
  double cosine = 0.0;  // mapped to [0, 1]
  double ssim = 0.0;    // clamped to [0, 1]
  double d_perceptual = 1.0;
  double s_struct = 0.0;
};

struct CodeMetrics {
  double d_eed = 1.0;  // clipped to [0, 1]
  double s_ted = 0.0;
  double crystal_bleu = 0.0;
};

struct EvalRecord {
  std::string id;
  std::string status;  // compile status, "blank-render" or "missing-prediction"
  std::optional<VisualMetrics> visual;  // present iff the prediction rendered
  CodeMetrics code;

  bool succeeded() const noexcept { return visual.has_value(); }
  /// Value of a metric by name, or nullopt when a visual metric is absent.
  std::optional<double> metric(std::string_view name) const;
};

using Aggregate = std::map<std::string, double, std::less<>>;

/// Per-metric arithmetic means. ALL substitutes the penalty for every metric
/// of a failed record; SUCCESS averages successful records only. Returns
/// nullopt for an empty selection.
std::optional<Aggregate> aggregate(std::span<const EvalRecord> records, Mode mode);

/// Code metrics averaged over every record with their computed values.
std::optional<Aggregate> code_means(std::span<const EvalRecord> records);

struct Exclusion {
  std::string id;
  std::string reason;
};

struct EvalReport {
  std::vector<EvalRecord> records;
  std::optional<Aggregate> all;
  std::optional<Aggregate> success;
  std::optional<Aggregate> code_all_samples;
  std::vector<Exclusion> excluded;
  /// Column labels; builtin backends get "fallback_" prefixed names.
  std::map<std::string, std::string, std::less<>> columns;
  nlohmann::json config;
  std::string config_hash;
  std::map<std::string, std::string> backends;
  std::string renderer;

  nlohmann::json to_json() const;
  std::string to_table() const;
};

struct EvalOptions {
  unsigned jobs = 1;
  /// Reference renders are cached here as PNG keyed by renderer and code.
  std::optional<std::filesystem::path> ref_cache_dir;
};

/// Matches predictions to references by id. References that fail to render
/// are excluded; predictions without a reference are ignored.
EvalReport evaluate(std::span<const dataengine::SampleRecord> predictions,
                    std::span<const dataengine::SampleRecord> references, const Config& cfg,
                    backends::Backends& be, const Renderer& renderer, const codemetrics::TrivialNgramSet& trivial,
                    const EvalOptions& options = {});

/// Code-side metrics of one pair with the configured costs.
CodeMetrics score_code(std::string_view prediction, std::string_view reference, const Config& cfg,
                       const codemetrics::TrivialNgramSet& trivial);

}  // namespace scitikz::evaluation
