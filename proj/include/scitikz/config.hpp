#pragma once

// The single declarative configuration document.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "scitikz/codemetrics.hpp"
#include "scitikz/imgmetrics.hpp"
#include "scitikz/reward.hpp"
#include "scitikz/sandbox.hpp"

namespace scitikz {

struct CurriculumConfig {
  double tau_min = 0.5;
  double tau_max = 0.9;
};

struct CodeMetricsConfig {
  codemetrics::EedCosts eed{};
  std::size_t trivial_k = 500;
  int max_order = 4;
  double tau_ted = 0.4;
  double gamma = 0.4;
  /// Optional sidecar with the mined trivial n-grams; empty = none masked.
  std::filesystem::path trivial_ngrams;
};

struct ImgMetricsConfig {
  double background_threshold = 0.99;
  double border_pt = 10.0;
  imgmetrics::SsimParams ssim{};
};

enum class GateMode { floors, delta };

struct GateThresholds {
  GateMode mode = GateMode::floors;
  // floor form
  int total_min = 18;
  int correctness_gt = 2;
  int others_min = 2;
  // strict-inequality form: total > delta_total, complexity > delta_comp,
  // min(correctness, layout, readability, scientific) > delta_min
  int delta_total = 17;
  int delta_comp = 1;
  int delta_min = 1;
};

struct BenchmarkPreScreen {
  int core_min = 4;        // correctness, layout, readability, scientific
  int complexity_min = 1;
  int easy_max = 2;        // complexity <= easy_max -> easy
  int medium_max = 3;      // complexity <= medium_max -> medium, else hard
};

struct DataEngineConfig {
  std::size_t max_tokens = 8192;  // drop when token_count >= max_tokens
  double max_aspect = 15.0;       // drop when aspect > max or < 1/max
  std::size_t dedup_n = 50;
  std::size_t dedup_max_shared = 5;  // drop when shared > this
  int max_repair_iters = 3;
  std::vector<std::string> exclusion_list;
  std::vector<std::string> droppable_packages;
  GateThresholds gate{};
  BenchmarkPreScreen benchmark{};
};

struct DscConfig {
  int reconstructions = 1;
  double fault_rate = 0.1;
  int images = 4;
  double temperature = 0.1;
  double top_p = 0.95;
  int max_length = 4096;
};

struct Config {
  sandbox::ToolchainConfig sandbox{};
  reward::RewardConfig stage1 = reward::RewardConfig::stage_one();
  reward::RewardConfig stage2 = reward::RewardConfig::stage_two();
  reward::GrpoConfig grpo{};
  CurriculumConfig curriculum{};
  CodeMetricsConfig codemetrics{};
  ImgMetricsConfig imgmetrics{};
  DataEngineConfig dataengine{};
  DscConfig dsc{};
  unsigned jobs = 0;  // 0 = hardware concurrency
  std::uint64_t seed = 0;

  Config();

  /// Values absent from `j` keep their defaults; unknown keys are rejected.
  static Config from_json(const nlohmann::json& j);
  static Config load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  /// sha256 of the canonical JSON form.
  std::string hash() const;

  /// Throws ConfigError on violated invariants; returns soft warnings.
  std::vector<std::string> validate() const;

  unsigned effective_jobs() const;
};

/// Path of the shipped default config, when known at build time.
std::filesystem::path default_config_path();

}  // namespace scitikz
