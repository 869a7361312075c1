#pragma once

// Rollout simulator for the dual self-consistency loop. No parameters are
// updated here; traces carry the scalar terms an external trainer needs.

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "scitikz/backends.hpp"
#include "scitikz/codemetrics.hpp"
#include "scitikz/renderer.hpp"
#include "scitikz/config.hpp"
#include "scitikz/reward.hpp"
#include "scitikz/sandbox.hpp"

namespace scitikz::dscloop {

class Policy {
 public:
  virtual ~Policy() = default;
  /// Exactly n programs for the image. `key` identifies the image for
  /// deterministic sampling.
  virtual std::vector<std::string> sample(const RasterImage& image, std::string_view key, int n) = 0;
  /// One reconstruction of a rendered image.
  virtual std::string reconstruct(const RasterImage& image, std::string_view key) = 0;
  virtual std::string identity() const = 0;
};

struct ToyPolicyOptions {
  std::uint64_t seed = 0;
  double fault_rate = 0.1;
  double perturb_rate = 0.5;
  int bank_size = 8;
};

/// Seeded template family with perturbations and syntax-fault injection.
/// Reconstructions return the nearest bank template under the fallback
/// embedding.
class ToyPolicy final : public Policy {
 public:
  explicit ToyPolicy(ToyPolicyOptions options);

  std::vector<std::string> sample(const RasterImage& image, std::string_view key, int n) override;
  std::string reconstruct(const RasterImage& image, std::string_view key) override;
  std::string identity() const override;

  const std::vector<std::string>& bank() const noexcept { return bank_; }
  std::size_t nearest(const RasterImage& image) const;

 private:
  ToyPolicyOptions options_;
  std::vector<std::string> bank_;
  std::vector<std::vector<double>> bank_embeddings_;
};

/// Builtin toy policy bound to a seed.
std::unique_ptr<ToyPolicy> toy_policy(std::uint64_t seed, double fault_rate = 0.1);

/// A policy reached over the backends /policy endpoint.
class BackendPolicy final : public Policy {
 public:
  BackendPolicy(backends::Backends& be, backends::SamplingParams params) : be_(be), params_(params) {}
  std::vector<std::string> sample(const RasterImage& image, std::string_view key, int n) override;
  std::string reconstruct(const RasterImage& image, std::string_view key) override;
  std::string identity() const override { return be_.identity(backends::Kind::policy); }

 private:
  backends::Backends& be_;
  backends::SamplingParams params_;
};

struct Task {
  std::string id;
  RasterImage image;
};

struct Rollout {
  std::string code;
  std::string status;  // compile status, "policy-error" or "blank-render"
  std::optional<imgmetrics::VisualScores> visual;
  std::vector<std::string> reconstructions;
  std::optional<codemetrics::CodeScores> code_scores;
  reward::RewardBreakdown breakdown;
};

struct RolloutTrace {
  std::string image_id;
  std::vector<Rollout> rollouts;
  reward::GroupStats group;

  nlohmann::json to_json() const;
};

struct LoopSettings {
  int group_size = 5;
  int reconstructions = 1;
  reward::RewardConfig reward = reward::RewardConfig::stage_two();
  reward::GrpoConfig grpo{};
  codemetrics::EedCosts eed{};
  int max_order = 4;
  double background_threshold = 0.99;
  unsigned jobs = 1;

  static LoopSettings from_config(const Config& cfg);
};

/// Samples G programs per task, renders and scores them, back-translates
/// gate-open rollouts and normalizes advantages per group.
std::vector<RolloutTrace> run_iteration(std::span<const Task> tasks, Policy& policy, const Renderer& renderer,
                                        backends::Backends& be, const codemetrics::TrivialNgramSet& trivial,
                                        const LoopSettings& settings);

/// Renders `count` templates of a toy bank into tasks.
std::vector<Task> toy_tasks(const ToyPolicy& policy, const Renderer& renderer, int count);

struct LoopReport {
  std::size_t traces = 0;
  std::size_t rollouts = 0;
  double compile_rate = 0.0;
  std::optional<double> mean_r_vis;  // over compiled rollouts
  double gate_entry_rate = 0.0;
  std::optional<double> mean_s_code;  // over gate-open rollouts
  double mean_total = 0.0;

  nlohmann::json to_json() const;
  std::string to_table() const;
};

/// Throws Error on an empty trace list.
LoopReport loop_report(std::span<const RolloutTrace> traces);

/// Rollouts that would enter the gate at threshold tau_gate: compiled with
/// r_vis > tau_gate.
std::size_t gate_entry_count(std::span<const RolloutTrace> traces, double tau_gate);

}  // namespace scitikz::dscloop
