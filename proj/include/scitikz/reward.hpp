#pragma once

// Reward composition and GRPO scalar terms.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "scitikz/codemetrics.hpp"
#include "scitikz/imgmetrics.hpp"
#include "scitikz/sandbox.hpp"

namespace scitikz::reward {

enum class Stage { one, two };

struct RewardConfig {
  Stage stage = Stage::one;
  double alpha_plus = 0.1;
  double alpha_minus = -0.6;
  double lambda_vis = 1.0;
  double lambda_sem = 0.6;
  double lambda_str = 0.4;
  double tau_hold = 0.8;
  double tau_temp = 0.5;
  double tau_gate = 0.6;
  double lambda_code = 0.15;
  double gamma = 0.4;
  double tau_ted = 0.4;

  static RewardConfig stage_one();
  static RewardConfig stage_two();

  /// Throws ConfigError on a hard violation. Returns a warning (empty when
  /// none) for soft ones such as mixing weights that do not sum to one.
  std::string validate() const;
};

struct GrpoConfig {
  int group_size = 5;
  double clip_epsilon = 0.2;
  double kl_beta = 0.01;
  double std_floor = 1e-6;

  void validate() const;
};

struct RewardBreakdown {
  double r_exec = 0.0;
  double s_sem = 0.0;
  double s_struct = 0.0;
  double r_vis = 0.0;
  bool compiled = false;
  bool gate_open = false;
  /// Gate open but the caller has not supplied code scores yet.
  bool pending = false;
  std::optional<double> s_code;
  double lambda_vis = 0.0;
  double lambda_code = 0.0;
  double total = 0.0;
};

struct GroupStats {
  std::vector<double> rewards;
  double mean = 0.0;
  double stddev = 0.0;
  std::vector<double> advantages;
};

/// alpha_plus on success, alpha_minus on compile error or timeout. Throws
/// EnvironmentError when the toolchain is missing.
double exec_reward(sandbox::CompileStatus status, const RewardConfig& cfg);
double exec_reward(const sandbox::CompileOutcome& outcome, const RewardConfig& cfg);

double visual_reward(const imgmetrics::VisualScores& scores, const RewardConfig& cfg);
double visual_reward(double s_sem, double s_struct, const RewardConfig& cfg);

/// r_exec + [success] * lambda_vis * r_vis. Throws MissingScores when the
/// compile succeeded without scores.
RewardBreakdown stage1_total(sandbox::CompileStatus status, const std::optional<imgmetrics::VisualScores>& scores,
                             const RewardConfig& cfg);

/// Stage-1 total plus [r_vis > tau_gate] * lambda_code * s_code.
RewardBreakdown stage2_total(sandbox::CompileStatus status, const std::optional<imgmetrics::VisualScores>& scores,
                             const std::optional<codemetrics::CodeScores>& code, const RewardConfig& cfg);

nlohmann::json to_json(const RewardBreakdown& b);

/// Recomputes `total` from the parts of a breakdown.
double recompute_total(const RewardBreakdown& b);

/// (R_i - mean) / max(sigma, floor) with the population standard deviation.
/// Throws GroupTooSmall for fewer than two rewards.
GroupStats group_advantages(std::span<const double> rewards, const GrpoConfig& cfg);

/// min(rho * A, clip(rho, 1 - eps, 1 + eps) * A)
double clipped_surrogate(double rho, double advantage, double epsilon);

/// beta * mean(exp(d) - d - 1), d = logp_ref - logp. Throws LengthMismatch.
double kl_penalty(std::span<const double> logp, std::span<const double> logp_ref, double beta);

struct CurriculumCandidate {
  sandbox::CompileStatus status = sandbox::CompileStatus::compile_error;
  double s_vis = 0.0;
};

/// Indices of candidates that failed to compile or whose s_vis lies in
/// [tau_min, tau_max]. Throws InvalidBand when tau_min > tau_max.
std::vector<std::size_t> curriculum_select(std::span<const CurriculumCandidate> candidates, double tau_min,
                                           double tau_max);

}  // namespace scitikz::reward
