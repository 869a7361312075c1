#include "scitikz/reward.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "scitikz/error.hpp"

namespace scitikz::reward {

using sandbox::CompileStatus;

RewardConfig RewardConfig::stage_one() { return RewardConfig{}; }

RewardConfig RewardConfig::stage_two() {
  RewardConfig c;
  c.stage = Stage::two;
  c.alpha_plus = 0.05;
  c.alpha_minus = -0.5;
  c.lambda_vis = 0.8;
  return c;
}

std::string RewardConfig::validate() const {
  if (!(alpha_minus < 0.0 && 0.0 < alpha_plus)) throw ConfigError("reward: need alpha_minus < 0 < alpha_plus");
  if (!(tau_gate >= 0.0 && tau_gate <= 1.0)) throw ConfigError("reward: tau_gate must lie in [0, 1]");
  if (!(tau_hold >= 0.0 && tau_hold < 1.0)) throw ConfigError("reward: tau_hold must lie in [0, 1)");
  if (!(tau_temp > 0.0)) throw ConfigError("reward: tau_temp must be positive");
  if (!(tau_ted > 0.0)) throw ConfigError("reward: tau_ted must be positive");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("reward: gamma must lie in [0, 1]");
  if (lambda_vis < 0 || lambda_sem < 0 || lambda_str < 0 || lambda_code < 0) {
    throw ConfigError("reward: weights must be non-negative");
  }
  if (std::abs(lambda_sem + lambda_str - 1.0) > 1e-9) return "reward: lambda_sem + lambda_str != 1";
  return {};
}

void GrpoConfig::validate() const {
  if (group_size < 2) throw ConfigError("grpo: group_size must be >= 2");
  if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0)) throw ConfigError("grpo: clip_epsilon must lie in (0, 1)");
  if (!(kl_beta >= 0.0)) throw ConfigError("grpo: kl_beta must be non-negative");
  if (!(std_floor > 0.0)) throw ConfigError("grpo: std_floor must be positive");
}

double exec_reward(CompileStatus status, const RewardConfig& cfg) {
  switch (status) {
    case CompileStatus::success: return cfg.alpha_plus;
    case CompileStatus::compile_error:
    case CompileStatus::timeout: return cfg.alpha_minus;
    case CompileStatus::toolchain_missing: break;
  }
  throw EnvironmentError("toolchain-missing: cannot score a rollout without a LaTeX engine");
}

double exec_reward(const sandbox::CompileOutcome& outcome, const RewardConfig& cfg) {
  return exec_reward(outcome.status, cfg);
}

double visual_reward(double s_sem, double s_struct, const RewardConfig& cfg) {
  return cfg.lambda_sem * s_sem + cfg.lambda_str * s_struct;
}

double visual_reward(const imgmetrics::VisualScores& s, const RewardConfig& cfg) {
  return visual_reward(s.s_sem, s.s_struct, cfg);
}

nlohmann::json to_json(const RewardBreakdown& b) {
  return {{"r_exec", b.r_exec},         {"s_sem", b.s_sem},
          {"s_struct", b.s_struct},     {"r_vis", b.r_vis},
          {"compiled", b.compiled},     {"gate_open", b.gate_open},
          {"pending", b.pending},       {"s_code", b.s_code ? nlohmann::json(*b.s_code) : nlohmann::json(nullptr)},
          {"total", b.total}};
}

double recompute_total(const RewardBreakdown& b) {
  double total = b.r_exec;
  if (b.compiled) total += b.lambda_vis * b.r_vis;
  if (b.gate_open && b.s_code) total += b.lambda_code * *b.s_code;
  return total;
}

RewardBreakdown stage1_total(CompileStatus status, const std::optional<imgmetrics::VisualScores>& scores,
                             const RewardConfig& cfg) {
  RewardBreakdown b;
  b.r_exec = exec_reward(status, cfg);
  b.lambda_vis = cfg.lambda_vis;
  b.lambda_code = cfg.lambda_code;
  b.compiled = status == CompileStatus::success;
  if (b.compiled) {
    if (!scores) throw MissingScores("stage1_total: successful compile without visual scores");
    b.s_sem = scores->s_sem;
    b.s_struct = scores->s_struct;
    b.r_vis = visual_reward(*scores, cfg);
  }
  b.total = recompute_total(b);
  return b;
}

RewardBreakdown stage2_total(CompileStatus status, const std::optional<imgmetrics::VisualScores>& scores,
                             const std::optional<codemetrics::CodeScores>& code, const RewardConfig& cfg) {
  RewardBreakdown b = stage1_total(status, scores, cfg);
  b.gate_open = b.compiled && b.r_vis > cfg.tau_gate;
  if (b.gate_open) {
    if (code) b.s_code = code->s_code;
    else b.pending = true;
  }
  b.total = recompute_total(b);
  return b;
}

GroupStats group_advantages(std::span<const double> rewards, const GrpoConfig& cfg) {
  if (rewards.size() < 2) throw GroupTooSmall("group_advantages: need at least two rewards");
  GroupStats g;
  g.rewards.assign(rewards.begin(), rewards.end());
  const double n = static_cast<double>(rewards.size());
  double sum = 0;
  for (double r : rewards) sum += r;
  g.mean = sum / n;
  const bool degenerate = std::all_of(rewards.begin(), rewards.end(), [&](double r) { return r == rewards[0]; });
  double ss = 0;
  for (double r : rewards) ss += (r - g.mean) * (r - g.mean);
  g.stddev = std::sqrt(ss / n);
  g.advantages.resize(rewards.size(), 0.0);
  if (!degenerate) {
    const double denom = std::max(g.stddev, cfg.std_floor);
    for (std::size_t i = 0; i < rewards.size(); ++i) g.advantages[i] = (rewards[i] - g.mean) / denom;
  }
  return g;
}

double clipped_surrogate(double rho, double advantage, double epsilon) {
  if (rho < 0) throw std::invalid_argument("clipped_surrogate: ratio must be non-negative");
  const double clipped = std::clamp(rho, 1.0 - epsilon, 1.0 + epsilon);
  return std::min(rho * advantage, clipped * advantage);
}

double kl_penalty(std::span<const double> logp, std::span<const double> logp_ref, double beta) {
  if (logp.size() != logp_ref.size()) throw LengthMismatch("kl_penalty: sequences differ in length");
  if (logp.empty()) return 0.0;
  double s = 0;
  for (std::size_t i = 0; i < logp.size(); ++i) {
    const double d = logp_ref[i] - logp[i];
    s += std::expm1(d) - d;
  }
  return beta * s / static_cast<double>(logp.size());
}

std::vector<std::size_t> curriculum_select(std::span<const CurriculumCandidate> candidates, double tau_min,
                                           double tau_max) {
  if (!(tau_min <= tau_max)) throw InvalidBand("curriculum_select: tau_min exceeds tau_max");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    if (c.status != CompileStatus::success || (tau_min <= c.s_vis && c.s_vis <= tau_max)) out.push_back(i);
  }
  return out;
}

}  // namespace scitikz::reward
