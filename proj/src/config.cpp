#include "scitikz/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <thread>

#include "scitikz/digest.hpp"
#include "scitikz/error.hpp"
#include "scitikz/repair.hpp"
#include "scitikz/texlex.hpp"

namespace scitikz {

using nlohmann::json;

namespace {

// JSON has no infinity; a null jump cost disables jumps.
json cost_to_json(double v) { return std::isinf(v) ? json(nullptr) : json(v); }
double cost_from_json(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

json reward_to_json(const reward::RewardConfig& r) {
  return {{"alpha_plus", r.alpha_plus},   {"alpha_minus", r.alpha_minus}, {"lambda_vis", r.lambda_vis},
          {"lambda_sem", r.lambda_sem},   {"lambda_str", r.lambda_str},   {"tau_hold", r.tau_hold},
          {"tau_temp", r.tau_temp},       {"tau_gate", r.tau_gate},       {"lambda_code", r.lambda_code},
          {"gamma", r.gamma},             {"tau_ted", r.tau_ted}};
}

void reward_from_json(const json& j, reward::RewardConfig& r) {
  r.alpha_plus = j.at("alpha_plus");
  r.alpha_minus = j.at("alpha_minus");
  r.lambda_vis = j.at("lambda_vis");
  r.lambda_sem = j.at("lambda_sem");
  r.lambda_str = j.at("lambda_str");
  r.tau_hold = j.at("tau_hold");
  r.tau_temp = j.at("tau_temp");
  r.tau_gate = j.at("tau_gate");
  r.lambda_code = j.at("lambda_code");
  r.gamma = j.at("gamma");
  r.tau_ted = j.at("tau_ted");
}

std::string_view gate_mode_name(GateMode m) { return m == GateMode::floors ? "floors" : "delta"; }

GateMode gate_mode_from(const std::string& s) {
  if (s == "floors") return GateMode::floors;
  if (s == "delta") return GateMode::delta;
  throw ConfigError("unknown gate mode: " + s);
}

// Every key of `given` must exist in `schema` (recursively through objects).
void check_keys(const json& given, const json& schema, const std::string& where) {
  if (!given.is_object() || !schema.is_object()) return;
  for (auto it = given.begin(); it != given.end(); ++it) {
    if (!schema.contains(it.key())) throw ConfigError("unknown config key: " + where + it.key());
    check_keys(it.value(), schema.at(it.key()), where + it.key() + ".");
  }
}

}  // namespace

Config::Config() {
  dataengine.exclusion_list = texlex::default_exclusion_list();
  dataengine.droppable_packages = dataengine::default_droppable_packages();
}

json Config::to_json() const {
  const auto& s = sandbox;
  const auto& c = codemetrics;
  const auto& d = dataengine;
  return {
      {"schema", "scitikz-config/1"},
      {"jobs", jobs},
      {"seed", seed},
      {"sandbox",
       {{"engine_command", s.engine_command},
        {"rasterizer_command", s.rasterizer_command},
        {"validate_timeout_s", s.validate_timeout_s},
        {"render_timeout_s", s.render_timeout_s},
        {"grace_s", s.grace_s},
        {"dpi", s.dpi},
        {"max_log_bytes", s.max_log_bytes},
        {"keep_artifacts", s.keep_artifacts},
        {"work_root", s.work_root.string()},
        {"env_allow", s.env_allow}}},
      {"reward", {{"stage1", reward_to_json(stage1)}, {"stage2", reward_to_json(stage2)}}},
      {"grpo",
       {{"group_size", grpo.group_size},
        {"clip_epsilon", grpo.clip_epsilon},
        {"kl_beta", grpo.kl_beta},
        {"std_floor", grpo.std_floor}}},
      {"curriculum", {{"tau_min", curriculum.tau_min}, {"tau_max", curriculum.tau_max}}},
      {"codemetrics",
       {{"eed",
         {{"insertion", c.eed.insertion},
          {"substitution", c.eed.substitution},
          {"deletion", c.eed.deletion},
          {"jump", cost_to_json(c.eed.jump)},
          {"coverage_penalty", c.eed.coverage_penalty}}},
        {"trivial_k", c.trivial_k},
        {"max_order", c.max_order},
        {"tau_ted", c.tau_ted},
        {"gamma", c.gamma},
        {"trivial_ngrams", c.trivial_ngrams.string()}}},
      {"imgmetrics",
       {{"background_threshold", imgmetrics.background_threshold},
        {"border_pt", imgmetrics.border_pt},
        {"ssim",
         {{"window", imgmetrics.ssim.window},
          {"sigma", imgmetrics.ssim.sigma},
          {"k1", imgmetrics.ssim.k1},
          {"k2", imgmetrics.ssim.k2},
          {"dynamic_range", imgmetrics.ssim.dynamic_range}}}}},
      {"dataengine",
       {{"max_tokens", d.max_tokens},
        {"max_aspect", d.max_aspect},
        {"dedup_n", d.dedup_n},
        {"dedup_max_shared", d.dedup_max_shared},
        {"max_repair_iters", d.max_repair_iters},
        {"exclusion_list", d.exclusion_list},
        {"droppable_packages", d.droppable_packages},
        {"gate",
         {{"mode", gate_mode_name(d.gate.mode)},
          {"total_min", d.gate.total_min},
          {"correctness_gt", d.gate.correctness_gt},
          {"others_min", d.gate.others_min},
          {"delta_total", d.gate.delta_total},
          {"delta_comp", d.gate.delta_comp},
          {"delta_min", d.gate.delta_min}}},
        {"benchmark",
         {{"core_min", d.benchmark.core_min},
          {"complexity_min", d.benchmark.complexity_min},
          {"easy_max", d.benchmark.easy_max},
          {"medium_max", d.benchmark.medium_max}}}}},
      {"dsc",
       {{"reconstructions", dsc.reconstructions},
        {"fault_rate", dsc.fault_rate},
        {"images", dsc.images},
        {"temperature", dsc.temperature},
        {"top_p", dsc.top_p},
        {"max_length", dsc.max_length}}},
  };
}

Config Config::from_json(const json& given) {
  Config cfg;
  json j = cfg.to_json();
  check_keys(given, j, "");
  j.merge_patch(given);
  try {
    if (j.at("schema") != "scitikz-config/1") throw ConfigError("unsupported config schema");
    cfg.jobs = j.at("jobs");
    cfg.seed = j.at("seed");

    const auto& s = j.at("sandbox");
    cfg.sandbox.engine_command = s.at("engine_command").get<std::vector<std::string>>();
    cfg.sandbox.rasterizer_command = s.at("rasterizer_command").get<std::vector<std::string>>();
    cfg.sandbox.validate_timeout_s = s.at("validate_timeout_s");
    cfg.sandbox.render_timeout_s = s.at("render_timeout_s");
    cfg.sandbox.grace_s = s.at("grace_s");
    cfg.sandbox.dpi = s.at("dpi");
    cfg.sandbox.max_log_bytes = s.at("max_log_bytes");
    cfg.sandbox.keep_artifacts = s.at("keep_artifacts");
    cfg.sandbox.work_root = s.at("work_root").get<std::string>();
    cfg.sandbox.env_allow = s.at("env_allow").get<std::vector<std::string>>();

    reward_from_json(j.at("reward").at("stage1"), cfg.stage1);
    reward_from_json(j.at("reward").at("stage2"), cfg.stage2);
    cfg.stage1.stage = reward::Stage::one;
    cfg.stage2.stage = reward::Stage::two;

    const auto& g = j.at("grpo");
    cfg.grpo.group_size = g.at("group_size");
    cfg.grpo.clip_epsilon = g.at("clip_epsilon");
    cfg.grpo.kl_beta = g.at("kl_beta");
    cfg.grpo.std_floor = g.at("std_floor");

    cfg.curriculum.tau_min = j.at("curriculum").at("tau_min");
    cfg.curriculum.tau_max = j.at("curriculum").at("tau_max");

    const auto& c = j.at("codemetrics");
    const auto& e = c.at("eed");
    cfg.codemetrics.eed.insertion = e.at("insertion");
    cfg.codemetrics.eed.substitution = e.at("substitution");
    cfg.codemetrics.eed.deletion = e.at("deletion");
    cfg.codemetrics.eed.jump = cost_from_json(e.at("jump"));
    cfg.codemetrics.eed.coverage_penalty = e.at("coverage_penalty");
    cfg.codemetrics.trivial_k = c.at("trivial_k");
    cfg.codemetrics.max_order = c.at("max_order");
    cfg.codemetrics.tau_ted = c.at("tau_ted");
    cfg.codemetrics.gamma = c.at("gamma");
    cfg.codemetrics.trivial_ngrams = c.at("trivial_ngrams").get<std::string>();

    const auto& im = j.at("imgmetrics");
    cfg.imgmetrics.background_threshold = im.at("background_threshold");
    cfg.imgmetrics.border_pt = im.at("border_pt");
    cfg.imgmetrics.ssim.window = im.at("ssim").at("window");
    cfg.imgmetrics.ssim.sigma = im.at("ssim").at("sigma");
    cfg.imgmetrics.ssim.k1 = im.at("ssim").at("k1");
    cfg.imgmetrics.ssim.k2 = im.at("ssim").at("k2");
    cfg.imgmetrics.ssim.dynamic_range = im.at("ssim").at("dynamic_range");

    const auto& d = j.at("dataengine");
    cfg.dataengine.max_tokens = d.at("max_tokens");
    cfg.dataengine.max_aspect = d.at("max_aspect");
    cfg.dataengine.dedup_n = d.at("dedup_n");
    cfg.dataengine.dedup_max_shared = d.at("dedup_max_shared");
    cfg.dataengine.max_repair_iters = d.at("max_repair_iters");
    cfg.dataengine.exclusion_list = d.at("exclusion_list").get<std::vector<std::string>>();
    cfg.dataengine.droppable_packages = d.at("droppable_packages").get<std::vector<std::string>>();
    const auto& gt = d.at("gate");
    cfg.dataengine.gate.mode = gate_mode_from(gt.at("mode"));
    cfg.dataengine.gate.total_min = gt.at("total_min");
    cfg.dataengine.gate.correctness_gt = gt.at("correctness_gt");
    cfg.dataengine.gate.others_min = gt.at("others_min");
    cfg.dataengine.gate.delta_total = gt.at("delta_total");
    cfg.dataengine.gate.delta_comp = gt.at("delta_comp");
    cfg.dataengine.gate.delta_min = gt.at("delta_min");
    const auto& b = d.at("benchmark");
    cfg.dataengine.benchmark.core_min = b.at("core_min");
    cfg.dataengine.benchmark.complexity_min = b.at("complexity_min");
    cfg.dataengine.benchmark.easy_max = b.at("easy_max");
    cfg.dataengine.benchmark.medium_max = b.at("medium_max");

    const auto& ds = j.at("dsc");
    cfg.dsc.reconstructions = ds.at("reconstructions");
    cfg.dsc.fault_rate = ds.at("fault_rate");
    cfg.dsc.images = ds.at("images");
    cfg.dsc.temperature = ds.at("temperature");
    cfg.dsc.top_p = ds.at("top_p");
    cfg.dsc.max_length = ds.at("max_length");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config value: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed config " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

std::string Config::hash() const { return sha256_hex(to_json().dump()); }

std::vector<std::string> Config::validate() const {
  std::vector<std::string> warnings;
  for (const auto* r : {&stage1, &stage2}) {
    if (auto w = r->validate(); !w.empty()) warnings.push_back(w);
  }
  grpo.validate();
  if (!(curriculum.tau_min <= curriculum.tau_max)) throw ConfigError("curriculum: tau_min exceeds tau_max");
  const auto& e = codemetrics.eed;
  for (double v : {e.insertion, e.substitution, e.deletion, e.jump, e.coverage_penalty}) {
    if (!(v >= 0)) throw ConfigError("codemetrics: EED costs must be non-negative");
  }
  if (codemetrics.trivial_k < 1 || codemetrics.max_order < 1) throw ConfigError("codemetrics: k and orders >= 1");
  if (!(codemetrics.tau_ted > 0)) throw ConfigError("codemetrics: tau_ted must be positive");
  if (!(codemetrics.gamma >= 0 && codemetrics.gamma <= 1)) throw ConfigError("codemetrics: gamma in [0,1]");
  if (sandbox.engine_command.empty() || sandbox.rasterizer_command.empty()) {
    throw ConfigError("sandbox: empty command");
  }
  if (!(sandbox.validate_timeout_s > 0 && sandbox.render_timeout_s > 0 && sandbox.dpi > 0)) {
    throw ConfigError("sandbox: timeouts and dpi must be positive");
  }
  if (dataengine.dedup_n < 1) throw ConfigError("dataengine: dedup_n must be >= 1");
  if (!(dataengine.max_aspect >= 1)) throw ConfigError("dataengine: max_aspect must be >= 1");
  if (dataengine.max_repair_iters < 0) throw ConfigError("dataengine: max_repair_iters must be >= 0");
  if (imgmetrics.ssim.window < 1 || !(imgmetrics.ssim.sigma > 0)) throw ConfigError("imgmetrics: bad SSIM window");
  if (!(dsc.fault_rate >= 0 && dsc.fault_rate <= 1)) throw ConfigError("dsc: fault_rate in [0,1]");
  if (dsc.reconstructions < 1 || dsc.images < 1) throw ConfigError("dsc: counts must be >= 1");
  return warnings;
}

unsigned Config::effective_jobs() const {
  if (jobs > 0) return jobs;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

std::filesystem::path default_config_path() {
#ifdef SCITIKZ_DEFAULT_CONFIG
  return SCITIKZ_DEFAULT_CONFIG;
#else
  return "config/default.json";
#endif
}

}  // namespace scitikz
