#include "scitikz/cli.hpp"

#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "scitikz/backends.hpp"
#include "scitikz/codemetrics.hpp"
#include "scitikz/config.hpp"
#include "scitikz/dataengine.hpp"
#include "scitikz/digest.hpp"
#include "scitikz/dscloop.hpp"
#include "scitikz/error.hpp"
#include "scitikz/evaluation.hpp"
#include "scitikz/imgmetrics.hpp"
#include "scitikz/renderer.hpp"
#include "scitikz/reward.hpp"
#include "scitikz/sandbox.hpp"
#include "scitikz/texlex.hpp"

namespace scitikz {

namespace fs = std::filesystem;
using nlohmann::json;
using sandbox::CompileStatus;

namespace {

struct Globals {
  std::string config;
  std::string backends;
  unsigned jobs = 0;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Config load_config(const Globals& g, std::ostream& err) {
  Config cfg;
  if (!g.config.empty()) {
    cfg = Config::load(g.config);
  } else if (fs::exists(default_config_path())) {
    cfg = Config::load(default_config_path());
  }
  if (g.jobs) cfg.jobs = g.jobs;
  if (g.seed) cfg.seed = *g.seed;
  for (const auto& w : cfg.validate()) err << "warning: " << w << "\n";
  return cfg;
}

backends::BackendsConfig load_backends(const Globals& g) {
  auto bc = g.backends.empty() ? backends::BackendsConfig{} : backends::BackendsConfig::load(g.backends);
  bc.apply_env_overrides();
  return bc;
}

codemetrics::TrivialNgramSet load_trivial(const Config& cfg) {
  if (cfg.codemetrics.trivial_ngrams.empty()) return {};
  return codemetrics::TrivialNgramSet::load(cfg.codemetrics.trivial_ngrams);
}

void require_toolchain(const sandbox::Sandbox& sb) {
  if (!sb.engine_available()) throw EnvironmentError("toolchain-missing: " + sb.config().engine_command.front());
}

int cmd_compile(const Globals& g, const std::string& file, std::ostream& out, std::ostream& err) {
  const auto cfg = load_config(g, err);
  const sandbox::Sandbox sb(cfg.sandbox);
  require_toolchain(sb);
  json j{{"file", file}};
  std::string doc;
  try {
    doc = sandbox::wrap_standalone(read_file(file));
  } catch (const NoDrawableContent& e) {
    j["status"] = "no-drawable-content";
    j["log_excerpt"] = e.what();
    out << j.dump(2) << "\n";
    return kExitRecordFailures;
  }
  const auto outcome = sb.compile({doc, cfg.sandbox.validate_timeout_s});
  if (outcome.status == CompileStatus::toolchain_missing) {
    throw EnvironmentError("toolchain-missing: " + cfg.sandbox.engine_command.front());
  }
  j["status"] = sandbox::to_string(outcome.status);
  j["duration_s"] = outcome.duration_s;
  j["log_excerpt"] = outcome.log_excerpt;
  out << j.dump(2) << "\n";
  return outcome.ok() ? kExitOk : kExitRecordFailures;
}

std::unique_ptr<Renderer> make_renderer(const std::string& which, const Config& cfg) {
  if (which == "toy") return std::make_unique<ToyRenderer>();
  auto r = std::make_unique<SandboxRenderer>(cfg.sandbox);
  require_toolchain(sandbox::Sandbox(cfg.sandbox));
  return r;
}

int cmd_render(const Globals& g, const std::string& file, std::string png, const std::string& renderer_name,
               std::ostream& out, std::ostream& err) {
  const auto cfg = load_config(g, err);
  const auto renderer = make_renderer(renderer_name, cfg);
  const auto res = renderer->render(read_file(file));
  if (png.empty()) png = (fs::path(g.out) / fs::path(file).stem()).string() + ".png";
  json j{{"file", file}, {"status", sandbox::to_string(res.status)}, {"log_excerpt", res.log_excerpt}};
  if (res.image) {
    if (const auto parent = fs::path(png).parent_path(); !parent.empty()) fs::create_directories(parent);
    write_png(*res.image, png);
    j["png"] = png;
    j["width"] = res.image->width;
    j["height"] = res.image->height;
  }
  out << j.dump(2) << "\n";
  return res.image ? kExitOk : kExitRecordFailures;
}

int cmd_score(const Globals& g, const std::string& pred, const std::string& ref, bool code_only,
              const std::string& renderer_name, std::ostream& out, std::ostream& err) {
  const auto cfg = load_config(g, err);
  const auto trivial = load_trivial(cfg);
  const std::string pred_code = read_file(pred), ref_code = read_file(ref);
  codemetrics::CodeConsistencyParams cp;
  cp.gamma = cfg.codemetrics.gamma;
  cp.tau_ted = cfg.codemetrics.tau_ted;
  cp.costs = cfg.codemetrics.eed;
  cp.max_order = cfg.codemetrics.max_order;
  const auto cs = codemetrics::code_consistency(ref_code, pred_code, trivial, cp);
  json j{{"pred", pred},
         {"ref", ref},
         {"code", {{"d_eed", cs.d_eed}, {"s_ted", cs.s_ted}, {"crystal_bleu", cs.crystal_bleu}, {"s_code", cs.s_code}}}};
  int rc = kExitOk;
  if (!code_only) {
    backends::Backends be(load_backends(g));
    const auto renderer = make_renderer(renderer_name, cfg);
    const auto rp = renderer->render(pred_code);
    const auto rr = renderer->render(ref_code);
    j["pred_status"] = sandbox::to_string(rp.status);
    j["ref_status"] = sandbox::to_string(rr.status);
    j["visual"] = nullptr;
    if (rp.image && rr.image) {
      try {
        double raw = 0.0;
        try {
          raw = imgmetrics::cosine(be.embed(*rp.image), be.embed(*rr.image));
        } catch (const ZeroVector&) {
        }
        const auto pair = imgmetrics::trim_and_align(*rp.image, *rr.image, cfg.imgmetrics.background_threshold,
                                                     cfg.imgmetrics.border_pt);
        imgmetrics::VisualScores v;
        v.s_raw = raw;
        v.s_sem = imgmetrics::hinge_semantic(raw, cfg.stage1.tau_hold);
        v.d_perceptual = be.perceptual_distance(pair);
        v.s_struct = imgmetrics::struct_from_distance(v.d_perceptual, cfg.stage1.tau_temp);
        v.ssim = imgmetrics::ssim(pair, cfg.imgmetrics.ssim);
        j["visual"] = {{"s_raw", v.s_raw},
                       {"cosine", imgmetrics::map_unit(raw)},
                       {"s_sem", v.s_sem},
                       {"ssim", v.ssim},
                       {"d_perceptual", v.d_perceptual},
                       {"s_struct", v.s_struct},
                       {"r_vis", reward::visual_reward(v, cfg.stage1)}};
      } catch (const EmptyContent& e) {
        j["visual_error"] = e.what();
        rc = kExitRecordFailures;
      }
    } else {
      rc = kExitRecordFailures;
    }
    j["backends"] = {{"embed", be.identity(backends::Kind::embed)},
                     {"perceptual", be.identity(backends::Kind::perceptual)}};
  }
  out << j.dump(2) << "\n";
  return rc;
}

int cmd_curate(const Globals& g, const std::string& input, std::ostream& out, std::ostream& err) {
  const auto cfg = load_config(g, err);
  backends::Backends be(load_backends(g));
  dataengine::PipelineOptions opt;
  opt.out_dir = g.out;
  const auto result = dataengine::run_pipeline(fs::path(input), cfg, be, opt);
  out << json{{"out", g.out},
              {"final_status", result.manifest.at("final_status")},
              {"reject_reasons", result.manifest.at("reject_reasons")}}
             .dump(2)
      << "\n";
  return kExitOk;
}

int cmd_dedup(const Globals& g, const std::string& input, std::ostream& out, std::ostream& err) {
  const auto cfg = load_config(g, err);
  const auto corpus = dataengine::read_jsonl(input);
  const auto res = dataengine::dedup(corpus, cfg.dataengine.dedup_n, cfg.dataengine.dedup_max_shared);
  json removed = json::array();
  for (const auto& r : res.removed) removed.push_back({{"id", r.id}, {"shared", r.shared}});
  out << json{{"retained", res.retained}, {"removed", removed}}.dump(2) << "\n";
  return kExitOk;
}

std::optional<imgmetrics::VisualScores> visual_from(const json& j, const reward::RewardConfig& rc) {
  if (!j.contains("visual") || j.at("visual").is_null()) return std::nullopt;
  const auto& v = j.at("visual");
  imgmetrics::VisualScores s;
  s.s_raw = v.at("s_raw").get<double>();
  s.d_perceptual = v.at("d_perceptual").get<double>();
  s.ssim = v.value("ssim", 0.0);
  s.s_sem = imgmetrics::hinge_semantic(s.s_raw, rc.tau_hold);
  s.s_struct = imgmetrics::struct_from_distance(s.d_perceptual, rc.tau_temp);
  return s;
}

std::optional<codemetrics::CodeScores> code_from(const json& j, const reward::RewardConfig& rc) {
  if (!j.contains("code_scores") || j.at("code_scores").is_null()) return std::nullopt;
  const auto& c = j.at("code_scores");
  codemetrics::CodeScores s;
  s.gamma = rc.gamma;
  s.s_ted = c.at("s_ted").get<double>();
  s.crystal_bleu = c.at("crystal_bleu").get<double>();
  s.d_eed = c.value("d_eed", 0.0);
  s.s_code = rc.gamma * s.crystal_bleu + (1.0 - rc.gamma) * s.s_ted;
  return s;
}

reward::RewardBreakdown breakdown_from(const json& j, int stage, const Config& cfg) {
  const std::string status = j.at("status").get<std::string>();
  const auto& rc = stage == 1 ? cfg.stage1 : cfg.stage2;
  // blank renders and policy failures score as compile failures
  const CompileStatus cs = (status == "blank-render" || status == "policy-error")
                               ? CompileStatus::compile_error
                               : sandbox::compile_status_from_string(status);
  const auto visual = visual_from(j, rc);
  if (stage == 1) return reward::stage1_total(cs, visual, rc);
  return reward::stage2_total(cs, visual, code_from(j, rc), rc);
}

int cmd_reward(const Globals& g, const std::string& input, int stage, std::ostream& out, std::ostream& err) {
  const auto cfg = load_config(g, err);
  std::istringstream in(read_file(input));
  std::string line;
  int rc = kExitOk;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ConfigError(input + ":" + std::to_string(lineno) + ": " + e.what());
    }
    json res;
    try {
      if (j.contains("rollouts")) {
        std::vector<double> totals;
        json rs = json::array();
        for (const auto& r : j.at("rollouts")) {
          const auto b = breakdown_from(r, stage, cfg);
          totals.push_back(b.total);
          rs.push_back(reward::to_json(b));
        }
        const auto gs = reward::group_advantages(totals, cfg.grpo);
        res = {{"image_id", j.value("image_id", "")},
               {"rollouts", rs},
               {"group", {{"mean", gs.mean}, {"std", gs.stddev}, {"advantages", gs.advantages}}}};
      } else {
        res = reward::to_json(breakdown_from(j, stage, cfg));
        if (j.contains("id")) res["id"] = j.at("id");
      }
    } catch (const EnvironmentError&) {
      throw;
    } catch (const std::exception& e) {
      res = {{"line", lineno}, {"error", e.what()}};
      rc = kExitRecordFailures;
    }
    out << res.dump() << "\n";
  }
  return rc;
}

int cmd_dsc_sim(const Globals& g, int images, std::optional<double> fault_rate, const std::string& renderer_name,
                const std::string& policy_name, std::ostream& out, std::ostream& err) {
  const auto cfg = load_config(g, err);
  backends::Backends be(load_backends(g));
  const auto renderer = make_renderer(renderer_name, cfg);
  const auto toy = dscloop::toy_policy(cfg.seed, fault_rate.value_or(cfg.dsc.fault_rate));
  std::unique_ptr<dscloop::BackendPolicy> remote;
  dscloop::Policy* policy = toy.get();
  if (policy_name == "backend") {
    remote = std::make_unique<dscloop::BackendPolicy>(
        be, backends::SamplingParams{cfg.dsc.temperature, cfg.dsc.top_p, cfg.dsc.max_length});
    policy = remote.get();
  }
  const auto tasks = dscloop::toy_tasks(*toy, *renderer, images > 0 ? images : cfg.dsc.images);
  const auto settings = dscloop::LoopSettings::from_config(cfg);
  const auto traces = dscloop::run_iteration(tasks, *policy, *renderer, be, load_trivial(cfg), settings);
  const auto report = dscloop::loop_report(traces);
  fs::create_directories(g.out);
  {
    std::ofstream f(fs::path(g.out) / "traces.jsonl", std::ios::binary);
    for (const auto& t : traces) f << t.to_json().dump() << "\n";
  }
  std::ofstream(fs::path(g.out) / "report.json", std::ios::binary) << report.to_json().dump(2) << "\n";
  out << report.to_table();
  return kExitOk;
}

int cmd_eval(const Globals& g, const std::string& pred, const std::string& ref, const std::string& renderer_name,
             std::ostream& out, std::ostream& err) {
  const auto cfg = load_config(g, err);
  backends::Backends be(load_backends(g));
  const auto renderer = make_renderer(renderer_name, cfg);
  const auto preds = dataengine::read_jsonl(pred);
  const auto refs = dataengine::read_jsonl(ref);
  evaluation::EvalOptions opt;
  opt.jobs = cfg.effective_jobs();
  opt.ref_cache_dir = fs::path(g.out) / "ref-cache";
  const auto report = evaluation::evaluate(preds, refs, cfg, be, *renderer, load_trivial(cfg), opt);
  fs::create_directories(g.out);
  std::ofstream(fs::path(g.out) / "report.json", std::ios::binary) << report.to_json().dump(2) << "\n";
  const auto table = report.to_table();
  std::ofstream(fs::path(g.out) / "report.txt", std::ios::binary) << table;
  out << table;
  for (const auto& e : report.excluded) err << "excluded " << e.id << ": " << e.reason << "\n";
  bool failures = !report.excluded.empty();
  for (const auto& r : report.records) failures = failures || !r.succeeded();
  return failures ? kExitRecordFailures : kExitOk;
}

int cmd_mine(const Globals& g, const std::string& input, std::string output, std::optional<std::size_t> k,
             std::optional<int> max_order, std::ostream& out, std::ostream& err) {
  const auto cfg = load_config(g, err);
  const auto corpus = dataengine::read_jsonl(input);
  std::vector<texlex::TokenStream> streams;
  std::string all;
  for (const auto& r : corpus) {
    streams.push_back(texlex::code_tokens(r.code, r.id));
    all += r.code;
    all += '\n';
  }
  const auto set = codemetrics::mine_trivial_ngrams(streams, k.value_or(cfg.codemetrics.trivial_k),
                                                    max_order.value_or(cfg.codemetrics.max_order),
                                                    sha256_hex(all).substr(0, 16));
  if (output.empty()) output = (fs::path(g.out) / "trivial_ngrams.json").string();
  if (const auto parent = fs::path(output).parent_path(); !parent.empty()) fs::create_directories(parent);
  set.save(output);
  out << json{{"output", output}, {"snapshot_id", set.snapshot_id()}, {"entries", set.size()}}.dump(2) << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Scientific TikZ toolkit: compile, curate, score and simulate."};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "Config file (JSON)");
  app.add_option("--backends", g.backends, "Backends file (JSON)");
  app.add_option("--jobs", g.jobs, "Worker count (0 = from config)");
  app.add_option("--seed", g.seed, "Seed override");
  app.add_option("--out", g.out, "Output directory")->capture_default_str();

  std::string file, png, pred, ref, input, output, renderer = "sandbox", policy = "toy";
  bool code_only = false;
  int stage = 2, images = 0;
  std::optional<double> fault_rate;
  std::optional<std::size_t> k;
  std::optional<int> max_order;

  auto* compile = app.add_subcommand("compile", "Compile one file and print the outcome");
  compile->add_option("file", file)->required();

  auto* render = app.add_subcommand("render", "Compile and rasterize one file to PNG");
  render->add_option("file", file)->required();
  render->add_option("--png", png, "Output image path");
  render->add_option("--renderer", renderer)->check(CLI::IsMember({"sandbox", "toy"}));

  auto* score = app.add_subcommand("score", "Score a prediction against a reference");
  score->add_option("--pred", pred)->required();
  score->add_option("--ref", ref)->required();
  score->add_flag("--code-only", code_only, "Skip rendering");
  score->add_option("--renderer", renderer)->check(CLI::IsMember({"sandbox", "toy"}));

  auto* curate = app.add_subcommand("curate", "Run the curation pipeline over a JSONL corpus");
  curate->add_option("--input", input)->required();

  auto* dedup = app.add_subcommand("dedup", "Near-duplicate filtering of a JSONL corpus");
  dedup->add_option("--input", input)->required();

  auto* rew = app.add_subcommand("reward", "Reward breakdowns from stored rollout artifacts");
  rew->add_option("--input", input)->required();
  rew->add_option("--stage", stage)->check(CLI::IsMember({1, 2}))->capture_default_str();

  auto* dsc = app.add_subcommand("dsc-sim", "Simulate one iteration of the self-consistency loop");
  dsc->add_option("--images", images, "Task count (0 = from config)");
  dsc->add_option("--fault-rate", fault_rate)->check(CLI::Range(0.0, 1.0));
  dsc->add_option("--renderer", renderer, "sandbox or toy")->check(CLI::IsMember({"sandbox", "toy"}));
  dsc->add_option("--policy", policy, "toy or backend")->check(CLI::IsMember({"toy", "backend"}));

  auto* ev = app.add_subcommand("eval", "Render-and-compare evaluation of predictions");
  ev->add_option("--pred", pred)->required();
  ev->add_option("--ref", ref)->required();
  ev->add_option("--renderer", renderer)->check(CLI::IsMember({"sandbox", "toy"}));

  auto* mine = app.add_subcommand("mine-ngrams", "Mine the trivial n-gram set of a reference corpus");
  mine->add_option("--input", input)->required();
  mine->add_option("--output", output);
  mine->add_option("--k", k);
  mine->add_option("--max-order", max_order);

  // dsc-sim renders toy programs unless told otherwise
  bool renderer_set = false;

  std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(rev);
    renderer_set = dsc->count("--renderer") > 0;
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitEnvironment;
  }

  try {
    if (*compile) return cmd_compile(g, file, out, err);
    if (*render) return cmd_render(g, file, png, renderer, out, err);
    if (*score) return cmd_score(g, pred, ref, code_only, renderer, out, err);
    if (*curate) return cmd_curate(g, input, out, err);
    if (*dedup) return cmd_dedup(g, input, out, err);
    if (*rew) return cmd_reward(g, input, stage, out, err);
    if (*dsc) return cmd_dsc_sim(g, images, fault_rate, renderer_set ? renderer : "toy", policy, out, err);
    if (*ev) return cmd_eval(g, pred, ref, renderer, out, err);
    if (*mine) return cmd_mine(g, input, output, k, max_order, out, err);
  } catch (const EnvironmentError& e) {
    err << "error: " << e.what() << "\n";
    return kExitEnvironment;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitEnvironment;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitEnvironment;
  }
  return kExitEnvironment;
}

int run_cli(int argc, char** argv) {
  return run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}

}  // namespace scitikz
