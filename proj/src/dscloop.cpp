#include "scitikz/dscloop.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <regex>
#include <sstream>

#include "scitikz/error.hpp"
#include "scitikz/parallel.hpp"
#include "scitikz/texlex.hpp"

namespace scitikz::dscloop {

using nlohmann::json;
using sandbox::CompileStatus;

using Stmt = ToyStatement;

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over the combined value
  std::uint64_t z = a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

Stmt random_stmt(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> coord(1, 7), centre(2, 6), radius(1, 2), coin(0, 1);
  Stmt s;
  if (coin(rng) == 1) {
    s.circle = true;
    s.x1 = centre(rng);
    s.y1 = centre(rng);
    s.r = radius(rng);
  } else {
    s.x1 = coord(rng);
    s.y1 = coord(rng);
    do {
      s.x2 = coord(rng);
      s.y2 = coord(rng);
    } while (s.x2 == s.x1 && s.y2 == s.y1);
  }
  return s;
}

std::vector<Stmt> parse_bank_entry(const std::string& program) {
  // Bank programs are produced by to_program; reparse through the renderer
  // grammar to recover the statements.
  std::vector<Stmt> out;
  static const std::regex line_re(R"(\\draw \((-?[\d.]+),(-?[\d.]+)\) -- \((-?[\d.]+),(-?[\d.]+)\);)");
  static const std::regex circle_re(R"(\\draw \((-?[\d.]+),(-?[\d.]+)\) circle \((-?[\d.]+)\);)");
  std::istringstream in(program);
  std::string line;
  while (std::getline(in, line)) {
    std::smatch m;
    if (std::regex_match(line, m, line_re)) {
      out.push_back({false, std::stod(m[1]), std::stod(m[2]), std::stod(m[3]), std::stod(m[4]), 0});
    } else if (std::regex_match(line, m, circle_re)) {
      out.push_back({true, std::stod(m[1]), std::stod(m[2]), 0, 0, std::stod(m[3])});
    }
  }
  return out;
}

}  // namespace

ToyPolicy::ToyPolicy(ToyPolicyOptions options) : options_(options) {
  if (options_.bank_size < 1) throw std::invalid_argument("toy policy: bank_size must be >= 1");
  if (!(options_.fault_rate >= 0 && options_.fault_rate <= 1)) {
    throw std::invalid_argument("toy policy: fault_rate must lie in [0, 1]");
  }
  std::mt19937_64 rng(mix(options_.seed, 0x746f79));
  std::uniform_int_distribution<int> count(2, 4);
  const ToyRenderer renderer;
  for (int b = 0; b < options_.bank_size; ++b) {
    std::vector<std::string> lines;
    const int k = count(rng);
    for (int i = 0; i < k; ++i) lines.push_back(to_code(random_stmt(rng)));
    bank_.push_back(to_program(lines));
    const auto rendered = renderer.render(bank_.back());
    bank_embeddings_.push_back(imgmetrics::fallback_embedding(*rendered.image));
  }
}

std::string ToyPolicy::identity() const {
  char buf[96];
  std::snprintf(buf, sizeof buf, "toy-policy/1 seed=%llu fault_rate=%g", static_cast<unsigned long long>(options_.seed),
                options_.fault_rate);
  return buf;
}

std::size_t ToyPolicy::nearest(const RasterImage& image) const {
  const auto e = imgmetrics::fallback_embedding(image);
  std::size_t best = 0;
  double best_score = -2.0;
  for (std::size_t i = 0; i < bank_embeddings_.size(); ++i) {
    double s = -1.0;
    try {
      s = imgmetrics::cosine(e, bank_embeddings_[i]);
    } catch (const ZeroVector&) {
    }
    if (s > best_score) {
      best_score = s;
      best = i;
    }
  }
  return best;
}

std::vector<std::string> ToyPolicy::sample(const RasterImage& image, std::string_view key, int n) {
  if (n < 1) throw std::invalid_argument("toy policy: n must be >= 1");
  const std::size_t base = nearest(image);
  const std::string_view keys[] = {key};
  std::mt19937_64 rng(mix(options_.seed, texlex::fingerprint(keys)));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> op(0, 2), sign(0, 1);

  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto stmts = parse_bank_entry(bank_[base]);
    if (u(rng) < options_.perturb_rate) {
      const int which = op(rng);
      std::uniform_int_distribution<std::size_t> pick(0, stmts.size() - 1);
      if (which == 0) {
        Stmt& s = stmts[pick(rng)];
        const double delta = sign(rng) ? 1.0 : -1.0;
        s.x1 = std::clamp(s.x1 + delta, 0.0, static_cast<double>(ToyRenderer::kUnits));
      } else if (which == 1 && stmts.size() > 1) {
        stmts.erase(stmts.begin() + static_cast<std::ptrdiff_t>(pick(rng)));
      } else {
        stmts.push_back(random_stmt(rng));
      }
    }
    std::vector<std::string> lines;
    for (const auto& s : stmts) lines.push_back(to_code(s));
    if (u(rng) < options_.fault_rate) {
      std::uniform_int_distribution<std::size_t> pick(0, lines.size() - 1);
      std::string& victim = lines[pick(rng)];
      victim.replace(0, 5, "\\drawx");
    }
    out.push_back(to_program(lines));
  }
  return out;
}

std::string ToyPolicy::reconstruct(const RasterImage& image, std::string_view) { return bank_[nearest(image)]; }

std::unique_ptr<ToyPolicy> toy_policy(std::uint64_t seed, double fault_rate) {
  ToyPolicyOptions o;
  o.seed = seed;
  o.fault_rate = fault_rate;
  return std::make_unique<ToyPolicy>(o);
}

std::vector<std::string> BackendPolicy::sample(const RasterImage& image, std::string_view, int n) {
  return be_.policy(image, n, params_);
}

std::string BackendPolicy::reconstruct(const RasterImage& image, std::string_view) {
  return be_.policy(image, 1, params_).front();
}

LoopSettings LoopSettings::from_config(const Config& cfg) {
  LoopSettings s;
  s.group_size = cfg.grpo.group_size;
  s.reconstructions = cfg.dsc.reconstructions;
  s.reward = cfg.stage2;
  s.grpo = cfg.grpo;
  s.eed = cfg.codemetrics.eed;
  s.max_order = cfg.codemetrics.max_order;
  s.background_threshold = cfg.imgmetrics.background_threshold;
  s.jobs = cfg.effective_jobs();
  return s;
}

std::vector<Task> toy_tasks(const ToyPolicy& policy, const Renderer& renderer, int count) {
  std::vector<Task> tasks;
  for (int k = 0; k < count; ++k) {
    const auto& program = policy.bank()[static_cast<std::size_t>(k) % policy.bank().size()];
    auto r = renderer.render(program);
    if (!r.image) throw RenderFailed("toy task did not render: " + r.log_excerpt);
    char id[32];
    std::snprintf(id, sizeof id, "toy-%02d", k);
    tasks.push_back({id, std::move(*r.image)});
  }
  return tasks;
}

namespace {

bool blank(const RasterImage& img, double threshold) {
  return !imgmetrics::content_box(to_gray(img), threshold).found;
}

imgmetrics::VisualScores score_visual(const RasterImage& target, const std::vector<double>& target_embedding,
                                      const RasterImage& render, backends::Backends& be, const LoopSettings& s) {
  imgmetrics::VisualScores v;
  const auto e = be.embed(render);
  try {
    v.s_raw = imgmetrics::cosine(target_embedding, e);
  } catch (const ZeroVector&) {
    v.s_raw = 0.0;
  }
  v.s_sem = imgmetrics::hinge_semantic(v.s_raw, s.reward.tau_hold);
  const auto pair = imgmetrics::trim_and_align(target, render, s.background_threshold);
  v.d_perceptual = be.perceptual_distance(pair);
  v.s_struct = imgmetrics::struct_from_distance(v.d_perceptual, s.reward.tau_temp);
  v.ssim = imgmetrics::ssim(pair);
  return v;
}

}  // namespace

std::vector<RolloutTrace> run_iteration(std::span<const Task> tasks, Policy& policy, const Renderer& renderer,
                                        backends::Backends& be, const codemetrics::TrivialNgramSet& trivial,
                                        const LoopSettings& s) {
  if (s.group_size < 2) throw GroupTooSmall("run_iteration: group size must be >= 2");
  std::vector<RolloutTrace> traces;
  for (const auto& task : tasks) {
    RolloutTrace trace;
    trace.image_id = task.id;
    const std::size_t g = static_cast<std::size_t>(s.group_size);
    trace.rollouts.resize(g);

    std::vector<std::string> codes;
    bool policy_failed = false;
    try {
      codes = policy.sample(task.image, task.id, s.group_size);
      if (codes.size() != g) policy_failed = true;
    } catch (const BackendError&) {
      policy_failed = true;
    }

    if (policy_failed) {
      for (auto& r : trace.rollouts) {
        r.status = "policy-error";
        r.breakdown = reward::stage2_total(CompileStatus::compile_error, std::nullopt, std::nullopt, s.reward);
      }
    } else {
      const auto target_embedding = be.embed(task.image);
      std::vector<std::optional<RasterImage>> renders(g);
      parallel_for(g, s.jobs, [&](std::size_t i) {
        auto& r = trace.rollouts[i];
        r.code = codes[i];
        auto res = renderer.render(r.code);
        r.status = std::string(sandbox::to_string(res.status));
        if (res.status == CompileStatus::success && res.image && blank(*res.image, s.background_threshold)) {
          r.status = "blank-render";
          res.status = CompileStatus::compile_error;
        }
        if (res.status == CompileStatus::success) {
          r.visual = score_visual(task.image, target_embedding, *res.image, be, s);
          renders[i] = std::move(res.image);
        }
        r.breakdown = reward::stage2_total(res.status, r.visual, std::nullopt, s.reward);
      });

      // Back-translation for gate-open rollouts only.
      codemetrics::CodeConsistencyParams cp;
      cp.gamma = s.reward.gamma;
      cp.tau_ted = s.reward.tau_ted;
      cp.costs = s.eed;
      cp.max_order = s.max_order;
      for (std::size_t i = 0; i < g; ++i) {
        auto& r = trace.rollouts[i];
        if (!r.breakdown.gate_open) continue;
        try {
          for (int k = 0; k < s.reconstructions; ++k) r.reconstructions.push_back(policy.reconstruct(*renders[i], task.id));
        } catch (const BackendError&) {
          r.reconstructions.clear();
          continue;
        }
        codemetrics::CodeScores mean{};
        mean.gamma = cp.gamma;
        mean.s_ted = 0.0;
        for (const auto& rec : r.reconstructions) {
          const auto cs = codemetrics::code_consistency(r.code, rec, trivial, cp);
          mean.d_eed += cs.d_eed;
          mean.s_ted += cs.s_ted;
          mean.crystal_bleu += cs.crystal_bleu;
        }
        const double k = static_cast<double>(r.reconstructions.size());
        mean.d_eed /= k;
        mean.s_ted /= k;
        mean.crystal_bleu /= k;
        mean.s_code = cp.gamma * mean.crystal_bleu + (1.0 - cp.gamma) * mean.s_ted;
        r.code_scores = mean;
        r.breakdown = reward::stage2_total(CompileStatus::success, r.visual, r.code_scores, s.reward);
      }
    }

    std::vector<double> totals;
    for (const auto& r : trace.rollouts) totals.push_back(r.breakdown.total);
    trace.group = reward::group_advantages(totals, s.grpo);
    traces.push_back(std::move(trace));
  }
  return traces;
}

json RolloutTrace::to_json() const {
  json rs = json::array();
  for (const auto& r : rollouts) {
    json j = {{"code", r.code}, {"status", r.status}, {"reconstructions", r.reconstructions}};
    if (r.visual) {
      j["visual"] = {{"s_raw", r.visual->s_raw},
                     {"s_sem", r.visual->s_sem},
                     {"s_struct", r.visual->s_struct},
                     {"ssim", r.visual->ssim},
                     {"d_perceptual", r.visual->d_perceptual}};
    } else {
      j["visual"] = nullptr;
    }
    if (r.code_scores) {
      j["code_scores"] = {{"d_eed", r.code_scores->d_eed},
                          {"s_ted", r.code_scores->s_ted},
                          {"crystal_bleu", r.code_scores->crystal_bleu},
                          {"s_code", r.code_scores->s_code},
                          {"gamma", r.code_scores->gamma}};
    } else {
      j["code_scores"] = nullptr;
    }
    j["breakdown"] = reward::to_json(r.breakdown);
    rs.push_back(std::move(j));
  }
  return {{"image_id", image_id},
          {"rollouts", std::move(rs)},
          {"group",
           {{"rewards", group.rewards}, {"mean", group.mean}, {"std", group.stddev}, {"advantages", group.advantages}}}};
}

LoopReport loop_report(std::span<const RolloutTrace> traces) {
  if (traces.empty()) throw Error("loop_report: no traces");
  LoopReport rep;
  rep.traces = traces.size();
  std::size_t compiled = 0, scored = 0, gated = 0, coded = 0;
  double r_vis = 0, s_code = 0, total = 0;
  for (const auto& t : traces) {
    for (const auto& r : t.rollouts) {
      ++rep.rollouts;
      total += r.breakdown.total;
      if (r.status == "success" || r.status == "blank-render") ++compiled;
      if (r.breakdown.compiled) {
        r_vis += r.breakdown.r_vis;
        ++scored;
      }
      if (r.breakdown.gate_open) {
        ++gated;
        if (r.breakdown.s_code) {
          s_code += *r.breakdown.s_code;
          ++coded;
        }
      }
    }
  }
  const double n = static_cast<double>(rep.rollouts);
  rep.compile_rate = rep.rollouts ? static_cast<double>(compiled) / n : 0.0;
  rep.gate_entry_rate = rep.rollouts ? static_cast<double>(gated) / n : 0.0;
  if (scored) rep.mean_r_vis = r_vis / static_cast<double>(scored);
  if (coded) rep.mean_s_code = s_code / static_cast<double>(coded);
  rep.mean_total = rep.rollouts ? total / n : 0.0;
  return rep;
}

json LoopReport::to_json() const {
  return {{"traces", traces},
          {"rollouts", rollouts},
          {"compile_rate", compile_rate},
          {"mean_r_vis", mean_r_vis ? json(*mean_r_vis) : json(nullptr)},
          {"gate_entry_rate", gate_entry_rate},
          {"mean_s_code", mean_s_code ? json(*mean_s_code) : json(nullptr)},
          {"mean_total", mean_total}};
}

std::string LoopReport::to_table() const {
  auto opt = [](const std::optional<double>& v) {
    if (!v) return std::string("-");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", *v);
    return std::string(buf);
  };
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "%-16s %10zu\n%-16s %10zu\n%-16s %10.4f\n%-16s %10s\n%-16s %10.4f\n%-16s %10s\n%-16s %10.4f\n",
                "traces", traces, "rollouts", rollouts, "compile_rate", compile_rate, "mean_r_vis",
                opt(mean_r_vis).c_str(), "gate_entry_rate", gate_entry_rate, "mean_s_code", opt(mean_s_code).c_str(),
                "mean_total", mean_total);
  return buf;
}

std::size_t gate_entry_count(std::span<const RolloutTrace> traces, double tau_gate) {
  std::size_t n = 0;
  for (const auto& t : traces) {
    for (const auto& r : t.rollouts) n += r.breakdown.compiled && r.breakdown.r_vis > tau_gate;
  }
  return n;
}

}  // namespace scitikz::dscloop
