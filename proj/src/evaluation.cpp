#include "scitikz/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "scitikz/digest.hpp"
#include "scitikz/error.hpp"
#include "scitikz/imgmetrics.hpp"
#include "scitikz/parallel.hpp"
#include "scitikz/texlex.hpp"

namespace scitikz::evaluation {

using nlohmann::json;

std::string_view to_string(Mode m) { return m == Mode::all ? "ALL" : "SUCCESS"; }

double penalty(Direction d) { return d == Direction::similarity ? 0.0 : 1.0; }

std::optional<double> EvalRecord::metric(std::string_view name) const {
  if (name == "d_eed") return code.d_eed;
  if (name == "s_ted") return code.s_ted;
  if (name == "crystal_bleu") return code.crystal_bleu;
  if (!visual) return std::nullopt;
  if (name == "cosine") return visual->cosine;
  if (name == "ssim") return visual->ssim;
  if (name == "d_perceptual") return visual->d_perceptual;
  if (name == "s_struct") return visual->s_struct;
  throw std::invalid_argument("unknown metric: " + std::string(name));
}

std::optional<Aggregate> aggregate(std::span<const EvalRecord> records, Mode mode) {
  Aggregate sums;
  std::size_t n = 0;
  for (const auto& r : records) {
    if (mode == Mode::success && !r.succeeded()) continue;
    ++n;
    for (const auto& m : kMetrics) {
      sums[std::string(m.name)] += r.succeeded() ? *r.metric(m.name) : penalty(m.direction);
    }
  }
  if (n == 0) return std::nullopt;
  for (auto& [_, v] : sums) v /= static_cast<double>(n);
  return sums;
}

std::optional<Aggregate> code_means(std::span<const EvalRecord> records) {
  if (records.empty()) return std::nullopt;
  Aggregate out{{"d_eed", 0.0}, {"s_ted", 0.0}, {"crystal_bleu", 0.0}};
  for (const auto& r : records) {
    out["d_eed"] += r.code.d_eed;
    out["s_ted"] += r.code.s_ted;
    out["crystal_bleu"] += r.code.crystal_bleu;
  }
  for (auto& [_, v] : out) v /= static_cast<double>(records.size());
  return out;
}

CodeMetrics score_code(std::string_view prediction, std::string_view reference, const Config& cfg,
                       const codemetrics::TrivialNgramSet& trivial) {
  const auto hyp = texlex::code_tokens(prediction);
  const auto ref = texlex::code_tokens(reference);
  const auto& cm = cfg.codemetrics;
  CodeMetrics out;
  const double d = codemetrics::eed(hyp, ref, cm.eed);
  out.d_eed = std::min(1.0, d);
  out.s_ted = std::exp(-d / cm.tau_ted);
  out.crystal_bleu = codemetrics::crystal_bleu(hyp, ref, trivial, cm.max_order);
  return out;
}

namespace {

std::optional<RasterImage> cached_reference(const Renderer& renderer, std::string_view code,
                                            const std::optional<std::filesystem::path>& dir, double background,
                                            std::string& note) {
  std::filesystem::path file;
  if (dir) {
    file = *dir / (sha256_hex(renderer.identity() + "\n" + std::string(code)) + ".png");
    std::ifstream in(file, std::ios::binary);
    if (in) {
      std::ostringstream ss;
      ss << in.rdbuf();
      try {
        return decode_png(ss.str());
      } catch (const Error&) {
        // corrupt cache entry; render again
      }
    }
  }
  auto res = renderer.render(code);
  if (!res.image) {
    note = std::string(sandbox::to_string(res.status));
    return std::nullopt;
  }
  if (!imgmetrics::content_box(to_gray(*res.image), background).found) {
    note = "blank-render";
    return std::nullopt;
  }
  if (dir) {
    std::filesystem::create_directories(*dir);
    const auto tmp = file.string() + ".tmp";
    write_png(*res.image, tmp);
    std::filesystem::rename(tmp, file);
  }
  return std::move(res.image);
}

VisualMetrics score_visual(const RasterImage& pred, const RasterImage& ref, const Config& cfg,
                           backends::Backends& be) {
  const auto& im = cfg.imgmetrics;
  VisualMetrics v;
  double raw = 0.0;
  try {
    const auto u = be.embed(pred);
    const auto w = be.embed(ref);
    raw = imgmetrics::cosine(u, w);
  } catch (const ZeroVector&) {
    raw = 0.0;
  }
  v.cosine = imgmetrics::map_unit(raw);
  const auto pair = imgmetrics::trim_and_align(pred, ref, im.background_threshold, im.border_pt);
  v.ssim = std::clamp(imgmetrics::ssim(pair, im.ssim), 0.0, 1.0);
  const double d = be.perceptual_distance(pair);
  v.d_perceptual = std::clamp(d, 0.0, 1.0);
  v.s_struct = imgmetrics::struct_from_distance(d, cfg.stage1.tau_temp);
  return v;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

EvalReport evaluate(std::span<const dataengine::SampleRecord> predictions,
                    std::span<const dataengine::SampleRecord> references, const Config& cfg,
                    backends::Backends& be, const Renderer& renderer, const codemetrics::TrivialNgramSet& trivial,
                    const EvalOptions& options) {
  EvalReport report;
  report.config = cfg.to_json();
  report.config_hash = cfg.hash();
  report.renderer = renderer.identity();
  for (auto k : backends::kAllKinds) report.backends[std::string(backends::to_string(k))] = be.identity(k);
  const std::string prefix_embed = be.configured(backends::Kind::embed) ? "" : "fallback_";
  const std::string prefix_perc = be.configured(backends::Kind::perceptual) ? "" : "fallback_";
  for (const auto& m : kMetrics) report.columns[std::string(m.name)] = std::string(m.name);
  report.columns["cosine"] = prefix_embed + "cosine";
  report.columns["d_perceptual"] = prefix_perc + "d_perceptual";
  report.columns["s_struct"] = prefix_perc + "s_struct";

  std::unordered_map<std::string_view, const dataengine::SampleRecord*> by_id;
  for (const auto& p : predictions) by_id.emplace(p.id, &p);
  std::unordered_map<std::string_view, bool> has_ref;
  for (const auto& r : references) has_ref.emplace(r.id, true);

  const std::size_t n = references.size();
  std::vector<std::optional<EvalRecord>> slots(n);
  std::vector<std::optional<Exclusion>> excluded(n);

  parallel_for(n, options.jobs, [&](std::size_t i) {
    const auto& ref = references[i];
    std::string note;
    const auto ref_img = cached_reference(renderer, ref.code, options.ref_cache_dir, cfg.imgmetrics.background_threshold, note);
    if (!ref_img) {
      excluded[i] = Exclusion{ref.id, "reference " + note};
      return;
    }
    EvalRecord rec;
    rec.id = ref.id;
    const auto it = by_id.find(ref.id);
    if (it == by_id.end()) {
      rec.status = "missing-prediction";
      rec.code = score_code("", ref.code, cfg, trivial);
      slots[i] = std::move(rec);
      return;
    }
    const auto& pred = *it->second;
    rec.code = score_code(pred.code, ref.code, cfg, trivial);
    const auto res = renderer.render(pred.code);
    rec.status = std::string(sandbox::to_string(res.status));
    if (res.image) {
      try {
        rec.visual = score_visual(*res.image, *ref_img, cfg, be);
      } catch (const EmptyContent&) {
        rec.status = "blank-render";
      } catch (const BackendError&) {
        rec.status = "backend-error";
      }
    }
    slots[i] = std::move(rec);
  });

  for (std::size_t i = 0; i < n; ++i) {
    if (slots[i]) report.records.push_back(std::move(*slots[i]));
    if (excluded[i]) report.excluded.push_back(std::move(*excluded[i]));
  }
  for (const auto& p : predictions) {
    if (!has_ref.contains(p.id)) report.excluded.push_back({p.id, "prediction without reference"});
  }
  report.all = aggregate(report.records, Mode::all);
  report.success = aggregate(report.records, Mode::success);
  report.code_all_samples = code_means(report.records);
  return report;
}

json EvalReport::to_json() const {
  auto agg = [&](const std::optional<Aggregate>& a) -> json {
    if (!a) return nullptr;
    json j = json::object();
    for (const auto& [k, v] : *a) j[columns.contains(k) ? columns.at(k) : k] = v;
    return j;
  };
  json recs = json::array();
  for (const auto& r : records) {
    json j{{"id", r.id}, {"status", r.status}, {"succeeded", r.succeeded()}};
    for (const auto& m : kMetrics) {
      const auto v = r.metric(m.name);
      j[columns.at(std::string(m.name))] = v ? json(*v) : json(nullptr);
    }
    recs.push_back(std::move(j));
  }
  json ex = json::array();
  for (const auto& e : excluded) ex.push_back({{"id", e.id}, {"reason", e.reason}});
  json cols = json::array();
  for (const auto& m : kMetrics) {
    cols.push_back({{"name", columns.at(std::string(m.name))},
                    {"direction", m.direction == Direction::similarity ? "similarity" : "distance"}});
  }
  return json{{"schema", "scitikz-eval/1"},
              {"config_hash", config_hash},
              {"config", config},
              {"backends", backends},
              {"renderer", renderer},
              {"columns", cols},
              {"records", recs},
              {"excluded", ex},
              {"aggregates", {{"ALL", agg(all)}, {"SUCCESS", agg(success)}}},
              {"code_all_samples", agg(code_all_samples)}};
}

std::string EvalReport::to_table() const {
  std::ostringstream out;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%-24s", "id");
  out << buf;
  for (const auto& m : kMetrics) {
    std::snprintf(buf, sizeof buf, " %22s", columns.at(std::string(m.name)).c_str());
    out << buf;
  }
  out << "\n";
  auto row = [&](const std::string& label, auto value_of) {
    std::snprintf(buf, sizeof buf, "%-24.24s", label.c_str());
    out << buf;
    for (const auto& m : kMetrics) {
      const std::optional<double> v = value_of(m.name);
      std::snprintf(buf, sizeof buf, " %22s", v ? fmt(*v).c_str() : "-");
      out << buf;
    }
    out << "\n";
  };
  for (const auto& r : records) row(r.id, [&](std::string_view k) { return r.metric(k); });
  for (const auto& [label, a] : {std::pair{"[ALL]", &all}, std::pair{"[SUCCESS]", &success}}) {
    row(label, [&](std::string_view k) -> std::optional<double> {
      if (!*a) return std::nullopt;
      return (*a)->find(k)->second;
    });
  }
  return out.str();
}

}  // namespace scitikz::evaluation
