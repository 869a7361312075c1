#include <sstream>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "scitikz/backends.hpp"
#include "scitikz/cli.hpp"
#include "scitikz/codemetrics.hpp"
#include "scitikz/config.hpp"
#include "scitikz/dataengine.hpp"
#include "scitikz/dscloop.hpp"
#include "scitikz/error.hpp"
#include "scitikz/evaluation.hpp"
#include "scitikz/imgmetrics.hpp"
#include "scitikz/renderer.hpp"
#include "scitikz/reward.hpp"
#include "scitikz/sandbox.hpp"
#include "scitikz/texlex.hpp"

namespace py = pybind11;
using namespace scitikz;
using nlohmann::json;

namespace {

// Structured results cross the boundary as JSON text; the package decodes them.
Config config_from(const std::string& config_json) {
  return config_json.empty() ? Config{} : Config::from_json(json::parse(config_json));
}

codemetrics::TrivialNgramSet trivial_from(const std::string& path) {
  return path.empty() ? codemetrics::TrivialNgramSet{} : codemetrics::TrivialNgramSet::load(path);
}

std::unique_ptr<Renderer> renderer_from(const std::string& name, const Config& cfg) {
  if (name == "toy") return std::make_unique<ToyRenderer>();
  if (name == "sandbox") return std::make_unique<SandboxRenderer>(cfg.sandbox);
  throw ConfigError("unknown renderer: " + name);
}

std::vector<dataengine::SampleRecord> records_from(const std::vector<std::pair<std::string, std::string>>& pairs) {
  std::vector<dataengine::SampleRecord> out;
  for (const auto& [id, code] : pairs) {
    dataengine::SampleRecord r;
    r.id = id;
    r.code = code;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_scitikz, m) {
  m.doc() = "Native core of the scitikz toolkit";

  py::register_exception<Error>(m, "Error");
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<EnvironmentError>(m, "EnvironmentError", PyExc_RuntimeError);
  py::register_exception<SchemaViolation>(m, "SchemaViolation", PyExc_ValueError);

  m.def("default_config", [] { return Config{}.to_json().dump(); });
  m.def("config_hash", [](const std::string& config_json) { return config_from(config_json).hash(); },
        py::arg("config_json") = "");

  m.def("lex", [](const std::string& code) {
    std::vector<std::pair<std::string, std::string>> out;
    const auto stream = texlex::code_tokens(code);
    for (const auto& t : stream.tokens())
      out.emplace_back(std::string(texlex::to_string(t.kind)), t.lexeme);
    return out;
  });
  m.def("normalize", [](const std::string& s) { return texlex::normalize(s); });
  m.def("wrap_standalone", [](const std::string& s) { return sandbox::wrap_standalone(s); });

  m.def("eed", [](const std::string& hyp, const std::string& ref, bool levenshtein) {
        const auto costs = levenshtein ? codemetrics::EedCosts::levenshtein() : codemetrics::EedCosts{};
        return codemetrics::eed(texlex::code_tokens(hyp), texlex::code_tokens(ref), costs);
      },
      py::arg("hyp"), py::arg("ref"), py::arg("levenshtein") = false);
  m.def("ted_similarity", [](const std::string& hyp, const std::string& ref, double tau) {
        return codemetrics::ted_similarity(hyp, ref, tau);
      },
      py::arg("hyp"), py::arg("ref"), py::arg("tau_ted") = 0.4);
  m.def("crystal_bleu", [](const std::string& hyp, const std::string& ref, const std::string& trivial, int max_order) {
        return codemetrics::crystal_bleu(hyp, ref, trivial_from(trivial), max_order);
      },
      py::arg("hyp"), py::arg("ref"), py::arg("trivial_ngrams") = "", py::arg("max_order") = 4);
  m.def("mine_trivial_ngrams", [](const std::vector<std::string>& corpus, std::size_t k, int max_order,
                                  const std::string& output) {
        std::vector<texlex::TokenStream> streams;
        for (const auto& c : corpus) streams.push_back(texlex::code_tokens(c));
        const auto set = codemetrics::mine_trivial_ngrams(streams, k, max_order, "python");
        if (!output.empty()) set.save(output);
        return set.size();
      },
      py::arg("corpus"), py::arg("k") = 500, py::arg("max_order") = 4, py::arg("output") = "");

  m.def("hinge_semantic", &imgmetrics::hinge_semantic, py::arg("s_raw"), py::arg("tau_hold") = 0.8);
  m.def("struct_from_distance", &imgmetrics::struct_from_distance, py::arg("d"), py::arg("tau_temp") = 0.5);

  m.def("group_advantages", [](const std::vector<double>& rewards) {
    return reward::group_advantages(rewards, reward::GrpoConfig{}).advantages;
  });
  m.def("clipped_surrogate", &reward::clipped_surrogate, py::arg("rho"), py::arg("advantage"),
        py::arg("epsilon") = 0.2);
  m.def("stage2_total", [](bool compiled, double s_sem, double s_struct, std::optional<double> s_code,
                           const std::string& config_json) {
        const auto cfg = config_from(config_json);
        imgmetrics::VisualScores v;
        v.s_sem = s_sem;
        v.s_struct = s_struct;
        std::optional<codemetrics::CodeScores> cs;
        if (s_code) {
          cs.emplace();
          cs->s_code = *s_code;
        }
        const auto status = compiled ? sandbox::CompileStatus::success : sandbox::CompileStatus::compile_error;
        return reward::to_json(reward::stage2_total(status, compiled ? std::optional(v) : std::nullopt, cs, cfg.stage2))
            .dump();
      },
      py::arg("compiled"), py::arg("s_sem") = 0.0, py::arg("s_struct") = 0.0, py::arg("s_code") = std::nullopt,
      py::arg("config_json") = "");

  m.def("parse_judge_reply", [](const std::string& reply) { return backends::parse_judge_reply(reply).to_json().dump(); });

  m.def("compile", [](const std::string& code, const std::string& config_json) {
        const auto cfg = config_from(config_json);
        py::gil_scoped_release release;
        const sandbox::Sandbox sb(cfg.sandbox);
        const auto out = sb.compile({sandbox::wrap_standalone(code), cfg.sandbox.validate_timeout_s});
        return json{{"status", sandbox::to_string(out.status)},
                    {"duration_s", out.duration_s},
                    {"log_excerpt", out.log_excerpt}}
            .dump();
      },
      py::arg("code"), py::arg("config_json") = "");

  m.def("evaluate", [](const std::vector<std::pair<std::string, std::string>>& preds,
                       const std::vector<std::pair<std::string, std::string>>& refs, const std::string& renderer,
                       const std::string& config_json) {
        const auto cfg = config_from(config_json);
        const auto r = renderer_from(renderer, cfg);
        py::gil_scoped_release release;
        backends::Backends be;
        return evaluation::evaluate(records_from(preds), records_from(refs), cfg, be, *r, {}).to_json().dump();
      },
      py::arg("preds"), py::arg("refs"), py::arg("renderer") = "toy", py::arg("config_json") = "");

  m.def("dsc_sim", [](std::uint64_t seed, int images, double fault_rate, const std::string& config_json) {
        const auto cfg = config_from(config_json);
        py::gil_scoped_release release;
        const ToyRenderer renderer;
        backends::Backends be;
        auto policy = dscloop::toy_policy(seed, fault_rate);
        const auto tasks = dscloop::toy_tasks(*policy, renderer, images);
        const auto traces =
            dscloop::run_iteration(tasks, *policy, renderer, be, {}, dscloop::LoopSettings::from_config(cfg));
        json ts = json::array();
        for (const auto& t : traces) ts.push_back(t.to_json());
        return json{{"report", dscloop::loop_report(traces).to_json()}, {"traces", ts}}.dump();
      },
      py::arg("seed") = 0, py::arg("images") = 4, py::arg("fault_rate") = 0.1, py::arg("config_json") = "");

  m.def("run_cli", [](const std::vector<std::string>& args) {
        std::vector<std::string> argv = {"scitikz"};
        argv.insert(argv.end(), args.begin(), args.end());
        std::ostringstream out, err;
        int rc = 0;
        {
          py::gil_scoped_release release;
          rc = run_cli(argv, out, err);
        }
        return py::make_tuple(rc, out.str(), err.str());
      });
}
