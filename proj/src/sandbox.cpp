#include "scitikz/sandbox.hpp"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include "scitikz/error.hpp"
#include "scitikz/process.hpp"
#include "scitikz/texlex.hpp"

namespace scitikz::sandbox {

namespace fs = std::filesystem;

std::string_view to_string(CompileStatus s) {
  switch (s) {
    case CompileStatus::success: return "success";
    case CompileStatus::compile_error: return "compile-error";
    case CompileStatus::timeout: return "timeout";
    case CompileStatus::toolchain_missing: return "toolchain-missing";
  }
  return "compile-error";
}

CompileStatus compile_status_from_string(std::string_view s) {
  if (s == "success") return CompileStatus::success;
  if (s == "compile-error") return CompileStatus::compile_error;
  if (s == "timeout") return CompileStatus::timeout;
  if (s == "toolchain-missing") return CompileStatus::toolchain_missing;
  throw Error("unknown compile status: " + std::string(s));
}

Workdir::Workdir(const fs::path& root, bool keep) : keep_(keep) {
  const fs::path base = root.empty() ? fs::temp_directory_path() : root;
  std::error_code ec;
  fs::create_directories(base, ec);
  std::string templ = (base / "scitikz-job-XXXXXX").string();
  if (::mkdtemp(templ.data()) == nullptr) {
    throw EnvironmentError("cannot create workdir under " + base.string());
  }
  path_ = templ;
}

Workdir::~Workdir() {
  if (keep_) return;
  std::error_code ec;
  fs::remove_all(path_, ec);
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string substitute(std::string arg, const std::map<std::string, std::string>& vars) {
  for (const auto& [key, value] : vars) {
    const std::string token = "{" + key + "}";
    for (auto pos = arg.find(token); pos != std::string::npos; pos = arg.find(token, pos + value.size())) {
      arg.replace(pos, token.size(), value);
    }
  }
  return arg;
}

std::vector<std::string> expand(const std::vector<std::string>& templ, const std::map<std::string, std::string>& vars) {
  std::vector<std::string> out;
  out.reserve(templ.size());
  for (const auto& a : templ) out.push_back(substitute(a, vars));
  return out;
}

std::string format_dpi(double dpi) {
  char buf[32];
  if (std::floor(dpi) == dpi) std::snprintf(buf, sizeof buf, "%.0f", dpi);
  else std::snprintf(buf, sizeof buf, "%g", dpi);
  return buf;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

bool is_utf8_continuation(char c) { return (static_cast<unsigned char>(c) & 0xC0) == 0x80; }

}  // namespace

bool is_full_document(std::string_view source) {
  const std::string norm = texlex::normalize(source);
  return norm.find("\\documentclass") != std::string::npos ||
         norm.find("\\begin{document}") != std::string::npos;
}

std::string wrap_standalone(std::string_view fragment) {
  if (is_full_document(fragment)) return std::string(fragment);
  if (texlex::normalize(fragment).find("\\begin{tikzpicture}") == std::string::npos) {
    throw NoDrawableContent("no tikzpicture environment and no document environment");
  }

  std::vector<std::string> hoisted;
  std::string body;
  std::string_view rest = fragment;
  while (!rest.empty()) {
    const auto nl = rest.find('\n');
    const std::string_view line = rest.substr(0, nl);
    const std::string t = trim(texlex::normalize(line));
    if (t.starts_with("\\usetikzlibrary") || t.starts_with("\\usepackage")) {
      if (t != "\\usepackage{tikz}" && std::find(hoisted.begin(), hoisted.end(), t) == hoisted.end()) {
        hoisted.push_back(t);
      }
    } else {
      body.append(line);
      body.push_back('\n');
    }
    if (nl == std::string_view::npos) break;
    rest.remove_prefix(nl + 1);
  }

  std::string doc = "\\documentclass[tikz,border=10pt]{standalone}\n\\usepackage{tikz}\n";
  for (const auto& h : hoisted) doc += h + "\n";
  doc += "\\begin{document}\n";
  doc += trim(body);
  doc += "\n\\end{document}\n";
  return doc;
}

std::string extract_error_excerpt(std::string_view log, std::size_t max_bytes) {
  if (log.empty() || max_bytes == 0) return {};

  std::size_t begin = 0, end = log.size();
  std::size_t bang = std::string_view::npos;
  if (log.front() == '!') bang = 0;
  else if (auto p = log.find("\n!"); p != std::string_view::npos) bang = p + 1;

  if (bang != std::string_view::npos) {
    // A little leading context, then as much trailing context as fits.
    const std::size_t lead = std::min(bang, max_bytes / 4);
    begin = bang - lead;
    if (begin > 0) {
      const auto nl = log.find('\n', begin);
      begin = (nl != std::string_view::npos && nl < bang) ? nl + 1 : bang;
    }
    end = std::min(log.size(), begin + max_bytes);
    const auto bang_line_end = log.find('\n', bang);
    if (end < log.size() && bang_line_end != std::string_view::npos && bang_line_end < end) {
      const auto nl = log.rfind('\n', end - 1);
      if (nl != std::string_view::npos && nl >= bang_line_end) end = nl + 1;
    }
  } else if (log.size() > max_bytes) {
    begin = log.size() - max_bytes;
    const auto nl = log.find('\n', begin);
    if (nl != std::string_view::npos && nl + 1 < log.size()) begin = nl + 1;
  }

  while (begin < end && is_utf8_continuation(log[begin])) ++begin;
  if (end < log.size()) {
    while (end > begin && is_utf8_continuation(log[end])) --end;
  }
  return std::string(log.substr(begin, end - begin));
}

Sandbox::Sandbox(ToolchainConfig config) : config_(std::move(config)) {
  if (config_.engine_command.empty()) throw ConfigError("sandbox: empty engine command");
  if (config_.rasterizer_command.empty()) throw ConfigError("sandbox: empty rasterizer command");
  if (config_.dpi <= 0) throw ConfigError("sandbox: dpi must be positive");
}

bool Sandbox::engine_available() const { return program_exists(config_.engine_command.front()); }

CompileOutcome Sandbox::compile(const CompileRequest& request) const {
  if (request.timeout_s <= 0) throw Error("compile: timeout must be positive");
  CompileOutcome outcome;

  auto wd = std::make_shared<Workdir>(config_.work_root, config_.keep_artifacts);
  {
    std::ofstream out(wd->path() / "job.tex", std::ios::binary);
    if (!out) throw EnvironmentError("cannot write job file in " + wd->path().string());
    out << request.document;
  }

  ProcessOptions opts;
  opts.cwd = wd->path();
  opts.env_allow = config_.env_allow;
  opts.env_extra = {"shell_escape=f", "openout_any=p", "TEXMFOUTPUT=" + wd->path().string()};
  opts.timeout_s = request.timeout_s;
  opts.grace_s = config_.grace_s;

  const auto argv = expand(config_.engine_command,
                           {{"input", "job.tex"}, {"jobname", "job"}, {"workdir", wd->path().string()}});
  const ProcessResult res = run_process(argv, opts);
  outcome.duration_s = res.duration_s;

  if (res.not_found) {
    outcome.status = CompileStatus::toolchain_missing;
    outcome.log_excerpt = extract_error_excerpt(res.output, config_.max_log_bytes);
    return outcome;
  }

  const fs::path log_path = wd->path() / "job.log";
  const std::string log = fs::exists(log_path) ? read_file(log_path) : res.output;
  outcome.log_excerpt = extract_error_excerpt(log.empty() ? res.output : log, config_.max_log_bytes);

  const fs::path pdf = wd->path() / "job.pdf";
  std::error_code ec;
  if (res.timed_out) {
    outcome.status = CompileStatus::timeout;
  } else if (res.exit_code == 0 && fs::exists(pdf) && fs::file_size(pdf, ec) > 0) {
    outcome.status = CompileStatus::success;
    outcome.pdf_ref = pdf;
  } else {
    outcome.status = CompileStatus::compile_error;
  }
  outcome.workdir = std::move(wd);
  return outcome;
}

RasterImage Sandbox::rasterize(const fs::path& pdf, double dpi) const {
  if (dpi <= 0) throw RenderFailed("rasterize: dpi must be positive");
  Workdir wd(config_.work_root, false);
  const fs::path out = wd.path() / "page";
  const auto argv = expand(config_.rasterizer_command,
                           {{"pdf", fs::absolute(pdf).string()}, {"out", out.string()}, {"dpi", format_dpi(dpi)}});
  ProcessOptions opts;
  opts.cwd = wd.path();
  opts.env_allow = config_.env_allow;
  opts.timeout_s = config_.render_timeout_s;
  opts.grace_s = config_.grace_s;
  const ProcessResult res = run_process(argv, opts);
  if (res.not_found) throw EnvironmentError("rasterizer not found: " + argv.front());
  if (res.timed_out) throw RenderFailed("rasterizer timed out");
  if (res.exit_code != 0) throw RenderFailed("rasterizer failed: " + extract_error_excerpt(res.output, 512));
  for (const char* ext : {".ppm", ".pgm"}) {
    const fs::path candidate = out.string() + ext;
    if (fs::exists(candidate)) {
      RasterImage img = read_pnm(candidate, dpi);
      if (img.empty()) throw RenderFailed("rasterizer produced an empty image");
      return img;
    }
  }
  throw RenderFailed("rasterizer produced no output image");
}

Sandbox::Render Sandbox::render(std::string_view document, double timeout_s) const {
  Render r;
  r.outcome = compile(CompileRequest{std::string(document), timeout_s});
  if (r.outcome.ok()) r.image = rasterize(*r.outcome.pdf_ref, config_.dpi);
  return r;
}

}  // namespace scitikz::sandbox
