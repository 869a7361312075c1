#pragma once

// Standalone wrapping, sandboxed LaTeX compilation and PDF rasterization.
//
// The engine and rasterizer are external programs described by argv
// templates. Placeholders: {input} {jobname} {workdir} for the engine;
// {pdf} {out} {dpi} for the rasterizer, which must write {out}.ppm or
// {out}.pgm (pdftoppm -singlefile conventions).

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "scitikz/raster.hpp"

namespace scitikz::sandbox {

enum class CompileStatus { success, compile_error, timeout, toolchain_missing };

std::string_view to_string(CompileStatus s);
CompileStatus compile_status_from_string(std::string_view s);

struct ToolchainConfig {
  std::vector<std::string> engine_command = {
      "pdflatex", "-interaction=nonstopmode", "-halt-on-error", "-no-shell-escape",
      "-output-directory={workdir}", "{input}"};
  std::vector<std::string> rasterizer_command = {
      "pdftoppm", "-r", "{dpi}", "-f", "1", "-l", "1", "-singlefile", "{pdf}", "{out}"};
  double validate_timeout_s = 10.0;
  double render_timeout_s = 20.0;
  double grace_s = 0.5;
  double dpi = 300.0;
  std::size_t max_log_bytes = 4096;
  bool keep_artifacts = false;
  /// Directory under which per-job workdirs are created; empty = system temp.
  std::filesystem::path work_root;
  std::vector<std::string> env_allow = {"PATH", "HOME", "LANG", "LC_ALL", "TEXMFHOME",
                                        "TEXMFVAR", "TEXMFCONFIG", "PYTHON", "NODE_PATH"};
};

/// A per-job scratch directory, removed on destruction unless kept.
class Workdir {
 public:
  Workdir(const std::filesystem::path& root, bool keep);
  ~Workdir();
  Workdir(const Workdir&) = delete;
  Workdir& operator=(const Workdir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  bool keep_;
};

struct CompileRequest {
  std::string document;
  double timeout_s = 10.0;
};

struct CompileOutcome {
  CompileStatus status = CompileStatus::compile_error;
  double duration_s = 0.0;
  std::string log_excerpt;
  /// Present iff status == success. Valid while this outcome (or a copy)
  /// is alive; the workdir is shared between copies.
  std::optional<std::filesystem::path> pdf_ref;
  std::shared_ptr<const Workdir> workdir;

  bool ok() const noexcept { return status == CompileStatus::success; }
};

/// Full documents pass through; a bare tikzpicture fragment is wrapped in a
/// standalone document with its \usepackage / \usetikzlibrary lines hoisted
/// into the preamble. Throws NoDrawableContent otherwise.
std::string wrap_standalone(std::string_view fragment);

/// True when the source already declares a document (class or environment).
bool is_full_document(std::string_view source);

/// Window of at most max_bytes around the first line starting with '!', or
/// the tail of the log when no such line exists.
std::string extract_error_excerpt(std::string_view full_log, std::size_t max_bytes);

class Sandbox {
 public:
  explicit Sandbox(ToolchainConfig config = {});

  const ToolchainConfig& config() const noexcept { return config_; }

  CompileOutcome compile(const CompileRequest& request) const;

  /// Rasterizes the first page. Throws RenderFailed.
  RasterImage rasterize(const std::filesystem::path& pdf, double dpi) const;

  /// compile + rasterize at the configured DPI; the image is empty when
  /// compilation failed.
  struct Render {
    CompileOutcome outcome;
    std::optional<RasterImage> image;
  };
  Render render(std::string_view document, double timeout_s) const;

  /// Whether the engine executable can be found at all.
  bool engine_available() const;

 private:
  ToolchainConfig config_;
};

}  // namespace scitikz::sandbox
