#pragma once

// Code -> raster, either through the sandboxed toolchain or a built-in toy
// rasterizer for a tiny statement family.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "scitikz/raster.hpp"
#include "scitikz/sandbox.hpp"

namespace scitikz {

struct RenderResult {
  sandbox::CompileStatus status = sandbox::CompileStatus::compile_error;
  std::optional<RasterImage> image;
  std::string log_excerpt;
};

class Renderer {
 public:
  virtual ~Renderer() = default;
  /// Must be safe to call concurrently.
  virtual RenderResult render(std::string_view code) const = 0;
  virtual std::string identity() const = 0;
};

/// wrap_standalone + compile (render timeout) + rasterize.
class SandboxRenderer final : public Renderer {
 public:
  explicit SandboxRenderer(sandbox::ToolchainConfig cfg) : sandbox_(std::move(cfg)) {}
  RenderResult render(std::string_view code) const override;
  std::string identity() const override;

 private:
  sandbox::Sandbox sandbox_;
};

/// One statement of the toy family: a segment or a circle, in canvas units.
struct ToyStatement {
  bool circle = false;
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0, r = 0;
};

std::string to_code(const ToyStatement& s);
/// Wraps statements, one per line, in a tikzpicture.
std::string to_program(const std::vector<std::string>& statements);

/// Rasterizes the toy statement family directly: `\draw (x,y) -- (x,y);`
/// and `\draw (x,y) circle (r);` on an 8x8 unit canvas. Anything else is a
/// compile error.
class ToyRenderer final : public Renderer {
 public:
  static constexpr int kUnits = 8;
  static constexpr int kPixelsPerUnit = 8;

  RenderResult render(std::string_view code) const override;
  std::string identity() const override { return "toy-renderer/1"; }
};

}  // namespace scitikz
