#include "scitikz/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <regex>

#include "scitikz/error.hpp"
#include "scitikz/texlex.hpp"

namespace scitikz {

using sandbox::CompileStatus;

RenderResult SandboxRenderer::render(std::string_view code) const {
  RenderResult r;
  std::string doc;
  try {
    doc = sandbox::wrap_standalone(code);
  } catch (const NoDrawableContent& e) {
    r.status = CompileStatus::compile_error;
    r.log_excerpt = e.what();
    return r;
  }
  auto out = sandbox_.compile({doc, sandbox_.config().render_timeout_s});
  r.status = out.status;
  r.log_excerpt = out.log_excerpt;
  if (out.status == CompileStatus::toolchain_missing) {
    throw EnvironmentError("toolchain-missing: " + sandbox_.config().engine_command.front());
  }
  if (out.ok()) {
    try {
      r.image = sandbox_.rasterize(*out.pdf_ref, sandbox_.config().dpi);
    } catch (const RenderFailed& e) {
      r.status = CompileStatus::compile_error;
      r.log_excerpt = e.what();
    }
  }
  return r;
}

std::string SandboxRenderer::identity() const { return "sandbox:" + sandbox_.config().engine_command.front(); }

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string fmt_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

double segment_distance(double px, double py, double ax, double ay, double bx, double by) {
  const double dx = bx - ax, dy = by - ay;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0 ? ((px - ax) * dx + (py - ay) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double cx = ax + t * dx - px, cy = ay + t * dy - py;
  return std::sqrt(cx * cx + cy * cy);
}

}  // namespace

std::string to_code(const ToyStatement& s) {
  if (s.circle) return "\\draw (" + fmt_num(s.x1) + "," + fmt_num(s.y1) + ") circle (" + fmt_num(s.r) + ");";
  return "\\draw (" + fmt_num(s.x1) + "," + fmt_num(s.y1) + ") -- (" + fmt_num(s.x2) + "," + fmt_num(s.y2) + ");";
}

std::string to_program(const std::vector<std::string>& statements) {
  std::string out = "\\begin{tikzpicture}\n";
  for (const auto& s : statements) out += s + "\n";
  out += "\\end{tikzpicture}";
  return out;
}

RenderResult ToyRenderer::render(std::string_view code) const {
  RenderResult r;
  const std::string src = texlex::normalize(texlex::extract_document_body(code));
  const auto b = src.find("\\begin{tikzpicture}");
  const auto e = src.find("\\end{tikzpicture}");
  if (b == std::string::npos || e == std::string::npos || e < b) {
    r.log_excerpt = "! LaTeX Error: no tikzpicture environment.";
    return r;
  }
  const std::string inner = src.substr(b + 19, e - b - 19);

  static const std::string num = R"(\s*(-?\d+(?:\.\d+)?)\s*)";
  static const std::regex line_re(R"(\\draw\s*\()" + num + "," + num + R"(\)\s*--\s*\()" + num + "," + num + R"(\))");
  static const std::regex circle_re(R"(\\draw\s*\()" + num + "," + num + R"(\)\s*circle\s*\()" + num + R"(\))");

  std::vector<ToyStatement> stmts;
  std::size_t start = 0;
  while (true) {
    const auto semi = inner.find(';', start);
    const std::string piece = trim(inner.substr(start, semi == std::string::npos ? std::string::npos : semi - start));
    if (semi == std::string::npos) {
      if (!piece.empty()) {
        r.log_excerpt = "! Package tikz Error: Giving up on this path. Did you forget a semicolon?.";
        return r;
      }
      break;
    }
    std::smatch m;
    if (std::regex_match(piece, m, line_re)) {
      stmts.push_back({false, std::stod(m[1]), std::stod(m[2]), std::stod(m[3]), std::stod(m[4]), 0});
    } else if (std::regex_match(piece, m, circle_re)) {
      stmts.push_back({true, std::stod(m[1]), std::stod(m[2]), 0, 0, std::stod(m[3])});
    } else if (piece.starts_with("\\draw") && piece.size() > 5 && std::isalpha(static_cast<unsigned char>(piece[5]))) {
      r.log_excerpt = "! Undefined control sequence.\nl.1 " + piece;
      return r;
    } else {
      r.log_excerpt = "! Toy renderer: unsupported statement.\nl.1 " + piece;
      return r;
    }
    start = semi + 1;
  }

  constexpr int size = kUnits * kPixelsPerUnit;
  RasterImage img(size, size, Channels::gray, 72.0 * kPixelsPerUnit, 1.0f);
  constexpr double half_width = 1.0;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      for (const auto& s : stmts) {
        const double ax = s.x1 * kPixelsPerUnit, ay = (kUnits - s.y1) * kPixelsPerUnit;
        double d;
        if (s.circle) {
          d = std::abs(std::hypot(px - ax, py - ay) - s.r * kPixelsPerUnit);
        } else {
          d = segment_distance(px, py, ax, ay, s.x2 * kPixelsPerUnit, (kUnits - s.y2) * kPixelsPerUnit);
        }
        if (d <= half_width) {
          img.at(x, y) = 0.0f;
          break;
        }
      }
    }
  }
  r.status = CompileStatus::success;
  r.image = std::move(img);
  return r;
}

}  // namespace scitikz
