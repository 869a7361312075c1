#include <doctest.h>

#include <filesystem>

#include "scitikz/error.hpp"
#include "scitikz/process.hpp"
#include "scitikz/sandbox.hpp"
#include "support.hpp"

using namespace scitikz;
using namespace scitikz::sandbox;

namespace {

// Single empty page of the given size in points, with a correct xref table.
std::string blank_pdf(int w_pt, int h_pt) {
  std::vector<std::string> objs = {
      "<< /Type /Catalog /Pages 2 0 R >>",
      "<< /Type /Pages /Kids [3 0 R] /Count 1 >>",
      "<< /Type /Page /Parent 2 0 R /MediaBox [0 0 " + std::to_string(w_pt) + " " + std::to_string(h_pt) + "] >>",
  };
  std::string pdf = "%PDF-1.4\n";
  std::vector<std::size_t> offsets;
  for (std::size_t i = 0; i < objs.size(); ++i) {
    offsets.push_back(pdf.size());
    pdf += std::to_string(i + 1) + " 0 obj\n" + objs[i] + "\nendobj\n";
  }
  const std::size_t xref = pdf.size();
  pdf += "xref\n0 " + std::to_string(objs.size() + 1) + "\n0000000000 65535 f \n";
  for (auto off : offsets) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%010zu 00000 n \n", off);
    pdf += buf;
  }
  pdf += "trailer\n<< /Size " + std::to_string(objs.size() + 1) + " /Root 1 0 R >>\nstartxref\n" +
         std::to_string(xref) + "\n%%EOF\n";
  return pdf;
}

const char* kMinimal =
    "\\documentclass[tikz,border=10pt]{standalone}\n\\usepackage{tikz}\n\\begin{document}\n"
    "\\begin{tikzpicture}\\draw (0,0) -- (1,1);\\end{tikzpicture}\n\\end{document}\n";

}  // namespace

TEST_SUITE("sandbox") {

TEST_CASE("child environment is allow-listed") {
  ::setenv("SCITIKZ_T_ONE", "1", 1);
  ::setenv("SCITIKZ_T_TWO", "2", 1);
  ::setenv("OTHER_T_VAR", "3", 1);
  ProcessOptions opts;
  opts.env_allow = {"SCITIKZ_T_*", "OTHER_T_NOPE"};
  const auto r = run_process({"/usr/bin/env"}, opts);
  CHECK(r.output.find("SCITIKZ_T_ONE=1") != std::string::npos);
  CHECK(r.output.find("SCITIKZ_T_TWO=2") != std::string::npos);
  CHECK(r.output.find("OTHER_T_VAR") == std::string::npos);
  ::unsetenv("SCITIKZ_T_ONE");
  ::unsetenv("SCITIKZ_T_TWO");
  ::unsetenv("OTHER_T_VAR");
}

TEST_CASE("wrap_standalone") {
  const std::string frag = "\\usetikzlibrary{arrows.meta}\n\\begin{tikzpicture}\\draw (0,0) -- (1,0);\\end{tikzpicture}";
  const auto doc = wrap_standalone(frag);
  CHECK(doc.starts_with("\\documentclass[tikz,border=10pt]{standalone}\n"));
  const auto lib = doc.find("\\usetikzlibrary{arrows.meta}");
  REQUIRE(lib != std::string::npos);
  CHECK(lib < doc.find("\\begin{document}"));
  CHECK(doc.find("\\begin{tikzpicture}") > doc.find("\\begin{document}"));
  CHECK(doc.ends_with("\\end{document}\n"));
  CHECK(wrap_standalone(kMinimal) == kMinimal);
  CHECK_THROWS_AS(wrap_standalone("Some prose without a picture."), NoDrawableContent);
}

TEST_CASE("error excerpt extraction") {
  const std::string log = "line one\nline two\n! Undefined control sequence.\nl.5 \\drawx\nmore\n";
  CHECK(extract_error_excerpt(log, 4096).find("! Undefined control sequence.") != std::string::npos);
  CHECK(extract_error_excerpt("", 4096).empty());
  std::string big(1 << 20, 'x');
  for (std::size_t i = 80; i < big.size(); i += 81) big[i] = '\n';
  CHECK(extract_error_excerpt(big, 4096).size() <= 4096);
  std::string with_error = big;
  with_error.replace(500000, 20, "\n! LaTeX Error: bad\n");
  const auto ex = extract_error_excerpt(with_error, 4096);
  CHECK(ex.size() <= 4096);
  CHECK(ex.find("! LaTeX Error: bad") != std::string::npos);
}

TEST_CASE("missing engine is reported as toolchain-missing") {
  ToolchainConfig cfg;
  cfg.engine_command = {"scitikz-no-such-engine", "{input}"};
  const Sandbox sb(cfg);
  CHECK_FALSE(sb.engine_available());
  const auto out = sb.compile({kMinimal, 5.0});
  CHECK(out.status == CompileStatus::toolchain_missing);
  CHECK_FALSE(out.pdf_ref.has_value());
}

TEST_CASE("compile and rasterize with the test toolchain" * doctest::skip(!testing::kHaveToolchain)) {
  const auto cfg = testing::toolchain_config();
  const Sandbox sb(cfg.sandbox);

  SUBCASE("success") {
    const auto out = sb.compile({kMinimal, cfg.sandbox.validate_timeout_s});
    CHECK(out.status == CompileStatus::success);
    REQUIRE(out.pdf_ref.has_value());
    CHECK(std::filesystem::exists(*out.pdf_ref));
    CHECK(out.duration_s <= cfg.sandbox.validate_timeout_s + cfg.sandbox.grace_s);
    const auto a = sb.rasterize(*out.pdf_ref, 72.0);
    const auto b = sb.rasterize(*out.pdf_ref, 72.0);
    CHECK(a == b);
  }
  SUBCASE("undeclared layer") {
    const std::string doc =
        "\\documentclass[tikz,border=10pt]{standalone}\n\\usepackage{tikz}\n\\begin{document}\n"
        "\\begin{tikzpicture}\\begin{pgfonlayer}{background}\\draw (0,0) -- (1,1);\\end{pgfonlayer}"
        "\\end{tikzpicture}\n\\end{document}\n";
    const auto out = sb.compile({doc, cfg.sandbox.validate_timeout_s});
    CHECK(out.status == CompileStatus::compile_error);
    CHECK_FALSE(out.pdf_ref.has_value());
    CHECK(out.log_excerpt.find("could not be found") != std::string::npos);
  }
  SUBCASE("infinite loop times out") {
    const std::string doc =
        "\\documentclass[tikz,border=10pt]{standalone}\n\\usepackage{tikz}\n\\begin{document}\n"
        "\\loop\\iftrue\\repeat\n\\end{document}\n";
    const auto out = sb.compile({doc, 3.0});
    CHECK(out.status == CompileStatus::timeout);
    CHECK_FALSE(out.pdf_ref.has_value());
    CHECK(out.duration_s <= 3.0 + cfg.sandbox.grace_s + 1.0);
  }
  SUBCASE("workdir removed after the outcome is released") {
    std::filesystem::path dir;
    {
      const auto out = sb.compile({kMinimal, cfg.sandbox.validate_timeout_s});
      REQUIRE(out.workdir);
      dir = out.workdir->path();
      CHECK(std::filesystem::exists(dir));
    }
    CHECK_FALSE(std::filesystem::exists(dir));
  }
}

TEST_CASE("rasterizer geometry and failures" * doctest::skip(!testing::kHaveToolchain)) {
  const auto cfg = testing::toolchain_config();
  const Sandbox sb(cfg.sandbox);
  testing::TempDir tmp;
  testing::write_text(tmp / "inch.pdf", blank_pdf(72, 72));
  const auto img = sb.rasterize(tmp / "inch.pdf", 300.0);
  CHECK(img.width == 300);
  CHECK(img.height == 300);
  CHECK(img.dpi == 300.0);
  testing::write_text(tmp / "bad.pdf", "this is not a pdf");
  CHECK_THROWS_AS(sb.rasterize(tmp / "bad.pdf", 300.0), RenderFailed);
}

}  // TEST_SUITE
