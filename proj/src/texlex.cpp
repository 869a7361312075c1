#include "scitikz/texlex.hpp"

#include <algorithm>
#include <array>
#include <unordered_set>

namespace scitikz::texlex {

namespace {

bool is_horizontal_space(char c) { return c == ' ' || c == '\t' || c == '\f' || c == '\v'; }

bool is_space(char c) { return is_horizontal_space(c) || c == '\n' || c == '\r'; }

bool is_ascii_letter(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }

bool is_digit(char c) { return c >= '0' && c <= '9'; }

bool is_high_byte(char c) { return static_cast<unsigned char>(c) >= 0x80; }

bool is_word_start(char c) { return is_ascii_letter(c) || is_high_byte(c); }

bool is_word_continue(char c) { return is_word_start(c) || is_digit(c); }

bool is_command_letter(char c) { return is_ascii_letter(c) || c == '@'; }

// Punctuation that may form multi-character operators such as "--", "->",
// "|-" or "++".
bool is_run_punct(char c) {
  constexpr std::string_view run = "-+<>|!:.*/^_&~@#?'`\"";
  return run.find(c) != std::string_view::npos;
}

std::size_t utf8_length(char lead) {
  const auto b = static_cast<unsigned char>(lead);
  if (b >= 0xF0) return 4;
  if (b >= 0xE0) return 3;
  if (b >= 0xC0) return 2;
  return 1;
}

// Removes an unescaped % and everything after it on this line.
std::string_view strip_comment(std::string_view line) {
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] != '%') continue;
    std::size_t backslashes = 0;
    for (std::size_t j = i; j > 0 && line[j - 1] == '\\'; --j) ++backslashes;
    if (backslashes % 2 == 0) return line.substr(0, i);
  }
  return line;
}

}  // namespace

std::string_view to_string(TokenKind kind) {
  switch (kind) {
    case TokenKind::command: return "command";
    case TokenKind::group_delimiter: return "group-delimiter";
    case TokenKind::math_delimiter: return "math-delimiter";
    case TokenKind::text_word: return "text-word";
    case TokenKind::number: return "number";
    case TokenKind::punctuation: return "punctuation";
  }
  return "punctuation";
}

TokenStream::TokenStream(std::vector<TexToken> tokens, std::string source_id)
    : tokens_(std::move(tokens)), source_id_(std::move(source_id)) {}

std::vector<std::string_view> TokenStream::lexemes() const {
  std::vector<std::string_view> out;
  out.reserve(tokens_.size());
  for (const auto& t : tokens_) out.emplace_back(t.lexeme);
  return out;
}

std::string extract_document_body(std::string_view source) {
  constexpr std::string_view begin_marker = "\\begin{document}";
  constexpr std::string_view end_marker = "\\end{document}";
  const auto begin = source.find(begin_marker);
  if (begin == std::string_view::npos) return std::string(source);
  const auto body_start = begin + begin_marker.size();
  const auto end = source.rfind(end_marker);
  if (end == std::string_view::npos || end < body_start) return std::string(source);
  return std::string(source.substr(body_start, end - body_start));
}

std::string normalize(std::string_view source) {
  std::string unified;
  unified.reserve(source.size());
  for (std::size_t i = 0; i < source.size(); ++i) {
    if (source[i] == '\r') {
      unified.push_back('\n');
      if (i + 1 < source.size() && source[i + 1] == '\n') ++i;
    } else {
      unified.push_back(source[i]);
    }
  }

  std::string out;
  out.reserve(unified.size());
  std::size_t pending_newlines = 0;
  bool first_line = true;
  std::string_view rest = unified;
  while (true) {
    const auto nl = rest.find('\n');
    std::string_view line = strip_comment(rest.substr(0, nl));

    std::string collapsed;
    collapsed.reserve(line.size());
    for (char c : line) {
      if (is_horizontal_space(c)) {
        if (collapsed.empty() || collapsed.back() != ' ') collapsed.push_back(' ');
      } else {
        collapsed.push_back(c);
      }
    }
    while (!collapsed.empty() && collapsed.back() == ' ') collapsed.pop_back();

    if (!first_line) ++pending_newlines;
    first_line = false;
    if (!collapsed.empty()) {
      out.append(std::min<std::size_t>(pending_newlines, 2), '\n');
      pending_newlines = 0;
      out += collapsed;
    }

    if (nl == std::string_view::npos) break;
    rest.remove_prefix(nl + 1);
  }
  out.append(std::min<std::size_t>(pending_newlines, 2), '\n');
  return out;
}

TokenStream lex(std::string_view src, std::string source_id) {
  std::vector<TexToken> tokens;
  std::size_t i = 0;
  const std::size_t n = src.size();

  auto emit = [&](TokenKind kind, std::size_t begin, std::size_t end) {
    tokens.push_back(TexToken{kind, std::string(src.substr(begin, end - begin)), Span{begin, end}});
  };

  while (i < n) {
    const char c = src[i];
    if (is_space(c)) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    if (c == '\\') {
      if (i + 1 >= n) {
        emit(TokenKind::punctuation, start, ++i);
      } else if (is_command_letter(src[i + 1])) {
        i += 2;
        while (i < n && is_command_letter(src[i])) ++i;
        emit(TokenKind::command, start, i);
      } else {
        i += 1 + std::min(utf8_length(src[i + 1]), n - i - 1);
        emit(TokenKind::command, start, i);
      }
    } else if (c == '{' || c == '}' || c == '[' || c == ']') {
      emit(TokenKind::group_delimiter, start, ++i);
    } else if (c == '$') {
      emit(TokenKind::math_delimiter, start, ++i);
    } else if (is_digit(c) || (c == '.' && i + 1 < n && is_digit(src[i + 1]))) {
      while (i < n && is_digit(src[i])) ++i;
      if (i + 1 < n && src[i] == '.' && is_digit(src[i + 1])) {
        ++i;
        while (i < n && is_digit(src[i])) ++i;
      }
      emit(TokenKind::number, start, i);
    } else if (is_word_start(c)) {
      ++i;
      while (i < n && is_word_continue(src[i])) ++i;
      emit(TokenKind::text_word, start, i);
    } else if (is_run_punct(c)) {
      ++i;
      while (i < n && is_run_punct(src[i]) &&
             !(src[i] == '.' && i + 1 < n && is_digit(src[i + 1]))) {
        ++i;
      }
      emit(TokenKind::punctuation, start, i);
    } else {
      emit(TokenKind::punctuation, start, ++i);
    }
  }
  return TokenStream(std::move(tokens), std::move(source_id));
}

TokenStream code_tokens(std::string_view code, std::string source_id) {
  return lex(normalize(extract_document_body(code)), std::move(source_id));
}

const std::vector<std::string>& default_exclusion_list() {
  static const std::vector<std::string> list = {
      "\\includegraphics", "\\input", "\\include", "\\bibliography", "\\import", "\\lstinputlisting",
  };
  return list;
}

std::vector<DependencyFinding> scan_dependencies(std::string_view source,
                                                 std::span<const std::string> exclusion_list) {
  std::unordered_set<std::string> wanted;
  for (const auto& name : exclusion_list) {
    wanted.insert(name.starts_with('\\') ? name : "\\" + name);
  }

  const std::string normalized = normalize(source);
  const TokenStream stream = lex(normalized);
  const auto& toks = stream.tokens();

  std::vector<DependencyFinding> findings;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (toks[i].kind != TokenKind::command || !wanted.contains(toks[i].lexeme)) continue;

    DependencyFinding finding{toks[i].lexeme.substr(1), {}, toks[i].span};
    std::size_t j = i + 1;
    if (j < toks.size() && toks[j].lexeme == "[") {
      int depth = 0;
      for (; j < toks.size(); ++j) {
        if (toks[j].lexeme == "[") ++depth;
        if (toks[j].lexeme == "]" && --depth == 0) {
          ++j;
          break;
        }
      }
    }
    if (j < toks.size() && toks[j].lexeme == "{") {
      int depth = 0;
      for (std::size_t k = j; k < toks.size(); ++k) {
        if (toks[k].lexeme == "{") ++depth;
        if (toks[k].lexeme == "}" && --depth == 0) {
          const auto from = toks[j].span.end;
          finding.argument = normalized.substr(from, toks[k].span.begin - from);
          break;
        }
      }
    }
    findings.push_back(std::move(finding));
  }
  return findings;
}

Fingerprint fingerprint(std::span<const std::string_view> lexemes) {
  constexpr std::uint64_t offset = 14695981039346656037ull;
  constexpr std::uint64_t prime = 1099511628211ull;
  std::uint64_t h = offset;
  bool first = true;
  for (auto lexeme : lexemes) {
    if (!first) {
      h ^= 0x1Fu;
      h *= prime;
    }
    first = false;
    for (unsigned char c : lexeme) {
      h ^= c;
      h *= prime;
    }
  }
  return h;
}

Fingerprint fingerprint(std::span<const TexToken> window) {
  std::vector<std::string_view> lexemes;
  lexemes.reserve(window.size());
  for (const auto& t : window) lexemes.emplace_back(t.lexeme);
  return fingerprint(lexemes);
}

std::unordered_set<Fingerprint> shingles(const TokenStream& stream, std::size_t n) {
  std::unordered_set<Fingerprint> out;
  if (n == 0 || stream.size() < n) return out;
  const auto lex = stream.lexemes();
  const std::span<const std::string_view> all(lex);
  for (std::size_t i = 0; i + n <= all.size(); ++i) out.insert(fingerprint(all.subspan(i, n)));
  return out;
}

}  // namespace scitikz::texlex
