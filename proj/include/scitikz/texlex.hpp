#pragma once

// TeX-aware normalization, lexing, dependency scanning and n-gram shingling.
//
// The lexer is deliberately shallow: it never expands macros and never
// rejects input. Every non-whitespace byte of the normalized source belongs
// to exactly one token.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace scitikz::texlex {

enum class TokenKind {
  command,
  group_delimiter,
  math_delimiter,
  text_word,
  number,
  punctuation,
};

std::string_view to_string(TokenKind kind);

/// Half-open byte range [begin, end) into the normalized source.
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;

  friend bool operator==(const Span&, const Span&) = default;
};

struct TexToken {
  TokenKind kind = TokenKind::punctuation;
  std::string lexeme;
  Span span;

  friend bool operator==(const TexToken&, const TexToken&) = default;
};

/// Immutable token sequence. Spans are strictly increasing and disjoint.
class TokenStream {
 public:
  TokenStream() = default;
  TokenStream(std::vector<TexToken> tokens, std::string source_id);

  const std::vector<TexToken>& tokens() const noexcept { return tokens_; }
  const std::string& source_id() const noexcept { return source_id_; }
  std::size_t size() const noexcept { return tokens_.size(); }
  bool empty() const noexcept { return tokens_.empty(); }
  const TexToken& operator[](std::size_t i) const { return tokens_[i]; }

  std::vector<std::string_view> lexemes() const;

  friend bool operator==(const TokenStream&, const TokenStream&) = default;

 private:
  std::vector<TexToken> tokens_;
  std::string source_id_;
};

struct DependencyFinding {
  std::string command;   // macro name without the leading backslash
  std::string argument;  // contents of the first mandatory argument, if any
  Span span;             // the macro token in the normalized source

  friend bool operator==(const DependencyFinding&, const DependencyFinding&) = default;
};

/// Text between \begin{document} and the last \end{document}; the input
/// unchanged when either marker is missing.
std::string extract_document_body(std::string_view source);

/// Strips unescaped % comments, collapses horizontal whitespace runs to one
/// space, drops trailing blanks on each line and caps blank-line runs at one
/// empty line. CRLF line endings become LF.
std::string normalize(std::string_view source);

/// Tokenizes an already-normalized source.
TokenStream lex(std::string_view normalized, std::string source_id = {});

/// extract_document_body -> normalize -> lex: the canonical preprocessing for
/// code metrics.
TokenStream code_tokens(std::string_view code, std::string source_id = {});

/// \includegraphics, \input, \include, \bibliography, \import, \lstinputlisting
const std::vector<std::string>& default_exclusion_list();

/// Reports every occurrence of a listed macro outside comments. List entries
/// may be given with or without the leading backslash.
std::vector<DependencyFinding> scan_dependencies(std::string_view source,
                                                 std::span<const std::string> exclusion_list);

using Fingerprint = std::uint64_t;

/// 64-bit FNV-1a over the lexemes joined with a unit separator. Collisions
/// are tolerated by every consumer (dedup over-removes, n-gram masking
/// over-masks).
Fingerprint fingerprint(std::span<const std::string_view> lexemes);
Fingerprint fingerprint(std::span<const TexToken> window);

/// Fingerprints of every contiguous n-token window.
std::unordered_set<Fingerprint> shingles(const TokenStream& stream, std::size_t n);

}  // namespace scitikz::texlex
