#pragma once

// Code-side similarity over TeX token streams.

#include <cstdint>
#include <filesystem>
#include <limits>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "scitikz/texlex.hpp"

namespace scitikz::codemetrics {

/// Costs of the Extended Edit Distance. Rows walk the reference, columns the
/// hypothesis: `insertion` covers a reference token the hypothesis lacks,
/// `deletion` skips a surplus hypothesis token. A jump may follow any
/// reference token; jump = +inf disables jumps.
struct EedCosts {
  double insertion = 1.0;
  double substitution = 1.0;
  double deletion = 0.2;
  double jump = 2.0;
  double coverage_penalty = 0.3;

  static EedCosts levenshtein() {
    return {1.0, 1.0, 1.0, std::numeric_limits<double>::infinity(), 0.0};
  }
};

/// Normalized edit cost of `hyp` against `ref`:
/// (cost + coverage) / max(|ref| + coverage, 1). Zero for two empty streams.
double eed(const texlex::TokenStream& hyp, const texlex::TokenStream& ref, const EedCosts& costs = {});
double eed(std::span<const std::string_view> hyp, std::span<const std::string_view> ref, const EedCosts& costs = {});

/// exp(-eed(tokens(hyp), tokens(ref)) / tau_ted) after body extraction and
/// normalization.
double ted_similarity(std::string_view hyp, std::string_view ref, double tau_ted = 0.4, const EedCosts& costs = {});

/// The k most frequent n-grams (orders 1..max_order) of a reference corpus.
class TrivialNgramSet {
 public:
  using Entry = std::pair<int, texlex::Fingerprint>;  // (order, fingerprint)

  TrivialNgramSet() = default;
  TrivialNgramSet(std::string snapshot_id, std::size_t k, int max_order, std::set<Entry> entries);

  bool contains(int order, texlex::Fingerprint fp) const { return entries_.contains({order, fp}); }
  bool contains(std::span<const std::string_view> ngram) const;

  const std::string& snapshot_id() const noexcept { return snapshot_id_; }
  std::size_t k() const noexcept { return k_; }
  int max_order() const noexcept { return max_order_; }
  const std::set<Entry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }

  /// Versioned JSON sidecar.
  std::string to_json() const;
  static TrivialNgramSet from_json(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static TrivialNgramSet load(const std::filesystem::path& path);

  friend bool operator==(const TrivialNgramSet&, const TrivialNgramSet&) = default;

 private:
  std::string snapshot_id_;
  std::size_t k_ = 0;
  int max_order_ = 0;
  std::set<Entry> entries_;
};

/// Counts every n-gram of order 1..max_order across the corpus and keeps the
/// k most frequent. Ties break by ascending fingerprint, then order.
/// Throws EmptyCorpus.
TrivialNgramSet mine_trivial_ngrams(std::span<const texlex::TokenStream> corpus, std::size_t k = 500,
                                    int max_order = 4, std::string snapshot_id = {});

/// Masked BLEU: clipped n-gram precisions that ignore trivial n-grams,
/// geometric mean over orders with a non-zero masked denominator, standard
/// brevity penalty on unmasked token counts.
double crystal_bleu(const texlex::TokenStream& hyp, const texlex::TokenStream& ref, const TrivialNgramSet& trivial,
                    int max_order = 4);
double crystal_bleu(std::string_view hyp, std::string_view ref, const TrivialNgramSet& trivial, int max_order = 4);

struct CodeScores {
  double d_eed = 0.0;
  double s_ted = 1.0;
  double crystal_bleu = 0.0;
  double s_code = 0.0;
  double gamma = 0.4;
};

struct CodeConsistencyParams {
  double gamma = 0.4;
  double tau_ted = 0.4;
  EedCosts costs{};
  int max_order = 4;
};

/// Scores a reconstruction against its primal program.
/// s_code = gamma * crystal_bleu + (1 - gamma) * s_ted.
CodeScores code_consistency(std::string_view primal, std::string_view reconstruction, const TrivialNgramSet& trivial,
                            const CodeConsistencyParams& params = {});

}  // namespace scitikz::codemetrics
