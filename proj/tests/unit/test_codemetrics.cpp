#include <doctest.h>

#include <cmath>
#include <map>
#include <random>
#include <set>

#include "scitikz/codemetrics.hpp"
#include "scitikz/error.hpp"
#include "support.hpp"

using namespace scitikz;
using namespace scitikz::codemetrics;
using texlex::TokenStream;

namespace {

using Words = std::vector<std::string>;
using Gram = std::vector<std::string>;

std::vector<std::string_view> views(const Words& w) { return {w.begin(), w.end()}; }

Words chars(std::string_view s) {
  Words out;
  for (char c : s) out.emplace_back(1, c);
  return out;
}

std::size_t levenshtein(const Words& a, const Words& b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i)
    for (std::size_t j = 1; j <= b.size(); ++j)
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
  return d[a.size()][b.size()];
}

Words random_words(std::mt19937& rng, std::size_t max_len, int vocab) {
  std::uniform_int_distribution<std::size_t> len(0, max_len);
  std::uniform_int_distribution<int> tok(0, vocab - 1);
  Words w(len(rng));
  for (auto& t : w) t = "t" + std::to_string(tok(rng));
  return w;
}

std::string join(const Words& w) {
  std::string s;
  for (const auto& t : w) s += t + " ";
  return s;
}

// Clipped n-gram precision with a hand-applied mask, geometric mean over
// orders with a nonzero masked denominator, exponential brevity penalty.
double bleu_oracle(const Words& hyp, const Words& ref, const std::set<Gram>& masked, int max_order) {
  if (hyp.empty()) return 0.0;
  double log_sum = 0;
  int used = 0;
  for (int n = 1; n <= max_order; ++n) {
    auto grams = [&](const Words& w) {
      std::map<Gram, int> c;
      for (std::size_t i = 0; i + n <= w.size(); ++i) {
        Gram g(w.begin() + i, w.begin() + i + n);
        if (!masked.contains(g)) ++c[g];
      }
      return c;
    };
    const auto hc = grams(hyp), rc = grams(ref);
    int num = 0, den = 0;
    for (const auto& [g, c] : hc) {
      den += c;
      auto it = rc.find(g);
      num += std::min(c, it == rc.end() ? 0 : it->second);
    }
    if (den == 0) continue;
    if (num == 0) return 0.0;
    log_sum += std::log(double(num) / den);
    ++used;
  }
  if (used == 0) return 0.0;
  const double bp = hyp.size() > ref.size() ? 1.0 : std::exp(1.0 - double(ref.size()) / hyp.size());
  return bp * std::exp(log_sum / used);
}

TrivialNgramSet mask_set(const std::set<Gram>& masked) {
  std::set<TrivialNgramSet::Entry> entries;
  for (const auto& g : masked) {
    const auto v = views(g);
    entries.emplace(static_cast<int>(g.size()), texlex::fingerprint(v));
  }
  return TrivialNgramSet("hand", masked.size(), 4, std::move(entries));
}

const std::string kProgram =
    "\\begin{tikzpicture}\n\\draw[thick] (0,0) -- (2,1) node[right] {$x$};\n\\fill (1,1) circle (2pt);\n"
    "\\end{tikzpicture}\n";

}  // namespace

TEST_SUITE("codemetrics") {

TEST_CASE("eed edge cases") {
  const Words a = {"\\draw", "(", "0", ")", ";"};
  CHECK(eed(views(a), views(a)) == 0.0);
  CHECK(eed(std::span<const std::string_view>{}, std::span<const std::string_view>{}) == 0.0);
  const auto lev = EedCosts::levenshtein();
  CHECK(eed(std::span<const std::string_view>{}, views(a), lev) == 1.0);
  const auto k = chars("kitten"), s = chars("sitting");
  CHECK(eed(views(k), views(s), lev) == doctest::Approx(3.0 / 7.0).epsilon(1e-15));
}

TEST_CASE("property: eed equals normalized Levenshtein with jumps disabled") {
  std::mt19937 rng(11);
  const auto lev = EedCosts::levenshtein();
  for (int i = 0; i < 1000; ++i) {
    const auto h = random_words(rng, 12, 5), r = random_words(rng, 12, 5);
    const double expect = double(levenshtein(h, r)) / std::max<double>(r.size(), 1.0);
    CHECK(eed(views(h), views(r), lev) == expect);
  }
}

TEST_CASE("property: eed non-negative and zero on identity with default costs") {
  std::mt19937 rng(12);
  for (int i = 0; i < 300; ++i) {
    const auto h = random_words(rng, 20, 6), r = random_words(rng, 20, 6);
    CHECK(eed(views(h), views(r)) >= 0.0);
    CHECK(eed(views(r), views(r)) == 0.0);
  }
}

TEST_CASE("ted similarity") {
  CHECK(ted_similarity(kProgram, kProgram) == 1.0);
  // two substitutions over five tokens: d = 0.4, so s = e^-1 at tau 0.4
  CHECK(ted_similarity("a x c y e", "a b c d e", 0.4, EedCosts::levenshtein()) ==
        doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK(ted_similarity(kProgram, kProgram + "% trailing note\n") == 1.0);
  const double s = ted_similarity(kProgram, "\\begin{tikzpicture}\\node {a};\\end{tikzpicture}");
  CHECK(s > 0.0);
  CHECK(s < 1.0);
  CHECK_THROWS_AS(ted_similarity(kProgram, kProgram, 0.0), std::invalid_argument);
}

TEST_CASE("mining") {
  std::vector<TokenStream> corpus;
  for (int i = 0; i < 4; ++i)
    corpus.push_back(texlex::code_tokens("\\begin{tikzpicture}\\draw (" + std::to_string(i) + ",0);\\end{tikzpicture}"));
  const auto set1 = mine_trivial_ngrams(corpus, 1, 4, "s");
  REQUIRE(set1.size() == 1);
  const std::vector<std::string_view> begin = {"\\begin"};
  const std::vector<std::string_view> draw = {"\\draw"};
  CHECK(mine_trivial_ngrams(corpus, 500) == mine_trivial_ngrams(corpus, 500));
  const auto all = mine_trivial_ngrams(corpus, 100000, 4);
  CHECK(all.contains(begin));
  CHECK(all.contains(draw));
  CHECK_THROWS_AS(mine_trivial_ngrams({}, 5), EmptyCorpus);
  CHECK_THROWS_AS(mine_trivial_ngrams(corpus, 0), std::invalid_argument);
}

TEST_CASE("property: mined set is the top-k by count") {
  std::mt19937 rng(3);
  for (int iter = 0; iter < 30; ++iter) {
    std::vector<Words> docs;
    std::vector<TokenStream> corpus;
    for (int d = 0; d < 5; ++d) {
      docs.push_back(random_words(rng, 15, 6));
      corpus.push_back(texlex::lex(join(docs.back())));
    }
    std::map<Gram, int> counts;
    for (const auto& w : docs)
      for (std::size_t n = 1; n <= 3; ++n)
        for (std::size_t i = 0; i + n <= w.size(); ++i) ++counts[Gram(w.begin() + i, w.begin() + i + n)];
    if (counts.empty()) continue;
    const std::size_t k = 1 + rng() % counts.size();
    const auto set = mine_trivial_ngrams(corpus, k, 3);
    CHECK(set.size() == k);
    int min_in = 1 << 30, max_out = 0;
    for (const auto& [g, c] : counts) {
      const auto v = views(g);
      (set.contains(v) ? min_in = std::min(min_in, c) : max_out = std::max(max_out, c));
    }
    CHECK(min_in >= max_out);
  }
}

TEST_CASE("sidecar round trip") {
  std::vector<TokenStream> corpus = {texlex::code_tokens(kProgram)};
  const auto set = mine_trivial_ngrams(corpus, 20, 4, "snap-1");
  CHECK(TrivialNgramSet::from_json(set.to_json()) == set);
  testing::TempDir dir;
  set.save(dir / "t.json");
  const auto back = TrivialNgramSet::load(dir / "t.json");
  CHECK(back == set);
  CHECK(back.snapshot_id() == "snap-1");
  CHECK(back.k() == 20);
  CHECK(back.max_order() == 4);
  CHECK_THROWS_AS(TrivialNgramSet::from_json("{\"format\":\"x\"}"), ConfigError);
  CHECK_THROWS_AS(TrivialNgramSet::from_json("not json"), ConfigError);
}

TEST_CASE("crystal bleu fixed cases") {
  const TrivialNgramSet none;
  CHECK(crystal_bleu("a b c d e", "a b c d e", none) == doctest::Approx(1.0));
  CHECK(crystal_bleu("a b c d", "e f g h", none) == 0.0);
  // partial overlap, "b" masked by hand
  const Words hyp = {"a", "b", "c", "d", "e", "g"}, ref = {"a", "b", "c", "d", "x", "g", "h"};
  const std::set<Gram> masked = {{"b"}};
  const double got = crystal_bleu(join(hyp), join(ref), mask_set(masked));
  CHECK(got == doctest::Approx(bleu_oracle(hyp, ref, masked, 4)).epsilon(1e-12));
  CHECK(got > 0.0);
  CHECK(got < 1.0);
}

TEST_CASE("property: crystal bleu matches the brute-force oracle") {
  std::mt19937 rng(21);
  std::vector<Words> corpus_words;
  std::vector<TokenStream> corpus;
  for (int d = 0; d < 20; ++d) {
    corpus_words.push_back(random_words(rng, 25, 20));
    corpus.push_back(texlex::lex(join(corpus_words.back())));
  }
  // the mined set via the library, then the same mask rebuilt as strings
  const auto trivial = mine_trivial_ngrams(corpus, 40, 4);
  std::set<Gram> masked;
  for (const auto& w : corpus_words)
    for (std::size_t n = 1; n <= 4; ++n)
      for (std::size_t i = 0; i + n <= w.size(); ++i) {
        Gram g(w.begin() + i, w.begin() + i + n);
        const auto v = views(g);
        if (trivial.contains(v)) masked.insert(g);
      }
  for (int i = 0; i < 200; ++i) {
    const auto h = random_words(rng, 14, 20), r = random_words(rng, 14, 20);
    CHECK(crystal_bleu(join(h), join(r), trivial) == doctest::Approx(bleu_oracle(h, r, masked, 4)).epsilon(1e-9));
  }
}

TEST_CASE("property: crystal bleu ignores comments and whitespace") {
  const TrivialNgramSet none;
  const std::string ref = "\\draw (0,0) -- (1,1);\n\\node at (2,2) {b};";
  const std::string hyp = "\\draw (0,0) -- (1,2);\n\\node at (2,2) {a};";
  const double base = crystal_bleu(hyp, ref, none);
  CHECK(crystal_bleu("  " + hyp + " % note\n\n\n", ref, none) == base);
  CHECK(crystal_bleu(hyp, "% header\n" + ref + "\t\t", none) == base);
}

TEST_CASE("code consistency") {
  const TrivialNgramSet none;
  for (double g : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    const auto same = code_consistency(kProgram, kProgram, none, {.gamma = g});
    CHECK(same.s_code == doctest::Approx(1.0).epsilon(1e-15));
    const auto diff = code_consistency(kProgram, "\\begin{tikzpicture}\\draw (0,0) -- (2,1);\\end{tikzpicture}", none,
                                       {.gamma = g});
    CHECK(diff.s_code == g * diff.crystal_bleu + (1 - g) * diff.s_ted);
    CHECK(diff.s_ted == std::exp(-diff.d_eed / 0.4));
    if (g == 0.0) CHECK(diff.s_code == diff.s_ted);
  }
  CHECK_THROWS_AS(code_consistency(kProgram, kProgram, none, {.gamma = 1.5}), std::invalid_argument);
}

}  // TEST_SUITE
