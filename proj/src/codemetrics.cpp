#include "scitikz/codemetrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>

#include <json.hpp>

#include "scitikz/error.hpp"

namespace scitikz::codemetrics {

using texlex::Fingerprint;
using texlex::TokenStream;

double eed(std::span<const std::string_view> hyp, std::span<const std::string_view> ref, const EedCosts& c) {
  if (hyp.empty() && ref.empty()) return 0.0;
  const std::size_t m = hyp.size();
  const double inf = std::numeric_limits<double>::infinity();

  // visits[i]: how often column i held the row minimum, -1 = never.
  std::vector<int> visits(m + 1, -1);
  std::vector<double> row(m + 1), next(m + 1);
  row[0] = 0.0;
  for (std::size_t i = 1; i <= m; ++i) row[i] = std::min(static_cast<double>(i) * c.deletion, c.jump);
  visits[0] += 1;

  for (std::size_t w = 1; w <= ref.size(); ++w) {
    next[0] = row[0] + c.insertion;
    for (std::size_t i = 1; i <= m; ++i) {
      const double sub = row[i - 1] + (ref[w - 1] == hyp[i - 1] ? 0.0 : c.substitution);
      next[i] = std::min({next[i - 1] + c.deletion, sub, row[i] + c.insertion});
    }
    const auto min_it = std::min_element(next.begin(), next.end());
    visits[static_cast<std::size_t>(min_it - next.begin())] += 1;
    if (c.jump < inf) {
      const double jump = *min_it + c.jump;
      for (auto& x : next) x = std::min(x, jump);
    }
    std::swap(row, next);
  }

  double uncovered = 0;
  for (int v : visits) uncovered += v >= 0 ? v : 1;
  const double coverage = c.coverage_penalty * uncovered;
  return (row[m] + coverage) / std::max(static_cast<double>(ref.size()) + coverage, 1.0);
}

double eed(const TokenStream& hyp, const TokenStream& ref, const EedCosts& costs) {
  const auto h = hyp.lexemes();
  const auto r = ref.lexemes();
  return eed(h, r, costs);
}

double ted_similarity(std::string_view hyp, std::string_view ref, double tau_ted, const EedCosts& costs) {
  if (!(tau_ted > 0)) throw std::invalid_argument("ted_similarity: tau_ted must be positive");
  return std::exp(-eed(texlex::code_tokens(hyp), texlex::code_tokens(ref), costs) / tau_ted);
}

TrivialNgramSet::TrivialNgramSet(std::string snapshot_id, std::size_t k, int max_order, std::set<Entry> entries)
    : snapshot_id_(std::move(snapshot_id)), k_(k), max_order_(max_order), entries_(std::move(entries)) {}

bool TrivialNgramSet::contains(std::span<const std::string_view> ngram) const {
  return contains(static_cast<int>(ngram.size()), texlex::fingerprint(ngram));
}

namespace {

constexpr std::string_view kSidecarFormat = "scitikz-trivial-ngrams";
constexpr int kSidecarVersion = 1;

std::string to_hex(Fingerprint fp) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fp));
  return buf;
}

Fingerprint from_hex(const std::string& s) {
  std::size_t used = 0;
  const unsigned long long v = std::stoull(s, &used, 16);
  if (used != s.size()) throw std::invalid_argument("bad fingerprint: " + s);
  return v;
}

}  // namespace

std::string TrivialNgramSet::to_json() const {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& [order, fp] : entries_) entries.push_back({order, to_hex(fp)});
  nlohmann::json j = {{"format", kSidecarFormat}, {"version", kSidecarVersion}, {"snapshot_id", snapshot_id_},
                      {"k", k_},           {"max_order", max_order_}, {"entries", std::move(entries)}};
  return j.dump(1) + "\n";
}

TrivialNgramSet TrivialNgramSet::from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format").get<std::string>() != kSidecarFormat) throw ConfigError("not a trivial n-gram sidecar");
    if (j.at("version").get<int>() != kSidecarVersion) throw ConfigError("unsupported trivial n-gram sidecar version");
    std::set<Entry> entries;
    for (const auto& e : j.at("entries")) entries.emplace(e.at(0).get<int>(), from_hex(e.at(1).get<std::string>()));
    return TrivialNgramSet(j.at("snapshot_id").get<std::string>(), j.at("k").get<std::size_t>(),
                           j.at("max_order").get<int>(), std::move(entries));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed trivial n-gram sidecar: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("malformed trivial n-gram sidecar: ") + e.what());
  }
}

void TrivialNgramSet::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw EnvironmentError("cannot write " + path.string());
  out << to_json();
}

TrivialNgramSet TrivialNgramSet::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  return from_json(std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()));
}

TrivialNgramSet mine_trivial_ngrams(std::span<const TokenStream> corpus, std::size_t k, int max_order,
                                    std::string snapshot_id) {
  if (corpus.empty()) throw EmptyCorpus("mine_trivial_ngrams: empty corpus");
  if (k == 0) throw std::invalid_argument("mine_trivial_ngrams: k must be >= 1");
  if (max_order < 1) throw std::invalid_argument("mine_trivial_ngrams: max_order must be >= 1");

  std::map<TrivialNgramSet::Entry, std::size_t> counts;
  for (const auto& stream : corpus) {
    const auto lex = stream.lexemes();
    const std::span<const std::string_view> all(lex);
    for (int n = 1; n <= max_order; ++n) {
      const auto un = static_cast<std::size_t>(n);
      for (std::size_t i = 0; i + un <= all.size(); ++i) ++counts[{n, texlex::fingerprint(all.subspan(i, un))}];
    }
  }

  std::vector<std::pair<TrivialNgramSet::Entry, std::size_t>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    if (a.first.second != b.first.second) return a.first.second < b.first.second;
    return a.first.first < b.first.first;
  });
  if (ranked.size() > k) ranked.resize(k);

  std::set<TrivialNgramSet::Entry> entries;
  for (const auto& [entry, count] : ranked) entries.insert(entry);
  return TrivialNgramSet(std::move(snapshot_id), k, max_order, std::move(entries));
}

double crystal_bleu(const TokenStream& hyp, const TokenStream& ref, const TrivialNgramSet& trivial, int max_order) {
  if (max_order < 1) throw std::invalid_argument("crystal_bleu: max_order must be >= 1");
  const auto h = hyp.lexemes();
  const auto r = ref.lexemes();
  if (h.empty()) return 0.0;

  using Gram = std::vector<std::string_view>;
  auto count = [&](const std::vector<std::string_view>& toks, int n) {
    std::map<Gram, std::size_t> out;
    const auto un = static_cast<std::size_t>(n);
    for (std::size_t i = 0; i + un <= toks.size(); ++i) {
      Gram g(toks.begin() + i, toks.begin() + i + un);
      if (!trivial.contains(g)) ++out[std::move(g)];
    }
    return out;
  };

  double log_sum = 0;
  int used = 0;
  for (int n = 1; n <= max_order; ++n) {
    const auto hc = count(h, n);
    if (hc.empty()) continue;
    const auto rc = count(r, n);
    std::size_t matched = 0, total = 0;
    for (const auto& [g, c] : hc) {
      total += c;
      if (auto it = rc.find(g); it != rc.end()) matched += std::min(c, it->second);
    }
    if (matched == 0) return 0.0;
    log_sum += std::log(static_cast<double>(matched) / static_cast<double>(total));
    ++used;
  }
  if (used == 0) return 0.0;

  const double c = static_cast<double>(h.size()), rl = static_cast<double>(r.size());
  const double bp = c > rl ? 1.0 : std::exp(1.0 - rl / c);
  return bp * std::exp(log_sum / used);
}

double crystal_bleu(std::string_view hyp, std::string_view ref, const TrivialNgramSet& trivial, int max_order) {
  return crystal_bleu(texlex::code_tokens(hyp), texlex::code_tokens(ref), trivial, max_order);
}

CodeScores code_consistency(std::string_view primal, std::string_view reconstruction, const TrivialNgramSet& trivial,
                            const CodeConsistencyParams& p) {
  if (!(p.gamma >= 0.0 && p.gamma <= 1.0)) throw std::invalid_argument("code_consistency: gamma must lie in [0, 1]");
  if (!(p.tau_ted > 0)) throw std::invalid_argument("code_consistency: tau_ted must be positive");
  const TokenStream ref = texlex::code_tokens(primal);
  const TokenStream hyp = texlex::code_tokens(reconstruction);
  CodeScores s;
  s.gamma = p.gamma;
  s.d_eed = eed(hyp, ref, p.costs);
  s.s_ted = std::exp(-s.d_eed / p.tau_ted);
  s.crystal_bleu = crystal_bleu(hyp, ref, trivial, p.max_order);
  s.s_code = p.gamma * s.crystal_bleu + (1.0 - p.gamma) * s.s_ted;
  return s;
}

}  // namespace scitikz::codemetrics
