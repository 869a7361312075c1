#include "scitikz/backends.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "scitikz/digest.hpp"
#include "scitikz/error.hpp"
#include "scitikz/process.hpp"
#include "scitikz/repair.hpp"

namespace scitikz::backends {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(Kind k) {
  switch (k) {
    case Kind::embed: return "embed";
    case Kind::perceptual: return "perceptual";
    case Kind::repair: return "repair";
    case Kind::judge: return "judge";
    case Kind::policy: return "policy";
  }
  return "embed";
}

std::string_view to_string(Transport t) {
  switch (t) {
    case Transport::builtin: return "builtin";
    case Transport::http: return "http";
    case Transport::stdio: return "stdio";
  }
  return "builtin";
}

Kind kind_from_string(std::string_view s) {
  for (Kind k : kAllKinds) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("unknown backend kind: " + std::string(s));
}

Transport transport_from_string(std::string_view s) {
  for (Transport t : {Transport::builtin, Transport::http, Transport::stdio}) {
    if (to_string(t) == s) return t;
  }
  throw ConfigError("unknown backend transport: " + std::string(s));
}

std::string BackendEndpoint::identity() const {
  if (transport == Transport::builtin) return "builtin";
  return std::string(to_string(transport)) + ":" + address;
}

BackendsConfig::BackendsConfig() {
  for (Kind k : kAllKinds) (*this)[k].kind = k;
}

BackendEndpoint parse_endpoint_spec(Kind kind, std::string_view spec) {
  BackendEndpoint ep;
  ep.kind = kind;
  if (spec.empty() || spec == "builtin") return ep;
  if (spec.starts_with("http://") || spec.starts_with("https://")) {
    ep.transport = Transport::http;
    ep.address = std::string(spec);
  } else if (spec.starts_with("stdio:")) {
    ep.transport = Transport::stdio;
    ep.address = std::string(spec.substr(6));
  } else {
    throw ConfigError("bad backend spec for " + std::string(to_string(kind)) + ": " + std::string(spec));
  }
  return ep;
}

BackendsConfig BackendsConfig::from_json(const json& j) {
  BackendsConfig cfg;
  try {
    if (j.contains("cache_dir") && !j.at("cache_dir").is_null()) cfg.cache_dir = j.at("cache_dir").get<std::string>();
    for (Kind k : kAllKinds) {
      const std::string name(to_string(k));
      if (!j.contains(name)) continue;
      const auto& e = j.at(name);
      BackendEndpoint& ep = cfg[k];
      if (e.is_string()) {
        ep = parse_endpoint_spec(k, e.get<std::string>());
        continue;
      }
      ep.transport = transport_from_string(e.value("transport", "builtin"));
      ep.address = e.value("address", "");
      ep.timeout_s = e.value("timeout_s", ep.timeout_s);
      ep.retries = e.value("retries", ep.retries);
      if (ep.retries < 0) throw ConfigError("backend retries must be >= 0");
      if (!(ep.timeout_s > 0)) throw ConfigError("backend timeout must be positive");
      if (ep.transport != Transport::builtin && ep.address.empty()) {
        throw ConfigError("backend " + name + " needs an address");
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed backends config: ") + e.what());
  }
  return cfg;
}

BackendsConfig BackendsConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read backends config " + path.string());
  try {
    return from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed backends config " + path.string() + ": " + e.what());
  }
}

void BackendsConfig::apply_env_overrides() {
  for (Kind k : kAllKinds) {
    std::string var = "SCITIKZ_" + std::string(to_string(k)) + "_BACKEND";
    for (auto& c : var) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (const char* v = std::getenv(var.c_str())) {
      const double timeout = (*this)[k].timeout_s;
      const int retries = (*this)[k].retries;
      (*this)[k] = parse_endpoint_spec(k, v);
      (*this)[k].timeout_s = timeout;
      (*this)[k].retries = retries;
    }
  }
}

json JudgeScores::to_json() const {
  return {{"correctness", correctness},
          {"layout_precision", layout_precision},
          {"readability", readability},
          {"scientific_plausibility", scientific_plausibility},
          {"visual_complexity", visual_complexity},
          {"total_score", total}};
}

namespace {

constexpr std::array<const char*, 5> kScoreKeys = {"correctness", "layout_precision", "readability",
                                                   "scientific_plausibility", "visual_complexity"};

}  // namespace

JudgeScores JudgeScores::from_json(const json& j) {
  if (!j.is_object()) throw SchemaViolation("judge reply is not a JSON object");
  if (j.size() != kScoreKeys.size() + 1) throw SchemaViolation("judge reply must have exactly six keys");
  std::array<int, 5> v{};
  for (std::size_t i = 0; i < kScoreKeys.size(); ++i) {
    if (!j.contains(kScoreKeys[i])) throw SchemaViolation(std::string("judge reply lacks ") + kScoreKeys[i]);
    const auto& x = j.at(kScoreKeys[i]);
    if (!x.is_number_integer()) throw SchemaViolation(std::string(kScoreKeys[i]) + " is not an integer");
    const auto n = x.get<long long>();
    if (n < 0 || n > 5) throw SchemaViolation(std::string(kScoreKeys[i]) + " out of range [0,5]");
    v[i] = static_cast<int>(n);
  }
  if (!j.contains("total_score")) throw SchemaViolation("judge reply lacks total_score");
  const auto& t = j.at("total_score");
  if (!t.is_number_integer()) throw SchemaViolation("total_score is not an integer");
  const int sum = v[0] + v[1] + v[2] + v[3] + v[4];
  if (t.get<long long>() != sum) throw SchemaViolation("total_score does not equal the sum of the scores");
  return JudgeScores{v[0], v[1], v[2], v[3], v[4], sum};
}

JudgeScores parse_judge_reply(std::string_view reply) {
  std::size_t end = reply.size();
  while (end > 0 && (reply[end - 1] == '\n' || reply[end - 1] == '\r' || reply[end - 1] == ' ' ||
                     reply[end - 1] == '\t')) {
    --end;
  }
  if (end == 0) throw SchemaViolation("empty judge reply");
  const auto nl = reply.rfind('\n', end - 1);
  const std::string_view last = reply.substr(nl == std::string_view::npos ? 0 : nl + 1, end - (nl == std::string_view::npos ? 0 : nl + 1));
  json j;
  try {
    j = json::parse(last);
  } catch (const json::parse_error&) {
    throw SchemaViolation("last line of the judge reply is not a single JSON object");
  }
  return JudgeScores::from_json(j);
}

Backends::Backends(BackendsConfig config) : config_(std::move(config)) {}

std::string Backends::identity(Kind k) const {
  const auto& ep = config_[k];
  if (ep.transport != Transport::builtin) return ep.identity();
  switch (k) {
    case Kind::embed: return "builtin:thumbnail-16x16";
    case Kind::perceptual: return "builtin:mean-abs-diff";
    case Kind::repair: return "builtin:rules";
    case Kind::judge: return "none";
    case Kind::policy: return "none";
  }
  return "builtin";
}

namespace {

std::vector<std::string> split_command(const std::string& cmd) {
  std::vector<std::string> out;
  std::istringstream in(cmd);
  std::string part;
  while (in >> part) out.push_back(part);
  return out;
}

struct Timeout {};

std::string last_line(const std::string& s) {
  std::size_t end = s.size();
  while (end > 0 && (s[end - 1] == '\n' || s[end - 1] == '\r')) --end;
  const auto nl = end == 0 ? std::string::npos : s.rfind('\n', end - 1);
  const std::size_t begin = nl == std::string::npos ? 0 : nl + 1;
  return s.substr(begin, end - begin);
}

}  // namespace

json Backends::call_once(const BackendEndpoint& ep, const std::string& body) {
  std::string response;
  if (ep.transport == Transport::http) {
    httplib::Client client(ep.address);
    const auto secs = static_cast<time_t>(ep.timeout_s);
    const auto usecs = static_cast<time_t>((ep.timeout_s - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    auto res = client.Post("/" + std::string(to_string(ep.kind)), body, "application/json");
    if (!res) {
      const auto err = res.error();
      if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read) throw Timeout{};
      throw BackendError(std::string(to_string(ep.kind)) + " backend unreachable: " + httplib::to_string(err));
    }
    if (res->status != 200) {
      throw ProtocolError(std::string(to_string(ep.kind)) + " backend returned HTTP " + std::to_string(res->status));
    }
    response = res->body;
  } else {
    const auto argv = split_command(ep.address);
    if (argv.empty()) throw ConfigError("empty stdio backend command");
    ProcessOptions opts;
    opts.cwd = fs::current_path();
    opts.env_allow = {"PATH", "HOME", "LANG", "LC_ALL", "PYTHONPATH", "SCITIKZ_*"};
    opts.timeout_s = ep.timeout_s;
    opts.stdin_data = body + "\n";
    std::lock_guard lock(stdio_locks_[static_cast<std::size_t>(ep.kind)]);
    const auto res = run_process(argv, opts);
    if (res.not_found) throw BackendError("stdio backend not found: " + argv.front());
    if (res.timed_out) throw Timeout{};
    if (res.exit_code != 0) {
      throw BackendError(std::string(to_string(ep.kind)) + " backend exited with " + std::to_string(res.exit_code));
    }
    response = last_line(res.output);
  }

  json env;
  try {
    env = json::parse(response);
  } catch (const json::parse_error&) {
    throw ProtocolError(std::string(to_string(ep.kind)) + " backend sent malformed JSON");
  }
  if (!env.is_object() || env.value("v", 0) != 1) throw ProtocolError("response envelope lacks v=1");
  if (env.contains("error")) {
    throw BackendError(std::string(to_string(ep.kind)) + " backend error: " + env.at("error").dump());
  }
  if (!env.contains("payload") || !env.at("payload").is_object()) throw ProtocolError("response envelope lacks payload");
  return env.at("payload");
}

json Backends::call(Kind kind, const json& payload, bool cacheable) {
  const BackendEndpoint& ep = config_[kind];
  if (ep.transport == Transport::builtin) {
    throw BackendError(std::string(to_string(kind)) + " backend is builtin; no wire call possible");
  }
  const json envelope = {{"v", 1}, {"kind", to_string(kind)}, {"payload", payload}};
  const std::string body = envelope.dump();

  fs::path cache_file;
  if (cacheable && !config_.cache_dir.empty()) {
    cache_file = config_.cache_dir / std::string(to_string(kind)) / (sha256_hex(ep.identity() + "\n" + body) + ".json");
    std::ifstream in(cache_file);
    if (in) {
      try {
        return json::parse(in);
      } catch (const json::parse_error&) {
        // fall through and refetch
      }
    }
  }

  for (int attempt = 0;; ++attempt) {
    try {
      json result = call_once(ep, body);
      if (!cache_file.empty()) {
        std::error_code ec;
        fs::create_directories(cache_file.parent_path(), ec);
        const fs::path tmp = cache_file.string() + ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
        {
          std::ofstream out(tmp);
          out << result.dump();
        }
        fs::rename(tmp, cache_file, ec);
      }
      return result;
    } catch (const Timeout&) {
      if (attempt >= ep.retries) {
        throw BackendTimeout(std::string(to_string(kind)) + " backend timed out after " + std::to_string(attempt + 1) +
                             " attempt(s)");
      }
    } catch (const ProtocolError&) {
      throw;
    } catch (const BackendError&) {
      if (attempt >= ep.retries) throw;
    }
  }
}

namespace {

std::string image_b64(const RasterImage& img) { return base64_encode(encode_png(img)); }

}  // namespace

std::vector<double> Backends::embed(const RasterImage& img) {
  std::vector<double> v;
  if (!configured(Kind::embed)) {
    v = imgmetrics::fallback_embedding(img);
  } else {
    const json p = call(Kind::embed, {{"image", image_b64(img)}}, true);
    try {
      const auto dim = p.at("dim").get<long long>();
      if (dim <= 0) throw ProtocolError("embed: non-positive dim");
      v = p.at("vector").get<std::vector<double>>();
      if (static_cast<long long>(v.size()) != dim) {
        throw DimensionMismatch("embed: declared dim " + std::to_string(dim) + " but received " +
                                std::to_string(v.size()) + " values");
      }
    } catch (const json::exception& e) {
      throw ProtocolError(std::string("embed: bad payload: ") + e.what());
    }
  }
  std::lock_guard lock(mutex_);
  if (!embed_dim_) embed_dim_ = v.size();
  else if (*embed_dim_ != v.size()) {
    throw DimensionMismatch("embed: dimension changed from " + std::to_string(*embed_dim_) + " to " +
                            std::to_string(v.size()));
  }
  return v;
}

double Backends::perceptual_distance(const imgmetrics::AlignedPair& pair) {
  if (!configured(Kind::perceptual)) return imgmetrics::fallback_perceptual_distance(pair);
  const json p = call(Kind::perceptual, {{"a", image_b64(pair.a)}, {"b", image_b64(pair.b)}}, true);
  try {
    const double d = p.at("distance").get<double>();
    if (!std::isfinite(d) || d < 0) throw ProtocolError("perceptual: distance must be finite and >= 0");
    return d;
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("perceptual: bad payload: ") + e.what());
  }
}

std::string Backends::repair(std::string_view code, std::string_view log_excerpt) {
  if (!configured(Kind::repair)) {
    if (auto fixed = dataengine::builtin_repair_rules(code, log_excerpt)) return *fixed;
    throw RepairUnavailable("no repair rule matches the compiler log");
  }
  const json p = call(Kind::repair, {{"code", code}, {"log", log_excerpt}}, false);
  try {
    return p.at("code").get<std::string>();
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("repair: bad payload: ") + e.what());
  }
}

JudgeScores Backends::judge(const RasterImage& img, std::string_view code) {
  if (!configured(Kind::judge)) throw BackendError("judge backend not configured");
  const json p = call(Kind::judge, {{"image", image_b64(img)}, {"code", code}}, true);
  std::string text;
  try {
    text = p.at("text").get<std::string>();
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("judge: bad payload: ") + e.what());
  }
  return parse_judge_reply(text);
}

std::vector<std::string> Backends::policy(const RasterImage& img, int n, const SamplingParams& params) {
  if (!configured(Kind::policy)) throw BackendError("policy backend not configured");
  if (n < 1) throw std::invalid_argument("policy: n must be >= 1");
  const json p = call(Kind::policy,
                      {{"image", image_b64(img)},
                       {"n", n},
                       {"temperature", params.temperature},
                       {"top_p", params.top_p},
                       {"max_length", params.max_length}},
                      false);
  std::vector<std::string> codes;
  try {
    codes = p.at("codes").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("policy: bad payload: ") + e.what());
  }
  if (static_cast<int>(codes.size()) != n) {
    throw ProtocolError("policy: asked for " + std::to_string(n) + " programs, got " + std::to_string(codes.size()));
  }
  return codes;
}

}  // namespace scitikz::backends
