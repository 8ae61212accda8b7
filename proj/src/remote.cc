#include "explattack/remote.h"

#include <cmath>

#include "explattack/errors.h"
#include "httplib.h"
#include "json.hpp"

namespace explattack {
namespace {

using nlohmann::json;

json Post(const Endpoint& endpoint, const RemoteOptions& options, const std::string& route,
          const json& body) {
  httplib::Client client(endpoint.scheme_host_port);
  client.set_connection_timeout(options.timeout_seconds, 0);
  client.set_read_timeout(options.timeout_seconds, 0);
  client.set_write_timeout(options.timeout_seconds, 0);
  const std::string path = endpoint.base_path + route;
  auto res = client.Post(path, body.dump(), "application/json");
  if (!res) {
    throw VictimError("POST " + endpoint.scheme_host_port + path + " failed: " +
                      httplib::to_string(res.error()));
  }
  json payload;
  try {
    payload = json::parse(res->body);
  } catch (const json::exception&) {
    throw VictimError("POST " + path + ": response is not JSON (HTTP " +
                      std::to_string(res->status) + ")");
  }
  if (res->status != 200) {
    std::string msg = payload.is_object() && payload.contains("error") && payload["error"].is_string()
                          ? payload["error"].get<std::string>()
                          : res->body;
    throw VictimError("POST " + path + ": HTTP " + std::to_string(res->status) + ": " + msg);
  }
  if (!payload.is_object()) throw VictimError("POST " + path + ": response is not an object");
  return payload;
}

ClassifierOutput ParseClassifierResponse(const json& j, const std::string& route) {
  const std::string where = "POST " + route + ": ";
  if (!j.contains("probs") || !j["probs"].is_object()) {
    throw VictimError(where + "missing 'probs' object");
  }
  if (!j.contains("label") || !j["label"].is_string()) {
    throw VictimError(where + "missing 'label' string");
  }
  std::array<double, 3> probs{};
  double sum = 0.0;
  for (Label l : kAllLabels) {
    const std::string key(LabelName(l));
    const auto& probs_obj = j["probs"];
    if (!probs_obj.contains(key) || !probs_obj[key].is_number()) {
      throw VictimError(where + "missing probability for '" + key + "'");
    }
    const double p = probs_obj[key].get<double>();
    if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
      throw VictimError(where + "probability for '" + key + "' outside [0, 1]");
    }
    probs[LabelIndex(l)] = p;
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6) {
    throw VictimError(where + "probabilities sum to " + std::to_string(sum));
  }
  for (double& p : probs) p /= sum;
  const auto label = ParseLabel(j["label"].get<std::string>());
  if (!label) throw VictimError(where + "unknown label '" + j["label"].get<std::string>() + "'");
  auto out = MakeOutput(probs);
  if (probs[LabelIndex(*label)] < out.prob(out.label) - 1e-12) {
    throw VictimError(where + "label '" + std::string(LabelName(*label)) +
                      "' is not the argmax of probs");
  }
  return out;
}

std::vector<std::vector<double>> ParseVectors(const json& j, std::size_t expected) {
  if (!j.contains("vectors") || !j["vectors"].is_array()) {
    throw VictimError("POST /embed: missing 'vectors' array");
  }
  const auto& arr = j["vectors"];
  if (arr.size() != expected) {
    throw VictimError("POST /embed: expected " + std::to_string(expected) + " vectors, got " +
                      std::to_string(arr.size()));
  }
  std::vector<std::vector<double>> out;
  for (const auto& v : arr) {
    if (!v.is_array()) throw VictimError("POST /embed: vector is not an array");
    std::vector<double> vec;
    for (const auto& x : v) {
      if (!x.is_number()) throw VictimError("POST /embed: non-numeric vector entry");
      vec.push_back(x.get<double>());
    }
    out.push_back(std::move(vec));
  }
  return out;
}

}  // namespace

Endpoint Endpoint::Parse(std::string_view url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) {
    throw UsageError("remote URL '" + std::string(url) + "' must start with http://");
  }
  const auto scheme = url.substr(0, scheme_end);
  if (scheme != "http") {
    throw UsageError("unsupported URL scheme '" + std::string(scheme) + "' (only http)");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  Endpoint e;
  e.scheme_host_port = std::string(url.substr(0, path_start));
  if (e.scheme_host_port.size() == scheme_end + 3) {
    throw UsageError("remote URL '" + std::string(url) + "' has no host");
  }
  if (path_start != std::string_view::npos) {
    e.base_path = std::string(url.substr(path_start));
    while (!e.base_path.empty() && e.base_path.back() == '/') e.base_path.pop_back();
  }
  return e;
}

RemotePairClassifier::RemotePairClassifier(std::string_view url, RemoteOptions options)
    : endpoint_(Endpoint::Parse(url)), options_(options) {}

ClassifierOutput RemotePairClassifier::Classify(std::string_view premise,
                                                std::string_view hypothesis) const {
  const json body = {{"premise", premise}, {"hypothesis", hypothesis}};
  return ParseClassifierResponse(Post(endpoint_, options_, "/classify", body), "/classify");
}

RemoteExplainer::RemoteExplainer(std::string_view url, RemoteOptions options)
    : endpoint_(Endpoint::Parse(url)), options_(options) {}

std::string RemoteExplainer::Explain(std::string_view premise, std::string_view hypothesis) const {
  const json body = {{"premise", premise}, {"hypothesis", hypothesis}};
  const auto j = Post(endpoint_, options_, "/explain", body);
  if (!j.contains("explanation") || !j["explanation"].is_string()) {
    throw VictimError("POST /explain: missing 'explanation' string");
  }
  auto text = j["explanation"].get<std::string>();
  if (text.empty()) throw VictimError("POST /explain: empty explanation");
  return text;
}

RemoteExplanationClassifier::RemoteExplanationClassifier(std::string_view url,
                                                         RemoteOptions options)
    : endpoint_(Endpoint::Parse(url)), options_(options) {}

ClassifierOutput RemoteExplanationClassifier::ClassifyExplanation(
    std::string_view explanation) const {
  const json body = {{"explanation", explanation}};
  return ParseClassifierResponse(Post(endpoint_, options_, "/classify_expl", body),
                                 "/classify_expl");
}

RemoteSentenceEncoder::RemoteSentenceEncoder(std::string_view url, RemoteOptions options)
    : endpoint_(Endpoint::Parse(url)), options_(options) {}

std::vector<double> RemoteSentenceEncoder::Encode(std::string_view text) const {
  const json body = {{"texts", json::array({text})}};
  auto vectors = ParseVectors(Post(endpoint_, options_, "/embed", body), 1);
  if (vectors[0].empty()) throw SimilarityError("empty sentence vector");
  return std::move(vectors[0]);
}

RemoteTokenEmbedder::RemoteTokenEmbedder(std::string_view url, RemoteOptions options)
    : endpoint_(Endpoint::Parse(url)), options_(options) {}

std::vector<std::optional<std::vector<double>>> RemoteTokenEmbedder::EmbedTokens(
    std::span<const std::string> tokens) const {
  std::vector<std::optional<std::vector<double>>> out;
  if (tokens.empty()) return out;
  const json body = {{"texts", json(std::vector<std::string>(tokens.begin(), tokens.end()))}};
  for (auto& v : ParseVectors(Post(endpoint_, options_, "/embed", body), tokens.size())) {
    if (v.empty()) {
      out.emplace_back(std::nullopt);
    } else {
      out.emplace_back(std::move(v));
    }
  }
  return out;
}

RemoteCandidateProvider::RemoteCandidateProvider(std::string_view url, RemoteOptions options)
    : endpoint_(Endpoint::Parse(url)), options_(options) {}

std::vector<std::string> RemoteCandidateProvider::Candidates(std::span<const std::string> tokens,
                                                             std::size_t position, int k) const {
  if (position >= tokens.size()) throw UsageError("mask position out of range");
  std::vector<std::string> masked(tokens.begin(), tokens.end());
  masked[position] = std::string(kMaskToken);
  const json body = {{"tokens", json(masked)},
                     {"mask_index", position},
                     {"k", k}};
  const auto j = Post(endpoint_, options_, "/mlm_candidates", body);
  if (!j.contains("candidates") || !j["candidates"].is_array()) {
    throw VictimError("POST /mlm_candidates: missing 'candidates' array");
  }
  std::vector<std::string> out;
  for (const auto& c : j["candidates"]) {
    if (!c.is_string()) throw VictimError("POST /mlm_candidates: non-string candidate");
    out.push_back(c.get<std::string>());
  }
  return out;
}

}  // namespace explattack
