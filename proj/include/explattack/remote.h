#ifndef EXPLATTACK_REMOTE_H_
#define EXPLATTACK_REMOTE_H_

#include <memory>
#include <string>
#include <string_view>

#include "explattack/attack.h"
#include "explattack/nlgmetrics.h"
#include "explattack/victim.h"

namespace explattack {

// JSON-over-HTTP clients for the model server. Every endpoint is a POST
// returning 200 on success and 4xx with {"error": str} otherwise. Network
// failures and non-conforming payloads raise VictimError. No retries: a
// retried call would count as an extra query.

struct RemoteOptions {
  int timeout_seconds = 30;
};

// Parsed "http://host[:port][/base]". TLS is not supported.
struct Endpoint {
  std::string scheme_host_port;
  std::string base_path;  // no trailing slash

  static Endpoint Parse(std::string_view url);
};

class RemotePairClassifier : public PairClassifier {
 public:
  explicit RemotePairClassifier(std::string_view url, RemoteOptions options = {});
  ClassifierOutput Classify(std::string_view premise,
                            std::string_view hypothesis) const override;

 private:
  Endpoint endpoint_;
  RemoteOptions options_;
};

class RemoteExplainer : public Explainer {
 public:
  explicit RemoteExplainer(std::string_view url, RemoteOptions options = {});
  std::string Explain(std::string_view premise, std::string_view hypothesis) const override;

 private:
  Endpoint endpoint_;
  RemoteOptions options_;
};

class RemoteExplanationClassifier : public ExplanationClassifier {
 public:
  explicit RemoteExplanationClassifier(std::string_view url, RemoteOptions options = {});
  ClassifierOutput ClassifyExplanation(std::string_view explanation) const override;

 private:
  Endpoint endpoint_;
  RemoteOptions options_;
};

// /embed with the whole sentence as a single text.
class RemoteSentenceEncoder : public SentenceEncoder {
 public:
  explicit RemoteSentenceEncoder(std::string_view url, RemoteOptions options = {});
  std::vector<double> Encode(std::string_view text) const override;

 private:
  Endpoint endpoint_;
  RemoteOptions options_;
};

// /embed with one text per token.
class RemoteTokenEmbedder : public TokenEmbedder {
 public:
  explicit RemoteTokenEmbedder(std::string_view url, RemoteOptions options = {});
  std::vector<std::optional<std::vector<double>>> EmbedTokens(
      std::span<const std::string> tokens) const override;

 private:
  Endpoint endpoint_;
  RemoteOptions options_;
};

// /mlm_candidates.
class RemoteCandidateProvider : public CandidateProvider {
 public:
  explicit RemoteCandidateProvider(std::string_view url, RemoteOptions options = {});
  std::vector<std::string> Candidates(std::span<const std::string> tokens, std::size_t position,
                                      int k) const override;

 private:
  Endpoint endpoint_;
  RemoteOptions options_;
};

}  // namespace explattack

#endif  // EXPLATTACK_REMOTE_H_
