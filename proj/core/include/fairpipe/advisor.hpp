#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "fairpipe/analysis.hpp"
#include "fairpipe/json_util.hpp"
#include "fairpipe/tabular.hpp"

namespace fairpipe {

using DistinctMap = std::map<std::string, std::vector<std::pair<std::string, std::size_t>>>;

DistinctMap distinct_map(const Table& t);

struct AttributeChoice {
  std::string column;
  double confidence = 0.0;
  std::string rationale;
};

struct AttributeRecommendation {
  std::vector<AttributeChoice> sensitive;
  AttributeChoice target;
  /// "heuristic" or "llm:<model id>".
  std::string provider = "heuristic";
  std::vector<std::string> warnings;
};

Json to_json(const AttributeRecommendation& r);
AttributeRecommendation recommendation_from_json(const Json& j);

/// Version stamp of the prompt template sent to chat providers.
inline constexpr const char* kPromptTemplateVersion = "attr-rec-v1";

/// Deterministic lexicon + cardinality heuristic. Throws NoBinaryColumn when
/// no column can serve as a binary target, NoSensitiveFound when nothing can
/// serve as a sensitive attribute.
AttributeRecommendation heuristic_recommend(const AnalysisReport& report, const DistinctMap& distincts);

struct ProviderConfig {
  std::string base_url;
  std::string model_id;
  std::string api_key_env;
  double timeout_seconds = 30.0;
  int max_retries = 2;

  void validate() const;
};

/// Transport for one chat-completions round trip. Returns the raw response
/// body; throws on transport-level failure.
class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  virtual std::string post_chat(const Json& request) = 0;
  virtual std::string model_id() const = 0;
};

/// POST {base_url}/chat/completions with a bearer key read from the
/// configured environment variable.
class HttpChatTransport final : public ChatTransport {
 public:
  explicit HttpChatTransport(ProviderConfig cfg);
  std::string post_chat(const Json& request) override;
  std::string model_id() const override { return cfg_.model_id; }

 private:
  ProviderConfig cfg_;
};

/// Replays scripted replies from a JSON file of the form
/// {"model": "...", "replies": ["<assistant content>", ...]}. Replies are
/// consumed in order; the last one repeats. A reply of {"fail": true}
/// simulates a transport failure.
class MockChatTransport final : public ChatTransport {
 public:
  explicit MockChatTransport(const std::filesystem::path& script);
  MockChatTransport(std::string model, std::vector<Json> replies);
  std::string post_chat(const Json& request) override;
  std::string model_id() const override { return model_; }

  const std::vector<Json>& requests() const { return requests_; }

 private:
  std::string model_;
  std::vector<Json> replies_;
  std::size_t next_ = 0;
  std::vector<Json> requests_;
  std::mutex mu_;
};

/// Builds the single chat request sent to a provider.
Json build_chat_request(const AnalysisReport& report, const DistinctMap& distincts,
                        const std::string& model_id);

/// Asks the provider, validates the reply, and on any failure after
/// `max_retries` retries falls back to the heuristic with a warning.
AttributeRecommendation llm_recommend(const AnalysisReport& report, const DistinctMap& distincts,
                                      ChatTransport& transport, int max_retries);

struct AttributeOverrides {
  std::optional<std::string> sensitive;
  std::optional<std::string> target;
};

struct ResolvedAttributes {
  std::string sensitive;
  std::string target;
};

/// User override wins, otherwise the top recommendation.
ResolvedAttributes resolve(const AttributeOverrides& overrides, const AttributeRecommendation& rec,
                           const DistinctMap& distincts);

/// Named provider profiles, loaded from {"profiles": {name: {...}}}. A profile
/// holds either ProviderConfig fields or {"mock_replies": path}.
class ProviderRegistry {
 public:
  ProviderRegistry() = default;
  static ProviderRegistry from_file(const std::filesystem::path& path);
  static ProviderRegistry from_json(const Json& j, const std::filesystem::path& base_dir);

  std::vector<std::string> names() const;
  bool contains(const std::string& name) const { return profiles_.count(name) > 0; }
  /// Fresh transport for a profile, plus its retry budget.
  std::pair<std::unique_ptr<ChatTransport>, int> make(const std::string& name) const;

 private:
  struct Profile {
    std::optional<ProviderConfig> http;
    std::optional<std::filesystem::path> mock;
  };
  std::map<std::string, Profile> profiles_;
};

}  // namespace fairpipe
