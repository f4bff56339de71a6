#include "fairpipe/advisor.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>

#include "fairpipe/error.hpp"
#include "httplib.h"

namespace fairpipe {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::vector<std::string> name_tokens(std::string_view name) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : lower(name)) {
    if (std::isalnum(static_cast<unsigned char>(ch))) {
      cur.push_back(ch);
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::optional<std::string> target_stem(std::string_view column) {
  static const std::vector<std::string> stems = {"income", "label", "target", "outcome",
                                                 "class",  "pass",  "admit",  "default"};
  const auto name = lower(column);
  for (const auto& s : stems)
    if (name.find(s) != std::string::npos) return s;
  for (const auto& tok : name_tokens(column))
    if (tok == "y") return std::string("y");
  return std::nullopt;
}

std::optional<std::string> sensitive_stem(std::string_view column) {
  const auto name = lower(column);
  for (const auto& s : sensitive_name_stems())
    if (name.find(s) != std::string::npos) return s;
  return std::nullopt;
}

std::size_t cardinality(const DistinctMap& d, const std::string& col) {
  auto it = d.find(col);
  return it == d.end() ? 0 : it->second.size();
}

Json choice_json(const AttributeChoice& c) {
  return {{"column", c.column}, {"confidence", round6(c.confidence)}, {"rationale", c.rationale}};
}

AttributeChoice choice_from_json(const Json& j) {
  return {j.at("column").get<std::string>(), j.at("confidence").get<double>(),
          j.value("rationale", std::string())};
}

// Throws std::runtime_error describing why the reply is unusable.
AttributeRecommendation parse_reply(const std::string& body, const AnalysisReport& report,
                                    const DistinctMap& distincts) {
  const auto envelope = Json::parse(body);
  const auto& content = envelope.at("choices").at(0).at("message").at("content");
  Json payload = content.is_string() ? Json::parse(content.get<std::string>()) : content;
  if (!payload.is_object()) throw std::runtime_error("reply is not a JSON object");

  auto known = [&](const std::string& c) {
    return std::find(report.column_names.begin(), report.column_names.end(), c) !=
           report.column_names.end();
  };
  auto check = [&](const AttributeChoice& c) {
    if (!known(c.column)) throw std::runtime_error("reply names unknown column '" + c.column + "'");
    if (!(c.confidence >= 0.0 && c.confidence <= 1.0))
      throw std::runtime_error("confidence out of range for '" + c.column + "'");
  };

  AttributeRecommendation rec;
  rec.target = choice_from_json(payload.at("target"));
  check(rec.target);
  if (cardinality(distincts, rec.target.column) != 2)
    throw std::runtime_error("target '" + rec.target.column + "' is not binary");
  for (const auto& s : payload.at("sensitive")) {
    auto c = choice_from_json(s);
    check(c);
    if (c.column == rec.target.column) throw std::runtime_error("sensitive list contains the target");
    rec.sensitive.push_back(std::move(c));
  }
  if (rec.sensitive.empty()) throw std::runtime_error("empty sensitive list");
  std::stable_sort(rec.sensitive.begin(), rec.sensitive.end(),
                   [](const auto& a, const auto& b) { return a.confidence > b.confidence; });
  return rec;
}

}  // namespace

DistinctMap distinct_map(const Table& t) {
  DistinctMap out;
  for (const auto& c : t.columns()) out[c.name()] = column_distinct(c);
  return out;
}

Json to_json(const AttributeRecommendation& r) {
  Json sens = Json::array();
  for (const auto& s : r.sensitive) sens.push_back(choice_json(s));
  return {{"sensitive", sens},
          {"target", choice_json(r.target)},
          {"provider", r.provider},
          {"prompt_template", kPromptTemplateVersion},
          {"warnings", r.warnings}};
}

AttributeRecommendation recommendation_from_json(const Json& j) {
  AttributeRecommendation r;
  for (const auto& s : j.at("sensitive")) r.sensitive.push_back(choice_from_json(s));
  r.target = choice_from_json(j.at("target"));
  r.provider = j.at("provider").get<std::string>();
  r.warnings = j.value("warnings", std::vector<std::string>{});
  return r;
}

AttributeRecommendation heuristic_recommend(const AnalysisReport& report, const DistinctMap& distincts) {
  if (report.column_names.empty()) throw Error(ErrorCode::EmptyTable, "empty analysis report");
  const auto& cols = report.column_names;

  AttributeRecommendation rec;
  std::optional<AttributeChoice> target;
  std::optional<std::string> last_binary;
  for (const auto& c : cols) {
    if (cardinality(distincts, c) != 2) continue;
    last_binary = c;
    if (!target) {
      if (auto stem = target_stem(c))
        target = AttributeChoice{c, 1.0, "binary column whose name matches outcome stem '" + *stem + "'"};
    }
  }
  if (!target && last_binary)
    target = AttributeChoice{*last_binary, 0.3, "no outcome-like name; last binary column"};
  if (!target) throw Error(ErrorCode::NoBinaryColumn, "no column has exactly two distinct values");
  rec.target = *target;

  for (const auto& c : cols) {
    if (c == rec.target.column) continue;
    const auto k = cardinality(distincts, c);
    if (k < 2 || k > kMaxGroups) continue;
    if (auto stem = sensitive_stem(c))
      rec.sensitive.push_back({c, 1.0,
                               "name matches demographic stem '" + *stem + "' with " +
                                   std::to_string(k) + " groups"});
  }
  if (rec.sensitive.empty()) {
    std::optional<std::string> best;
    std::size_t best_k = 0;
    for (const auto& c : cols) {
      if (c == rec.target.column) continue;
      const auto k = cardinality(distincts, c);
      if (k < 2 || k > kMaxGroups) continue;
      if (!best || k < best_k) {
        best = c;
        best_k = k;
      }
    }
    if (!best) throw Error(ErrorCode::NoSensitiveFound, "no low-cardinality column to group by");
    rec.sensitive.push_back({*best, 0.1, "no demographic name found; lowest-cardinality grouping column"});
  }
  // Confidences are all equal within each branch, so column order already
  // holds the tie-break; the sort keeps that contract explicit.
  std::stable_sort(rec.sensitive.begin(), rec.sensitive.end(),
                   [](const auto& a, const auto& b) { return a.confidence > b.confidence; });
  rec.provider = "heuristic";
  return rec;
}

// ---------------------------------------------------------------- providers

void ProviderConfig::validate() const {
  if (base_url.empty()) throw Error(ErrorCode::InvalidArgument, "provider base_url is empty");
  if (!(timeout_seconds > 0)) throw Error(ErrorCode::InvalidArgument, "provider timeout must be > 0");
  if (max_retries < 0) throw Error(ErrorCode::InvalidArgument, "provider max_retries must be >= 0");
}

HttpChatTransport::HttpChatTransport(ProviderConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

std::string HttpChatTransport::post_chat(const Json& request) {
  const char* key = cfg_.api_key_env.empty() ? nullptr : std::getenv(cfg_.api_key_env.c_str());
  if (!cfg_.api_key_env.empty() && key == nullptr)
    throw std::runtime_error("environment variable " + cfg_.api_key_env + " is not set");

  // Split "scheme://host[:port]/prefix" so the path prefix survives.
  std::string url = cfg_.base_url;
  while (!url.empty() && url.back() == '/') url.pop_back();
  std::string origin = url, prefix;
  if (auto scheme = url.find("://"); scheme != std::string::npos) {
    if (auto slash = url.find('/', scheme + 3); slash != std::string::npos) {
      origin = url.substr(0, slash);
      prefix = url.substr(slash);
    }
  }
  httplib::Client client(origin);
  const auto secs = static_cast<time_t>(cfg_.timeout_seconds);
  const auto usecs = static_cast<time_t>((cfg_.timeout_seconds - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  httplib::Headers headers;
  if (key) headers.emplace("Authorization", std::string("Bearer ") + key);
  auto res = client.Post(prefix + "/chat/completions", headers, request.dump(), "application/json");
  if (!res) throw std::runtime_error("transport error: " + httplib::to_string(res.error()));
  if (res->status != 200) throw std::runtime_error("provider returned HTTP " + std::to_string(res->status));
  return res->body;
}

MockChatTransport::MockChatTransport(const std::filesystem::path& script) {
  const auto j = read_json_file(script);
  model_ = j.value("model", std::string("mock"));
  for (const auto& r : j.at("replies")) replies_.push_back(r);
  if (replies_.empty()) throw Error(ErrorCode::InvalidArgument, "mock script has no replies");
}

MockChatTransport::MockChatTransport(std::string model, std::vector<Json> replies)
    : model_(std::move(model)), replies_(std::move(replies)) {
  if (replies_.empty()) throw Error(ErrorCode::InvalidArgument, "mock script has no replies");
}

std::string MockChatTransport::post_chat(const Json& request) {
  std::lock_guard lock(mu_);
  requests_.push_back(request);
  const Json& reply = replies_[std::min(next_, replies_.size() - 1)];
  ++next_;
  if (reply.is_object() && reply.value("fail", false)) throw std::runtime_error("scripted transport failure");
  const std::string content = reply.is_string() ? reply.get<std::string>() : reply.dump();
  Json envelope = {{"id", "mock-" + std::to_string(next_)},
                   {"object", "chat.completion"},
                   {"model", model_},
                   {"choices", Json::array({{{"index", 0},
                                             {"message", {{"role", "assistant"}, {"content", content}}},
                                             {"finish_reason", "stop"}}})}};
  return envelope.dump();
}

Json build_chat_request(const AnalysisReport& report, const DistinctMap& distincts,
                        const std::string& model_id) {
  Json columns = Json::array();
  for (const auto& p : report.profiles) {
    Json top = Json::array();
    if (auto it = distincts.find(p.name); it != distincts.end())
      for (std::size_t i = 0; i < it->second.size() && i < 5; ++i) top.push_back(it->second[i].first);
    columns.push_back({{"name", p.name},
                       {"kind", to_string(p.kind)},
                       {"distinct", p.distinct_count},
                       {"missing_rate", round6(p.missing_rate)},
                       {"examples", top}});
  }
  Json summary = {{"n_rows", report.n_rows}, {"n_cols", report.n_cols}, {"columns", columns}};

  const std::string system =
      "You are a data-fairness assistant. You identify demographic attributes that a "
      "classifier should be audited against and the binary outcome it predicts.";
  const std::string user =
      "Dataset summary (JSON):\n" + summary.dump() +
      "\n\nReply with JSON only, no prose, matching exactly:\n"
      "{\"sensitive\":[{\"column\":string,\"confidence\":number in [0,1],\"rationale\":string}],"
      "\"target\":{\"column\":string,\"confidence\":number in [0,1],\"rationale\":string}}\n"
      "Rules: use only column names from the summary; the target must have exactly two distinct "
      "values; do not list the target as sensitive; order sensitive by confidence. "
      "Template " + std::string(kPromptTemplateVersion) + ".";
  return {{"model", model_id},
          {"temperature", 0},
          {"messages", Json::array({{{"role", "system"}, {"content", system}},
                                    {{"role", "user"}, {"content", user}}})}};
}

AttributeRecommendation llm_recommend(const AnalysisReport& report, const DistinctMap& distincts,
                                      ChatTransport& transport, int max_retries) {
  const auto request = build_chat_request(report, distincts, transport.model_id());
  std::vector<std::string> failures;
  for (int attempt = 0; attempt <= std::max(0, max_retries); ++attempt) {
    try {
      auto rec = parse_reply(transport.post_chat(request), report, distincts);
      rec.provider = "llm:" + transport.model_id();
      return rec;
    } catch (const std::exception& e) {
      failures.push_back("attempt " + std::to_string(attempt + 1) + ": " + e.what());
    }
  }
  auto rec = heuristic_recommend(report, distincts);
  std::string warning = "provider '" + transport.model_id() + "' failed; using heuristic";
  for (const auto& f : failures) warning += " | " + f;
  rec.warnings.push_back(std::move(warning));
  return rec;
}

ResolvedAttributes resolve(const AttributeOverrides& overrides, const AttributeRecommendation& rec,
                           const DistinctMap& distincts) {
  auto exists = [&](const std::string& c) { return distincts.count(c) > 0; };
  ResolvedAttributes out;
  out.target = overrides.target.value_or(rec.target.column);
  if (overrides.sensitive) {
    out.sensitive = *overrides.sensitive;
  } else {
    // Top-confidence recommendation that is not the (possibly overridden) target.
    const AttributeChoice* best = nullptr;
    for (const auto& s : rec.sensitive)
      if (s.column != out.target && (!best || s.confidence > best->confidence)) best = &s;
    if (!best) throw Error(ErrorCode::SameColumn, "only recommended sensitive column is the target");
    out.sensitive = best->column;
  }
  if (!exists(out.sensitive)) throw Error(ErrorCode::UnknownColumn, out.sensitive);
  if (!exists(out.target)) throw Error(ErrorCode::UnknownColumn, out.target);
  if (out.sensitive == out.target)
    throw Error(ErrorCode::SameColumn, "sensitive and target are both '" + out.target + "'");
  if (cardinality(distincts, out.target) != 2)
    throw Error(ErrorCode::NonBinaryTarget, "'" + out.target + "' has " +
                                                std::to_string(cardinality(distincts, out.target)) +
                                                " distinct values");
  return out;
}

// ---------------------------------------------------------------- registry

ProviderRegistry ProviderRegistry::from_file(const std::filesystem::path& path) {
  return from_json(read_json_file(path), path.parent_path());
}

ProviderRegistry ProviderRegistry::from_json(const Json& j, const std::filesystem::path& base_dir) {
  ProviderRegistry reg;
  for (const auto& [name, p] : j.at("profiles").items()) {
    Profile prof;
    if (p.contains("mock_replies")) {
      std::filesystem::path path = p.at("mock_replies").get<std::string>();
      prof.mock = path.is_absolute() ? path : base_dir / path;
    } else {
      ProviderConfig cfg;
      cfg.base_url = p.at("base_url").get<std::string>();
      cfg.model_id = p.at("model_id").get<std::string>();
      cfg.api_key_env = p.value("api_key_env", std::string());
      cfg.timeout_seconds = p.value("timeout", 30.0);
      cfg.max_retries = p.value("max_retries", 2);
      cfg.validate();
      prof.http = cfg;
    }
    reg.profiles_[name] = std::move(prof);
  }
  return reg;
}

std::vector<std::string> ProviderRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : profiles_) out.push_back(k);
  return out;
}

std::pair<std::unique_ptr<ChatTransport>, int> ProviderRegistry::make(const std::string& name) const {
  auto it = profiles_.find(name);
  if (it == profiles_.end()) throw Error(ErrorCode::InvalidArgument, "unknown provider profile '" + name + "'");
  if (it->second.mock) return {std::make_unique<MockChatTransport>(*it->second.mock), 0};
  return {std::make_unique<HttpChatTransport>(*it->second.http), it->second.http->max_retries};
}

}  // namespace fairpipe
