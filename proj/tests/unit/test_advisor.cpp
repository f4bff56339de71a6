#include <gtest/gtest.h>

#include <httplib.h>

#include "fairpipe/advisor.hpp"
#include "fairpipe/analysis.hpp"
#include "fairpipe/error.hpp"
#include "fairpipe/synthetic.hpp"

using namespace fairpipe;

namespace {

Column cat(std::string name, std::vector<std::string> v) {
  std::vector<bool> m(v.size(), false);
  return Column::categorical(std::move(name), std::move(v), std::move(m));
}

Column num(std::string name, std::vector<double> v) {
  std::vector<bool> m(v.size(), false);
  return Column::numeric(std::move(name), std::move(v), std::move(m));
}

// Adult-like schema: sex (2), race (5), income (2), hours (numeric).
Table adult_like() {
  std::vector<std::string> sex, race, income;
  std::vector<double> hours;
  const char* races[] = {"White", "Black", "Asian", "Other", "Amer-Indian"};
  for (int i = 0; i < 50; ++i) {
    sex.push_back(i % 3 ? "Male" : "Female");
    race.push_back(races[i % 5]);
    income.push_back(i % 4 ? "<=50K" : ">50K");
    hours.push_back(30 + i);
  }
  return Table("adult_like", {num("hours", hours), cat("sex", sex), cat("race", race), cat("income", income)});
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::Io;
}

Json reply(const std::string& sens, const std::string& target) {
  return {{"sensitive", {{{"column", sens}, {"confidence", 0.9}, {"rationale", "r"}}}},
          {"target", {{"column", target}, {"confidence", 0.8}, {"rationale", "r"}}}};
}

}  // namespace

TEST(Heuristic, AdultLikeSchema) {
  const auto t = adult_like();
  const auto rec = heuristic_recommend(analyze(t), distinct_map(t));
  ASSERT_EQ(rec.sensitive.size(), 2u);
  EXPECT_EQ(rec.sensitive[0].column, "sex");
  EXPECT_EQ(rec.sensitive[1].column, "race");
  EXPECT_EQ(rec.target.column, "income");
  EXPECT_DOUBLE_EQ(rec.target.confidence, 1.0);
  EXPECT_EQ(rec.provider, "heuristic");
}

TEST(Heuristic, LastBinaryColumnFallback) {
  std::vector<std::string> a, b, c;
  for (int i = 0; i < 30; ++i) {
    a.push_back(i % 3 == 0 ? "p" : (i % 3 == 1 ? "q" : "r"));
    b.push_back(i % 2 ? "on" : "off");
    c.push_back(i % 5 ? "yes" : "no");
  }
  const Table t("t", {cat("color", a), cat("switch", b), cat("flag", c)});
  const auto rec = heuristic_recommend(analyze(t), distinct_map(t));
  EXPECT_EQ(rec.target.column, "flag");
  EXPECT_DOUBLE_EQ(rec.target.confidence, 0.3);
  ASSERT_EQ(rec.sensitive.size(), 1u);
  EXPECT_EQ(rec.sensitive[0].column, "switch");
  EXPECT_DOUBLE_EQ(rec.sensitive[0].confidence, 0.1);
}

TEST(Heuristic, StandaloneYIsAnOutcomeName) {
  std::vector<std::string> g, y;
  for (int i = 0; i < 20; ++i) {
    g.push_back(i % 3 ? "u" : "v");
    y.push_back(i % 2 ? "1" : "0");
  }
  const Table t("t", {cat("y", y), cat("grp", g)});
  const auto rec = heuristic_recommend(analyze(t), distinct_map(t));
  EXPECT_EQ(rec.target.column, "y");
  // "yearly" and "party" contain a y but are not outcome names.
  const Table t2("t", {cat("party", y), cat("grp", g)});
  EXPECT_DOUBLE_EQ(heuristic_recommend(analyze(t2), distinct_map(t2)).target.confidence, 0.3);
}

TEST(Heuristic, CardinalityGate) {
  std::vector<std::string> ids, out;
  for (int i = 0; i < 5000; ++i) {
    ids.push_back("id" + std::to_string(i));
    out.push_back(i % 2 ? "a" : "b");
  }
  std::vector<std::string> g(5000, "x");
  for (int i = 0; i < 5000; i += 3) g[i] = "z";
  const Table t("t", {cat("sexton_id", ids), cat("grp", g), cat("outcome", out)});
  const auto rec = heuristic_recommend(analyze(t), distinct_map(t));
  for (const auto& s : rec.sensitive) EXPECT_NE(s.column, "sexton_id");
}

TEST(Heuristic, NoBinaryColumn) {
  const Table t("t", {num("x", {1, 2, 3, 4, 5}), cat("c", {"a", "b", "c", "a", "b"})});
  EXPECT_EQ(code_of([&] { heuristic_recommend(analyze(t), distinct_map(t)); }), ErrorCode::NoBinaryColumn);
}

TEST(Heuristic, Deterministic) {
  const auto t = make_biased_fixture({500, 9, 1.6});
  const auto a = to_json(heuristic_recommend(analyze(t), distinct_map(t)));
  const auto b = to_json(heuristic_recommend(analyze(t), distinct_map(t)));
  EXPECT_EQ(a.dump(), b.dump());
}

TEST(Llm, ValidReplyPassesThrough) {
  const auto t = adult_like();
  MockChatTransport mock("m1", {reply("sex", "income")});
  const auto rec = llm_recommend(analyze(t), distinct_map(t), mock, 0);
  EXPECT_EQ(rec.provider, "llm:m1");
  EXPECT_TRUE(rec.warnings.empty());
  EXPECT_EQ(rec.sensitive.at(0).column, "sex");
  EXPECT_EQ(rec.target.column, "income");
  ASSERT_EQ(mock.requests().size(), 1u);
  const auto& req = mock.requests()[0];
  EXPECT_EQ(req.at("model"), "m1");
  EXPECT_EQ(req.at("temperature"), 0);
  EXPECT_NE(req.at("messages")[1].at("content").get<std::string>().find("\"income\""), std::string::npos);
}

TEST(Llm, ProseFallsBack) {
  const auto t = adult_like();
  MockChatTransport mock("m1", {Json("I think the sensitive column is sex.")});
  const auto rec = llm_recommend(analyze(t), distinct_map(t), mock, 2);
  EXPECT_EQ(rec.provider, "heuristic");
  ASSERT_EQ(rec.warnings.size(), 1u);
  EXPECT_EQ(mock.requests().size(), 3u);
  EXPECT_EQ(to_json(rec).at("sensitive"), to_json(heuristic_recommend(analyze(t), distinct_map(t))).at("sensitive"));
}

TEST(Llm, UnknownColumnFallsBack) {
  const auto t = adult_like();
  MockChatTransport mock("m1", {reply("gender", "income")});
  const auto rec = llm_recommend(analyze(t), distinct_map(t), mock, 0);
  EXPECT_EQ(rec.provider, "heuristic");
  ASSERT_EQ(rec.warnings.size(), 1u);
  EXPECT_NE(rec.warnings[0].find("gender"), std::string::npos);
}

TEST(Llm, NonBinaryTargetFallsBack) {
  const auto t = adult_like();
  MockChatTransport mock("m1", {reply("sex", "race")});
  EXPECT_EQ(llm_recommend(analyze(t), distinct_map(t), mock, 0).provider, "heuristic");
}

TEST(Llm, RetryRecovers) {
  const auto t = adult_like();
  MockChatTransport mock("m1", {Json{{"fail", true}}, reply("race", "income")});
  const auto rec = llm_recommend(analyze(t), distinct_map(t), mock, 1);
  EXPECT_EQ(rec.provider, "llm:m1");
  EXPECT_EQ(rec.sensitive.at(0).column, "race");
}

TEST(Llm, UnreachableEndpointFallsBack) {
  const auto t = adult_like();
  ProviderConfig cfg{"http://127.0.0.1:9", "m", "", 0.5, 0};
  HttpChatTransport http(cfg);
  const auto rec = llm_recommend(analyze(t), distinct_map(t), http, 0);
  auto heuristic = heuristic_recommend(analyze(t), distinct_map(t));
  EXPECT_EQ(rec.provider, "heuristic");
  EXPECT_EQ(rec.warnings.size(), 1u);
  heuristic.warnings = rec.warnings;
  EXPECT_EQ(to_json(rec).dump(), to_json(heuristic).dump());
}

TEST(Llm, HttpTransportSpeaksChatCompletions) {
  httplib::Server server;
  std::string seen_auth, seen_path;
  Json seen_body;
  server.Post(R"(/v1/chat/completions)", [&](const httplib::Request& req, httplib::Response& res) {
    seen_auth = req.get_header_value("Authorization");
    seen_path = req.path;
    seen_body = Json::parse(req.body);
    Json env = {{"choices", {{{"message", {{"role", "assistant"}, {"content", reply("sex", "income").dump()}}}}}}};
    res.set_content(env.dump(), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  ::setenv("FAIRPIPE_TEST_KEY", "sk-test", 1);
  HttpChatTransport http({"http://127.0.0.1:" + std::to_string(port) + "/v1", "m2", "FAIRPIPE_TEST_KEY", 5, 0});
  const auto t = adult_like();
  const auto rec = llm_recommend(analyze(t), distinct_map(t), http, 0);
  server.stop();
  th.join();
  EXPECT_EQ(rec.provider, "llm:m2");
  EXPECT_EQ(seen_auth, "Bearer sk-test");
  EXPECT_EQ(seen_path, "/v1/chat/completions");
  EXPECT_EQ(seen_body.at("model"), "m2");
}

TEST(Provider, Validation) {
  EXPECT_EQ(code_of([] { ProviderConfig{"", "m", "", 1, 0}.validate(); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([] { ProviderConfig{"http://x", "m", "", 0, 0}.validate(); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([] { ProviderConfig{"http://x", "m", "", 1, -1}.validate(); }), ErrorCode::InvalidArgument);
}

TEST(Provider, RegistryFromBundledFile) {
  const auto reg = ProviderRegistry::from_file(FAIRPIPE_TEST_DATA_DIR "/providers/providers.json");
  EXPECT_TRUE(reg.contains("mock-adult"));
  EXPECT_TRUE(reg.contains("openai"));
  auto [transport, retries] = reg.make("mock-synthetic");
  EXPECT_EQ(transport->model_id(), "mock-attr-1");
  EXPECT_EQ(retries, 0);
  const auto t = make_biased_fixture({200, 1, 1.6});
  const auto rec = llm_recommend(analyze(t), distinct_map(t), *transport, retries);
  EXPECT_EQ(rec.provider, "llm:mock-attr-1");
  EXPECT_EQ(rec.target.column, "outcome");
}

TEST(Resolve, OverrideWins) {
  const auto t = adult_like();
  const auto rec = heuristic_recommend(analyze(t), distinct_map(t));
  EXPECT_EQ(resolve({"race", std::nullopt}, rec, distinct_map(t)).sensitive, "race");
}

TEST(Resolve, TopRecommendation) {
  const auto t = adult_like();
  const auto r = resolve({}, heuristic_recommend(analyze(t), distinct_map(t)), distinct_map(t));
  EXPECT_EQ(r.sensitive, "sex");
  EXPECT_EQ(r.target, "income");
}

TEST(Resolve, Errors) {
  const auto t = adult_like();
  const auto d = distinct_map(t);
  const auto rec = heuristic_recommend(analyze(t), d);
  EXPECT_EQ(code_of([&] { resolve({"sex", "sex"}, rec, d); }), ErrorCode::SameColumn);
  EXPECT_EQ(code_of([&] { resolve({"nope", std::nullopt}, rec, d); }), ErrorCode::UnknownColumn);
  EXPECT_EQ(code_of([&] { resolve({"sex", "race"}, rec, d); }), ErrorCode::NonBinaryTarget);
}

TEST(Recommendation, JsonRoundTrip) {
  const auto t = adult_like();
  auto rec = heuristic_recommend(analyze(t), distinct_map(t));
  rec.warnings = {"w"};
  const auto j = to_json(rec);
  EXPECT_EQ(to_json(recommendation_from_json(j)).dump(), j.dump());
  EXPECT_EQ(j.at("prompt_template"), kPromptTemplateVersion);
}
