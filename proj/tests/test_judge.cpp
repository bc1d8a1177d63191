#include <gtest/gtest.h>

#include <regex>

#include "support.hpp"
#include "tacit/judge.hpp"
#include "tacit/prompts.hpp"
#include "tacit/sim.hpp"

using namespace tacit;
using tacit::testing::FunctionProvider;
using tacit::testing::offline_config;

TEST(Prompts, EvaluateRendersHypothesisAndContentsInOrder) {
  const auto& t = judge::builtin_template(judge::TemplateId::evaluate);
  auto out = judge::render_prompt(t, {{"hypothesis", "H"}, {"content1", "AAA"}, {"content2", "BBB"}});
  EXPECT_NE(out.find("Hypothesis: \"H\""), std::string::npos);
  auto a = out.find("AAA"), b = out.find("BBB");
  ASSERT_NE(a, std::string::npos);
  ASSERT_NE(b, std::string::npos);
  EXPECT_LT(a, b);
}

TEST(Prompts, EmptyAndBraceBindings) {
  const auto& t = judge::builtin_template(judge::TemplateId::evaluate);
  auto empty = judge::render_prompt(t, {{"hypothesis", ""}, {"content1", ""}, {"content2", ""}});
  for (const auto& name : t.placeholders()) EXPECT_EQ(empty.find("{" + name + "}"), std::string::npos);
  auto literal = judge::render_prompt(t, {{"hypothesis", "{label}"}, {"content1", "{content2}"}, {"content2", "x"}});
  EXPECT_NE(literal.find("Hypothesis: \"{label}\""), std::string::npos);
  EXPECT_NE(literal.find("Paper 1 Content: {content2}"), std::string::npos);
}

TEST(Prompts, MissingBindingNamed) {
  const auto& t = judge::builtin_template(judge::TemplateId::evaluate);
  try {
    judge::render_prompt(t, {{"hypothesis", "H"}});
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("content1"), std::string::npos);
  }
}

TEST(Prompts, EveryTemplateRendersWithoutLeftovers) {
  for (auto id : {judge::TemplateId::evaluate, judge::TemplateId::search, judge::TemplateId::prior,
                  judge::TemplateId::match, judge::TemplateId::annotate}) {
    const auto& t = judge::builtin_template(id);
    std::map<std::string, std::string> b;
    for (const auto& p : t.placeholders()) b[p] = "<" + p + ">";
    auto out = judge::render_prompt(t, b);
    for (const auto& p : t.placeholders()) EXPECT_EQ(out.find("{" + p + "}"), std::string::npos);
  }
}

TEST(Prompts, NonceMakesDistinctRequests) {
  EXPECT_NE(judge::with_nonce("p", 0), judge::with_nonce("p", 1));
  EXPECT_EQ(judge::with_nonce("p", 2), judge::with_nonce("p", 2));
}

TEST(ParseResponse, Basic) {
  auto r = judge::parse_judge_response("<label>1</label><confidence>8</confidence>");
  EXPECT_TRUE(r.ok());
  EXPECT_EQ(r.label, 1);
  EXPECT_EQ(r.confidence, 8);
  EXPECT_FALSE(judge::parse_judge_response("<label>2</label><confidence>8</confidence>").ok());
  EXPECT_FALSE(judge::parse_judge_response("<label>1</label><confidence>11</confidence>").ok());
  EXPECT_FALSE(judge::parse_judge_response("<label>1</label>").ok());
  EXPECT_FALSE(judge::parse_judge_response("no tags").ok());
}

// Decorated responses against an independent regex extractor.
TEST(ParseResponse, FuzzAgainstReferenceGrammar) {
  const std::regex label_re("<label>\\s*([^<]*?)\\s*</label>");
  const std::regex conf_re("<confidence>\\s*([^<]*?)\\s*</confidence>");
  const std::vector<std::string> decorations = {"", "Sure! ", "```\n", "\n\n", "Answer:\n", " ok "};
  const std::vector<std::string> labels = {"0", "1", "2", "x", " 1 "};
  const std::vector<std::string> confs = {"0", "7", "10", "11", "-1", "3.5"};
  SplitMix64 rng(5);
  for (int i = 0; i < 2000; ++i) {
    std::string l = labels[rng.below(labels.size())], c = confs[rng.below(confs.size())];
    std::string raw = decorations[rng.below(decorations.size())] + "<label>" + l + "</label>" +
                      decorations[rng.below(decorations.size())] + "<confidence>" + c + "</confidence>" +
                      decorations[rng.below(decorations.size())];
    std::smatch ml, mc;
    ASSERT_TRUE(std::regex_search(raw, ml, label_re));
    ASSERT_TRUE(std::regex_search(raw, mc, conf_re));
    const std::string ls = ml[1], cs = mc[1];
    const bool ref_ok = (ls == "0" || ls == "1") && std::regex_match(cs, std::regex("[0-9]|10"));
    auto r = judge::parse_judge_response(raw);
    ASSERT_EQ(r.ok(), ref_ok) << raw;
    if (ref_ok) {
      EXPECT_EQ(r.label, std::stoi(ls));
      EXPECT_EQ(r.confidence, std::stoi(cs));
    }
  }
}

TEST(ParseResponse, FormatRoundTrip) {
  for (int l = 0; l <= 1; ++l) {
    for (int c = 0; c <= 10; ++c) {
      auto r = judge::parse_judge_response(judge::format_judge_response(l, c));
      ASSERT_TRUE(r.ok());
      EXPECT_EQ(r.label, l);
      EXPECT_EQ(r.confidence, c);
    }
  }
}

TEST(CacheKey, DependsOnEveryField) {
  judge::JudgeRequest a;
  a.rendered_prompt = "p";
  a.model_id = "m";
  auto b = a;
  b.fold_nonce = 1;
  auto c = a;
  c.model_id = "m2";
  auto d = a;
  d.temperature = 0.5;
  auto e = a;
  e.rendered_prompt = "q";
  std::set<std::string> keys = {judge::cache_key(a), judge::cache_key(b), judge::cache_key(c), judge::cache_key(d),
                                judge::cache_key(e)};
  EXPECT_EQ(keys.size(), 5u);
  EXPECT_EQ(judge::cache_key(a), judge::cache_key(a));
}

TEST(JudgeClient, CacheHitAndNonce) {
  auto provider = std::make_shared<FunctionProvider>(
      [](const judge::JudgeRequest&, int) { return judge::format_judge_response(1, 5); });
  judge::JudgeClient client(provider, offline_config());
  auto req = client.make_request(judge::TemplateId::evaluate, "prompt", 0);
  client.submit(req);
  client.submit(req);
  EXPECT_EQ(provider->calls(), 1);
  EXPECT_EQ(client.stats().cache_hits, 1u);
  client.submit(client.make_request(judge::TemplateId::evaluate, "prompt", 1));
  EXPECT_EQ(provider->calls(), 2);
}

TEST(JudgeClient, MalformedThenValidRetry) {
  auto provider = std::make_shared<FunctionProvider>([](const judge::JudgeRequest&, int call) {
    return call == 0 ? std::string("garbage") : judge::format_judge_response(0, 9);
  });
  judge::JudgeClient client(provider, offline_config());
  auto r = client.submit(client.make_request(judge::TemplateId::evaluate, "prompt"));
  EXPECT_TRUE(r.ok());
  EXPECT_EQ(r.confidence, 9);
  auto log = client.attempts();
  ASSERT_EQ(log.size(), 2u);
  EXPECT_EQ(log[0].outcome, "malformed");
  EXPECT_EQ(log[1].outcome, "ok");
}

TEST(JudgeClient, BudgetExhaustedReturnsMalformedUncached) {
  auto provider = std::make_shared<FunctionProvider>([](const judge::JudgeRequest&, int) { return "nope"; });
  judge::JudgeClient client(provider, offline_config());
  auto r = client.submit(client.make_request(judge::TemplateId::evaluate, "prompt"));
  EXPECT_FALSE(r.ok());
  EXPECT_EQ(provider->calls(), 3);
  client.submit(client.make_request(judge::TemplateId::evaluate, "prompt"));
  EXPECT_EQ(provider->calls(), 6);
}

TEST(JudgeClient, TransportErrorsRetriedThenRaised) {
  auto provider = std::make_shared<FunctionProvider>([](const judge::JudgeRequest&, int call) -> std::string {
    if (call < 2) throw TransportError("HTTP 503");
    return judge::format_judge_response(1, 1);
  });
  judge::JudgeClient client(provider, offline_config());
  EXPECT_TRUE(client.submit(client.make_request(judge::TemplateId::evaluate, "p")).ok());

  auto dead = std::make_shared<FunctionProvider>(
      [](const judge::JudgeRequest&, int) -> std::string { throw TransportError("HTTP 503"); });
  judge::JudgeClient client2(dead, offline_config());
  EXPECT_THROW(client2.submit(client2.make_request(judge::TemplateId::evaluate, "p")), TransportError);
}

TEST(JudgeClient, DiskCacheServesSecondClient) {
  tacit::testing::TempDir dir;
  auto provider = std::make_shared<FunctionProvider>(
      [](const judge::JudgeRequest&, int) { return judge::format_judge_response(1, 4); });
  {
    judge::JudgeClient c(provider, offline_config(), std::make_shared<judge::ResponseCache>(dir.path()));
    c.submit(c.make_request(judge::TemplateId::evaluate, "p"));
  }
  judge::JudgeClient c2(provider, offline_config(), std::make_shared<judge::ResponseCache>(dir.path()));
  auto r = c2.submit(c2.make_request(judge::TemplateId::evaluate, "p"));
  EXPECT_EQ(r.confidence, 4);
  EXPECT_EQ(provider->calls(), 1);
}

TEST(ProviderConfig, RejectsBadJson) {
  EXPECT_THROW(judge::ProviderConfig::from_json_text("{"), ValidationError);
  EXPECT_THROW(judge::ProviderConfig::from_json_text(R"({"model_id": 3})"), ValidationError);
}

TEST(RateLimiter, ZeroDisables) {
  judge::RateLimiter r(0.0);
  auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < 100; ++i) r.acquire();
  EXPECT_LT(std::chrono::steady_clock::now() - t0, std::chrono::milliseconds(50));
}
