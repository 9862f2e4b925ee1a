#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <set>
#include <thread>

#include "support/test_support.hpp"
#include "usim/error.hpp"
#include "usim/textgen.hpp"

using namespace usim;
using namespace usim::textgen;

namespace {

const std::string kAssets = USIM_ASSETS_DIR;

TextContext make_ctx(Tone tone, Polarity polarity, std::vector<std::string> keywords) {
  TextContext ctx;
  ctx.tone = tone;
  ctx.polarity = polarity;
  ctx.keywords = std::move(keywords);
  return ctx;
}

// Adjacent word triples must all be transitions the bucket knows.
bool chain_sound(const MarkovModel& model, Tone tone, Polarity polarity,
                 const std::string& text) {
  const auto* bucket = model.bucket(tone, polarity);
  if (!bucket) return false;
  auto words = tokenize(text);
  for (size_t i = 0; i + 2 < words.size(); ++i) {
    auto it = bucket->transitions.find({words[i], words[i + 1]});
    if (it == bucket->transitions.end()) return false;
    bool found = false;
    for (const auto& [next, count] : it->second)
      if (next == words[i + 2]) found = true;
    if (!found) return false;
  }
  return true;
}

} // namespace

TEST_CASE("training counts bigram transitions") {
  MarkovModel model = train({{"the cat sat on the mat", Tone::formel, Polarity::neutre}});
  const auto* bucket = model.bucket(Tone::formel, Polarity::neutre);
  REQUIRE(bucket);
  auto it = bucket->transitions.find({"the", "cat"});
  REQUIRE(it != bucket->transitions.end());
  REQUIRE(it->second.size() == 1);
  CHECK(it->second[0].first == "sat");
  CHECK(it->second[0].second == 1);
}

TEST_CASE("documents in the same bucket add their counts") {
  MarkovModel model = train({{"go to the office", Tone::formel, Polarity::neutre},
                             {"go to the meeting", Tone::formel, Polarity::neutre}});
  const auto* bucket = model.bucket(Tone::formel, Polarity::neutre);
  auto it = bucket->transitions.find({"go", "to"});
  REQUIRE(it != bucket->transitions.end());
  CHECK(it->second[0].first == "the");
  CHECK(it->second[0].second == 2);
}

TEST_CASE("an empty corpus cannot be trained") {
  CHECK_THROWS_AS(train({}), Error);
}

TEST_CASE("a single-sentence model reproduces a contiguous excerpt") {
  std::string sentence = "alpha budget gamma delta epsilon zeta";
  MarkovModel model = train({{sentence, Tone::formel, Polarity::neutre}});
  auto ctx = make_ctx(Tone::formel, Polarity::neutre, {"budget"});
  GenerateOptions options;
  options.n = 1;
  options.seed = 3;
  auto candidates = generate(model, ctx, options);
  REQUIRE(candidates.size() == 1);
  CHECK(sentence.find(candidates[0].text) != std::string::npos);
  CHECK(chain_sound(model, Tone::formel, Polarity::neutre, candidates[0].text));
}

TEST_CASE("a branching corpus yields distinct candidates under sub-seeds") {
  std::vector<TrainingDoc> corpus = {
      {"the meeting starts early today", Tone::formel, Polarity::neutre},
      {"the meeting starts late tonight", Tone::formel, Polarity::neutre},
      {"the meeting ended badly yesterday", Tone::formel, Polarity::neutre},
  };
  MarkovModel model = train(corpus);
  auto ctx = make_ctx(Tone::formel, Polarity::neutre, {"meeting"});
  GenerateOptions options;
  options.n = 3;
  options.seed = 1;
  auto candidates = generate(model, ctx, options);
  REQUIRE(candidates.size() == 3);
  std::set<std::string> distinct;
  for (const auto& c : candidates) {
    distinct.insert(c.text);
    CHECK(chain_sound(model, Tone::formel, Polarity::neutre, c.text));
  }
  CHECK(distinct.size() >= 2);
}

TEST_CASE("an untrained bucket is unknown-bucket") {
  MarkovModel model = train({{"some formal text here", Tone::formel, Polarity::neutre}});
  auto ctx = make_ctx(Tone::informel, Polarity::negatif, {"text"});
  GenerateOptions options;
  try {
    generate(model, ctx, options);
    FAIL("expected unknown-bucket");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::unknown_bucket);
  }
}

TEST_CASE("keyword conditioning puts the keyword in the first two words") {
  auto corpus = load_corpus(kAssets + "/corpus/demo_mails.jsonl");
  MarkovModel model = train(corpus);
  auto ctx = make_ctx(Tone::formel, Polarity::neutre, {"budget"});
  GenerateOptions options;
  options.n = 5;
  options.seed = 11;
  for (const auto& candidate : generate(model, ctx, options)) {
    auto words = tokenize(candidate.text);
    REQUIRE(words.size() >= 2);
    bool in_head = false;
    for (size_t i = 0; i < 2; ++i) {
      std::string w = words[i];
      for (auto& ch : w) ch = static_cast<char>(std::tolower(ch));
      if (w == "budget") in_head = true;
    }
    CHECK(in_head);
  }
}

TEST_CASE("generation is deterministic under the seed") {
  auto corpus = load_corpus(kAssets + "/corpus/demo_mails.jsonl");
  MarkovModel model = train(corpus);
  auto ctx = make_ctx(Tone::informel, Polarity::positif, {"demo"});
  GenerateOptions options;
  options.n = 4;
  options.seed = 123;
  auto a = generate(model, ctx, options);
  auto b = generate(model, ctx, options);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) CHECK(a[i].text == b[i].text);
}

TEST_CASE("score formula fixed points") {
  auto ctx = make_ctx(Tone::formel, Polarity::neutre, {"atlas", "budget"});

  std::string full;
  for (int i = 0; i < 38; ++i) full += "word ";
  full += "atlas budget";
  CHECK(score_text(full, ctx) == doctest::Approx(1.0));

  CHECK(score_text("nothing relevant here at all", ctx) == doctest::Approx(0.0));

  std::string half = "atlas budget";
  for (int i = 0; i < 18; ++i) half += " filler";
  CHECK(score_text(half, ctx) == doctest::Approx(0.5)); // 20 words, all keywords
}

TEST_CASE("score matches its closed form on random inputs") {
  std::mt19937_64 rng(9);
  std::vector<std::string> pool = {"atlas", "budget", "report",  "kayak",
                                   "tuesday", "filler", "deadline", "metric"};
  for (int round = 0; round < 200; ++round) {
    std::uniform_int_distribution<int> len(1, 60);
    std::uniform_int_distribution<size_t> pick(0, pool.size() - 1);
    int n = len(rng);
    std::string text;
    for (int i = 0; i < n; ++i) {
      if (i) text.push_back(' ');
      text += pool[pick(rng)];
    }
    auto ctx = make_ctx(Tone::formel, Polarity::neutre, {"atlas", "budget", "report"});
    auto words = tokenize(text);
    int matched = 0;
    for (const auto& k : ctx.keywords)
      if (std::find(words.begin(), words.end(), k) != words.end()) matched++;
    double expected = (static_cast<double>(matched) / 3.0) *
                      std::clamp(static_cast<double>(words.size()) / 40.0, 0.0, 1.0);
    CHECK(score_text(text, ctx) == doctest::Approx(expected));
  }
}

TEST_CASE("score_candidates sorts descending and keeps ties stable") {
  auto ctx = make_ctx(Tone::formel, Polarity::neutre, {"atlas"});
  std::vector<Candidate> input;
  Candidate a;
  a.text = "nothing here";
  Candidate b;
  b.text = "also nothing";
  Candidate c;
  std::string rich = "atlas";
  for (int i = 0; i < 45; ++i) rich += " plan";
  c.text = rich;
  input = {a, b, c};
  auto sorted = score_candidates(input, ctx);
  REQUIRE(sorted.size() == 3);
  CHECK(sorted[0].text == rich);
  CHECK(sorted[1].text == "nothing here"); // zero-score tie keeps input order
  CHECK(sorted[2].text == "also nothing");
}

TEST_CASE("the provider wire contract round-trips a stub server") {
  httplib::Server server;
  std::atomic<int> hits{0};
  server.Post("/generate", [&](const httplib::Request& req, httplib::Response& res) {
    hits++;
    auto body = nlohmann::json::parse(req.body);
    CHECK(body.at("tone") == "formel");
    CHECK(body.at("polarity") == "neutre");
    CHECK(body.at("keywords").at(0) == "atlas");
    CHECK(body.at("n_candidates") == 2);
    nlohmann::json reply = {{"candidates", {"first text", "second text"}}};
    res.set_content(reply.dump(), "application/json");
  });
  int port = server.bind_to_any_port("127.0.0.1");
  std::thread thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  HttpProvider provider("127.0.0.1", port);
  auto ctx = make_ctx(Tone::formel, Polarity::neutre, {"atlas"});
  GenerateOptions options;
  options.n = 2;
  auto candidates = generate(provider, ctx, options);
  REQUIRE(candidates.size() == 2);
  CHECK(candidates[0].text == "first text");
  CHECK(candidates[0].provenance == Candidate::Provenance::remote);
  CHECK(candidates[1].text == "second text");
  CHECK(hits == 1);

  server.stop();
  thread.join();
}

TEST_CASE("provider failures map to the two provider errors") {
  // connection refused
  {
    HttpProvider provider("127.0.0.1", 1); // port 1: nothing listens
    auto ctx = make_ctx(Tone::formel, Polarity::neutre, {"x"});
    try {
      provider.request(ctx, 1, 10);
      FAIL("expected provider-unreachable");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::provider_unreachable);
    }
  }

  httplib::Server server;
  server.Post("/generate", [](const httplib::Request&, httplib::Response& res) {
    res.status = 500;
  });
  server.Post("/garbled", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("not json at all", "text/plain");
  });
  int port = server.bind_to_any_port("127.0.0.1");
  std::thread thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  auto ctx = make_ctx(Tone::formel, Polarity::neutre, {"x"});
  try {
    HttpProvider provider("127.0.0.1", port);
    provider.request(ctx, 1, 10);
    FAIL("expected provider-unreachable on 500");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::provider_unreachable);
  }
  try {
    HttpProvider provider("127.0.0.1", port, "/garbled");
    provider.request(ctx, 1, 10);
    FAIL("expected provider-malformed-response");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::provider_malformed_response);
  }
  server.stop();
  thread.join();
}

TEST_CASE("the 50-document fixture trains all its buckets") {
  auto corpus = load_corpus(kAssets + "/corpus/demo_mails.jsonl");
  CHECK(corpus.size() == 50);
  MarkovModel model = train(corpus);
  CHECK(model.bucket(Tone::formel, Polarity::neutre));
  CHECK(model.bucket(Tone::formel, Polarity::positif));
  CHECK(model.bucket(Tone::formel, Polarity::negatif));
  CHECK(model.bucket(Tone::informel, Polarity::neutre));
  CHECK(model.bucket(Tone::informel, Polarity::positif));
  CHECK(model.bucket(Tone::informel, Polarity::negatif));
}
