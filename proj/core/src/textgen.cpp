#include "usim/textgen.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

#include "usim/error.hpp"

namespace usim::textgen {

using nlohmann::json;

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : text) {
    bool word_char = std::isalnum(static_cast<unsigned char>(c)) || c == '\'';
    if (word_char) {
      current.push_back(c);
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

bool keyword_eligible(const std::string& word) {
  if (word.empty()) return false;
  if (std::isupper(static_cast<unsigned char>(word.front()))) return true;
  return word.size() > 4;
}

namespace {

std::string lower(const std::string& word) {
  std::string out = word;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

void add_start(MarkovModel::BucketModel& bucket, const Bigram& bigram) {
  if (std::find(bucket.starts.begin(), bucket.starts.end(), bigram) !=
      bucket.starts.end())
    return;
  size_t index = bucket.starts.size();
  bucket.starts.push_back(bigram);
  bucket.starts_by_word.emplace(lower(bigram.first), index);
  bucket.starts_by_word.emplace(lower(bigram.second), index);
}

} // namespace

MarkovModel train(const std::vector<TrainingDoc>& corpus) {
  if (corpus.empty()) throw Error(ErrorCode::empty_corpus, "no documents to train on");

  MarkovModel model;
  for (const TrainingDoc& doc : corpus) {
    std::vector<std::string> tokens = tokenize(doc.text);
    if (tokens.size() < 2) continue;
    auto& bucket = model.buckets[MarkovModel::key(doc.tone, doc.polarity)];

    add_start(bucket, {tokens[0], tokens[1]});
    for (size_t i = 0; i + 1 < tokens.size(); ++i) {
      Bigram bigram{tokens[i], tokens[i + 1]};
      if (keyword_eligible(tokens[i]) || keyword_eligible(tokens[i + 1]))
        add_start(bucket, bigram);
      if (i + 2 < tokens.size()) {
        auto& nexts = bucket.transitions[bigram];
        auto it = std::find_if(nexts.begin(), nexts.end(),
                               [&](const auto& p) { return p.first == tokens[i + 2]; });
        if (it == nexts.end()) {
          nexts.emplace_back(tokens[i + 2], 1);
        } else {
          it->second++;
        }
      }
    }
  }
  // a bucket that gathered no bigrams should be absent, not empty
  for (auto it = model.buckets.begin(); it != model.buckets.end();) {
    if (it->second.starts.empty()) {
      it = model.buckets.erase(it);
    } else {
      ++it;
    }
  }
  if (model.buckets.empty())
    throw Error(ErrorCode::empty_corpus, "corpus documents are too short");
  return model;
}

double score_text(const std::string& text, const TextContext& ctx) {
  if (ctx.keywords.empty()) return 0.0;
  std::vector<std::string> tokens = tokenize(text);
  std::set<std::string> present;
  for (const std::string& token : tokens) present.insert(lower(token));
  int matched = 0;
  for (const std::string& keyword : ctx.keywords)
    if (present.count(lower(keyword))) matched++;
  double coverage = static_cast<double>(matched) / static_cast<double>(ctx.keywords.size());
  double length = std::clamp(static_cast<double>(tokens.size()) / 40.0, 0.0, 1.0);
  return coverage * length;
}

std::vector<Candidate> score_candidates(std::vector<Candidate> candidates,
                                        const TextContext& ctx) {
  for (Candidate& c : candidates) c.score = score_text(c.text, ctx);
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) { return a.score > b.score; });
  return candidates;
}

namespace {

std::string walk_chain(const MarkovModel::BucketModel& bucket, const TextContext& ctx,
                       int max_words, uint64_t seed) {
  std::mt19937_64 rng(seed);

  // keyword-conditioned start: uniform among starts carrying a keyword;
  // any transition bigram carrying it backs that up, so conditioning
  // holds whenever the corpus mentions the keyword at all
  std::vector<Bigram> matches;
  for (const std::string& keyword : ctx.keywords) {
    auto range = bucket.starts_by_word.equal_range(lower(keyword));
    for (auto it = range.first; it != range.second; ++it)
      matches.push_back(bucket.starts[it->second]);
  }
  if (matches.empty()) {
    for (const std::string& keyword : ctx.keywords) {
      std::string needle = lower(keyword);
      for (const auto& [bigram, nexts] : bucket.transitions) {
        if (lower(bigram.first) == needle || lower(bigram.second) == needle)
          matches.push_back(bigram);
      }
    }
  }

  Bigram current;
  if (!matches.empty()) {
    std::sort(matches.begin(), matches.end());
    matches.erase(std::unique(matches.begin(), matches.end()), matches.end());
    current = matches[std::uniform_int_distribution<size_t>(0, matches.size() - 1)(rng)];
  } else {
    current =
        bucket.starts[std::uniform_int_distribution<size_t>(0, bucket.starts.size() - 1)(rng)];
  }

  std::vector<std::string> words{current.first, current.second};
  while (static_cast<int>(words.size()) < max_words) {
    auto it = bucket.transitions.find(current);
    if (it == bucket.transitions.end() || it->second.empty()) break; // terminal bigram
    int total = 0;
    for (const auto& [word, count] : it->second) total += count;
    int pick = std::uniform_int_distribution<int>(0, total - 1)(rng);
    const std::string* next = nullptr;
    for (const auto& [word, count] : it->second) {
      pick -= count;
      if (pick < 0) {
        next = &word;
        break;
      }
    }
    words.push_back(*next);
    current = {current.second, *next};
  }

  std::string out;
  for (size_t i = 0; i < words.size(); ++i) {
    if (i) out.push_back(' ');
    out += words[i];
  }
  return out;
}

uint64_t sub_seed(uint64_t seed, int k) {
  uint64_t x = seed + 0x9E3779B97F4A7C15ULL * static_cast<uint64_t>(k + 1);
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  return x;
}

} // namespace

std::vector<Candidate> generate(const MarkovModel& model, const TextContext& ctx,
                                const GenerateOptions& options) {
  const MarkovModel::BucketModel* bucket = model.bucket(ctx.tone, ctx.polarity);
  if (!bucket)
    throw Error(ErrorCode::unknown_bucket,
                std::string(to_string(ctx.tone)) + "/" + to_string(ctx.polarity));
  std::vector<Candidate> candidates;
  for (int k = 0; k < options.n; ++k) {
    Candidate c;
    c.provenance = Candidate::Provenance::builtin;
    c.text = walk_chain(*bucket, ctx, options.max_words, sub_seed(options.seed, k));
    c.score = score_text(c.text, ctx);
    candidates.push_back(std::move(c));
  }
  return candidates;
}

HttpProvider::HttpProvider(std::string host, int port, std::string path)
    : host_(std::move(host)), port_(port), path_(std::move(path)) {}

std::vector<std::string> HttpProvider::request(const TextContext& ctx, int n,
                                               int max_words) {
  httplib::Client client(host_, port_);
  client.set_connection_timeout(5, 0);
  client.set_read_timeout(30, 0);

  json body = {{"tone", to_string(ctx.tone)},
               {"polarity", to_string(ctx.polarity)},
               {"keywords", ctx.keywords},
               {"max_tokens", max_words},
               {"n_candidates", n}};
  auto res = client.Post(path_, body.dump(), "application/json");
  if (!res)
    throw Error(ErrorCode::provider_unreachable, host_ + ":" + std::to_string(port_));
  if (res->status != 200)
    throw Error(ErrorCode::provider_unreachable,
                "status " + std::to_string(res->status) + " from " + host_);
  try {
    json doc = json::parse(res->body);
    return doc.at("candidates").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::provider_malformed_response, e.what());
  }
}

std::vector<Candidate> generate(TextProvider& provider, const TextContext& ctx,
                                const GenerateOptions& options) {
  std::vector<Candidate> candidates;
  for (std::string& text : provider.request(ctx, options.n, options.max_words)) {
    Candidate c;
    c.provenance = Candidate::Provenance::remote;
    c.text = std::move(text);
    c.score = score_text(c.text, ctx);
    candidates.push_back(std::move(c));
  }
  return candidates;
}

std::vector<TrainingDoc> load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot read corpus " + path);
  std::vector<TrainingDoc> corpus;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    line_no++;
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      TrainingDoc doc;
      doc.text = j.at("text").get<std::string>();
      doc.tone = scenario::tone_from_string(j.at("tone").get<std::string>());
      doc.polarity = scenario::polarity_from_string(j.at("polarity").get<std::string>());
      corpus.push_back(std::move(doc));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::parse_error,
                  path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return corpus;
}

} // namespace usim::textgen
