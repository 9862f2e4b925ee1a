#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "usim/scenario.hpp"

namespace usim::textgen {

using scenario::Polarity;
using scenario::TextContext;
using scenario::Tone;

struct TrainingDoc {
  std::string text;
  Tone tone = Tone::formel;
  Polarity polarity = Polarity::neutre;
};

using Bigram = std::pair<std::string, std::string>;

// Order-2 chain per (tone, polarity) bucket. A desk-scale stand-in for
// the neural provider; the wire contract below is where a real model
// plugs in.
struct MarkovModel {
  struct BucketModel {
    std::map<Bigram, std::vector<std::pair<std::string, int>>> transitions;
    std::vector<Bigram> starts; // doc openings + bigrams with keyword-eligible words
    std::multimap<std::string, size_t> starts_by_word; // lowercased word -> starts index
  };

  std::map<std::pair<int, int>, BucketModel> buckets;

  static std::pair<int, int> key(Tone tone, Polarity polarity) {
    return {static_cast<int>(tone), static_cast<int>(polarity)};
  }
  const BucketModel* bucket(Tone tone, Polarity polarity) const {
    auto it = buckets.find(key(tone, polarity));
    return it == buckets.end() ? nullptr : &it->second;
  }
};

// Whitespace/punctuation tokenizer shared by training and scoring.
std::vector<std::string> tokenize(const std::string& text);

// Capitalized or longer than four characters.
bool keyword_eligible(const std::string& word);

// Throws Error{empty_corpus}.
MarkovModel train(const std::vector<TrainingDoc>& corpus);

struct Candidate {
  std::string text;
  double score = 0.0;
  enum class Provenance { builtin, remote } provenance = Provenance::builtin;
};

struct GenerateOptions {
  int n = 1;
  int max_words = 120;
  uint64_t seed = 0;
};

// Builtin path: seeded walk from a keyword-bearing bigram when one
// exists, else a uniform starting bigram. Throws Error{unknown_bucket}.
std::vector<Candidate> generate(const MarkovModel& model, const TextContext& ctx,
                                const GenerateOptions& options);

// score = keyword coverage x clamp(word_count / 40, 0, 1).
double score_text(const std::string& text, const TextContext& ctx);

// Recomputes scores and stable-sorts descending (ties keep input order).
std::vector<Candidate> score_candidates(std::vector<Candidate> candidates,
                                        const TextContext& ctx);

// External-provider wire contract: POST {tone, polarity, keywords[],
// max_tokens, n_candidates} -> 200 {candidates: [text...]}.
class TextProvider {
 public:
  virtual ~TextProvider() = default;
  virtual std::vector<std::string> request(const TextContext& ctx, int n,
                                           int max_words) = 0;
};

class HttpProvider final : public TextProvider {
 public:
  HttpProvider(std::string host, int port, std::string path = "/generate");

  // Throws provider-unreachable (transport or status != 200) or
  // provider-malformed-response.
  std::vector<std::string> request(const TextContext& ctx, int n,
                                   int max_words) override;

 private:
  std::string host_;
  int port_;
  std::string path_;
};

std::vector<Candidate> generate(TextProvider& provider, const TextContext& ctx,
                                const GenerateOptions& options);

// Corpus files are JSON lines: {"text": ..., "tone": ..., "polarity": ...}.
std::vector<TrainingDoc> load_corpus(const std::string& path);

} // namespace usim::textgen
