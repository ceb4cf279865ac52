// Apache License, Version 2.0, refer to LICENSE.txt
//
// Post-generation evaluation: type-token ratio, lexicon-based syntactic
// checking with light autocorrection, content classification through a
// pluggable client, composite filtering/ranking, and the end-to-end batch
// runner with a retry budget.

#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "limerick/continuity.hpp"
#include "limerick/corpus.hpp"
#include "limerick/generation.hpp"
#include "limerick/rhyme.hpp"

namespace limerick {

struct InsufficientDataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ClientError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct QuotaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Distinct over total token count, case-insensitive; punctuation-only
/// tokens are excluded unless asked for.
double ttr(const Poem& poem, bool include_punctuation = false);

/// mean - 2 * population stddev over a reference sample.
double ttr_threshold(std::span<const double> reference);

struct SyntacticResult {
  bool ok = true;
  std::vector<std::string> reasons;      // e.g. oov(xqzvw)
  std::vector<std::string> corrections;  // descriptions of applied fixes
  Poem corrected;
};

/// A poem is syntactically acceptable when every lettered token is in the
/// lexicon. Corrections (standalone i -> I, capitalized opening line,
/// collapsed duplicate punctuation) are applied either way and are
/// idempotent.
SyntacticResult syntactic_check(const Poem& poem,
                                const std::unordered_set<std::string>& lexicon);

struct Category {
  std::string path;
  double confidence = 0.0;
};

/// Content-classification boundary. classify() returns the category list
/// (possibly empty = unclassified) or throws ClientError/QuotaError.
class ClassifierClient {
 public:
  virtual ~ClassifierClient() = default;
  virtual std::vector<Category> classify(const std::string& text) = 0;
};

/// Reads a JSON fixture {"default": [[path, conf], ...], "entries":
/// {"<poem text>": [[path, conf], ...]}}. Entries override the default;
/// a missing default means unmatched poems come back unclassified.
class FixtureClassifier : public ClassifierClient {
 public:
  static FixtureClassifier load(const std::filesystem::path& path);
  FixtureClassifier() = default;

  std::vector<Category> classify(const std::string& text) override;

  void set_default(std::vector<Category> categories);
  void add_entry(std::string text, std::vector<Category> categories);

 private:
  std::optional<std::vector<Category>> default_;
  std::unordered_map<std::string, std::vector<Category>> entries_;
};

/// POSTs {"text": ...} to endpoint + "/v1/classify" and expects
/// {"categories": [{"name":..., "confidence":...}]}. Retries transport
/// failures with backoff before giving up; HTTP 429 maps to QuotaError.
/// A minimum request interval caps the request rate across threads.
class HttpClassifier : public ClassifierClient {
 public:
  explicit HttpClassifier(std::string host, int port, int max_retries = 2,
                          int timeout_seconds = 5,
                          int min_interval_ms = 0);

  std::vector<Category> classify(const std::string& text) override;

 private:
  void wait_for_slot();

  std::string host_;
  int port_;
  int max_retries_;
  int timeout_seconds_;
  int min_interval_ms_;
  std::mutex rate_mutex_;
  std::chrono::steady_clock::time_point last_request_{};
};

struct Classification {
  enum class State { pending, classified, unclassified, error };
  State state = State::pending;
  std::vector<Category> categories;

  std::optional<double> max_confidence() const;
};

struct PoemScorecard {
  static constexpr int kSchemaVersion = 1;

  std::string poem_id;
  Poem poem;  // corrected form
  bool syntactic_ok = true;
  std::vector<std::string> syntactic_reasons;
  std::vector<std::string> corrections;
  double ttr = 0.0;
  RhymeReport rhyme;
  ContinuityReport continuity;
  Classification classification;
};

void write_scorecards_file(const std::filesystem::path& path,
                           std::span<const PoemScorecard> cards);
std::vector<PoemScorecard> read_scorecards_file(
    const std::filesystem::path& path);

struct FilterConfig {
  std::optional<double> ttr_threshold;  // unset = no TTR filter
  bool require_syntactic = true;        // off = rank-only mode
  bool require_classified = true;
  double min_classification_confidence = 0.5;
  int retry_budget = 0;  // total generation attempts for run_batch
};

struct Rejection {
  std::string poem_id;
  std::string reason;
};

struct FilterOutcome {
  std::vector<PoemScorecard> accepted;  // in rank order
  std::vector<Rejection> rejected;
};

/// Rejects on syntax, TTR and classification; ranks survivors by
/// ascending rhyme distance, then descending top classification
/// confidence, descending TTR, descending ontology similarity, with the
/// poem id as the final tie break. Input order never matters.
FilterOutcome filter_and_rank(std::vector<PoemScorecard> cards,
                              const FilterConfig& cfg);

struct ScoringResources {
  const PronunciationDictionary* dictionary = nullptr;
  const OntologyGraph* ontology = nullptr;
  const EmbeddingTable* embeddings = nullptr;
  ClassifierClient* classifier = nullptr;  // optional
  const std::unordered_set<std::string>* lexicon = nullptr;
  RhymePolicy rhyme_policy;
  bool ttr_include_punctuation = false;
};

/// All metrics for one poem; classification errors are recorded on the
/// card, not thrown, so batches can resume.
PoemScorecard score_poem(const Poem& poem, const ScoringResources& resources);

struct BatchSummary {
  int generated = 0;
  int parsed = 0;
  int syntactic = 0;
  int ttr_passed = 0;
  int classified = 0;
  int accepted = 0;
  bool budget_exhausted = false;
};

struct BatchResult {
  std::vector<AttemptRecord> attempts;
  std::vector<PoemScorecard> cards;
  FilterOutcome outcome;
  BatchSummary summary;
};

/// Generates until n_target poems parse (or the attempt budget runs dry),
/// scores them, then filters and ranks. Worker parallelism never changes
/// the output because every attempt owns a derived rng stream.
BatchResult run_batch(GenerationMode mode, const LanguageModel* forward_model,
                      const LanguageModel* reverse_model,
                      std::span<const std::string> seed_line,
                      const SamplerConfig& sampler_cfg,
                      const FilterConfig& filter_cfg,
                      const ScoringResources& resources,
                      const Vocabulary& vocab, int n_target,
                      int worker_count = 1);

}  // namespace limerick
