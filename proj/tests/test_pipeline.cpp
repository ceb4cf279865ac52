// Apache License, Version 2.0, refer to LICENSE.txt

#include "limerick/pipeline.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <thread>

#include "doctest.h"
#include "fixtures.hpp"
#include "httplib.h"
#include "json.hpp"

using namespace limerick;
using namespace limerick::testing;

namespace {

Poem poem_from(std::vector<std::vector<std::string>> lines,
               std::string id = "p") {
  Poem poem;
  poem.lines = std::move(lines);
  poem.id = std::move(id);
  return poem;
}

struct Resources {
  PronunciationDictionary dict;
  OntologyGraph onto;
  EmbeddingTable emb;
  std::unordered_set<std::string> lexicon;
  FixtureClassifier classifier;

  ScoringResources view() {
    ScoringResources r;
    r.dictionary = &dict;
    r.ontology = &onto;
    r.embeddings = &emb;
    r.classifier = &classifier;
    r.lexicon = &lexicon;
    return r;
  }
};

Resources make_resources() {
  Resources r;
  r.dict = PronunciationDictionary::load(test_data_dir() /
                                         "prondict_fixture.txt");
  r.onto = OntologyGraph::load(test_data_dir() / "ontology_fixture.tsv");
  auto emb_path =
      std::filesystem::temp_directory_path() / "limerick_pipeline_emb.txt";
  std::vector<std::string> words = synthetic_lexicon();
  for (const std::string& extra :
       {"crew", "hair", "hide", "helm", "realm", "side", "dog", "cat"}) {
    words.push_back(extra);
  }
  write_hash_embeddings(emb_path, words, 8);
  r.emb = EmbeddingTable::load(emb_path);
  for (const std::string& w : r.dict.words()) r.lexicon.insert(w);
  for (const std::string& w : synthetic_lexicon()) r.lexicon.insert(w);
  r.classifier.set_default({{"/Arts & Entertainment/Poetry", 0.9}});
  return r;
}

}  // namespace

TEST_CASE("ttr counts distinct over total, punctuation excluded") {
  CHECK(ttr(poem_from({{"a1", "b1", "c1", "d1"},
                       {"e1"},
                       {"f1"},
                       {"g1"},
                       {"h1", "i1", "j1", "k1", "l1", "m1", "n1", "o1"},
                      })) == 1.0);

  // Tokens a b a c -> 3/4.
  CHECK(ttr(poem_from({{"a", "b"}, {"a"}, {"c"}, {"x"}, {"y"}})) ==
        doctest::Approx(5.0 / 6.0));
  CHECK(ttr(poem_from({{"a", "b", "a", "c"}, {"a"}, {"a"}, {"a"}, {"a"}})) ==
        doctest::Approx(3.0 / 8.0));

  // Punctuation is invisible by default, counted when asked.
  Poem punct = poem_from({{"a", ","}, {"b", ","}, {"c"}, {"d"}, {"e"}});
  CHECK(ttr(punct) == 1.0);
  CHECK(ttr(punct, /*include_punctuation=*/true) ==
        doctest::Approx(6.0 / 7.0));

  // Case-insensitive uniqueness: the/the collapse to one type.
  CHECK(ttr(poem_from({{"The", "the"}, {"x"}, {"y"}, {"z"}, {"w"}})) ==
        doctest::Approx(5.0 / 6.0));
}

TEST_CASE("ttr threshold is mean minus two population stddevs") {
  // The published corpus moments give exactly 70.644%.
  std::vector<double> reference{0.84 - 0.06678, 0.84 + 0.06678};
  CHECK(ttr_threshold(reference) == doctest::Approx(0.70644).epsilon(1e-12));

  std::vector<double> constant{0.5, 0.5, 0.5};
  CHECK(ttr_threshold(constant) == doctest::Approx(0.5).epsilon(1e-12));

  std::vector<double> one{0.5};
  CHECK_THROWS_AS(ttr_threshold(one), InsufficientDataError);

  // Two-pass brute force agreement on arbitrary data.
  std::vector<double> values{0.81, 0.72, 0.95, 0.66, 0.88, 0.79};
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size());
  CHECK(std::abs(ttr_threshold(values) - (mean - 2.0 * std::sqrt(var))) <
        1e-12);
}

TEST_CASE("syntactic check flags out-of-lexicon words") {
  Resources r = make_resources();
  Poem bad = poem_from({{"xqzvw", "side"}, {"hide"}, {"helm"}, {"realm"},
                        {"reside"}});
  SyntacticResult result = syntactic_check(bad, r.lexicon);
  CHECK_FALSE(result.ok);
  REQUIRE(result.reasons.size() == 1);
  CHECK(result.reasons[0] == "oov(xqzvw)");

  Poem good = poem_from({{"side"}, {"hide"}, {"helm"}, {"realm"}, {"reside"}});
  CHECK(syntactic_check(good, r.lexicon).ok);
}

TEST_CASE("syntactic corrections: pronoun I, opening capital, punctuation") {
  Resources r = make_resources();
  r.lexicon.insert({"then", "i", "went", "home"});

  Poem poem = poem_from({{"then", "i", "went", "home"},
                         {"i", "stay"},
                         {"helm", ",", ","},
                         {"realm"},
                         {"reside", ".", "."}});
  r.lexicon.insert("stay");
  SyntacticResult result = syntactic_check(poem, r.lexicon);

  CHECK(result.corrected.lines[0] ==
        std::vector<std::string>{"Then", "I", "went", "home"});
  CHECK(result.corrected.lines[1] == std::vector<std::string>{"I", "stay"});
  CHECK(result.corrected.lines[2] == std::vector<std::string>{"helm", ","});
  CHECK(result.corrected.lines[4] == std::vector<std::string>{"reside", "."});
  CHECK(!result.corrections.empty());
  CHECK(result.ok);  // capitalized forms still count as in-lexicon

  // Idempotence: applying the corrections again changes nothing.
  SyntacticResult again = syntactic_check(result.corrected, r.lexicon);
  CHECK(again.corrected.lines == result.corrected.lines);
}

TEST_CASE("fixture classifier serves entries, default, and empty") {
  FixtureClassifier classifier =
      FixtureClassifier::load(test_data_dir() / "classifier_fixture.json");
  auto categories = classifier.classify("a poem about dogs and cats");
  REQUIRE(categories.size() == 2);
  CHECK(categories[0].path == "/Pets & Animals/Pets");
  CHECK(categories[0].confidence == doctest::Approx(0.82));

  CHECK(classifier.classify("unclassifiable gibberish").empty());
  auto fallback = classifier.classify("anything else");
  REQUIRE(fallback.size() == 1);
  CHECK(fallback[0].path == "/Arts & Entertainment/Poetry");
}

TEST_CASE("score_poem fills every metric field") {
  Resources r = make_resources();
  ScoringResources resources = r.view();
  Poem poem = tokenize(benthic_limerick_text(), "benthic");
  PoemScorecard card = score_poem(poem, resources);

  CHECK(card.poem_id == "benthic");
  CHECK(card.rhyme.distance == 0.0);
  CHECK(card.ttr > 0.0);
  CHECK(card.ttr <= 1.0);
  CHECK(!card.continuity.nouns.empty());
  CHECK(card.classification.state == Classification::State::classified);
  CHECK(card.syntactic_ok);
  // Line 1 capitalization happened.
  CHECK(card.poem.lines[0][0] == "Cap'n");
}

TEST_CASE("unclassified stays distinct from classification errors") {
  Resources r = make_resources();
  FixtureClassifier empty_classifier;  // no default: everything unclassified
  ScoringResources resources = r.view();
  resources.classifier = &empty_classifier;
  Poem poem = tokenize(benthic_limerick_text(), "b2");
  PoemScorecard card = score_poem(poem, resources);
  CHECK(card.classification.state == Classification::State::unclassified);

  resources.classifier = nullptr;
  PoemScorecard pending = score_poem(poem, resources);
  CHECK(pending.classification.state == Classification::State::pending);
}

TEST_CASE("filter rejects by syntax, ttr and classification") {
  Resources r = make_resources();
  ScoringResources resources = r.view();

  auto make_card = [&](const std::string& id) {
    Poem poem = tokenize(benthic_limerick_text(), id);
    PoemScorecard card = score_poem(poem, resources);
    card.poem_id = id;
    return card;
  };

  PoemScorecard ok = make_card("ok");
  PoemScorecard bad_syntax = make_card("bad-syntax");
  bad_syntax.syntactic_ok = false;
  PoemScorecard low_ttr = make_card("low-ttr");
  low_ttr.ttr = 0.65;
  PoemScorecard unclassified = make_card("unclassified");
  unclassified.classification.state = Classification::State::unclassified;
  unclassified.classification.categories.clear();
  PoemScorecard low_conf = make_card("low-conf");
  low_conf.classification.categories = {{"/Poetry", 0.4}};

  FilterConfig cfg;
  cfg.ttr_threshold = 0.70644;
  FilterOutcome outcome = filter_and_rank(
      {ok, bad_syntax, low_ttr, unclassified, low_conf}, cfg);
  REQUIRE(outcome.accepted.size() == 1);
  CHECK(outcome.accepted[0].poem_id == "ok");
  REQUIRE(outcome.rejected.size() == 4);
  auto reason_of = [&](const std::string& id) {
    for (const Rejection& rej : outcome.rejected) {
      if (rej.poem_id == id) return rej.reason;
    }
    return std::string("missing");
  };
  CHECK(reason_of("bad-syntax") == "syntactic");
  CHECK(reason_of("low-ttr") == "ttr");
  CHECK(reason_of("unclassified") == "unclassified");
  CHECK(reason_of("low-conf") == "unclassified");
}

TEST_CASE("ranking is deterministic and ordered by the composite key") {
  Resources r = make_resources();
  ScoringResources resources = r.view();
  Poem base = tokenize(benthic_limerick_text(), "base");

  auto card_with = [&](const std::string& id, double rhyme_distance,
                       double confidence, double ttr_value) {
    PoemScorecard card = score_poem(base, resources);
    card.poem_id = id;
    card.rhyme.distance = rhyme_distance;
    card.classification.categories = {{"/Poetry", confidence}};
    card.ttr = ttr_value;
    return card;
  };

  std::vector<PoemScorecard> cards{
      card_with("c", 0.25, 0.9, 0.9), card_with("a", 0.0, 0.6, 0.8),
      card_with("b", 0.0, 0.9, 0.7), card_with("d", 0.0, 0.9, 0.7)};

  FilterConfig cfg;
  cfg.ttr_threshold.reset();
  FilterOutcome outcome = filter_and_rank(cards, cfg);
  REQUIRE(outcome.accepted.size() == 4);
  CHECK(outcome.accepted[0].poem_id == "b");  // 0.0 dist, conf 0.9, ttr 0.7
  CHECK(outcome.accepted[1].poem_id == "d");  // id tie-break after b
  CHECK(outcome.accepted[2].poem_id == "a");  // 0.0 dist, conf 0.6
  CHECK(outcome.accepted[3].poem_id == "c");  // 0.25 dist last

  // Permuting the input changes nothing.
  std::vector<PoemScorecard> permuted{cards[3], cards[0], cards[2], cards[1]};
  FilterOutcome outcome2 = filter_and_rank(permuted, cfg);
  for (std::size_t i = 0; i < outcome.accepted.size(); ++i) {
    CHECK(outcome.accepted[i].poem_id == outcome2.accepted[i].poem_id);
  }
}

TEST_CASE("raising the ttr threshold never grows the accepted set") {
  Resources r = make_resources();
  ScoringResources resources = r.view();
  SyntheticCorpusSpec spec;
  spec.poems = 60;
  std::vector<PoemScorecard> cards;
  for (const Poem& poem : make_synthetic_corpus(spec)) {
    cards.push_back(score_poem(poem, resources));
  }

  std::size_t previous = cards.size() + 1;
  for (int step = 0; step <= 10; ++step) {
    FilterConfig cfg;
    cfg.ttr_threshold = 0.3 + 0.06 * step;
    FilterOutcome outcome = filter_and_rank(cards, cfg);
    CHECK(outcome.accepted.size() <= previous);
    previous = outcome.accepted.size();
  }
}

TEST_CASE("scorecards round trip through the jsonl file") {
  Resources r = make_resources();
  ScoringResources resources = r.view();
  SyntheticCorpusSpec spec;
  spec.poems = 10;
  std::vector<PoemScorecard> cards;
  for (const Poem& poem : make_synthetic_corpus(spec)) {
    cards.push_back(score_poem(poem, resources));
  }
  cards.push_back(score_poem(tokenize(benthic_limerick_text(), "benthic"),
                             resources));

  auto path = std::filesystem::temp_directory_path() / "limerick_cards.jsonl";
  write_scorecards_file(path, cards);
  std::vector<PoemScorecard> loaded = read_scorecards_file(path);
  REQUIRE(loaded.size() == cards.size());
  for (std::size_t i = 0; i < cards.size(); ++i) {
    CHECK(loaded[i].poem_id == cards[i].poem_id);
    CHECK(loaded[i].poem.lines == cards[i].poem.lines);
    CHECK(loaded[i].ttr == cards[i].ttr);
    CHECK(loaded[i].rhyme.distance == cards[i].rhyme.distance);
    CHECK(loaded[i].rhyme.indicators == cards[i].rhyme.indicators);
    CHECK(loaded[i].continuity.centroid_mean ==
          cards[i].continuity.centroid_mean);
    CHECK(loaded[i].continuity.ontology_avg_similarity ==
          cards[i].continuity.ontology_avg_similarity);
    CHECK(loaded[i].classification.state == cards[i].classification.state);
    CHECK(loaded[i].syntactic_ok == cards[i].syntactic_ok);
  }
}

TEST_CASE("run_batch reaches its target with a funnel summary") {
  Resources r = make_resources();
  ScoringResources resources = r.view();

  SyntheticCorpusSpec spec;
  spec.poems = 1000;
  std::vector<Poem> corpus = make_synthetic_corpus(spec);
  Vocabulary vocab = Vocabulary::build(corpus);
  NGramModel fwd =
      train_ngram(encode_corpus(corpus, Direction::forward, vocab), 3);
  NGramModel rev =
      train_ngram(encode_corpus(corpus, Direction::reverse, vocab), 3);

  SamplerConfig sampler;
  sampler.rng_seed = 5;
  sampler.max_tokens = 80;
  FilterConfig filter;
  filter.ttr_threshold.reset();
  filter.require_classified = true;

  BatchResult result =
      run_batch(GenerationMode::two_stage, &fwd, &rev, {}, sampler, filter,
                resources, vocab, 20);
  CHECK_FALSE(result.summary.budget_exhausted);
  CHECK(result.summary.parsed == 20);
  CHECK(result.summary.generated >= 20);
  CHECK(result.summary.parsed <= result.summary.generated);
  CHECK(result.summary.syntactic <= result.summary.parsed);
  CHECK(result.summary.ttr_passed <= result.summary.syntactic);
  CHECK(result.summary.classified <= result.summary.ttr_passed);
  CHECK(result.summary.accepted == result.summary.classified);
  CHECK(result.outcome.accepted.size() ==
        static_cast<std::size_t>(result.summary.accepted));
  CHECK(result.attempts.size() ==
        static_cast<std::size_t>(result.summary.generated));
}

TEST_CASE("run_batch is independent of the worker count") {
  Resources r = make_resources();
  ScoringResources resources = r.view();

  SyntheticCorpusSpec spec;
  spec.poems = 500;
  std::vector<Poem> corpus = make_synthetic_corpus(spec);
  Vocabulary vocab = Vocabulary::build(corpus);
  NGramModel fwd =
      train_ngram(encode_corpus(corpus, Direction::forward, vocab), 3);
  NGramModel rev =
      train_ngram(encode_corpus(corpus, Direction::reverse, vocab), 3);

  SamplerConfig sampler;
  sampler.rng_seed = 11;
  sampler.max_tokens = 80;
  FilterConfig filter;
  filter.ttr_threshold.reset();

  BatchResult serial = run_batch(GenerationMode::two_stage, &fwd, &rev, {},
                                 sampler, filter, resources, vocab, 10,
                                 /*worker_count=*/1);
  BatchResult parallel = run_batch(GenerationMode::two_stage, &fwd, &rev, {},
                                   sampler, filter, resources, vocab, 10,
                                   /*worker_count=*/4);
  REQUIRE(serial.cards.size() == parallel.cards.size());
  for (std::size_t i = 0; i < serial.cards.size(); ++i) {
    CHECK(serial.cards[i].poem_id == parallel.cards[i].poem_id);
    CHECK(serial.cards[i].poem.lines == parallel.cards[i].poem.lines);
  }
}

namespace {

// Minimal classifier endpoint for exercising the HTTP client.
struct ClassifierEndpoint {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::atomic<int> hits{0};

  explicit ClassifierEndpoint(int status, std::string body) {
    server.Post("/v1/classify", [this, status, body](const httplib::Request&,
                                                     httplib::Response& res) {
      ++hits;
      res.status = status;
      res.set_content(body, "application/json");
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }

  ~ClassifierEndpoint() {
    server.stop();
    thread.join();
  }
};

}  // namespace

TEST_CASE("http classifier parses well-formed responses") {
  ClassifierEndpoint endpoint(
      200, R"({"categories": [{"name": "/Poetry", "confidence": 0.8}]})");
  HttpClassifier client("127.0.0.1", endpoint.port);
  auto categories = client.classify("some poem text");
  REQUIRE(categories.size() == 1);
  CHECK(categories[0].path == "/Poetry");
  CHECK(categories[0].confidence == doctest::Approx(0.8));
}

TEST_CASE("http classifier maps status 429 to QuotaError") {
  ClassifierEndpoint endpoint(429, "{}");
  HttpClassifier client("127.0.0.1", endpoint.port);
  CHECK_THROWS_AS(client.classify("text"), QuotaError);
}

TEST_CASE("http classifier rejects malformed bodies and bad statuses") {
  ClassifierEndpoint malformed(200, "not json at all");
  HttpClassifier client("127.0.0.1", malformed.port);
  CHECK_THROWS_AS(client.classify("text"), ClientError);

  ClassifierEndpoint failing(500, "{}");
  HttpClassifier failing_client("127.0.0.1", failing.port);
  CHECK_THROWS_AS(failing_client.classify("text"), ClientError);
}

TEST_CASE("http classifier retries transport failures then gives up") {
  // Nothing listens on this port once the prober socket is gone.
  int dead_port = 0;
  {
    httplib::Server prober;
    dead_port = prober.bind_to_any_port("127.0.0.1");
  }
  HttpClassifier client("127.0.0.1", dead_port, /*max_retries=*/1,
                        /*timeout_seconds=*/1);
  CHECK_THROWS_AS(client.classify("text"), ClientError);
}

TEST_CASE("http classifier honors its request-rate ceiling") {
  ClassifierEndpoint endpoint(
      200, R"({"categories": []})");
  HttpClassifier client("127.0.0.1", endpoint.port, 0, 5,
                        /*min_interval_ms=*/40);
  auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < 4; ++i) client.classify("text");
  auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                     std::chrono::steady_clock::now() - start)
                     .count();
  CHECK(endpoint.hits == 4);
  CHECK(elapsed >= 120);  // three enforced 40ms gaps
}

TEST_CASE("run_batch exhausts its budget against a hopeless model") {
  Resources r = make_resources();
  ScoringResources resources = r.view();

  // A uniform model essentially never produces parseable poems.
  Vocabulary vocab;
  UniformModel hopeless_fwd(Direction::forward, vocab.size());
  UniformModel hopeless_rev(Direction::reverse, vocab.size());

  SamplerConfig sampler;
  FilterConfig filter;
  filter.retry_budget = 10;
  BatchResult result =
      run_batch(GenerationMode::two_stage, &hopeless_fwd, &hopeless_rev, {},
                sampler, filter, resources, vocab, 5);
  CHECK(result.summary.budget_exhausted);
  CHECK(result.summary.generated == 10);
  CHECK(result.summary.accepted == 0);
}
