// Apache License, Version 2.0, refer to LICENSE.txt

#include "limerick/generation.hpp"

#include <cmath>
#include <filesystem>
#include <map>

#include "doctest.h"
#include "fixtures.hpp"
#include "limerick/rhyme.hpp"

using namespace limerick;
using namespace limerick::testing;

namespace {

struct TrainedPair {
  Vocabulary vocab;
  NGramModel forward;
  NGramModel reverse;
};

TrainedPair train_pair(int poems, const SyntheticCorpusSpec* custom = nullptr) {
  SyntheticCorpusSpec spec;
  if (custom) spec = *custom;
  spec.poems = poems;
  std::vector<Poem> corpus = make_synthetic_corpus(spec);
  Vocabulary vocab = Vocabulary::build(corpus);
  NGramModel fwd = train_ngram(encode_corpus(corpus, Direction::forward, vocab), 3);
  NGramModel rev = train_ngram(encode_corpus(corpus, Direction::reverse, vocab), 3);
  return {std::move(vocab), std::move(fwd), std::move(rev)};
}

TrainedPair memorizer() {
  // A single poem repeated: greedy sampling must reproduce it.
  SyntheticCorpusSpec spec;
  spec.poems = 1;
  spec.seed = 3;
  std::vector<Poem> corpus;
  std::vector<Poem> one = make_synthetic_corpus(spec);
  for (int i = 0; i < 20; ++i) corpus.push_back(one[0]);
  Vocabulary vocab = Vocabulary::build(corpus);
  NGramModel fwd = train_ngram(encode_corpus(corpus, Direction::forward, vocab), 3);
  NGramModel rev = train_ngram(encode_corpus(corpus, Direction::reverse, vocab), 3);
  return {std::move(vocab), std::move(fwd), std::move(rev)};
}

}  // namespace

TEST_CASE("top-k one always picks the argmax") {
  std::vector<double> dist{0.1, 0.6, 0.3};
  SamplerConfig cfg;
  cfg.top_k = 1;
  Rng rng(1);
  for (int i = 0; i < 50; ++i) CHECK(sample_next(dist, cfg, rng) == 1);
}

TEST_CASE("near-zero temperature collapses onto the argmax") {
  std::vector<double> dist{0.30, 0.31, 0.39};
  SamplerConfig cfg;
  cfg.top_k = 0;
  cfg.temperature = 1e-6;
  Rng rng(2);
  for (int i = 0; i < 50; ++i) CHECK(sample_next(dist, cfg, rng) == 2);
}

TEST_CASE("sampling frequencies match the distribution within 3 sigma") {
  std::vector<double> dist{0.5, 0.3, 0.2};
  SamplerConfig cfg;
  cfg.top_k = 0;
  Rng rng(97);
  const int draws = 100000;
  std::map<TokenId, int> counts;
  for (int i = 0; i < draws; ++i) ++counts[sample_next(dist, cfg, rng)];
  for (std::size_t token = 0; token < dist.size(); ++token) {
    double expected = dist[token] * draws;
    double sigma = std::sqrt(dist[token] * (1 - dist[token]) * draws);
    CHECK(std::abs(counts[static_cast<TokenId>(token)] - expected) <
          3.0 * sigma);
  }
}

TEST_CASE("top-k renormalization excludes the tail") {
  std::vector<double> dist{0.5, 0.3, 0.2};
  SamplerConfig cfg;
  cfg.top_k = 2;
  Rng rng(5);
  for (int i = 0; i < 2000; ++i) {
    CHECK(sample_next(dist, cfg, rng) != 2);
  }
}

TEST_CASE("memorizing models reproduce their poem greedily") {
  TrainedPair pair = memorizer();
  SamplerConfig cfg;
  cfg.top_k = 1;

  Rng rng(1);
  EncodedSequence fwd = generate_forward(pair.forward, cfg, rng);
  ParseResult parsed = parse_generation(fwd, pair.vocab);
  REQUIRE(std::holds_alternative<Poem>(parsed));

  SyntheticCorpusSpec spec;
  spec.poems = 1;
  spec.seed = 3;
  Poem original = make_synthetic_corpus(spec)[0];
  CHECK(std::get<Poem>(parsed) == original);

  ParseResult two_stage =
      generate_two_stage(pair.forward, pair.reverse, cfg, pair.vocab);
  REQUIRE(std::holds_alternative<Poem>(two_stage));
  CHECK(std::get<Poem>(two_stage) == original);
}

TEST_CASE("generation is deterministic given seeds") {
  TrainedPair pair = train_pair(300);
  SamplerConfig cfg;
  cfg.rng_seed = 7;
  for (int attempt = 0; attempt < 100; ++attempt) {
    GenerationAttempt a = run_attempt(GenerationMode::two_stage, &pair.forward,
                                      &pair.reverse, {}, cfg, pair.vocab,
                                      attempt);
    GenerationAttempt b = run_attempt(GenerationMode::two_stage, &pair.forward,
                                      &pair.reverse, {}, cfg, pair.vocab,
                                      attempt);
    CHECK(a.record.parsed == b.record.parsed);
    CHECK(a.record.lines == b.record.lines);
    CHECK(a.record.rng_seed == b.record.rng_seed);
  }
}

TEST_CASE("reverse generation honors the seed line") {
  TrainedPair pair = train_pair(200);
  std::vector<std::string> seed{"once", "young", "my", "of", "in", "side"};
  SamplerConfig cfg;
  cfg.rng_seed = 3;

  Rng rng(cfg.rng_seed);
  EncodedSequence out =
      generate_reverse(pair.reverse, seed, cfg, rng, pair.vocab);
  // Encoded output begins BOS + reversed(seed) + LINE.
  REQUIRE(out.tokens.size() >= seed.size() + 2);
  CHECK(out.tokens[0] == Vocabulary::kBos);
  for (std::size_t i = 0; i < seed.size(); ++i) {
    CHECK(out.tokens[1 + i] ==
          pair.vocab.id_of(seed[seed.size() - 1 - i]));
  }
  CHECK(out.tokens[1 + seed.size()] == Vocabulary::kLine);

  ParseResult parsed = parse_generation(out, pair.vocab);
  if (auto* poem = std::get_if<Poem>(&parsed)) {
    CHECK(poem->lines[0] == seed);
  }
}

TEST_CASE("seed fidelity holds for every parsed reverse poem") {
  TrainedPair pair = train_pair(200);
  std::vector<std::string> seed{"once", "old", "my", "with", "to", "tide"};
  SamplerConfig cfg;
  int parsed_count = 0;
  for (int attempt = 0; attempt < 60; ++attempt) {
    cfg.rng_seed = 1000 + static_cast<std::uint64_t>(attempt);
    GenerationAttempt a = run_attempt(GenerationMode::reverse, nullptr,
                                      &pair.reverse, seed, cfg, pair.vocab,
                                      attempt);
    if (a.record.parsed) {
      ++parsed_count;
      CHECK(a.record.lines[0] == seed);
    }
  }
  CHECK(parsed_count > 0);
}

TEST_CASE("empty seed means pure sampling from BOS") {
  TrainedPair pair = train_pair(100);
  SamplerConfig cfg;
  Rng rng(9);
  EncodedSequence out =
      generate_reverse(pair.reverse, {}, cfg, rng, pair.vocab);
  CHECK(out.tokens[0] == Vocabulary::kBos);
  CHECK(out.tokens.size() > 1);
  CHECK(out.tokens[1] != Vocabulary::kLine);
}

TEST_CASE("two-stage equals manual piping under the same rng schedule") {
  TrainedPair pair = train_pair(300);
  SamplerConfig cfg;
  cfg.rng_seed = 12345;

  ParseResult direct =
      generate_two_stage(pair.forward, pair.reverse, cfg, pair.vocab);

  // Manual pipe: stage rngs derive from the seed with salts 1 and 2.
  Rng stage1(derive_seed(cfg.rng_seed, 1));
  SamplerConfig stage1_cfg = cfg;
  std::vector<TokenId> tokens{Vocabulary::kBos};
  while (static_cast<int>(tokens.size()) < stage1_cfg.max_tokens) {
    std::vector<double> dist = pair.forward.next_token_dist(tokens);
    TokenId next = sample_next(dist, stage1_cfg, stage1);
    tokens.push_back(next);
    if (next == Vocabulary::kEos || next == Vocabulary::kLine) break;
  }
  REQUIRE(tokens.back() == Vocabulary::kLine);
  std::vector<std::string> first_line;
  for (std::size_t i = 1; i + 1 < tokens.size(); ++i) {
    first_line.push_back(pair.vocab.token_of(tokens[i]));
  }
  SamplerConfig stage2_cfg = cfg;
  stage2_cfg.rng_seed = derive_seed(cfg.rng_seed, 2);
  Rng stage2(stage2_cfg.rng_seed);
  EncodedSequence rest = generate_reverse(pair.reverse, first_line, stage2_cfg,
                                          stage2, pair.vocab);
  ParseResult piped = parse_generation(rest, pair.vocab);

  REQUIRE(std::holds_alternative<Poem>(direct) ==
          std::holds_alternative<Poem>(piped));
  if (std::holds_alternative<Poem>(direct)) {
    CHECK(std::get<Poem>(direct) == std::get<Poem>(piped));
    CHECK(std::get<Poem>(direct).lines[0] == first_line);
  }
}

TEST_CASE("parse failures carry their reasons") {
  Poem poem;
  poem.lines = {{"a"}, {"b"}, {"c"}, {"d"}, {"e"}};
  Vocabulary vocab = Vocabulary::build(std::span<const Poem>(&poem, 1));
  TokenId a = vocab.id_of("a");

  EncodedSequence ok{{Vocabulary::kBos, a, Vocabulary::kLine, a,
                      Vocabulary::kLine, a, Vocabulary::kLine, a,
                      Vocabulary::kLine, a, Vocabulary::kEos},
                     Direction::forward};
  CHECK(std::holds_alternative<Poem>(parse_generation(ok, vocab)));

  EncodedSequence empty_line{{Vocabulary::kBos, a, Vocabulary::kLine, a,
                              Vocabulary::kLine, Vocabulary::kLine, a,
                              Vocabulary::kLine, a, Vocabulary::kEos},
                             Direction::forward};
  auto failure = std::get<ParseFailure>(parse_generation(empty_line, vocab));
  CHECK(failure.reason == ParseFailure::Reason::empty_line);

  EncodedSequence truncated{{Vocabulary::kBos, a, Vocabulary::kLine, a,
                             Vocabulary::kLine, a, Vocabulary::kLine, a},
                            Direction::forward};
  failure = std::get<ParseFailure>(parse_generation(truncated, vocab));
  CHECK(failure.reason == ParseFailure::Reason::line_count);

  EncodedSequence no_eos{{Vocabulary::kBos, a, Vocabulary::kLine, a,
                          Vocabulary::kLine, a, Vocabulary::kLine, a,
                          Vocabulary::kLine, a},
                         Direction::forward};
  failure = std::get<ParseFailure>(parse_generation(no_eos, vocab));
  CHECK(failure.reason == ParseFailure::Reason::no_eos);
}

TEST_CASE("every returned poem satisfies the poem invariants") {
  TrainedPair pair = train_pair(300);
  SamplerConfig cfg;
  cfg.rng_seed = 99;
  for (int attempt = 0; attempt < 200; ++attempt) {
    GenerationAttempt a =
        run_attempt(GenerationMode::two_stage, &pair.forward, &pair.reverse,
                    {}, cfg, pair.vocab, attempt);
    if (!a.poem) continue;
    CHECK(a.poem->lines.size() == 5);
    for (const auto& line : a.poem->lines) CHECK(!line.empty());
  }
}

TEST_CASE("forward samples from a structure-rich corpus mostly parse") {
  // All-short corpus: line structure is fully position-anchored, so the
  // forward model should parse well above the 80% floor.
  SyntheticCorpusSpec spec;
  spec.short_line4_fraction = 1.0;
  spec.short_line5_fraction = 1.0;
  std::vector<Poem> corpus = [&] {
    spec.poems = 5000;
    return make_synthetic_corpus(spec);
  }();
  Vocabulary vocab = Vocabulary::build(corpus);
  NGramModel fwd = train_ngram(encode_corpus(corpus, Direction::forward, vocab), 3);

  SamplerConfig cfg;
  cfg.rng_seed = 31;
  int parsed = 0;
  const int samples = 500;
  for (int attempt = 0; attempt < samples; ++attempt) {
    Rng rng(derive_seed(cfg.rng_seed, static_cast<std::uint64_t>(attempt)));
    EncodedSequence seq = generate_forward(fwd, cfg, rng);
    if (std::holds_alternative<Poem>(parse_generation(seq, vocab))) ++parsed;
  }
  CHECK(parsed >= samples * 80 / 100);
}

TEST_CASE("two-stage rhymes better than forward on the tuned corpus") {
  TrainedPair pair = train_pair(5000);
  PronunciationDictionary dict =
      PronunciationDictionary::load(test_data_dir() / "prondict_fixture.txt");
  SamplerConfig cfg;
  cfg.max_tokens = 80;

  auto collect = [&](GenerationMode mode, std::uint64_t seed) {
    SamplerConfig mode_cfg = cfg;
    mode_cfg.rng_seed = seed;
    std::vector<Poem> poems;
    for (int attempt = 0; poems.size() < 200 && attempt < 20000; ++attempt) {
      GenerationAttempt a =
          run_attempt(mode, &pair.forward, &pair.reverse, {}, mode_cfg,
                      pair.vocab, attempt);
      if (a.poem) poems.push_back(std::move(*a.poem));
    }
    return poems;
  };

  std::vector<Poem> fwd_poems = collect(GenerationMode::forward, 21);
  std::vector<Poem> two_poems = collect(GenerationMode::two_stage, 22);
  REQUIRE(fwd_poems.size() == 200);
  REQUIRE(two_poems.size() == 200);
  CHECK(corpus_rhyme_distance(two_poems, dict) <
        corpus_rhyme_distance(fwd_poems, dict));
}

TEST_CASE("sampler config invariants are enforced") {
  TrainedPair pair = train_pair(50);
  SamplerConfig bad_temperature;
  bad_temperature.temperature = 0.0;
  Rng rng(1);
  CHECK_THROWS_AS(generate_forward(pair.forward, bad_temperature, rng),
                  std::invalid_argument);

  SamplerConfig short_budget;
  short_budget.max_tokens = 9;
  CHECK_THROWS_AS(generate_forward(pair.forward, short_budget, rng),
                  std::invalid_argument);
}

TEST_CASE("two-stage failures carry their stage tag") {
  TrainedPair pair = train_pair(100);
  // Ten tokens is not enough for the six-token first line plus its
  // separator to terminate cleanly with lines 2-5 behind it, so the
  // reverse stage cannot finish.
  SamplerConfig cramped;
  cramped.max_tokens = 10;
  cramped.rng_seed = 9;
  ParseResult result =
      generate_two_stage(pair.forward, pair.reverse, cramped, pair.vocab);
  REQUIRE(std::holds_alternative<ParseFailure>(result));
  const auto& failure = std::get<ParseFailure>(result);
  CHECK((failure.stage == "forward" || failure.stage == "reverse"));
}

TEST_CASE("attempt records round trip through the jsonl file") {
  TrainedPair pair = train_pair(100);
  SamplerConfig cfg;
  cfg.rng_seed = 5;
  std::vector<AttemptRecord> records;
  for (int attempt = 0; attempt < 20; ++attempt) {
    records.push_back(run_attempt(GenerationMode::two_stage, &pair.forward,
                                  &pair.reverse, {}, cfg, pair.vocab, attempt)
                          .record);
  }
  auto path = std::filesystem::temp_directory_path() / "limerick_attempts.jsonl";
  write_attempts_file(path, records);
  std::vector<AttemptRecord> loaded = read_attempts_file(path);
  REQUIRE(loaded.size() == records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(loaded[i].attempt_id == records[i].attempt_id);
    CHECK(loaded[i].parsed == records[i].parsed);
    CHECK(loaded[i].lines == records[i].lines);
    CHECK(loaded[i].rng_seed == records[i].rng_seed);
    CHECK(loaded[i].failure_reason == records[i].failure_reason);
  }
}
