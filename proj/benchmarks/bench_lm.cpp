// Apache License, Version 2.0, refer to LICENSE.txt

#include <benchmark/benchmark.h>

#include "fixtures.hpp"
#include "limerick/generation.hpp"
#include "limerick/lm.hpp"

using namespace limerick;
using namespace limerick::testing;

namespace {

struct LmSetup {
  Vocabulary vocab;
  std::vector<EncodedSequence> encoded;
  NGramModel model;

  static const LmSetup& instance() {
    static LmSetup setup = [] {
      SyntheticCorpusSpec spec;
      spec.poems = 2000;
      std::vector<Poem> corpus = make_synthetic_corpus(spec);
      Vocabulary vocab = Vocabulary::build(corpus);
      auto encoded = encode_corpus(corpus, Direction::forward, vocab);
      NGramModel model = train_ngram(encoded, 3);
      return LmSetup{std::move(vocab), std::move(encoded), std::move(model)};
    }();
    return setup;
  }
};

void BM_TrainOrder3(benchmark::State& state) {
  const auto& setup = LmSetup::instance();
  for (auto _ : state) {
    NGramModel model = train_ngram(setup.encoded, 3);
    benchmark::DoNotOptimize(model);
  }
  state.SetItemsProcessed(state.iterations() *
                          static_cast<long>(setup.encoded.size()));
}
BENCHMARK(BM_TrainOrder3)->Unit(benchmark::kMillisecond);

void BM_NextTokenDist(benchmark::State& state) {
  const auto& setup = LmSetup::instance();
  std::vector<TokenId> context{Vocabulary::kBos, 12};
  for (auto _ : state) {
    benchmark::DoNotOptimize(setup.model.next_token_dist(context));
  }
}
BENCHMARK(BM_NextTokenDist);

void BM_SequenceNll(benchmark::State& state) {
  const auto& setup = LmSetup::instance();
  std::size_t index = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        sequence_nll(setup.model, setup.encoded[index]));
    index = (index + 1) % setup.encoded.size();
  }
}
BENCHMARK(BM_SequenceNll);

void BM_TwoStageAttempt(benchmark::State& state) {
  SyntheticCorpusSpec spec;
  spec.poems = 2000;
  std::vector<Poem> corpus = make_synthetic_corpus(spec);
  Vocabulary vocab = Vocabulary::build(corpus);
  NGramModel fwd =
      train_ngram(encode_corpus(corpus, Direction::forward, vocab), 3);
  NGramModel rev =
      train_ngram(encode_corpus(corpus, Direction::reverse, vocab), 3);
  SamplerConfig cfg;
  cfg.max_tokens = 80;
  int attempt = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_attempt(GenerationMode::two_stage, &fwd,
                                         &rev, {}, cfg, vocab, attempt++));
  }
}
BENCHMARK(BM_TwoStageAttempt);

}  // namespace
