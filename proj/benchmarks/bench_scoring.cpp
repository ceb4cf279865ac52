// Apache License, Version 2.0, refer to LICENSE.txt

#include <benchmark/benchmark.h>

#include <filesystem>

#include "fixtures.hpp"
#include "limerick/continuity.hpp"
#include "limerick/pipeline.hpp"
#include "limerick/rhyme.hpp"

using namespace limerick;
using namespace limerick::testing;

namespace {

struct ScoringSetup {
  std::vector<Poem> poems;
  PronunciationDictionary dict;
  OntologyGraph ontology;
  EmbeddingTable embeddings;

  static const ScoringSetup& instance() {
    static ScoringSetup setup = [] {
      SyntheticCorpusSpec spec;
      spec.poems = 500;
      auto emb_path = std::filesystem::temp_directory_path() /
                      "limerick_bench_embeddings.txt";
      write_hash_embeddings(emb_path, synthetic_lexicon(), 8);
      return ScoringSetup{
          make_synthetic_corpus(spec),
          PronunciationDictionary::load(test_data_dir() /
                                        "prondict_fixture.txt"),
          OntologyGraph::load(test_data_dir() / "ontology_fixture.tsv"),
          EmbeddingTable::load(emb_path)};
    }();
    return setup;
  }
};

void BM_RhymeDistance(benchmark::State& state) {
  const auto& setup = ScoringSetup::instance();
  std::size_t index = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        rhyme_distance(setup.poems[index], setup.dict));
    index = (index + 1) % setup.poems.size();
  }
}
BENCHMARK(BM_RhymeDistance);

void BM_Ttr(benchmark::State& state) {
  const auto& setup = ScoringSetup::instance();
  std::size_t index = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(ttr(setup.poems[index]));
    index = (index + 1) % setup.poems.size();
  }
}
BENCHMARK(BM_Ttr);

void BM_ContinuityReport(benchmark::State& state) {
  const auto& setup = ScoringSetup::instance();
  std::size_t index = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(continuity_report(
        setup.poems[index], setup.ontology, setup.embeddings));
    index = (index + 1) % setup.poems.size();
  }
}
BENCHMARK(BM_ContinuityReport);

void BM_PathSimilarityCold(benchmark::State& state) {
  const auto& setup = ScoringSetup::instance();
  for (auto _ : state) {
    state.PauseTiming();
    OntologyGraph graph =
        OntologyGraph::load(test_data_dir() / "ontology_fixture.tsv");
    state.ResumeTiming();
    benchmark::DoNotOptimize(path_similarity("dog", "gold", graph));
  }
}
BENCHMARK(BM_PathSimilarityCold);

}  // namespace

BENCHMARK_MAIN();
