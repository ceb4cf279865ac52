// Apache License, Version 2.0, refer to LICENSE.txt
//
// Subject-continuity metrics: noun extraction through an ontology graph,
// embedding-centroid distance statistics, and average pairwise path
// similarity between noun senses.

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "limerick/corpus.hpp"

namespace limerick {

struct NoEmbeddedNounsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Text embedding file: one line per word, "word v1 v2 ... vk".
class EmbeddingTable {
 public:
  static EmbeddingTable load(const std::filesystem::path& path);

  std::size_t dimension() const { return dimension_; }
  std::size_t size() const { return vectors_.size(); }
  const std::vector<double>* lookup(std::string_view word) const;

  void add(std::string_view word, std::vector<double> vector);

 private:
  std::size_t dimension_ = 0;
  std::unordered_map<std::string, std::vector<double>> vectors_;
};

using SenseId = std::uint32_t;

/// Undirected word-sense graph. Loadable from either native WordNet
/// database files (a directory holding index.noun + data.noun) or a
/// simplified single-file TSV where two-column lines are lemma entries
/// {word, sense} and three-column lines are edges {sense, sense,
/// relation}. Shortest-path queries are memoized.
class OntologyGraph {
 public:
  static OntologyGraph load(const std::filesystem::path& path);
  static OntologyGraph load_tsv(const std::filesystem::path& path);
  static OntologyGraph load_wordnet(const std::filesystem::path& dir);

  bool is_noun(std::string_view word) const;
  std::span<const SenseId> senses(std::string_view word) const;
  std::size_t sense_count() const { return adjacency_.size(); }
  std::size_t lemma_count() const { return lemmas_.size(); }

  /// Edge count of the shortest path, or empty when disconnected.
  std::optional<int> shortest_path(SenseId a, SenseId b) const;

  SenseId intern_sense(std::string_view name);
  void add_edge(SenseId a, SenseId b);
  void add_lemma(std::string_view word, SenseId sense);

 private:
  struct PathCache {
    std::mutex mutex;
    std::unordered_map<std::uint64_t, std::optional<int>> entries;
  };

  std::unordered_map<std::string, SenseId> sense_ids_;
  std::vector<std::vector<SenseId>> adjacency_;
  std::unordered_map<std::string, std::vector<SenseId>> lemmas_;
  std::unique_ptr<PathCache> path_cache_ = std::make_unique<PathCache>();
};

/// Tokens with at least one noun sense, stopwords excluded; order kept,
/// duplicates kept (callers dedup where the metric wants it).
std::vector<std::string> extract_nouns(const Poem& poem,
                                       const OntologyGraph& ontology);

bool is_stopword(std::string_view word);

/// Dimension-wise mean of the embedded nouns; OOV nouns are skipped.
std::vector<double> centroid(std::span<const std::string> nouns,
                             const EmbeddingTable& emb);

struct CentroidStats {
  double mean = 0.0;
  double stddev = 0.0;  // population
  std::vector<double> distances;
  std::vector<std::string> oov_nouns;
};

/// L2 distances from each embedded noun to the centroid (squared mode
/// available for comparison experiments).
CentroidStats centroid_distances(std::span<const std::string> nouns,
                                 const EmbeddingTable& emb,
                                 bool squared = false);

/// max over sense pairs of 1/(1+d); 1.0 for a shared sense, empty when
/// no connected sense pair exists.
std::optional<double> path_similarity(std::string_view w1,
                                      std::string_view w2,
                                      const OntologyGraph& graph);

struct PairwiseSimilarity {
  std::optional<double> value;  // empty when fewer than two distinct nouns
  bool had_disconnected_pair = false;
};

/// Mean path similarity over unordered pairs of distinct nouns;
/// disconnected pairs contribute zero and raise the flag.
PairwiseSimilarity avg_pairwise_similarity(std::span<const std::string> nouns,
                                           const OntologyGraph& graph);

struct ContinuityReport {
  std::string poem_id;
  std::vector<std::string> nouns;
  double centroid_mean = 0.0;
  double centroid_std = 0.0;
  std::optional<double> ontology_avg_similarity;
  bool single_noun = false;
  bool no_nouns = false;
  bool had_disconnected_pair = false;
  std::vector<std::string> oov_nouns;
};

ContinuityReport continuity_report(const Poem& poem,
                                   const OntologyGraph& ontology,
                                   const EmbeddingTable& emb);

}  // namespace limerick
