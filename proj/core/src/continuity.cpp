// Apache License, Version 2.0, refer to LICENSE.txt

#include "limerick/continuity.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <deque>
#include <fstream>
#include <sstream>

namespace limerick {

namespace {

std::string lowercased(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return out;
}

const std::unordered_set<std::string>& stopword_set() {
  static const std::unordered_set<std::string> kStopwords = {
      "a",    "an",   "and",  "are",   "as",    "at",    "be",    "but",
      "by",   "did",  "do",   "for",   "from",  "had",   "has",   "have",
      "he",   "her",  "him",  "his",   "i",     "if",    "in",    "is",
      "it",   "its",  "me",   "my",    "no",    "nor",   "not",   "of",
      "on",   "or",   "our",  "she",   "so",    "that",  "the",   "their",
      "them", "then", "they", "this",  "to",    "was",   "we",    "were",
      "when", "where","which","while", "who",   "will",  "with",  "you",
      "your", "out",  "up",   "down",  "over",  "under", "into",  "once",
      "all",  "some", "just", "there", "here",  "what",  "than",  "too"};
  return kStopwords;
}

}  // namespace

bool is_stopword(std::string_view word) {
  return stopword_set().count(lowercased(word)) > 0;
}

EmbeddingTable EmbeddingTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open embedding file: " + path.string());
  EmbeddingTable table;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream parts(line);
    std::string word;
    parts >> word;
    std::vector<double> vec;
    double v = 0.0;
    while (parts >> v) vec.push_back(v);
    if (word.empty() || vec.empty()) {
      throw FormatError("embedding file line " + std::to_string(line_no) +
                        ": expected word followed by reals");
    }
    if (table.dimension_ != 0 && vec.size() != table.dimension_) {
      throw FormatError("embedding file line " + std::to_string(line_no) +
                        ": dimension mismatch");
    }
    table.add(word, std::move(vec));
  }
  return table;
}

void EmbeddingTable::add(std::string_view word, std::vector<double> vector) {
  if (dimension_ == 0) dimension_ = vector.size();
  vectors_[lowercased(word)] = std::move(vector);
}

const std::vector<double>* EmbeddingTable::lookup(
    std::string_view word) const {
  auto it = vectors_.find(lowercased(word));
  return it == vectors_.end() ? nullptr : &it->second;
}

SenseId OntologyGraph::intern_sense(std::string_view name) {
  auto [it, inserted] =
      sense_ids_.emplace(std::string(name),
                         static_cast<SenseId>(adjacency_.size()));
  if (inserted) adjacency_.emplace_back();
  return it->second;
}

void OntologyGraph::add_edge(SenseId a, SenseId b) {
  if (a == b) return;
  auto& na = adjacency_[a];
  if (std::find(na.begin(), na.end(), b) == na.end()) na.push_back(b);
  auto& nb = adjacency_[b];
  if (std::find(nb.begin(), nb.end(), a) == nb.end()) nb.push_back(a);
}

void OntologyGraph::add_lemma(std::string_view word, SenseId sense) {
  auto& senses = lemmas_[lowercased(word)];
  if (std::find(senses.begin(), senses.end(), sense) == senses.end()) {
    senses.push_back(sense);
  }
}

bool OntologyGraph::is_noun(std::string_view word) const {
  return lemmas_.find(lowercased(word)) != lemmas_.end();
}

std::span<const SenseId> OntologyGraph::senses(std::string_view word) const {
  auto it = lemmas_.find(lowercased(word));
  if (it == lemmas_.end()) return {};
  return it->second;
}

std::optional<int> OntologyGraph::shortest_path(SenseId a, SenseId b) const {
  if (a >= adjacency_.size() || b >= adjacency_.size()) return std::nullopt;
  if (a == b) return 0;
  std::uint64_t key = a < b
                          ? (static_cast<std::uint64_t>(a) << 32) | b
                          : (static_cast<std::uint64_t>(b) << 32) | a;
  {
    std::lock_guard<std::mutex> lock(path_cache_->mutex);
    auto it = path_cache_->entries.find(key);
    if (it != path_cache_->entries.end()) return it->second;
  }

  // Plain BFS; fixture-scale graphs make this cheap, and results memoize.
  std::vector<int> dist(adjacency_.size(), -1);
  std::deque<SenseId> queue;
  dist[a] = 0;
  queue.push_back(a);
  std::optional<int> result;
  while (!queue.empty()) {
    SenseId node = queue.front();
    queue.pop_front();
    if (node == b) {
      result = dist[node];
      break;
    }
    for (SenseId next : adjacency_[node]) {
      if (dist[next] < 0) {
        dist[next] = dist[node] + 1;
        queue.push_back(next);
      }
    }
  }
  std::lock_guard<std::mutex> lock(path_cache_->mutex);
  path_cache_->entries[key] = result;
  return result;
}

OntologyGraph OntologyGraph::load(const std::filesystem::path& path) {
  if (std::filesystem::is_directory(path)) return load_wordnet(path);
  return load_tsv(path);
}

OntologyGraph OntologyGraph::load_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open ontology file: " + path.string());
  OntologyGraph graph;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (start <= line.size()) {
      std::size_t tab = line.find('\t', start);
      if (tab == std::string::npos) {
        fields.push_back(line.substr(start));
        break;
      }
      fields.push_back(line.substr(start, tab - start));
      start = tab + 1;
    }
    if (fields.size() == 2) {
      graph.add_lemma(fields[0], graph.intern_sense(fields[1]));
    } else if (fields.size() == 3) {
      graph.add_edge(graph.intern_sense(fields[0]),
                     graph.intern_sense(fields[1]));
    } else {
      throw FormatError("ontology file line " + std::to_string(line_no) +
                        ": expected 2 (lemma) or 3 (edge) tab-separated "
                        "fields");
    }
  }
  return graph;
}

OntologyGraph OntologyGraph::load_wordnet(const std::filesystem::path& dir) {
  std::filesystem::path data_path = dir / "data.noun";
  std::ifstream data(data_path);
  if (!data) {
    throw FormatError("cannot open WordNet data file: " + data_path.string());
  }
  OntologyGraph graph;
  std::string line;
  while (std::getline(data, line)) {
    if (line.empty() || line[0] == ' ') continue;  // license header block
    std::istringstream parts(line);
    std::string offset, lex_filenum, ss_type;
    parts >> offset >> lex_filenum >> ss_type;
    if (ss_type != "n") continue;
    SenseId synset = graph.intern_sense(offset);

    int word_count = 0;
    parts >> std::hex >> word_count >> std::dec;
    for (int i = 0; i < word_count; ++i) {
      std::string word, lex_id;
      parts >> word >> lex_id;
      std::replace(word.begin(), word.end(), '_', ' ');
      graph.add_lemma(word, synset);
    }
    int ptr_count = 0;
    parts >> ptr_count;
    for (int i = 0; i < ptr_count; ++i) {
      std::string symbol, target, pos, source_target;
      parts >> symbol >> target >> pos >> source_target;
      if (pos != "n") continue;
      // Hypernym/hyponym pointers; instance variants included.
      if (symbol == "@" || symbol == "~" || symbol == "@i" || symbol == "~i") {
        graph.add_edge(synset, graph.intern_sense(target));
      }
    }
  }
  return graph;
}

std::vector<std::string> extract_nouns(const Poem& poem,
                                       const OntologyGraph& ontology) {
  std::vector<std::string> nouns;
  for (const auto& line : poem.lines) {
    for (const std::string& token : line) {
      std::string word = lowercased(token);
      if (is_stopword(word)) continue;
      if (ontology.is_noun(word)) nouns.push_back(word);
    }
  }
  return nouns;
}

std::vector<double> centroid(std::span<const std::string> nouns,
                             const EmbeddingTable& emb) {
  std::vector<double> sum(emb.dimension(), 0.0);
  std::size_t embedded = 0;
  for (const std::string& noun : nouns) {
    const std::vector<double>* vec = emb.lookup(noun);
    if (!vec) continue;
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += (*vec)[i];
    ++embedded;
  }
  if (embedded == 0) {
    throw NoEmbeddedNounsError("no noun has an embedding");
  }
  for (double& v : sum) v /= static_cast<double>(embedded);
  return sum;
}

CentroidStats centroid_distances(std::span<const std::string> nouns,
                                 const EmbeddingTable& emb, bool squared) {
  CentroidStats stats;
  std::vector<const std::vector<double>*> vectors;
  for (const std::string& noun : nouns) {
    const std::vector<double>* vec = emb.lookup(noun);
    if (vec) {
      vectors.push_back(vec);
    } else {
      stats.oov_nouns.push_back(noun);
    }
  }
  if (vectors.empty()) {
    throw NoEmbeddedNounsError("no noun has an embedding");
  }
  std::vector<double> center = centroid(nouns, emb);
  for (const auto* vec : vectors) {
    double sq = 0.0;
    for (std::size_t i = 0; i < center.size(); ++i) {
      double d = center[i] - (*vec)[i];
      sq += d * d;
    }
    stats.distances.push_back(squared ? sq : std::sqrt(sq));
  }
  double mean = 0.0;
  for (double d : stats.distances) mean += d;
  mean /= static_cast<double>(stats.distances.size());
  double var = 0.0;
  for (double d : stats.distances) var += (d - mean) * (d - mean);
  var /= static_cast<double>(stats.distances.size());
  stats.mean = mean;
  stats.stddev = std::sqrt(var);
  return stats;
}

std::optional<double> path_similarity(std::string_view w1,
                                      std::string_view w2,
                                      const OntologyGraph& graph) {
  auto senses1 = graph.senses(w1);
  auto senses2 = graph.senses(w2);
  std::optional<double> best;
  for (SenseId a : senses1) {
    for (SenseId b : senses2) {
      std::optional<int> d = graph.shortest_path(a, b);
      if (!d) continue;
      double sim = 1.0 / (1.0 + static_cast<double>(*d));
      if (!best || sim > *best) best = sim;
    }
  }
  return best;
}

PairwiseSimilarity avg_pairwise_similarity(std::span<const std::string> nouns,
                                           const OntologyGraph& graph) {
  std::vector<std::string> distinct;
  for (const std::string& noun : nouns) {
    if (std::find(distinct.begin(), distinct.end(), noun) == distinct.end()) {
      distinct.push_back(noun);
    }
  }
  PairwiseSimilarity result;
  if (distinct.size() < 2) return result;
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < distinct.size(); ++i) {
    for (std::size_t j = i + 1; j < distinct.size(); ++j) {
      std::optional<double> sim =
          path_similarity(distinct[i], distinct[j], graph);
      if (sim) {
        total += *sim;
      } else {
        result.had_disconnected_pair = true;
      }
      ++pairs;
    }
  }
  result.value = total / static_cast<double>(pairs);
  return result;
}

ContinuityReport continuity_report(const Poem& poem,
                                   const OntologyGraph& ontology,
                                   const EmbeddingTable& emb) {
  ContinuityReport report;
  report.poem_id = poem.id;
  report.nouns = extract_nouns(poem, ontology);

  std::vector<std::string> distinct;
  for (const std::string& n : report.nouns) {
    if (std::find(distinct.begin(), distinct.end(), n) == distinct.end()) {
      distinct.push_back(n);
    }
  }
  report.no_nouns = report.nouns.empty();
  report.single_noun = distinct.size() == 1;

  if (!report.nouns.empty()) {
    try {
      CentroidStats stats = centroid_distances(report.nouns, emb);
      report.centroid_mean = stats.mean;
      report.centroid_std = stats.stddev;
      report.oov_nouns = std::move(stats.oov_nouns);
    } catch (const NoEmbeddedNounsError&) {
      report.oov_nouns = report.nouns;
    }
  }
  PairwiseSimilarity pairwise = avg_pairwise_similarity(report.nouns, ontology);
  report.ontology_avg_similarity = pairwise.value;
  report.had_disconnected_pair = pairwise.had_disconnected_pair;
  return report;
}

}  // namespace limerick
