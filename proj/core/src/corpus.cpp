// Apache License, Version 2.0, refer to LICENSE.txt

#include "limerick/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace limerick {

namespace {

const std::string kBosToken = "<BOS>";
const std::string kLineToken = "<LINE>";
const std::string kEosToken = "<EOS>";
const std::string kUnkToken = "<UNK>";

bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

// Apostrophe/hyphen glue two word characters together; anything else is
// punctuation and becomes its own token.
std::vector<std::string> tokenize_line(std::string_view line) {
  std::vector<std::string> tokens;
  std::string current;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (is_word_char(c)) {
      current.push_back(static_cast<char>(
          std::tolower(static_cast<unsigned char>(c))));
      continue;
    }
    if ((c == '\'' || c == '-') && !current.empty() && i + 1 < line.size() &&
        is_word_char(line[i + 1])) {
      current.push_back(c);
      continue;
    }
    if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
    if (!std::isspace(static_cast<unsigned char>(c))) {
      tokens.push_back(std::string(1, c));
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::string current;
  for (char c : text) {
    if (c == '\n') {
      lines.push_back(current);
      current.clear();
    } else if (c != '\r') {
      current.push_back(c);
    }
  }
  if (!current.empty()) lines.push_back(current);
  return lines;
}

bool is_blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](char c) {
    return std::isspace(static_cast<unsigned char>(c)) != 0;
  });
}

}  // namespace

std::string_view to_string(Direction d) {
  return d == Direction::forward ? "forward" : "reverse";
}

Direction direction_from_string(std::string_view s) {
  if (s == "forward") return Direction::forward;
  if (s == "reverse") return Direction::reverse;
  throw FormatError("unknown direction: " + std::string(s));
}

Vocabulary::Vocabulary() {
  tokens_ = {kBosToken, kLineToken, kEosToken, kUnkToken};
  for (TokenId i = 0; i < tokens_.size(); ++i) ids_[tokens_[i]] = i;
}

Vocabulary Vocabulary::build(std::span<const Poem> poems) {
  std::set<std::string> words;
  for (const Poem& poem : poems) {
    for (const auto& line : poem.lines) {
      words.insert(line.begin(), line.end());
    }
  }
  Vocabulary vocab;
  for (const std::string& w : words) {
    if (vocab.ids_.count(w) == 0) {
      vocab.ids_[w] = static_cast<TokenId>(vocab.tokens_.size());
      vocab.tokens_.push_back(w);
    }
  }
  return vocab;
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open vocabulary file: " + path.string());
  Vocabulary vocab;
  std::string line;
  TokenId index = 0;
  while (std::getline(in, line)) {
    if (index < 4) {
      if (line != vocab.tokens_[index]) {
        throw FormatError("vocabulary file " + path.string() +
                          ": reserved token mismatch at line " +
                          std::to_string(index + 1));
      }
    } else {
      if (line.empty()) {
        throw FormatError("vocabulary file " + path.string() +
                          ": empty token at line " + std::to_string(index + 1));
      }
      vocab.ids_[line] = index;
      vocab.tokens_.push_back(line);
    }
    ++index;
  }
  if (index < 4) {
    throw FormatError("vocabulary file " + path.string() +
                      ": missing reserved tokens");
  }
  return vocab;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write vocabulary file: " + path.string());
  for (const std::string& t : tokens_) out << t << '\n';
}

TokenId Vocabulary::id_of(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token_of(TokenId id) const {
  if (id >= tokens_.size()) {
    throw MalformedSequenceError("token id out of range: " +
                                 std::to_string(id));
  }
  return tokens_[id];
}

bool Vocabulary::contains(std::string_view token) const {
  return ids_.find(std::string(token)) != ids_.end();
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = 1469598103934665603ull;  // FNV offset basis
  for (const std::string& t : tokens_) {
    for (char c : t) {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ull;
    }
    h ^= '\n';
    h *= 1099511628211ull;
  }
  return h;
}

Poem tokenize(std::string_view text, std::string id) {
  std::vector<std::string> raw_lines = split_lines(text);
  // Ignore trailing blank lines but reject interior blanks via token check.
  while (!raw_lines.empty() && is_blank(raw_lines.back())) raw_lines.pop_back();
  if (raw_lines.size() != 5) {
    throw LineCountError("expected 5 lines, got " +
                         std::to_string(raw_lines.size()));
  }
  Poem poem;
  poem.id = std::move(id);
  for (const std::string& line : raw_lines) {
    std::vector<std::string> tokens = tokenize_line(line);
    if (tokens.empty()) throw EmptyLineError("poem contains an empty line");
    poem.lines.push_back(std::move(tokens));
  }
  return poem;
}

EncodedSequence encode(const Poem& poem, Direction direction,
                       const Vocabulary& vocab) {
  EncodedSequence seq;
  seq.direction = direction;
  seq.tokens.push_back(Vocabulary::kBos);
  for (std::size_t i = 0; i < poem.lines.size(); ++i) {
    if (i > 0) seq.tokens.push_back(Vocabulary::kLine);
    const auto& line = poem.lines[i];
    if (direction == Direction::forward) {
      for (const std::string& t : line) seq.tokens.push_back(vocab.id_of(t));
    } else {
      for (auto it = line.rbegin(); it != line.rend(); ++it) {
        seq.tokens.push_back(vocab.id_of(*it));
      }
    }
  }
  seq.tokens.push_back(Vocabulary::kEos);
  return seq;
}

Poem decode(const EncodedSequence& seq, const Vocabulary& vocab) {
  const auto& ids = seq.tokens;
  if (ids.empty() || ids.front() != Vocabulary::kBos) {
    throw MalformedSequenceError("sequence does not begin with BOS");
  }
  Poem poem;
  poem.source = Poem::Source::generated;
  std::vector<std::string> line;
  std::size_t separators = 0;
  bool saw_eos = false;
  for (std::size_t i = 1; i < ids.size(); ++i) {
    TokenId id = ids[i];
    if (id == Vocabulary::kEos) {
      saw_eos = true;
      break;  // trailing tokens past EOS are discarded
    }
    if (id == Vocabulary::kLine) {
      ++separators;
      poem.lines.push_back(std::move(line));
      line.clear();
      continue;
    }
    if (id == Vocabulary::kBos) {
      throw MalformedSequenceError("unexpected BOS inside sequence");
    }
    line.push_back(vocab.token_of(id));
  }
  if (!saw_eos) throw MalformedSequenceError("sequence has no EOS");
  poem.lines.push_back(std::move(line));
  if (separators != 4) {
    throw MalformedSequenceError("expected 4 line separators, got " +
                                 std::to_string(separators));
  }
  if (seq.direction == Direction::reverse) {
    for (auto& l : poem.lines) std::reverse(l.begin(), l.end());
  }
  for (const auto& l : poem.lines) {
    if (l.empty()) throw MalformedSequenceError("decoded poem has empty line");
  }
  return poem;
}

std::pair<std::vector<Poem>, std::vector<Poem>> split_corpus(
    std::vector<Poem> poems, double val_fraction, std::uint64_t seed) {
  if (poems.empty()) throw EmptyCorpusError("cannot split an empty corpus");
  if (!(val_fraction > 0.0 && val_fraction < 0.5)) {
    throw std::invalid_argument("val_fraction must lie in (0, 0.5)");
  }
  std::mt19937_64 rng(seed);
  // Fisher-Yates with our own draws, so the permutation is stable across
  // standard library implementations.
  for (std::size_t i = poems.size() - 1; i > 0; --i) {
    std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
    std::swap(poems[i], poems[j]);
  }
  std::size_t val_count = static_cast<std::size_t>(
      poems.size() * val_fraction + 0.5);
  val_count = std::max<std::size_t>(1, val_count);
  val_count = std::min(val_count, poems.size() - 1);
  std::vector<Poem> validation(poems.end() - static_cast<long>(val_count),
                               poems.end());
  poems.resize(poems.size() - val_count);
  return {std::move(poems), std::move(validation)};
}

CorpusFile read_corpus_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open corpus file: " + path.string());
  CorpusFile result;
  std::vector<std::string> block;
  int block_index = 0;
  std::string line;

  auto flush_block = [&]() {
    if (block.empty()) return;
    ++block_index;
    std::ostringstream text;
    for (const std::string& l : block) text << l << '\n';
    try {
      Poem poem = tokenize(text.str(), "corpus-" + std::to_string(block_index));
      result.poems.push_back(std::move(poem));
    } catch (const std::runtime_error&) {
      ++result.skipped_blocks;
    }
    block.clear();
  };

  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (is_blank(line)) {
      flush_block();
    } else {
      block.push_back(line);
    }
  }
  flush_block();
  return result;
}

void write_corpus_file(const std::filesystem::path& path,
                       std::span<const Poem> poems) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write corpus file: " + path.string());
  for (const Poem& poem : poems) {
    for (const auto& line : poem.lines) {
      for (std::size_t i = 0; i < line.size(); ++i) {
        if (i > 0) out << ' ';
        out << line[i];
      }
      out << '\n';
    }
    out << '\n';
  }
}

std::vector<EncodedSequence> encode_corpus(std::span<const Poem> poems,
                                           Direction direction,
                                           const Vocabulary& vocab) {
  std::vector<EncodedSequence> seqs;
  seqs.reserve(poems.size());
  for (const Poem& poem : poems) seqs.push_back(encode(poem, direction, vocab));
  return seqs;
}

void write_encoded_file(const std::filesystem::path& path,
                        std::span<const EncodedSequence> seqs) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write encoded file: " + path.string());
  for (const EncodedSequence& seq : seqs) {
    for (std::size_t i = 0; i < seq.tokens.size(); ++i) {
      if (i > 0) out << ' ';
      out << seq.tokens[i];
    }
    out << '\n';
  }
}

std::vector<EncodedSequence> read_encoded_file(
    const std::filesystem::path& path, Direction direction) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open encoded file: " + path.string());
  std::vector<EncodedSequence> seqs;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    EncodedSequence seq;
    seq.direction = direction;
    std::istringstream parts(line);
    std::uint64_t id = 0;
    while (parts >> id) seq.tokens.push_back(static_cast<TokenId>(id));
    seqs.push_back(std::move(seq));
  }
  return seqs;
}

}  // namespace limerick
