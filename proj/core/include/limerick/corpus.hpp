// Apache License, Version 2.0, refer to LICENSE.txt
//
// Poem parsing, vocabulary handling and the forward/reverse sequence
// encoding used by the language models. A poem is always five lines; the
// reverse encoding flips the tokens of each line in place while keeping
// the line order, so BOS/LINE/EOS separators sit at identical positions
// in both directions.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace limerick {

using TokenId = std::uint32_t;

enum class Direction { forward, reverse };

std::string_view to_string(Direction d);
Direction direction_from_string(std::string_view s);

struct LineCountError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EmptyLineError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MalformedSequenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EmptyCorpusError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Five ordered lines of word/punctuation tokens.
struct Poem {
  enum class Source { corpus, generated };

  std::vector<std::vector<std::string>> lines;
  std::string id;
  Source source = Source::corpus;

  bool operator==(const Poem& other) const { return lines == other.lines; }
};

/// Token ids 0..3 are reserved; everything else maps words 1:1.
class Vocabulary {
 public:
  static constexpr TokenId kBos = 0;
  static constexpr TokenId kLine = 1;
  static constexpr TokenId kEos = 2;
  static constexpr TokenId kUnk = 3;

  Vocabulary();

  // Word tokens are collected from the poems and stored sorted, so the
  // mapping is independent of corpus order.
  static Vocabulary build(std::span<const Poem> poems);

  static Vocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  TokenId id_of(std::string_view token) const;  // kUnk when absent
  const std::string& token_of(TokenId id) const;
  bool contains(std::string_view token) const;

  std::size_t size() const { return tokens_.size(); }
  std::span<const std::string> tokens() const { return tokens_; }

  /// FNV-1a over the ordered token list; used by the external LM handshake.
  std::uint64_t hash() const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

struct EncodedSequence {
  std::vector<TokenId> tokens;
  Direction direction = Direction::forward;

  bool operator==(const EncodedSequence& o) const {
    return tokens == o.tokens && direction == o.direction;
  }
};

/// Splits a raw five-line poem string into lowercased tokens. Punctuation
/// becomes standalone tokens; apostrophes and hyphens inside a word stay
/// attached ("cap'n" is one token).
Poem tokenize(std::string_view text, std::string id = "");

EncodedSequence encode(const Poem& poem, Direction direction,
                       const Vocabulary& vocab);

/// Exact inverse of encode for the sequence's own direction.
Poem decode(const EncodedSequence& seq, const Vocabulary& vocab);

/// Deterministic shuffle-split; validation gets round(n * val_fraction)
/// poems, at least one.
std::pair<std::vector<Poem>, std::vector<Poem>> split_corpus(
    std::vector<Poem> poems, double val_fraction, std::uint64_t seed);

struct CorpusFile {
  std::vector<Poem> poems;
  int skipped_blocks = 0;
};

/// Reads a corpus of blank-line separated five-line blocks. Blocks with a
/// wrong line count are skipped and counted, not fatal.
CorpusFile read_corpus_file(const std::filesystem::path& path);

void write_corpus_file(const std::filesystem::path& path,
                       std::span<const Poem> poems);

std::vector<EncodedSequence> encode_corpus(std::span<const Poem> poems,
                                           Direction direction,
                                           const Vocabulary& vocab);

void write_encoded_file(const std::filesystem::path& path,
                        std::span<const EncodedSequence> seqs);
std::vector<EncodedSequence> read_encoded_file(
    const std::filesystem::path& path, Direction direction);

}  // namespace limerick
