// Apache License, Version 2.0, refer to LICENSE.txt
//
// Pronunciation-dictionary rhyme detection and the AABBA rhyming
// distance. The distance averages four mismatch indicators over the line
// pairs (1,2), (3,4), (1,5), (2,5): zero means the poem rhymes the way a
// limerick should. (The source prose states the opposite polarity for R,
// but only the mismatch reading is consistent with the reported numbers,
// where rhyming models score near zero on a metric marked "lower is
// better".)

#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "limerick/corpus.hpp"

namespace limerick {

struct NoVowelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EmptyListError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Pronunciation = std::vector<std::string>;  // ARPAbet phonemes

/// CMU-format dictionary: ";;;" comments, entries "WORD  PH1 PH2 ...".
/// Variant entries "WORD(2)" merge under the base word; lookups are
/// case-insensitive.
class PronunciationDictionary {
 public:
  static PronunciationDictionary load(const std::filesystem::path& path);

  std::span<const Pronunciation> lookup(std::string_view word) const;
  bool contains(std::string_view word) const;
  std::size_t size() const { return entries_.size(); }
  std::vector<std::string> words() const;

  void add(std::string_view word, Pronunciation pron);

 private:
  std::unordered_map<std::string, std::vector<Pronunciation>> entries_;
};

/// Suffix from the last primary-stressed vowel (fallback: last vowel of
/// any stress) to the end, stress digits stripped.
std::vector<std::string> rhyme_part(const Pronunciation& pron);

struct RhymePolicy {
  bool strict_self_rhyme = false;  // when set, identical words never rhyme
};

/// True iff some pronunciation pair shares an identical rhyme part.
bool words_rhyme(std::string_view w1, std::string_view w2,
                 const PronunciationDictionary& dict, RhymePolicy policy = {});

struct RhymeReport {
  static constexpr std::array<std::pair<int, int>, 4> kPairs = {
      {{0, 1}, {2, 3}, {0, 4}, {1, 4}}};

  std::string poem_id;
  std::array<std::string, 5> rhyme_words;
  std::array<int, 4> indicators{};  // 0 = pair rhymes, 1 = mismatch
  double distance = 0.0;
  std::vector<std::string> oov_words;
};

/// Scores one poem. The rhyme word of a line is its last token containing
/// a letter; an out-of-dictionary rhyme word makes its pairs count as
/// mismatches and is reported.
RhymeReport rhyme_distance(const Poem& poem,
                           const PronunciationDictionary& dict,
                           RhymePolicy policy = {});

double corpus_rhyme_distance(std::span<const Poem> poems,
                             const PronunciationDictionary& dict,
                             RhymePolicy policy = {});

}  // namespace limerick
