// Apache License, Version 2.0, refer to LICENSE.txt

#include "limerick/rhyme.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

namespace limerick {

namespace {

std::string lowercased(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return out;
}

bool is_vowel_phoneme(const std::string& phoneme) {
  return !phoneme.empty() &&
         std::isdigit(static_cast<unsigned char>(phoneme.back())) != 0;
}

std::string strip_stress(const std::string& phoneme) {
  if (is_vowel_phoneme(phoneme)) return phoneme.substr(0, phoneme.size() - 1);
  return phoneme;
}

bool has_letter(const std::string& token) {
  return std::any_of(token.begin(), token.end(), [](unsigned char c) {
    return std::isalpha(c) != 0;
  });
}

}  // namespace

PronunciationDictionary PronunciationDictionary::load(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw FormatError("cannot open pronunciation dictionary: " +
                      path.string());
  }
  PronunciationDictionary dict;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.rfind(";;;", 0) == 0) continue;

    std::size_t ws = line.find_first_of(" \t");
    if (ws == std::string::npos) {
      throw FormatError("pronunciation dictionary line " +
                        std::to_string(line_no) + ": no phonemes");
    }
    std::string word = line.substr(0, ws);
    // "WORD(2)" and friends fold into the base word.
    std::size_t paren = word.find('(');
    if (paren != std::string::npos) word.resize(paren);
    if (word.empty()) {
      throw FormatError("pronunciation dictionary line " +
                        std::to_string(line_no) + ": empty word");
    }

    Pronunciation pron;
    std::size_t pos = ws;
    while (pos < line.size()) {
      while (pos < line.size() &&
             std::isspace(static_cast<unsigned char>(line[pos]))) {
        ++pos;
      }
      std::size_t start = pos;
      while (pos < line.size() &&
             !std::isspace(static_cast<unsigned char>(line[pos]))) {
        ++pos;
      }
      if (pos > start) pron.push_back(line.substr(start, pos - start));
    }
    if (pron.empty()) {
      throw FormatError("pronunciation dictionary line " +
                        std::to_string(line_no) + ": no phonemes");
    }
    dict.add(word, std::move(pron));
  }
  return dict;
}

void PronunciationDictionary::add(std::string_view word, Pronunciation pron) {
  entries_[lowercased(word)].push_back(std::move(pron));
}

std::span<const Pronunciation> PronunciationDictionary::lookup(
    std::string_view word) const {
  auto it = entries_.find(lowercased(word));
  if (it == entries_.end()) return {};
  return it->second;
}

bool PronunciationDictionary::contains(std::string_view word) const {
  return entries_.find(lowercased(word)) != entries_.end();
}

std::vector<std::string> PronunciationDictionary::words() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [word, prons] : entries_) out.push_back(word);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> rhyme_part(const Pronunciation& pron) {
  long primary = -1;
  long any_vowel = -1;
  for (long i = 0; i < static_cast<long>(pron.size()); ++i) {
    if (!is_vowel_phoneme(pron[static_cast<std::size_t>(i)])) continue;
    any_vowel = i;
    if (pron[static_cast<std::size_t>(i)].back() == '1') primary = i;
  }
  long start = primary >= 0 ? primary : any_vowel;
  if (start < 0) throw NoVowelError("pronunciation has no vowel");
  std::vector<std::string> part;
  for (std::size_t i = static_cast<std::size_t>(start); i < pron.size(); ++i) {
    part.push_back(strip_stress(pron[i]));
  }
  return part;
}

bool words_rhyme(std::string_view w1, std::string_view w2,
                 const PronunciationDictionary& dict, RhymePolicy policy) {
  if (policy.strict_self_rhyme && lowercased(w1) == lowercased(w2)) {
    return false;
  }
  auto prons1 = dict.lookup(w1);
  auto prons2 = dict.lookup(w2);
  for (const Pronunciation& p1 : prons1) {
    std::vector<std::string> part1;
    try {
      part1 = rhyme_part(p1);
    } catch (const NoVowelError&) {
      continue;
    }
    for (const Pronunciation& p2 : prons2) {
      try {
        if (part1 == rhyme_part(p2)) return true;
      } catch (const NoVowelError&) {
        continue;
      }
    }
  }
  return false;
}

RhymeReport rhyme_distance(const Poem& poem,
                           const PronunciationDictionary& dict,
                           RhymePolicy policy) {
  RhymeReport report;
  report.poem_id = poem.id;

  for (std::size_t i = 0; i < 5 && i < poem.lines.size(); ++i) {
    const auto& line = poem.lines[i];
    for (auto it = line.rbegin(); it != line.rend(); ++it) {
      if (has_letter(*it)) {
        report.rhyme_words[i] = lowercased(*it);
        break;
      }
    }
  }

  for (std::size_t p = 0; p < RhymeReport::kPairs.size(); ++p) {
    auto [a, b] = RhymeReport::kPairs[p];
    const std::string& wa = report.rhyme_words[static_cast<std::size_t>(a)];
    const std::string& wb = report.rhyme_words[static_cast<std::size_t>(b)];
    bool oov = false;
    for (const std::string& w : {wa, wb}) {
      if (w.empty() || !dict.contains(w)) {
        oov = true;
        if (!w.empty() &&
            std::find(report.oov_words.begin(), report.oov_words.end(), w) ==
                report.oov_words.end()) {
          report.oov_words.push_back(w);
        }
      }
    }
    bool rhymes = !oov && words_rhyme(wa, wb, dict, policy);
    report.indicators[p] = rhymes ? 0 : 1;
  }
  report.distance =
      (report.indicators[0] + report.indicators[1] + report.indicators[2] +
       report.indicators[3]) /
      4.0;
  return report;
}

double corpus_rhyme_distance(std::span<const Poem> poems,
                             const PronunciationDictionary& dict,
                             RhymePolicy policy) {
  if (poems.empty()) {
    throw EmptyListError("corpus rhyme distance needs at least one poem");
  }
  double total = 0.0;
  for (const Poem& poem : poems) {
    total += rhyme_distance(poem, dict, policy).distance;
  }
  return total / static_cast<double>(poems.size());
}

}  // namespace limerick
