// Apache License, Version 2.0, refer to LICENSE.txt

#include "fixtures.hpp"

#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace limerick::testing {

namespace {

// Rhyme families. The A family ("-ide") closes lines 1, 2 and 5 of every
// poem; each position draws from its own subset so a reversed line start
// identifies its position. The B families close lines 3 and 4, subset
// split the same way.
const std::vector<std::string> kA1 = {"side", "tide", "ride"};
const std::vector<std::string> kA2 = {"hide", "bride", "slide"};
const std::vector<std::string> kA5 = {"pride", "glide", "guide"};

struct BFamily {
  std::vector<std::string> line3;
  std::vector<std::string> line4;
};

const std::vector<BFamily> kBFamilies = {
    {{"sail", "tail", "mail"}, {"rail", "trail", "snail"}},
    {{"gold", "bold", "cold"}, {"fold", "hold", "told"}},
    {{"day", "way", "play"}, {"stay", "gray", "clay"}},
    {{"green", "queen", "keen"}, {"seen", "screen", "bean"}},
    {{"helm", "elm", "realm"}, {"whelm", "overwhelm", "underwhelm"}},
    {{"moon", "soon", "spoon"}, {"noon", "balloon", "maroon"}},
    {{"shore", "store", "more"}, {"core", "bore", "snore"}},
    {{"night", "light", "bright"}, {"sight", "flight", "tight"}},
    {{"lake", "cake", "snake"}, {"wake", "brake", "flake"}},
    {{"bell", "shell", "well"}, {"spell", "dwell", "swell"}},
    {{"rain", "chain", "plain"}, {"train", "brain", "grain"}},
    {{"snow", "glow", "flow"}, {"crow", "slow", "grow"}},
};

// Cue words. Line tags are constant where the following rhyme family is
// fixed by the scheme (lines 2 and 5 rhyme with line 1's family, and the
// poem ends after line 5); the per-family tags carry the B family.
const std::string kTagLine1 = "once";
const std::string kTagLine4 = "amid";
const std::string kTagLine5 = "thus";
const std::vector<std::string> kTagLine2 = {
    "about", "above",  "across", "after",  "against", "along",
    "among", "around", "before", "behind", "below",   "between"};
const std::vector<std::string> kTagLine3 = {
    "during",  "except", "through", "unless", "until",   "toward",
    "despite", "within", "without", "beside", "besides", "underneath"};

const std::vector<std::string> kIntro1 = {"young", "old", "brave"};
const std::vector<std::string> kIntro2 = {"quite", "rather", "truly"};
const std::vector<std::string> kIntro3 = {"near", "past", "round"};
const std::vector<std::string> kIntro4 = {"upon", "beneath", "beyond"};
const std::vector<std::string> kIntro5 = {"still", "yet", "ever"};
// One mid word per long-line position. A reversed line crosses the
// shared-filler gap before it reaches its cue words; the mid word is the
// first token after the gap, and keeping it position-specific means a
// drifted sample either stays within the A family or fails to parse.
const std::string kMid1 = "my";
const std::string kMid2 = "her";
const std::string kMid4 = "the";
const std::string kMid5 = "its";
const std::vector<std::string> kFillers = {"of", "in", "and",
                                           "with", "for", "to"};

template <typename Rng>
const std::string& pick(const std::vector<std::string>& words, Rng& rng) {
  return words[rng() % words.size()];
}

template <typename Rng>
std::vector<std::string> long_line(const std::string& tag,
                                   const std::vector<std::string>& intro,
                                   const std::string& mid,
                                   const std::string& ender, Rng& rng) {
  return {tag, pick(intro, rng), mid, pick(kFillers, rng),
          pick(kFillers, rng), ender};
}

}  // namespace

std::vector<Poem> make_synthetic_corpus(const SyntheticCorpusSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  auto coin = [&](double p) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53 < p;
  };

  std::vector<Poem> poems;
  poems.reserve(static_cast<std::size_t>(spec.poems));
  for (int i = 0; i < spec.poems; ++i) {
    const BFamily& family = kBFamilies[rng() % kBFamilies.size()];
    std::size_t j = 0;
    for (; j < kBFamilies.size(); ++j) {
      if (&kBFamilies[j] == &family) break;
    }
    Poem poem;
    poem.id = "synthetic-" + std::to_string(i);

    poem.lines.push_back(
        long_line(kTagLine1, kIntro1, kMid1, pick(kA1, rng), rng));

    if (coin(spec.long_line2_fraction)) {
      poem.lines.push_back(
          long_line(kTagLine2[j], kIntro2, kMid2, pick(kA2, rng), rng));
    } else {
      poem.lines.push_back({kTagLine2[j], pick(kA2, rng)});
    }

    if (coin(spec.long_line3_fraction)) {
      poem.lines.push_back(long_line(kTagLine3[j], kIntro3, kMid2,
                                     pick(family.line3, rng), rng));
    } else {
      poem.lines.push_back({kTagLine3[j], pick(family.line3, rng)});
    }

    if (coin(spec.short_line4_fraction)) {
      poem.lines.push_back({kTagLine4, pick(family.line4, rng)});
    } else {
      poem.lines.push_back(
          long_line(kTagLine4, kIntro4, kMid4, pick(family.line4, rng), rng));
    }
    if (coin(spec.short_line5_fraction)) {
      poem.lines.push_back({kTagLine5, pick(kA5, rng)});
    } else {
      poem.lines.push_back(
          long_line(kTagLine5, kIntro5, kMid5, pick(kA5, rng), rng));
    }
    poems.push_back(std::move(poem));
  }
  return poems;
}

std::vector<std::string> synthetic_lexicon() {
  std::set<std::string> words;
  auto add_all = [&](const std::vector<std::string>& vs) {
    words.insert(vs.begin(), vs.end());
  };
  add_all(kA1);
  add_all(kA2);
  add_all(kA5);
  for (const BFamily& family : kBFamilies) {
    add_all(family.line3);
    add_all(family.line4);
  }
  add_all(kTagLine2);
  add_all(kTagLine3);
  add_all(kIntro1);
  add_all(kIntro2);
  add_all(kIntro3);
  add_all(kIntro4);
  add_all(kIntro5);
  add_all(kFillers);
  words.insert(kTagLine1);
  words.insert(kTagLine4);
  words.insert(kTagLine5);
  words.insert({kMid1, kMid2, kMid4, kMid5});
  return {words.begin(), words.end()};
}

std::string benthic_limerick_text() {
  return "cap'n jack was washed over the side.\n"
         "his crew searched but found not hair nor hide.\n"
         "no longer the helm,\n"
         "but the deep benthic realm,\n"
         "is where jack will forever reside.\n";
}

void write_hash_embeddings(const std::filesystem::path& path,
                           const std::vector<std::string>& words,
                           std::size_t dimension) {
  std::ofstream out(path);
  for (const std::string& word : words) {
    std::uint64_t h = 1469598103934665603ull;
    for (char c : word) {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ull;
    }
    out << word;
    std::mt19937_64 rng(h);
    for (std::size_t d = 0; d < dimension; ++d) {
      double v = static_cast<double>(rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0;
      out << ' ' << v;
    }
    out << '\n';
  }
}

std::filesystem::path test_data_dir() {
#ifdef LIMERICK_TEST_DATA_DIR
  return std::filesystem::path(LIMERICK_TEST_DATA_DIR);
#else
  return std::filesystem::path("tests/data");
#endif
}

}  // namespace limerick::testing
