// Apache License, Version 2.0, refer to LICENSE.txt
//
// Shared test fixtures: a deterministic synthetic limerick corpus with a
// controllable amount of structure, plus embedding-file helpers. The
// corpus is built from closed word families so that an order-3 model can
// learn the AABBA scheme from the reverse encoding: every line starts
// with a cue word that pins down what the next line must rhyme with,
// while the words right before each rhyme slot are shared fillers that
// leave the forward encoding without a usable rhyme context.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "limerick/corpus.hpp"

namespace limerick::testing {

struct SyntheticCorpusSpec {
  int poems = 5000;
  std::uint64_t seed = 42;
  // Shape mix. Line 1 is always long (six tokens); lines 2 and 3 are
  // short unless the long fraction says otherwise; lines 4 and 5 are
  // long unless the short fraction says otherwise. Long lines end in a
  // shared-filler window, which is what keeps the forward model blind to
  // the rhyme slot; short lines anchor the reverse chain. The defaults
  // below were tuned so that an order-3 model gives a clean reverse
  // rhyme chain while the forward model stays blind.
  double long_line2_fraction = 0.0;
  double long_line3_fraction = 0.0;
  double short_line4_fraction = 0.5;
  double short_line5_fraction = 0.8;
};

std::vector<Poem> make_synthetic_corpus(const SyntheticCorpusSpec& spec);

/// Every word the generator can emit (for lexicon/embedding coverage).
std::vector<std::string> synthetic_lexicon();

/// The benthic limerick quoted with the source dataset (AABBA, scores a
/// rhyme distance of zero against the fixture dictionary).
std::string benthic_limerick_text();

/// Deterministic hash-derived embeddings, one vector per word.
void write_hash_embeddings(const std::filesystem::path& path,
                           const std::vector<std::string>& words,
                           std::size_t dimension);

std::filesystem::path test_data_dir();

}  // namespace limerick::testing
