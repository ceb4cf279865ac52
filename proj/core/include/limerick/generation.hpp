// Apache License, Version 2.0, refer to LICENSE.txt
//
// Sampling-based limerick generation. Three modes: plain forward
// sampling, reverse sampling from an optional seed line, and the
// two-stage scheme where the forward model writes line one and the
// reverse model, seeded with it, writes the rest. Malformed samples are
// data for the parser, not errors.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "limerick/corpus.hpp"
#include "limerick/lm.hpp"

namespace limerick {

/// mt19937_64 with explicit float/bounded draws, so sampled output is
/// bit-identical across platforms (the engine itself is specified by the
/// standard; the draw helpers avoid unspecified distribution internals).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 bits of precision.
  double next_double() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

 private:
  std::mt19937_64 engine_;
};

/// splitmix64 of (seed, salt); used to give every attempt and stage its
/// own reproducible stream regardless of worker scheduling.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt);

struct SamplerConfig {
  double temperature = 1.0;
  int top_k = 40;  // 0 = unlimited
  int max_tokens = 64;
  std::uint64_t rng_seed = 0;
};

/// Draws from the renormalized top-k of dist^(1/temperature).
TokenId sample_next(std::span<const double> dist, const SamplerConfig& cfg,
                    Rng& rng);

EncodedSequence generate_forward(const LanguageModel& model,
                                 const SamplerConfig& cfg, Rng& rng);

/// Seed tokens are reversed into the stream ahead of a LINE separator;
/// decoding un-reverses them, so line one of the output is the seed
/// verbatim. An empty seed means pure sampling from BOS.
EncodedSequence generate_reverse(const LanguageModel& model,
                                 std::span<const std::string> seed_line,
                                 const SamplerConfig& cfg, Rng& rng,
                                 const Vocabulary& vocab);

struct ParseFailure {
  enum class Reason { line_count, empty_line, no_eos };
  Reason reason;
  std::string stage;  // "forward" / "reverse" for two-stage, else empty
};

std::string_view to_string(ParseFailure::Reason r);

using ParseResult = std::variant<Poem, ParseFailure>;

/// A sample parses iff it decodes to exactly five non-empty lines closed
/// by EOS. Tokens after EOS are discarded.
ParseResult parse_generation(const EncodedSequence& seq,
                             const Vocabulary& vocab);

/// Stage one samples the forward model until its first LINE token; stage
/// two hands that line to generate_reverse. Stage rngs derive from
/// cfg.rng_seed with salts 1 and 2, so manual piping reproduces this
/// bit for bit.
ParseResult generate_two_stage(const LanguageModel& forward_model,
                               const LanguageModel& reverse_model,
                               const SamplerConfig& cfg,
                               const Vocabulary& vocab);

enum class GenerationMode { forward, reverse, two_stage };

std::string_view to_string(GenerationMode m);
GenerationMode generation_mode_from_string(std::string_view s);

struct AttemptRecord {
  int attempt_id = 0;
  GenerationMode mode = GenerationMode::forward;
  std::vector<std::string> seed_line;
  bool parsed = false;
  std::optional<std::string> failure_reason;
  std::optional<std::string> failure_stage;
  std::vector<std::vector<std::string>> lines;
  std::uint64_t rng_seed = 0;

  std::string poem_id() const;
};

struct GenerationAttempt {
  AttemptRecord record;
  std::optional<Poem> poem;
};

/// Runs one attempt with its own derived rng stream. `seed_line` only
/// applies to reverse mode. Models may be null when the mode does not
/// need them.
GenerationAttempt run_attempt(GenerationMode mode,
                              const LanguageModel* forward_model,
                              const LanguageModel* reverse_model,
                              std::span<const std::string> seed_line,
                              const SamplerConfig& cfg,
                              const Vocabulary& vocab, int attempt_id);

void write_attempts_file(const std::filesystem::path& path,
                         std::span<const AttemptRecord> records);
std::vector<AttemptRecord> read_attempts_file(
    const std::filesystem::path& path);

}  // namespace limerick
