// Apache License, Version 2.0, refer to LICENSE.txt

#include "limerick/generation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace limerick {

namespace {

using nlohmann::json;

void validate(const SamplerConfig& cfg) {
  if (!(cfg.temperature > 0.0)) {
    throw std::invalid_argument("temperature must be positive");
  }
  if (cfg.max_tokens < 10) {
    throw std::invalid_argument(
        "max_tokens must be at least 10 (five lines plus separators)");
  }
}

// Sampling prefix shared by the generators: appends drawn tokens until a
// stop token or the token budget is hit.
void sample_until(const LanguageModel& model, const SamplerConfig& cfg,
                  Rng& rng, std::vector<TokenId>& tokens,
                  bool stop_at_line) {
  while (static_cast<int>(tokens.size()) < cfg.max_tokens) {
    std::vector<double> dist = model.next_token_dist(tokens);
    TokenId next = sample_next(dist, cfg, rng);
    tokens.push_back(next);
    if (next == Vocabulary::kEos) break;
    if (stop_at_line && next == Vocabulary::kLine) break;
  }
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + salt * 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

TokenId sample_next(std::span<const double> dist, const SamplerConfig& cfg,
                    Rng& rng) {
  std::vector<std::size_t> order(dist.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (dist[a] != dist[b]) return dist[a] > dist[b];
    return a < b;
  });
  std::size_t k = cfg.top_k <= 0
                      ? dist.size()
                      : std::min<std::size_t>(
                            static_cast<std::size_t>(cfg.top_k), dist.size());

  std::vector<double> weights(k);
  if (cfg.temperature == 1.0) {
    for (std::size_t i = 0; i < k; ++i) weights[i] = dist[order[i]];
  } else {
    // exp((log p - max log p) / T): stable for small temperatures, where
    // the distribution collapses onto the argmax.
    double max_log = std::log(dist[order[0]]);
    for (std::size_t i = 0; i < k; ++i) {
      double p = dist[order[i]];
      weights[i] =
          p > 0.0 ? std::exp((std::log(p) - max_log) / cfg.temperature) : 0.0;
    }
  }
  double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (total <= 0.0) return static_cast<TokenId>(order[0]);

  double u = rng.next_double() * total;
  double cumulative = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    cumulative += weights[i];
    if (u < cumulative) return static_cast<TokenId>(order[i]);
  }
  return static_cast<TokenId>(order[k - 1]);
}

EncodedSequence generate_forward(const LanguageModel& model,
                                 const SamplerConfig& cfg, Rng& rng) {
  if (model.direction() != Direction::forward) {
    throw DirectionMismatchError("generate_forward needs a forward model");
  }
  validate(cfg);
  EncodedSequence seq;
  seq.direction = Direction::forward;
  seq.tokens.push_back(Vocabulary::kBos);
  sample_until(model, cfg, rng, seq.tokens, /*stop_at_line=*/false);
  return seq;
}

EncodedSequence generate_reverse(const LanguageModel& model,
                                 std::span<const std::string> seed_line,
                                 const SamplerConfig& cfg, Rng& rng,
                                 const Vocabulary& vocab) {
  if (model.direction() != Direction::reverse) {
    throw DirectionMismatchError("generate_reverse needs a reverse model");
  }
  validate(cfg);
  EncodedSequence seq;
  seq.direction = Direction::reverse;
  seq.tokens.push_back(Vocabulary::kBos);
  if (!seed_line.empty()) {
    for (auto it = seed_line.rbegin(); it != seed_line.rend(); ++it) {
      seq.tokens.push_back(vocab.id_of(*it));
    }
    seq.tokens.push_back(Vocabulary::kLine);
  }
  sample_until(model, cfg, rng, seq.tokens, /*stop_at_line=*/false);
  return seq;
}

std::string_view to_string(ParseFailure::Reason r) {
  switch (r) {
    case ParseFailure::Reason::line_count:
      return "line_count";
    case ParseFailure::Reason::empty_line:
      return "empty_line";
    case ParseFailure::Reason::no_eos:
      return "no_eos";
  }
  return "unknown";
}

ParseResult parse_generation(const EncodedSequence& seq,
                             const Vocabulary& vocab) {
  const auto& ids = seq.tokens;
  if (ids.empty() || ids.front() != Vocabulary::kBos) {
    return ParseFailure{ParseFailure::Reason::line_count, ""};
  }
  std::vector<std::vector<std::string>> lines(1);
  bool saw_eos = false;
  std::size_t separators = 0;
  for (std::size_t i = 1; i < ids.size(); ++i) {
    TokenId id = ids[i];
    if (id == Vocabulary::kEos) {
      saw_eos = true;
      break;
    }
    if (id == Vocabulary::kLine) {
      ++separators;
      lines.emplace_back();
      continue;
    }
    if (id == Vocabulary::kBos) {
      // A smoothed model can sample BOS mid-stream; such output has no
      // usable line structure.
      return ParseFailure{ParseFailure::Reason::line_count, ""};
    }
    lines.back().push_back(vocab.token_of(id));
  }
  if (separators != 4) {
    return ParseFailure{ParseFailure::Reason::line_count, ""};
  }
  if (!saw_eos) return ParseFailure{ParseFailure::Reason::no_eos, ""};
  for (const auto& line : lines) {
    if (line.empty()) {
      return ParseFailure{ParseFailure::Reason::empty_line, ""};
    }
  }
  if (seq.direction == Direction::reverse) {
    for (auto& line : lines) std::reverse(line.begin(), line.end());
  }
  Poem poem;
  poem.lines = std::move(lines);
  poem.source = Poem::Source::generated;
  return poem;
}

ParseResult generate_two_stage(const LanguageModel& forward_model,
                               const LanguageModel& reverse_model,
                               const SamplerConfig& cfg,
                               const Vocabulary& vocab) {
  validate(cfg);
  Rng stage1(derive_seed(cfg.rng_seed, 1));
  std::vector<TokenId> tokens{Vocabulary::kBos};
  sample_until(forward_model, cfg, stage1, tokens, /*stop_at_line=*/true);
  if (tokens.back() != Vocabulary::kLine) {
    return ParseFailure{ParseFailure::Reason::line_count, "forward"};
  }
  if (tokens.size() < 3) {
    return ParseFailure{ParseFailure::Reason::empty_line, "forward"};
  }
  std::vector<std::string> first_line;
  for (std::size_t i = 1; i + 1 < tokens.size(); ++i) {
    if (tokens[i] == Vocabulary::kBos) {
      return ParseFailure{ParseFailure::Reason::line_count, "forward"};
    }
    first_line.push_back(vocab.token_of(tokens[i]));
  }

  SamplerConfig stage2_cfg = cfg;
  stage2_cfg.rng_seed = derive_seed(cfg.rng_seed, 2);
  Rng stage2(stage2_cfg.rng_seed);
  EncodedSequence rest =
      generate_reverse(reverse_model, first_line, stage2_cfg, stage2, vocab);
  ParseResult parsed = parse_generation(rest, vocab);
  if (auto* failure = std::get_if<ParseFailure>(&parsed)) {
    failure->stage = "reverse";
  }
  return parsed;
}

std::string_view to_string(GenerationMode m) {
  switch (m) {
    case GenerationMode::forward:
      return "forward";
    case GenerationMode::reverse:
      return "reverse";
    case GenerationMode::two_stage:
      return "two-stage";
  }
  return "unknown";
}

GenerationMode generation_mode_from_string(std::string_view s) {
  if (s == "forward") return GenerationMode::forward;
  if (s == "reverse") return GenerationMode::reverse;
  if (s == "two-stage" || s == "two_stage") return GenerationMode::two_stage;
  throw FormatError("unknown generation mode: " + std::string(s));
}

std::string AttemptRecord::poem_id() const {
  std::ostringstream id;
  id << to_string(mode) << '-' << attempt_id;
  return id.str();
}

GenerationAttempt run_attempt(GenerationMode mode,
                              const LanguageModel* forward_model,
                              const LanguageModel* reverse_model,
                              std::span<const std::string> seed_line,
                              const SamplerConfig& cfg,
                              const Vocabulary& vocab, int attempt_id) {
  SamplerConfig attempt_cfg = cfg;
  attempt_cfg.rng_seed =
      derive_seed(cfg.rng_seed, static_cast<std::uint64_t>(attempt_id) + 100);

  GenerationAttempt attempt;
  attempt.record.attempt_id = attempt_id;
  attempt.record.mode = mode;
  attempt.record.rng_seed = attempt_cfg.rng_seed;
  attempt.record.seed_line.assign(seed_line.begin(), seed_line.end());

  ParseResult result = [&]() -> ParseResult {
    switch (mode) {
      case GenerationMode::forward: {
        Rng rng(attempt_cfg.rng_seed);
        return parse_generation(generate_forward(*forward_model, attempt_cfg, rng),
                                vocab);
      }
      case GenerationMode::reverse: {
        Rng rng(attempt_cfg.rng_seed);
        return parse_generation(
            generate_reverse(*reverse_model, seed_line, attempt_cfg, rng, vocab),
            vocab);
      }
      case GenerationMode::two_stage:
        return generate_two_stage(*forward_model, *reverse_model, attempt_cfg,
                                  vocab);
    }
    return ParseFailure{ParseFailure::Reason::line_count, ""};
  }();

  if (auto* poem = std::get_if<Poem>(&result)) {
    poem->id = attempt.record.poem_id();
    attempt.record.parsed = true;
    attempt.record.lines = poem->lines;
    attempt.poem = std::move(*poem);
  } else {
    const auto& failure = std::get<ParseFailure>(result);
    attempt.record.parsed = false;
    attempt.record.failure_reason = std::string(to_string(failure.reason));
    if (!failure.stage.empty()) attempt.record.failure_stage = failure.stage;
  }
  return attempt;
}

void write_attempts_file(const std::filesystem::path& path,
                         std::span<const AttemptRecord> records) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write attempts file: " + path.string());
  for (const AttemptRecord& r : records) {
    json j{{"attempt_id", r.attempt_id},
           {"mode", to_string(r.mode)},
           {"parsed", r.parsed},
           {"rng_seed", r.rng_seed}};
    if (!r.seed_line.empty()) j["seed_line"] = r.seed_line;
    if (r.parsed) j["lines"] = r.lines;
    if (r.failure_reason) j["failure_reason"] = *r.failure_reason;
    if (r.failure_stage) j["failure_stage"] = *r.failure_stage;
    out << j.dump() << '\n';
  }
}

std::vector<AttemptRecord> read_attempts_file(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open attempts file: " + path.string());
  std::vector<AttemptRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw FormatError("attempts file " + path.string() + " line " +
                        std::to_string(line_no) + ": " + e.what());
    }
    AttemptRecord r;
    r.attempt_id = j.at("attempt_id").get<int>();
    r.mode = generation_mode_from_string(j.at("mode").get<std::string>());
    r.parsed = j.at("parsed").get<bool>();
    r.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    if (j.contains("seed_line")) {
      r.seed_line = j["seed_line"].get<std::vector<std::string>>();
    }
    if (j.contains("lines")) {
      r.lines = j["lines"].get<std::vector<std::vector<std::string>>>();
    }
    if (j.contains("failure_reason")) {
      r.failure_reason = j["failure_reason"].get<std::string>();
    }
    if (j.contains("failure_stage")) {
      r.failure_stage = j["failure_stage"].get<std::string>();
    }
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace limerick
