// Apache License, Version 2.0, refer to LICENSE.txt

#include "limerick/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace limerick {

namespace {

using nlohmann::json;

bool has_letter(const std::string& token) {
  return std::any_of(token.begin(), token.end(), [](unsigned char c) {
    return std::isalpha(c) != 0;
  });
}

std::string lowercased(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return out;
}

std::string poem_text(const Poem& poem) {
  std::ostringstream out;
  for (std::size_t i = 0; i < poem.lines.size(); ++i) {
    if (i > 0) out << '\n';
    for (std::size_t j = 0; j < poem.lines[i].size(); ++j) {
      if (j > 0) out << ' ';
      out << poem.lines[i][j];
    }
  }
  return out.str();
}

std::vector<Category> categories_from_json(const json& j) {
  std::vector<Category> categories;
  for (const auto& entry : j) {
    Category c;
    if (entry.is_array()) {
      c.path = entry.at(0).get<std::string>();
      c.confidence = entry.at(1).get<double>();
    } else {
      c.path = entry.at("name").get<std::string>();
      c.confidence = entry.at("confidence").get<double>();
    }
    categories.push_back(std::move(c));
  }
  return categories;
}

}  // namespace

double ttr(const Poem& poem, bool include_punctuation) {
  std::vector<std::string> tokens;
  for (const auto& line : poem.lines) {
    for (const std::string& token : line) {
      if (include_punctuation || has_letter(token)) {
        tokens.push_back(lowercased(token));
      }
    }
  }
  if (tokens.empty()) {
    // Punctuation-only poem; fall back to the raw token stream.
    for (const auto& line : poem.lines) {
      for (const std::string& token : line) tokens.push_back(token);
    }
  }
  std::unordered_set<std::string> distinct(tokens.begin(), tokens.end());
  return static_cast<double>(distinct.size()) /
         static_cast<double>(tokens.size());
}

double ttr_threshold(std::span<const double> reference) {
  if (reference.size() < 2) {
    throw InsufficientDataError("ttr threshold needs at least two values");
  }
  double mean = 0.0;
  for (double v : reference) mean += v;
  mean /= static_cast<double>(reference.size());
  double var = 0.0;
  for (double v : reference) var += (v - mean) * (v - mean);
  var /= static_cast<double>(reference.size());
  return mean - 2.0 * std::sqrt(var);
}

SyntacticResult syntactic_check(
    const Poem& poem, const std::unordered_set<std::string>& lexicon) {
  SyntacticResult result;
  result.corrected = poem;

  for (auto& line : result.corrected.lines) {
    // Collapse runs of the same punctuation token.
    std::vector<std::string> collapsed;
    for (std::string& token : line) {
      if (!collapsed.empty() && !has_letter(token) &&
          collapsed.back() == token) {
        result.corrections.push_back("collapsed duplicate '" + token + "'");
        continue;
      }
      collapsed.push_back(std::move(token));
    }
    line = std::move(collapsed);

    for (std::string& token : line) {
      if (token == "i") {
        token = "I";
        result.corrections.push_back("capitalized pronoun I");
      }
    }
  }

  if (!result.corrected.lines.empty()) {
    for (std::string& token : result.corrected.lines[0]) {
      bool done = false;
      for (char& c : token) {
        if (std::isalpha(static_cast<unsigned char>(c))) {
          if (std::islower(static_cast<unsigned char>(c))) {
            c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
            result.corrections.push_back("capitalized opening line");
          }
          done = true;
          break;
        }
      }
      if (done) break;
    }
  }

  for (const auto& line : result.corrected.lines) {
    for (const std::string& token : line) {
      if (!has_letter(token)) continue;
      std::string folded = lowercased(token);
      if (lexicon.count(folded) == 0) {
        result.ok = false;
        result.reasons.push_back("oov(" + folded + ")");
      }
    }
  }
  return result;
}

FixtureClassifier FixtureClassifier::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw FormatError("cannot open classifier fixture: " + path.string());
  }
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw FormatError("classifier fixture " + path.string() + ": " + e.what());
  }
  FixtureClassifier classifier;
  if (j.contains("default")) {
    classifier.default_ = categories_from_json(j["default"]);
  }
  if (j.contains("entries")) {
    for (const auto& [text, categories] : j["entries"].items()) {
      classifier.entries_[text] = categories_from_json(categories);
    }
  }
  return classifier;
}

std::vector<Category> FixtureClassifier::classify(const std::string& text) {
  auto it = entries_.find(text);
  if (it != entries_.end()) return it->second;
  if (default_) return *default_;
  return {};
}

void FixtureClassifier::set_default(std::vector<Category> categories) {
  default_ = std::move(categories);
}

void FixtureClassifier::add_entry(std::string text,
                                  std::vector<Category> categories) {
  entries_[std::move(text)] = std::move(categories);
}

HttpClassifier::HttpClassifier(std::string host, int port, int max_retries,
                               int timeout_seconds, int min_interval_ms)
    : host_(std::move(host)),
      port_(port),
      max_retries_(max_retries),
      timeout_seconds_(timeout_seconds),
      min_interval_ms_(min_interval_ms) {}

void HttpClassifier::wait_for_slot() {
  if (min_interval_ms_ <= 0) return;
  std::unique_lock<std::mutex> lock(rate_mutex_);
  auto interval = std::chrono::milliseconds(min_interval_ms_);
  auto now = std::chrono::steady_clock::now();
  auto next_slot = last_request_ + interval;
  if (now < next_slot) {
    std::this_thread::sleep_for(next_slot - now);
    now = std::chrono::steady_clock::now();
  }
  last_request_ = now;
}

std::vector<Category> HttpClassifier::classify(const std::string& text) {
  json request{{"text", text}};
  std::string body = request.dump();

  for (int attempt = 0; attempt <= max_retries_; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(
          std::chrono::milliseconds(100ll << (attempt - 1)));
    }
    wait_for_slot();
    httplib::Client client(host_, port_);
    client.set_connection_timeout(timeout_seconds_, 0);
    client.set_read_timeout(timeout_seconds_, 0);
    auto res = client.Post("/v1/classify", body, "application/json");
    if (!res) continue;  // transport failure; retry
    if (res->status == 429) throw QuotaError("classifier quota exceeded");
    if (res->status != 200) {
      throw ClientError("classifier returned status " +
                        std::to_string(res->status));
    }
    try {
      json response = json::parse(res->body);
      return categories_from_json(response.at("categories"));
    } catch (const json::exception& e) {
      throw ClientError(std::string("malformed classifier response: ") +
                        e.what());
    }
  }
  throw ClientError("classifier unreachable at " + host_ + ":" +
                    std::to_string(port_));
}

std::optional<double> Classification::max_confidence() const {
  std::optional<double> best;
  for (const Category& c : categories) {
    if (!best || c.confidence > *best) best = c.confidence;
  }
  return best;
}

PoemScorecard score_poem(const Poem& poem,
                         const ScoringResources& resources) {
  PoemScorecard card;
  card.poem_id = poem.id;

  SyntacticResult syntactic = syntactic_check(poem, *resources.lexicon);
  card.syntactic_ok = syntactic.ok;
  card.syntactic_reasons = std::move(syntactic.reasons);
  card.corrections = std::move(syntactic.corrections);
  card.poem = std::move(syntactic.corrected);
  card.poem.id = poem.id;

  card.ttr = ttr(card.poem, resources.ttr_include_punctuation);
  card.rhyme =
      rhyme_distance(card.poem, *resources.dictionary, resources.rhyme_policy);
  card.continuity =
      continuity_report(card.poem, *resources.ontology, *resources.embeddings);

  if (resources.classifier) {
    try {
      card.classification.categories =
          resources.classifier->classify(poem_text(card.poem));
      card.classification.state = card.classification.categories.empty()
                                      ? Classification::State::unclassified
                                      : Classification::State::classified;
    } catch (const QuotaError&) {
      card.classification.state = Classification::State::error;
    } catch (const ClientError&) {
      card.classification.state = Classification::State::error;
    }
  }
  return card;
}

FilterOutcome filter_and_rank(std::vector<PoemScorecard> cards,
                              const FilterConfig& cfg) {
  FilterOutcome outcome;
  for (PoemScorecard& card : cards) {
    if (cfg.require_syntactic && !card.syntactic_ok) {
      outcome.rejected.push_back({card.poem_id, "syntactic"});
      continue;
    }
    if (cfg.ttr_threshold && card.ttr < *cfg.ttr_threshold) {
      outcome.rejected.push_back({card.poem_id, "ttr"});
      continue;
    }
    if (cfg.require_classified) {
      if (card.classification.state == Classification::State::error) {
        outcome.rejected.push_back({card.poem_id, "classification_error"});
        continue;
      }
      std::optional<double> conf = card.classification.max_confidence();
      if (card.classification.state != Classification::State::classified ||
          !conf || *conf <= cfg.min_classification_confidence) {
        outcome.rejected.push_back({card.poem_id, "unclassified"});
        continue;
      }
    }
    outcome.accepted.push_back(std::move(card));
  }

  auto rank_key = [](const PoemScorecard& c) {
    double conf = c.classification.max_confidence().value_or(-1.0);
    double onto = c.continuity.ontology_avg_similarity.value_or(-1.0);
    return std::make_tuple(c.rhyme.distance, -conf, -c.ttr, -onto, c.poem_id);
  };
  std::sort(outcome.accepted.begin(), outcome.accepted.end(),
            [&](const PoemScorecard& a, const PoemScorecard& b) {
              return rank_key(a) < rank_key(b);
            });
  std::sort(outcome.rejected.begin(), outcome.rejected.end(),
            [](const Rejection& a, const Rejection& b) {
              return a.poem_id < b.poem_id;
            });
  return outcome;
}

BatchResult run_batch(GenerationMode mode, const LanguageModel* forward_model,
                      const LanguageModel* reverse_model,
                      std::span<const std::string> seed_line,
                      const SamplerConfig& sampler_cfg,
                      const FilterConfig& filter_cfg,
                      const ScoringResources& resources,
                      const Vocabulary& vocab, int n_target,
                      int worker_count) {
  if (n_target < 1) throw std::invalid_argument("n_target must be >= 1");
  int budget = filter_cfg.retry_budget > 0 ? filter_cfg.retry_budget
                                           : n_target * 50;
  worker_count = std::max(1, worker_count);

  BatchResult result;
  std::vector<GenerationAttempt> attempts;
  int parsed_count = 0;
  int next_id = 0;

  // Attempts run in waves; each derives its rng from its own index, so
  // results do not depend on the worker count, only on which ids run.
  while (parsed_count < n_target && next_id < budget) {
    int wave = std::min(budget - next_id,
                        std::max(worker_count, n_target - parsed_count));
    std::vector<GenerationAttempt> wave_attempts(
        static_cast<std::size_t>(wave));
    auto work = [&](int begin, int end) {
      for (int i = begin; i < end; ++i) {
        wave_attempts[static_cast<std::size_t>(i)] =
            run_attempt(mode, forward_model, reverse_model, seed_line,
                        sampler_cfg, vocab, next_id + i);
      }
    };
    if (worker_count == 1) {
      work(0, wave);
    } else {
      std::vector<std::thread> workers;
      int chunk = (wave + worker_count - 1) / worker_count;
      for (int w = 0; w < worker_count; ++w) {
        int begin = w * chunk;
        int end = std::min(wave, begin + chunk);
        if (begin >= end) break;
        workers.emplace_back(work, begin, end);
      }
      for (std::thread& t : workers) t.join();
    }
    for (GenerationAttempt& attempt : wave_attempts) {
      bool parsed = attempt.poem.has_value();
      attempts.push_back(std::move(attempt));
      if (parsed && ++parsed_count == n_target) break;
    }
    next_id += wave;
  }
  result.summary.budget_exhausted = parsed_count < n_target;

  std::map<std::string, Classification> classification_cache;
  for (GenerationAttempt& attempt : attempts) {
    result.attempts.push_back(attempt.record);
    ++result.summary.generated;
    if (!attempt.poem) continue;
    ++result.summary.parsed;
    auto cached = classification_cache.find(attempt.poem->id);
    PoemScorecard card;
    if (cached != classification_cache.end()) {
      ScoringResources no_client = resources;
      no_client.classifier = nullptr;
      card = score_poem(*attempt.poem, no_client);
      card.classification = cached->second;
    } else {
      card = score_poem(*attempt.poem, resources);
      classification_cache.emplace(card.poem_id, card.classification);
    }
    result.cards.push_back(std::move(card));
  }

  for (const PoemScorecard& card : result.cards) {
    if (!card.syntactic_ok) continue;
    ++result.summary.syntactic;
    if (filter_cfg.ttr_threshold && card.ttr < *filter_cfg.ttr_threshold) {
      continue;
    }
    ++result.summary.ttr_passed;
    if (filter_cfg.require_classified) {
      std::optional<double> conf = card.classification.max_confidence();
      if (card.classification.state != Classification::State::classified ||
          !conf || *conf <= filter_cfg.min_classification_confidence) {
        continue;
      }
    }
    ++result.summary.classified;
  }

  result.outcome = filter_and_rank(result.cards, filter_cfg);
  result.summary.accepted = static_cast<int>(result.outcome.accepted.size());
  return result;
}

namespace {

json rhyme_to_json(const RhymeReport& r) {
  return json{{"rhyme_words", r.rhyme_words},
              {"indicators", r.indicators},
              {"distance", r.distance},
              {"oov_words", r.oov_words}};
}

RhymeReport rhyme_from_json(const json& j, const std::string& poem_id) {
  RhymeReport r;
  r.poem_id = poem_id;
  auto words = j.at("rhyme_words").get<std::vector<std::string>>();
  std::copy_n(words.begin(), std::min<std::size_t>(5, words.size()),
              r.rhyme_words.begin());
  auto indicators = j.at("indicators").get<std::vector<int>>();
  std::copy_n(indicators.begin(), std::min<std::size_t>(4, indicators.size()),
              r.indicators.begin());
  r.distance = j.at("distance").get<double>();
  r.oov_words = j.at("oov_words").get<std::vector<std::string>>();
  return r;
}

std::string_view classification_state_name(Classification::State s) {
  switch (s) {
    case Classification::State::pending:
      return "pending";
    case Classification::State::classified:
      return "classified";
    case Classification::State::unclassified:
      return "unclassified";
    case Classification::State::error:
      return "error";
  }
  return "pending";
}

Classification::State classification_state_from_name(std::string_view name) {
  if (name == "classified") return Classification::State::classified;
  if (name == "unclassified") return Classification::State::unclassified;
  if (name == "error") return Classification::State::error;
  return Classification::State::pending;
}

}  // namespace

void write_scorecards_file(const std::filesystem::path& path,
                           std::span<const PoemScorecard> cards) {
  std::ofstream out(path);
  if (!out) {
    throw FormatError("cannot write scorecards file: " + path.string());
  }
  for (const PoemScorecard& card : cards) {
    json categories = json::array();
    for (const Category& c : card.classification.categories) {
      categories.push_back({{"name", c.path}, {"confidence", c.confidence}});
    }
    json j{
        {"schema_version", PoemScorecard::kSchemaVersion},
        {"poem_id", card.poem_id},
        {"lines", card.poem.lines},
        {"syntactic_ok", card.syntactic_ok},
        {"syntactic_reasons", card.syntactic_reasons},
        {"corrections", card.corrections},
        {"ttr", card.ttr},
        {"rhyme", rhyme_to_json(card.rhyme)},
        {"continuity",
         {{"nouns", card.continuity.nouns},
          {"centroid_mean", card.continuity.centroid_mean},
          {"centroid_std", card.continuity.centroid_std},
          {"single_noun", card.continuity.single_noun},
          {"no_nouns", card.continuity.no_nouns},
          {"had_disconnected_pair", card.continuity.had_disconnected_pair},
          {"oov_nouns", card.continuity.oov_nouns}}},
        {"classification",
         {{"state",
           std::string(classification_state_name(card.classification.state))},
          {"categories", categories}}}};
    if (card.continuity.ontology_avg_similarity) {
      j["continuity"]["ontology_avg_similarity"] =
          *card.continuity.ontology_avg_similarity;
    }
    out << j.dump() << '\n';
  }
}

std::vector<PoemScorecard> read_scorecards_file(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open scorecards file: " + path.string());
  std::vector<PoemScorecard> cards;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw FormatError("scorecards file " + path.string() + " line " +
                        std::to_string(line_no) + ": " + e.what());
    }
    PoemScorecard card;
    card.poem_id = j.at("poem_id").get<std::string>();
    card.poem.id = card.poem_id;
    card.poem.source = Poem::Source::generated;
    card.poem.lines =
        j.at("lines").get<std::vector<std::vector<std::string>>>();
    card.syntactic_ok = j.at("syntactic_ok").get<bool>();
    card.syntactic_reasons =
        j.at("syntactic_reasons").get<std::vector<std::string>>();
    card.corrections = j.at("corrections").get<std::vector<std::string>>();
    card.ttr = j.at("ttr").get<double>();
    card.rhyme = rhyme_from_json(j.at("rhyme"), card.poem_id);
    const json& cont = j.at("continuity");
    card.continuity.poem_id = card.poem_id;
    card.continuity.nouns = cont.at("nouns").get<std::vector<std::string>>();
    card.continuity.centroid_mean = cont.at("centroid_mean").get<double>();
    card.continuity.centroid_std = cont.at("centroid_std").get<double>();
    card.continuity.single_noun = cont.at("single_noun").get<bool>();
    card.continuity.no_nouns = cont.at("no_nouns").get<bool>();
    card.continuity.had_disconnected_pair =
        cont.at("had_disconnected_pair").get<bool>();
    card.continuity.oov_nouns =
        cont.at("oov_nouns").get<std::vector<std::string>>();
    if (cont.contains("ontology_avg_similarity")) {
      card.continuity.ontology_avg_similarity =
          cont["ontology_avg_similarity"].get<double>();
    }
    const json& cls = j.at("classification");
    card.classification.state =
        classification_state_from_name(cls.at("state").get<std::string>());
    for (const auto& entry : cls.at("categories")) {
      card.classification.categories.push_back(
          {entry.at("name").get<std::string>(),
           entry.at("confidence").get<double>()});
    }
    cards.push_back(std::move(card));
  }
  return cards;
}

}  // namespace limerick
