// Apache License, Version 2.0, refer to LICENSE.txt
//
// Single-binary driver for the whole pipeline:
//   prep | train | generate | score | filter | rank | report
// A JSON config file supplies defaults; command line flags override it.
// Exit codes: 0 success, 1 usage error, 2 data/format error, 3 external
// service error.

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "limerick/continuity.hpp"
#include "limerick/corpus.hpp"
#include "limerick/external_lm.hpp"
#include "limerick/generation.hpp"
#include "limerick/lm.hpp"
#include "limerick/pipeline.hpp"
#include "limerick/rhyme.hpp"

namespace {

using nlohmann::json;
using namespace limerick;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitExternal = 3;

// Applies config-file values to options the user did not set explicitly.
// Keys use the long flag name without dashes, e.g. "val-fraction".
void apply_config(CLI::App* cmd, const json& config) {
  if (config.is_null()) return;
  const json* section = &config;
  if (config.contains(cmd->get_name())) section = &config[cmd->get_name()];
  for (CLI::Option* opt : cmd->get_options()) {
    std::string name = opt->get_lnames().empty() ? "" : opt->get_lnames()[0];
    if (name.empty() || opt->count() > 0) continue;
    const json* value = nullptr;
    if (section->contains(name)) {
      value = &(*section)[name];
    } else if (config.contains(name) && !config[name].is_object()) {
      value = &config[name];
    }
    if (!value) continue;
    if (value->is_boolean()) {
      if (value->get<bool>()) opt->add_result("true");
    } else if (value->is_string()) {
      opt->add_result(value->get<std::string>());
    } else {
      opt->add_result(value->dump());
    }
    opt->run_callback();
  }
}

// The effective configuration is echoed next to the outputs so a run can
// be reproduced from its artifacts alone. Content is fully deterministic.
void echo_config(const std::filesystem::path& dir, const std::string& command,
                 const json& effective) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / (command + ".config.json"));
  out << effective.dump(2) << '\n';
}

std::string percent(double v, int precision = 3) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(precision) << v * 100.0 << '%';
  return out.str();
}

struct Stats {
  double mean = 0.0, stddev = 0.0, min = 0.0, max = 0.0;
};

Stats compute_stats(const std::vector<double>& values) {
  Stats s;
  if (values.empty()) return s;
  s.min = values.front();
  s.max = values.front();
  for (double v : values) {
    s.mean += v;
    s.min = std::min(s.min, v);
    s.max = std::max(s.max, v);
  }
  s.mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(var / static_cast<double>(values.size()));
  return s;
}

void write_histogram(const std::filesystem::path& path,
                     const std::vector<double>& values, int bins, double lo,
                     double hi) {
  std::vector<int> counts(static_cast<std::size_t>(bins), 0);
  for (double v : values) {
    double t = (v - lo) / (hi - lo);
    int bin = std::clamp(static_cast<int>(t * bins), 0, bins - 1);
    ++counts[static_cast<std::size_t>(bin)];
  }
  std::ofstream out(path);
  out << "# bin_lo bin_hi count\n";
  for (int i = 0; i < bins; ++i) {
    double bin_lo = lo + (hi - lo) * i / bins;
    double bin_hi = lo + (hi - lo) * (i + 1) / bins;
    out << bin_lo << ' ' << bin_hi << ' '
        << counts[static_cast<std::size_t>(i)] << '\n';
  }
}

std::unique_ptr<ClassifierClient> make_classifier(
    const std::string& fixture_path, const std::string& url) {
  if (!fixture_path.empty()) {
    auto fixture = std::make_unique<FixtureClassifier>(
        FixtureClassifier::load(fixture_path));
    return fixture;
  }
  std::string endpoint = url;
  if (endpoint.empty()) {
    if (const char* env = std::getenv("LIMERICK_CLASSIFIER_URL")) {
      endpoint = env;
    }
  }
  if (endpoint.empty()) return nullptr;
  if (endpoint.rfind("http://", 0) == 0) endpoint = endpoint.substr(7);
  std::size_t colon = endpoint.rfind(':');
  if (colon == std::string::npos) {
    throw FormatError("classifier url must be host:port, got " + endpoint);
  }
  std::string host = endpoint.substr(0, colon);
  int port = std::stoi(endpoint.substr(colon + 1));
  return std::make_unique<HttpClassifier>(host, port);
}

void need(const std::string& value, const char* flag) {
  if (value.empty()) {
    throw UsageError(std::string("missing required option ") + flag);
  }
}

// ---------------------------------------------------------------------
// prep

struct PrepArgs {
  std::string corpus;
  std::string out;
  double val_fraction = 0.1;
  std::uint64_t seed = 1;
};

int run_prep(const PrepArgs& args) {
  need(args.corpus, "--corpus");
  need(args.out, "--out");
  CorpusFile corpus = read_corpus_file(args.corpus);
  if (corpus.skipped_blocks > 0) {
    std::cerr << "warning: skipped " << corpus.skipped_blocks
              << " malformed block(s)\n";
  }
  if (corpus.poems.empty()) throw EmptyCorpusError("corpus has no poems");

  std::filesystem::path out(args.out);
  std::filesystem::create_directories(out);

  Vocabulary vocab = Vocabulary::build(corpus.poems);
  vocab.save(out / "vocab.txt");

  auto [train, validation] =
      split_corpus(corpus.poems, args.val_fraction, args.seed);
  for (Direction dir : {Direction::forward, Direction::reverse}) {
    std::string tag(to_string(dir));
    write_encoded_file(out / (tag + "_train.txt"),
                       encode_corpus(train, dir, vocab));
    write_encoded_file(out / (tag + "_val.txt"),
                       encode_corpus(validation, dir, vocab));
  }
  write_corpus_file(out / "train_poems.txt", train);

  json stats{{"poems", corpus.poems.size()},
             {"skipped_blocks", corpus.skipped_blocks},
             {"vocab_size", vocab.size()},
             {"train", train.size()},
             {"validation", validation.size()}};
  std::ofstream stats_out(out / "stats.json");
  stats_out << stats.dump(2) << '\n';

  echo_config(out, "prep",
              json{{"corpus", args.corpus},
                   {"out", args.out},
                   {"val-fraction", args.val_fraction},
                   {"seed", args.seed}});
  std::cout << "prep: " << corpus.poems.size() << " poems ("
            << corpus.skipped_blocks << " skipped), vocab " << vocab.size()
            << ", split " << train.size() << "/" << validation.size() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------
// train

struct TrainArgs {
  std::string data;
  std::string direction = "forward";
  std::string model_out;
  int order = 0;        // 0 = grid
  double discount = -1;  // <0 = grid
};

int run_train(const TrainArgs& args) {
  need(args.data, "--data");
  Direction dir = direction_from_string(args.direction);
  std::filesystem::path data(args.data);
  std::string tag(to_string(dir));
  auto train = read_encoded_file(data / (tag + "_train.txt"), dir);
  auto val = read_encoded_file(data / (tag + "_val.txt"), dir);
  if (train.empty()) throw EmptyCorpusError("no training sequences");

  std::vector<int> orders;
  std::vector<double> discounts;
  if (args.order > 0) {
    orders = {args.order};
  } else {
    orders = {2, 3, 4};
  }
  if (args.discount >= 0) {
    discounts = {args.discount};
  } else {
    discounts = {0.5, NGramModel::kDefaultDiscount, 0.9};
  }

  NGramModel best(dir, 1, 1, 0.0);
  GridSearchResult grid = select_ngram(train, val, orders, discounts, &best);

  std::cout << "order  discount  val_perplexity\n";
  for (const GridPoint& p : grid.table) {
    std::cout << std::left << std::setw(7) << p.order << std::setw(10)
              << p.discount << p.val_perplexity << '\n';
  }
  std::cout << "selected order " << grid.best.order << " discount "
            << grid.best.discount << " (perplexity "
            << grid.best.val_perplexity << ")\n";

  std::filesystem::path model_path =
      args.model_out.empty() ? data / ("model_" + tag + ".txt")
                             : std::filesystem::path(args.model_out);
  best.save(model_path);
  echo_config(model_path.parent_path(), "train_" + tag,
              json{{"data", args.data},
                   {"direction", args.direction},
                   {"order", args.order},
                   {"discount", args.discount},
                   {"model-out", model_path.string()}});
  return kExitOk;
}

// ---------------------------------------------------------------------
// generate

struct GenerateArgs {
  std::string data;
  std::string mode = "two-stage";
  std::string forward_model;
  std::string reverse_model;
  std::string out = "attempts.jsonl";
  std::string seed_line;
  int count = 10;
  int budget = 0;
  double temperature = 1.0;
  int top_k = 40;
  int max_tokens = 64;
  std::uint64_t rng_seed = 1;
  int workers = 1;
};

int run_generate(const GenerateArgs& args) {
  need(args.data, "--data");
  GenerationMode mode = generation_mode_from_string(args.mode);
  std::filesystem::path data(args.data);
  Vocabulary vocab = Vocabulary::load(data / "vocab.txt");

  std::optional<NGramModel> forward_model;
  std::optional<NGramModel> reverse_model;
  auto model_path = [&](Direction dir, const std::string& override_path) {
    if (!override_path.empty()) return std::filesystem::path(override_path);
    return data / ("model_" + std::string(to_string(dir)) + ".txt");
  };
  if (mode != GenerationMode::reverse) {
    forward_model =
        NGramModel::load(model_path(Direction::forward, args.forward_model));
    if (forward_model->direction() != Direction::forward) {
      throw DirectionMismatchError("forward model file has wrong direction");
    }
  }
  if (mode != GenerationMode::forward) {
    reverse_model =
        NGramModel::load(model_path(Direction::reverse, args.reverse_model));
    if (reverse_model->direction() != Direction::reverse) {
      throw DirectionMismatchError("reverse model file has wrong direction");
    }
  }

  std::vector<std::string> seed_tokens;
  if (!args.seed_line.empty()) {
    std::istringstream parts(args.seed_line);
    std::string token;
    while (parts >> token) {
      for (char& c : token) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      }
      seed_tokens.push_back(token);
    }
  }

  SamplerConfig cfg;
  cfg.temperature = args.temperature;
  cfg.top_k = args.top_k;
  cfg.max_tokens = args.max_tokens;
  cfg.rng_seed = args.rng_seed;

  int budget = args.budget > 0 ? args.budget : args.count * 50;
  std::vector<AttemptRecord> records;
  int parsed = 0;
  for (int id = 0; id < budget && parsed < args.count; ++id) {
    GenerationAttempt attempt = run_attempt(
        mode, forward_model ? &*forward_model : nullptr,
        reverse_model ? &*reverse_model : nullptr, seed_tokens, cfg, vocab,
        id);
    if (attempt.poem) ++parsed;
    records.push_back(std::move(attempt.record));
  }

  std::filesystem::path out(args.out);
  if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
  write_attempts_file(out, records);
  echo_config(out.has_parent_path() ? out.parent_path() : ".", "generate",
              json{{"data", args.data},
                   {"mode", args.mode},
                   {"n", args.count},
                   {"budget", budget},
                   {"seed-line", args.seed_line},
                   {"temperature", args.temperature},
                   {"top-k", args.top_k},
                   {"max-tokens", args.max_tokens},
                   {"rng-seed", args.rng_seed},
                   {"out", args.out}});

  std::cout << "generate: " << records.size() << " attempts, " << parsed
            << " parsed";
  if (parsed < args.count) std::cout << " (budget exhausted)";
  std::cout << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------
// score

struct ScoreArgs {
  std::string attempts;
  std::string out = "scorecards.jsonl";
  std::string vocab;
  std::string dict;
  std::string ontology;
  std::string embeddings;
  std::string classifier_fixture;
  std::string classifier_url;
  bool strict_self_rhyme = false;
  bool ttr_include_punct = false;
};

int run_score(const ScoreArgs& args) {
  need(args.attempts, "--attempts");
  need(args.dict, "--dict");
  need(args.ontology, "--ontology");
  need(args.embeddings, "--embeddings");
  auto records = read_attempts_file(args.attempts);
  PronunciationDictionary dict = PronunciationDictionary::load(args.dict);
  OntologyGraph ontology = OntologyGraph::load(args.ontology);
  EmbeddingTable embeddings = EmbeddingTable::load(args.embeddings);
  std::unique_ptr<ClassifierClient> classifier =
      make_classifier(args.classifier_fixture, args.classifier_url);

  std::unordered_set<std::string> lexicon;
  if (!args.vocab.empty()) {
    Vocabulary vocab = Vocabulary::load(args.vocab);
    auto tokens = vocab.tokens();
    for (std::size_t i = 4; i < tokens.size(); ++i) lexicon.insert(tokens[i]);
  }
  for (const std::string& word : dict.words()) lexicon.insert(word);

  ScoringResources resources;
  resources.dictionary = &dict;
  resources.ontology = &ontology;
  resources.embeddings = &embeddings;
  resources.classifier = classifier.get();
  resources.lexicon = &lexicon;
  resources.rhyme_policy.strict_self_rhyme = args.strict_self_rhyme;
  resources.ttr_include_punctuation = args.ttr_include_punct;

  std::vector<PoemScorecard> cards;
  for (const AttemptRecord& record : records) {
    if (!record.parsed) continue;
    Poem poem;
    poem.lines = record.lines;
    poem.id = record.poem_id();
    poem.source = Poem::Source::generated;
    cards.push_back(score_poem(poem, resources));
  }
  std::filesystem::path out(args.out);
  if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
  write_scorecards_file(out, cards);
  echo_config(out.has_parent_path() ? out.parent_path() : ".", "score",
              json{{"attempts", args.attempts},
                   {"out", args.out},
                   {"vocab", args.vocab},
                   {"dict", args.dict},
                   {"ontology", args.ontology},
                   {"embeddings", args.embeddings},
                   {"classifier-fixture", args.classifier_fixture},
                   {"classifier-url", args.classifier_url},
                   {"strict-self-rhyme", args.strict_self_rhyme}});
  std::cout << "score: " << cards.size() << " scorecards\n";
  return kExitOk;
}

// ---------------------------------------------------------------------
// filter / rank

struct FilterArgs {
  std::string scorecards;
  std::string out_accepted = "accepted.jsonl";
  std::string out_rejected = "rejected.jsonl";
  std::string ttr_threshold = "auto";
  std::string reference;  // corpus file for the auto threshold
  bool no_require_classified = false;
  double min_confidence = 0.5;
};

int run_filter(const FilterArgs& args) {
  need(args.scorecards, "--scorecards");
  std::vector<PoemScorecard> cards = read_scorecards_file(args.scorecards);

  FilterConfig cfg;
  cfg.require_classified = !args.no_require_classified;
  cfg.min_classification_confidence = args.min_confidence;
  if (args.ttr_threshold == "auto") {
    if (args.reference.empty()) {
      throw FormatError("--ttr-threshold auto needs --reference <corpus>");
    }
    CorpusFile reference = read_corpus_file(args.reference);
    if (reference.poems.size() < 2) {
      throw InsufficientDataError("reference corpus too small for auto "
                                  "threshold");
    }
    std::vector<double> ttrs;
    ttrs.reserve(reference.poems.size());
    for (const Poem& poem : reference.poems) ttrs.push_back(ttr(poem));
    cfg.ttr_threshold = ttr_threshold(ttrs);
  } else if (args.ttr_threshold == "none") {
    cfg.ttr_threshold.reset();
  } else {
    cfg.ttr_threshold = std::stod(args.ttr_threshold);
  }
  if (cfg.ttr_threshold) {
    std::cout << "ttr threshold: " << percent(*cfg.ttr_threshold) << '\n';
  }

  FilterOutcome outcome = filter_and_rank(std::move(cards), cfg);
  std::filesystem::path accepted_path(args.out_accepted);
  if (accepted_path.has_parent_path()) {
    std::filesystem::create_directories(accepted_path.parent_path());
  }
  write_scorecards_file(accepted_path, outcome.accepted);
  std::ofstream rejected_out(args.out_rejected);
  for (const Rejection& r : outcome.rejected) {
    rejected_out << json{{"poem_id", r.poem_id}, {"reason", r.reason}}.dump()
                 << '\n';
  }
  echo_config(accepted_path.has_parent_path() ? accepted_path.parent_path()
                                              : ".",
              "filter",
              json{{"scorecards", args.scorecards},
                   {"out-accepted", args.out_accepted},
                   {"out-rejected", args.out_rejected},
                   {"ttr-threshold", args.ttr_threshold},
                   {"reference", args.reference},
                   {"no-require-classified", args.no_require_classified},
                   {"min-confidence", args.min_confidence}});
  std::cout << "filter: accepted " << outcome.accepted.size() << ", rejected "
            << outcome.rejected.size() << '\n';
  return kExitOk;
}

struct RankArgs {
  std::string scorecards;
  std::string out = "ranked.jsonl";
};

int run_rank(const RankArgs& args) {
  need(args.scorecards, "--scorecards");
  std::vector<PoemScorecard> cards = read_scorecards_file(args.scorecards);
  FilterConfig cfg;
  cfg.require_classified = false;
  cfg.require_syntactic = false;
  cfg.ttr_threshold.reset();
  FilterOutcome outcome = filter_and_rank(std::move(cards), cfg);
  write_scorecards_file(args.out, outcome.accepted);
  std::cout << "rank: " << outcome.accepted.size() << " poems ordered\n";
  return kExitOk;
}

// ---------------------------------------------------------------------
// report

struct ReportArgs {
  std::string scorecards;
  std::string accepted;
  std::string out_dir;
};

int run_report(const ReportArgs& args) {
  need(args.scorecards, "--scorecards");
  std::vector<PoemScorecard> cards = read_scorecards_file(args.scorecards);
  std::vector<PoemScorecard> accepted;
  if (!args.accepted.empty()) {
    accepted = read_scorecards_file(args.accepted);
  }

  std::vector<double> ttrs, rhyme_distances, centroid_means;
  int classified = 0;
  for (const PoemScorecard& card : cards) {
    ttrs.push_back(card.ttr);
    rhyme_distances.push_back(card.rhyme.distance);
    centroid_means.push_back(card.continuity.centroid_mean);
    if (card.classification.state == Classification::State::classified) {
      ++classified;
    }
  }

  std::cout << "== corpus report (" << cards.size() << " poems) ==\n";
  if (!cards.empty()) {
    Stats ttr_stats = compute_stats(ttrs);
    std::cout << "lexical diversity: mean " << percent(ttr_stats.mean)
              << "  std " << percent(ttr_stats.stddev) << "  max "
              << percent(ttr_stats.max) << "  min " << percent(ttr_stats.min)
              << '\n';
    Stats rhyme_stats = compute_stats(rhyme_distances);
    std::cout << "rhyme distance: mean " << std::fixed << std::setprecision(4)
              << rhyme_stats.mean << '\n';
    Stats centroid_stats = compute_stats(centroid_means);
    std::cout << "centroid distance: mean " << centroid_stats.mean << "  std "
              << centroid_stats.stddev << '\n';
    std::cout << "classified: " << classified << "/" << cards.size() << " ("
              << percent(cards.empty()
                             ? 0.0
                             : static_cast<double>(classified) /
                                   static_cast<double>(cards.size()),
                         1)
              << ")\n";
  }
  if (args.accepted.empty()) {
    std::cout << "accepted: (no accepted file given)\n";
  } else {
    std::cout << "accepted: " << accepted.size() << '\n';
    if (accepted.empty()) std::cout << "0 accepted\n";
  }

  if (!args.out_dir.empty() && !cards.empty()) {
    std::filesystem::path dir(args.out_dir);
    std::filesystem::create_directories(dir);
    write_histogram(dir / "ttr.hist", ttrs, 20, 0.0, 1.0);
    write_histogram(dir / "rhyme.hist", rhyme_distances, 5, 0.0, 1.25);
    double max_centroid = compute_stats(centroid_means).max;
    write_histogram(dir / "centroid.hist", centroid_means, 20, 0.0,
                    max_centroid > 0 ? max_centroid : 1.0);
    std::cout << "histograms written to " << dir.string() << '\n';
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"limerick generation and evaluation toolkit"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file with defaults");

  PrepArgs prep;
  CLI::App* prep_cmd = app.add_subcommand("prep", "preprocess a corpus");
  prep_cmd->add_option("--corpus", prep.corpus, "corpus text file")
      ;
  prep_cmd->add_option("--out", prep.out, "output directory");
  prep_cmd->add_option("--val-fraction", prep.val_fraction,
                       "validation fraction (0, 0.5)");
  prep_cmd->add_option("--seed", prep.seed, "split seed");

  TrainArgs train;
  CLI::App* train_cmd = app.add_subcommand("train", "train an n-gram model");
  train_cmd->add_option("--data", train.data, "prep output directory")
      ;
  train_cmd->add_option("--direction", train.direction, "forward|reverse");
  train_cmd->add_option("--order", train.order, "n-gram order (0 = grid)");
  train_cmd->add_option("--discount", train.discount,
                        "absolute discount (<0 = grid)");
  train_cmd->add_option("--model-out", train.model_out, "model file path");

  GenerateArgs gen;
  CLI::App* gen_cmd = app.add_subcommand("generate", "sample limericks");
  gen_cmd->add_option("--data", gen.data, "prep output directory");
  gen_cmd->add_option("--mode", gen.mode, "forward|reverse|two-stage");
  gen_cmd->add_option("-n,--n", gen.count, "target parsed poems");
  gen_cmd->add_option("--budget", gen.budget, "max attempts (0 = 50x n)");
  gen_cmd->add_option("--seed-line", gen.seed_line,
                      "seed line for reverse mode");
  gen_cmd->add_option("--forward-model", gen.forward_model, "model file");
  gen_cmd->add_option("--reverse-model", gen.reverse_model, "model file");
  gen_cmd->add_option("--temperature", gen.temperature, "sampling temperature");
  gen_cmd->add_option("--top-k", gen.top_k, "top-k cutoff (0 = unlimited)");
  gen_cmd->add_option("--max-tokens", gen.max_tokens, "sample length cap");
  gen_cmd->add_option("--rng-seed", gen.rng_seed, "base rng seed");
  gen_cmd->add_option("--out", gen.out, "attempts output file");

  ScoreArgs score;
  CLI::App* score_cmd = app.add_subcommand("score", "score parsed attempts");
  score_cmd->add_option("--attempts", score.attempts, "attempts file")
      ;
  score_cmd->add_option("--out", score.out, "scorecards output file");
  score_cmd->add_option("--vocab", score.vocab, "vocabulary file");
  score_cmd->add_option("--dict", score.dict, "pronunciation dictionary")
      ;
  score_cmd->add_option("--ontology", score.ontology,
                        "ontology file or WordNet dir")
      ;
  score_cmd->add_option("--embeddings", score.embeddings, "embedding file")
      ;
  score_cmd->add_option("--classifier-fixture", score.classifier_fixture,
                        "fixture classifier JSON");
  score_cmd->add_option("--classifier-url", score.classifier_url,
                        "host:port of a live classifier");
  score_cmd->add_flag("--strict-self-rhyme", score.strict_self_rhyme,
                      "identical rhyme words do not rhyme");
  score_cmd->add_flag("--ttr-include-punct", score.ttr_include_punct,
                      "count punctuation tokens in TTR");

  FilterArgs filter;
  CLI::App* filter_cmd =
      app.add_subcommand("filter", "apply quality filters and rank");
  filter_cmd->add_option("--scorecards", filter.scorecards, "scorecards file")
      ;
  filter_cmd->add_option("--out-accepted", filter.out_accepted,
                         "accepted output file");
  filter_cmd->add_option("--out-rejected", filter.out_rejected,
                         "rejection log file");
  filter_cmd->add_option("--ttr-threshold", filter.ttr_threshold,
                         "auto | none | <value>");
  filter_cmd->add_option("--reference", filter.reference,
                         "reference corpus for the auto threshold");
  filter_cmd->add_flag("--no-require-classified",
                       filter.no_require_classified,
                       "keep poems without a confident classification");
  filter_cmd->add_option("--min-confidence", filter.min_confidence,
                         "classification confidence floor");

  RankArgs rank;
  CLI::App* rank_cmd =
      app.add_subcommand("rank", "order scorecards without filtering");
  rank_cmd->add_option("--scorecards", rank.scorecards, "scorecards file")
      ;
  rank_cmd->add_option("--out", rank.out, "ranked output file");

  ReportArgs report;
  CLI::App* report_cmd = app.add_subcommand("report", "summarize scorecards");
  report_cmd->add_option("--scorecards", report.scorecards, "scorecards file")
      ;
  report_cmd->add_option("--accepted", report.accepted,
                         "accepted scorecards file");
  report_cmd->add_option("--out-dir", report.out_dir,
                         "directory for histogram data");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (!config_path.empty()) {
      std::ifstream config_in(config_path);
      if (!config_in) throw FormatError("cannot open config: " + config_path);
      json config;
      config_in >> config;
      for (CLI::App* cmd : {prep_cmd, train_cmd, gen_cmd, score_cmd,
                            filter_cmd, rank_cmd, report_cmd}) {
        if (cmd->parsed()) apply_config(cmd, config);
      }
    }
    if (prep_cmd->parsed()) return run_prep(prep);
    if (train_cmd->parsed()) return run_train(train);
    if (gen_cmd->parsed()) return run_generate(gen);
    if (score_cmd->parsed()) return run_score(score);
    if (filter_cmd->parsed()) return run_filter(filter);
    if (rank_cmd->parsed()) return run_rank(rank);
    if (report_cmd->parsed()) return run_report(report);
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConnectError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitExternal;
  } catch (const VocabularyMismatchError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitExternal;
  } catch (const ProtocolError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitExternal;
  } catch (const ClientError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitExternal;
  } catch (const QuotaError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitExternal;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
}
