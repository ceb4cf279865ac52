// Apache License, Version 2.0, refer to LICENSE.txt

#include "limerick/lm.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace limerick {

namespace {

// Empty contexts are treated as sequence-initial, i.e. BOS-only.
std::vector<TokenId> effective_context(std::span<const TokenId> context) {
  if (!context.empty()) return {context.begin(), context.end()};
  return {Vocabulary::kBos};
}

std::string format_double(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

}  // namespace

std::vector<double> LanguageModel::next_token_dist(
    std::span<const TokenId> context) const {
  std::vector<TokenId> ctx = effective_context(context);
  std::vector<double> dist(vocab_size_);
  for (std::size_t w = 0; w < vocab_size_; ++w) {
    dist[w] = token_prob(ctx, static_cast<TokenId>(w));
  }
  return dist;
}

NGramModel::NGramModel(Direction direction, std::size_t vocab_size, int order,
                       double discount)
    : LanguageModel(direction, vocab_size),
      order_(order),
      discount_(discount),
      tables_(static_cast<std::size_t>(order)) {
  if (order < 1) throw std::invalid_argument("n-gram order must be >= 1");
  if (discount < 0.0 || discount >= 1.0) {
    throw std::invalid_argument("discount must lie in [0, 1)");
  }
}

std::string NGramModel::pack(std::span<const TokenId> context) {
  std::string key;
  key.reserve(context.size() * 4);
  for (TokenId id : context) {
    key.push_back(static_cast<char>((id >> 24) & 0xff));
    key.push_back(static_cast<char>((id >> 16) & 0xff));
    key.push_back(static_cast<char>((id >> 8) & 0xff));
    key.push_back(static_cast<char>(id & 0xff));
  }
  return key;
}

double NGramModel::order_prob(int context_len,
                              std::span<const TokenId> context,
                              TokenId token) const {
  if (context_len == 0) {
    const auto& table = tables_[0];
    auto it = table.find(std::string());
    if (it == table.end() || it->second.total == 0) {
      return 1.0 / static_cast<double>(vocab_size_);
    }
    const ContextCounts& cc = it->second;
    double total = static_cast<double>(cc.total);
    double seen = 0.0;
    auto cit = cc.counts.find(token);
    if (cit != cc.counts.end()) {
      seen = std::max(static_cast<double>(cit->second) - discount_, 0.0);
    }
    double backoff_weight =
        discount_ * static_cast<double>(cc.counts.size()) / total;
    return seen / total +
           backoff_weight * (1.0 / static_cast<double>(vocab_size_));
  }

  std::span<const TokenId> suffix =
      context.subspan(context.size() - static_cast<std::size_t>(context_len));
  const auto& table = tables_[static_cast<std::size_t>(context_len)];
  auto it = table.find(pack(suffix));
  if (it == table.end() || it->second.total == 0) {
    return order_prob(context_len - 1, context, token);
  }
  const ContextCounts& cc = it->second;
  double total = static_cast<double>(cc.total);
  double seen = 0.0;
  auto cit = cc.counts.find(token);
  if (cit != cc.counts.end()) {
    seen = std::max(static_cast<double>(cit->second) - discount_, 0.0);
  }
  double backoff_weight =
      discount_ * static_cast<double>(cc.counts.size()) / total;
  return seen / total +
         backoff_weight * order_prob(context_len - 1, context, token);
}

double NGramModel::token_prob(std::span<const TokenId> context,
                              TokenId token) const {
  std::vector<TokenId> ctx = effective_context(context);
  int context_len =
      std::min<int>(order_ - 1, static_cast<int>(ctx.size()));
  return order_prob(context_len, ctx, token);
}

std::vector<double> NGramModel::next_token_dist(
    std::span<const TokenId> context) const {
  std::vector<TokenId> ctx = effective_context(context);
  int max_len = std::min<int>(order_ - 1, static_cast<int>(ctx.size()));

  // Built bottom-up so one pass covers the whole vocabulary. Each level
  // applies the same expression as order_prob, so the two paths agree to
  // the last bit.
  std::vector<double> dist(vocab_size_, 1.0 / static_cast<double>(vocab_size_));
  for (int len = 0; len <= max_len; ++len) {
    const auto& table = tables_[static_cast<std::size_t>(len)];
    std::string key =
        len == 0 ? std::string()
                 : pack(std::span<const TokenId>(ctx).subspan(
                       ctx.size() - static_cast<std::size_t>(len)));
    auto it = table.find(key);
    if (it == table.end() || it->second.total == 0) continue;
    const ContextCounts& cc = it->second;
    double total = static_cast<double>(cc.total);
    double backoff_weight =
        discount_ * static_cast<double>(cc.counts.size()) / total;
    for (double& p : dist) p *= backoff_weight;
    for (const auto& [tok, count] : cc.counts) {
      dist[tok] += std::max(static_cast<double>(count) - discount_, 0.0) /
                   total;
    }
  }
  return dist;
}

NGramModel train_ngram(const std::vector<EncodedSequence>& corpus, int order,
                       double discount) {
  if (corpus.empty()) throw EmptyCorpusError("cannot train on empty corpus");
  Direction direction = corpus.front().direction;
  TokenId max_id = 0;
  for (const EncodedSequence& seq : corpus) {
    if (seq.direction != direction) {
      throw MixedDirectionError("training corpus mixes directions");
    }
    for (TokenId id : seq.tokens) max_id = std::max(max_id, id);
  }
  NGramModel model(direction, static_cast<std::size_t>(max_id) + 1, order,
                   discount);
  for (const EncodedSequence& seq : corpus) {
    const auto& toks = seq.tokens;
    for (std::size_t t = 1; t < toks.size(); ++t) {
      for (int len = 0; len < order && len <= static_cast<int>(t); ++len) {
        std::span<const TokenId> ctx(toks.data() + t -
                                         static_cast<std::size_t>(len),
                                     static_cast<std::size_t>(len));
        NGramModel::ContextCounts& cc =
            model.tables_[static_cast<std::size_t>(len)][NGramModel::pack(
                ctx)];
        ++cc.counts[toks[t]];
        ++cc.total;
      }
    }
  }
  return model;
}

double sequence_nll(const LanguageModel& model, const EncodedSequence& seq) {
  if (seq.direction != model.direction()) {
    throw DirectionMismatchError("sequence direction does not match model");
  }
  double nll = 0.0;
  const auto& toks = seq.tokens;
  for (std::size_t t = 1; t < toks.size(); ++t) {
    std::span<const TokenId> ctx(toks.data(), t);
    double p = model.token_prob(ctx, toks[t]);
    nll -= std::log(p);
  }
  return nll;
}

double perplexity(const LanguageModel& model,
                  std::span<const EncodedSequence> corpus) {
  if (corpus.empty()) {
    throw EmptyCorpusError("perplexity needs a non-empty corpus");
  }
  double total_nll = 0.0;
  std::size_t predicted = 0;
  for (const EncodedSequence& seq : corpus) {
    total_nll += sequence_nll(model, seq);
    predicted += seq.tokens.size() > 0 ? seq.tokens.size() - 1 : 0;
  }
  if (predicted == 0) {
    throw EmptyCorpusError("perplexity corpus has no predicted tokens");
  }
  return std::exp(total_nll / static_cast<double>(predicted));
}

GridSearchResult select_ngram(const std::vector<EncodedSequence>& train,
                              const std::vector<EncodedSequence>& validation,
                              std::span<const int> orders,
                              std::span<const double> discounts,
                              NGramModel* best_model) {
  GridSearchResult result;
  result.best.val_perplexity = std::numeric_limits<double>::infinity();
  for (int order : orders) {
    for (double discount : discounts) {
      NGramModel model = train_ngram(train, order, discount);
      GridPoint point{order, discount, perplexity(model, validation)};
      result.table.push_back(point);
      if (point.val_perplexity < result.best.val_perplexity) {
        result.best = point;
        if (best_model) *best_model = model;
      }
    }
  }
  return result;
}

void NGramModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write model file: " + path.string());
  out << "limerick-ngram v1\n";
  out << "direction " << to_string(direction_) << '\n';
  out << "order " << order_ << '\n';
  out << "discount " << format_double(discount_) << '\n';
  out << "vocab " << vocab_size_ << '\n';
  for (std::size_t len = 0; len < tables_.size(); ++len) {
    for (const auto& [key, cc] : tables_[len]) {
      out << len;
      for (std::size_t i = 0; i + 3 < key.size(); i += 4) {
        TokenId id = (static_cast<TokenId>(static_cast<unsigned char>(key[i]))
                      << 24) |
                     (static_cast<TokenId>(
                          static_cast<unsigned char>(key[i + 1]))
                      << 16) |
                     (static_cast<TokenId>(
                          static_cast<unsigned char>(key[i + 2]))
                      << 8) |
                     static_cast<TokenId>(static_cast<unsigned char>(key[i + 3]));
        out << ' ' << id;
      }
      out << " |";
      for (const auto& [tok, count] : cc.counts) {
        out << ' ' << tok << ' ' << count;
      }
      out << '\n';
    }
  }
}

NGramModel NGramModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open model file: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "limerick-ngram v1") {
    throw FormatError("not a limerick-ngram v1 file: " + path.string());
  }
  std::string word, value;
  Direction direction = Direction::forward;
  int order = 0;
  double discount = 0.0;
  std::size_t vocab = 0;
  for (int i = 0; i < 4; ++i) {
    if (!std::getline(in, line)) throw FormatError("truncated model header");
    std::istringstream header(line);
    header >> word >> value;
    if (word == "direction") {
      direction = direction_from_string(value);
    } else if (word == "order") {
      order = std::stoi(value);
    } else if (word == "discount") {
      discount = std::stod(value);
    } else if (word == "vocab") {
      vocab = static_cast<std::size_t>(std::stoull(value));
    } else {
      throw FormatError("unexpected model header field: " + word);
    }
  }
  NGramModel model(direction, vocab, order, discount);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream parts(line);
    int len = 0;
    parts >> len;
    std::vector<TokenId> ctx;
    std::string tok;
    while (parts >> tok && tok != "|") {
      ctx.push_back(static_cast<TokenId>(std::stoul(tok)));
    }
    if (static_cast<int>(ctx.size()) != len) {
      throw FormatError("model context length mismatch");
    }
    ContextCounts cc;
    std::uint64_t id = 0, count = 0;
    while (parts >> id >> count) {
      cc.counts[static_cast<TokenId>(id)] = count;
      cc.total += count;
    }
    model.tables_[static_cast<std::size_t>(len)][pack(ctx)] = std::move(cc);
  }
  return model;
}

}  // namespace limerick
