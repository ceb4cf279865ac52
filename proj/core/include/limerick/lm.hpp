// Apache License, Version 2.0, refer to LICENSE.txt
//
// Language model contract plus the built-in n-gram implementation.
// Every model exposes a full next-token distribution that sums to one and
// is strictly positive, so sequence NLL and perplexity are always finite.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "limerick/corpus.hpp"

namespace limerick {

struct MixedDirectionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DirectionMismatchError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class LanguageModel {
 public:
  virtual ~LanguageModel() = default;

  Direction direction() const { return direction_; }
  std::size_t vocab_size() const { return vocab_size_; }

  /// P(token | context); context is the full preceding token sequence,
  /// BOS included. Implementations may use only a suffix of it.
  virtual double token_prob(std::span<const TokenId> context,
                            TokenId token) const = 0;

  /// Full distribution over the vocabulary for the given context.
  virtual std::vector<double> next_token_dist(
      std::span<const TokenId> context) const;

 protected:
  LanguageModel(Direction direction, std::size_t vocab_size)
      : direction_(direction), vocab_size_(vocab_size) {}

  Direction direction_;
  std::size_t vocab_size_;
};

/// Fixed 1/|V| everywhere; the reference baseline (perplexity == |V|).
class UniformModel : public LanguageModel {
 public:
  UniformModel(Direction direction, std::size_t vocab_size)
      : LanguageModel(direction, vocab_size) {}

  double token_prob(std::span<const TokenId>, TokenId) const override {
    return 1.0 / static_cast<double>(vocab_size_);
  }
};

/// Interpolated absolute-discount n-gram. Each order contributes
/// max(c - d, 0)/total plus the discounted mass times the next lower
/// order; the base case interpolates the unigram with 1/|V|. A context
/// with zero count delegates entirely to the lower order. Discount zero
/// gives plain relative frequencies (reference mode, no smoothing).
class NGramModel : public LanguageModel {
 public:
  static constexpr double kDefaultDiscount = 0.75;

  NGramModel(Direction direction, std::size_t vocab_size, int order,
             double discount);

  int order() const { return order_; }
  double discount() const { return discount_; }

  double token_prob(std::span<const TokenId> context,
                    TokenId token) const override;
  std::vector<double> next_token_dist(
      std::span<const TokenId> context) const override;

  void save(const std::filesystem::path& path) const;
  static NGramModel load(const std::filesystem::path& path);

 private:
  friend NGramModel train_ngram(const std::vector<EncodedSequence>&, int,
                                double);

  struct ContextCounts {
    std::map<TokenId, std::uint64_t> counts;
    std::uint64_t total = 0;
  };

  // One table per context length 0..order-1; keys are packed contexts.
  double order_prob(int context_len, std::span<const TokenId> context,
                    TokenId token) const;

  static std::string pack(std::span<const TokenId> context);

  int order_;
  double discount_;
  std::vector<std::map<std::string, ContextCounts>> tables_;
};

/// Counts n-grams of all orders up to `order` over the corpus. All
/// sequences must share one direction. Deterministic given the corpus.
NGramModel train_ngram(const std::vector<EncodedSequence>& corpus, int order,
                       double discount = NGramModel::kDefaultDiscount);

/// -sum log P(w_t | w_0..w_{t-1}) over every token after the leading BOS.
double sequence_nll(const LanguageModel& model, const EncodedSequence& seq);

/// exp(total NLL / predicted token count); BOS is conditioning only.
double perplexity(const LanguageModel& model,
                  std::span<const EncodedSequence> corpus);

struct GridPoint {
  int order = 0;
  double discount = 0.0;
  double val_perplexity = 0.0;
};

struct GridSearchResult {
  std::vector<GridPoint> table;
  GridPoint best;
};

/// Trains one model per (order, discount) pair and keeps the one with the
/// lowest validation perplexity; the selection rule used for checkpoints.
GridSearchResult select_ngram(const std::vector<EncodedSequence>& train,
                              const std::vector<EncodedSequence>& validation,
                              std::span<const int> orders,
                              std::span<const double> discounts,
                              NGramModel* best_model = nullptr);

}  // namespace limerick
