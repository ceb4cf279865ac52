// Apache License, Version 2.0, refer to LICENSE.txt
//
// Adapter that lets an external language model (e.g. a fine-tuned
// transformer behind a serving process) satisfy the LanguageModel
// contract. Transport is line-delimited JSON over a TCP stream socket:
//
//   -> {"type":"hello"}
//   <- {"type":"hello","direction":"forward","vocab_hash":"<hex>",
//      "vocab_size":N}
//   -> {"type":"next_dist","context":[ids]}
//   <- {"type":"dist","probs":[p0,...]}            full vector form
//   <- {"type":"dist","top":[[id,logprob],...],"rest_mass":m}
//
// Every response is checked on receipt: the distribution must cover the
// vocabulary, stay positive and sum to one within 1e-6. Nothing from the
// remote side is trusted.

#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>

#include "limerick/corpus.hpp"
#include "limerick/lm.hpp"

namespace limerick {

struct ConnectError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct VocabularyMismatchError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ProtocolError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class RemoteModel : public LanguageModel {
 public:
  /// Connects, performs the handshake, and verifies direction and
  /// vocabulary hash against the local vocabulary.
  static std::unique_ptr<RemoteModel> connect(const std::string& host,
                                              int port, Direction direction,
                                              const Vocabulary& vocab);

  ~RemoteModel() override;
  RemoteModel(const RemoteModel&) = delete;
  RemoteModel& operator=(const RemoteModel&) = delete;

  double token_prob(std::span<const TokenId> context,
                    TokenId token) const override;
  std::vector<double> next_token_dist(
      std::span<const TokenId> context) const override;

 private:
  RemoteModel(int fd, Direction direction, std::size_t vocab_size);

  std::string request(const std::string& line) const;

  int fd_ = -1;
  mutable std::mutex io_mutex_;  // requests serialize per connection
  mutable std::string read_buffer_;
};

/// Serves any local LanguageModel over the protocol; used by tests, the
/// stub tool, and as a reference for real integrations. Handles one
/// client at a time.
class LmStubServer {
 public:
  enum class Fault { none, unnormalized_dist, wrong_vocab_hash };

  LmStubServer(const LanguageModel& model, const Vocabulary& vocab,
               Fault fault = Fault::none);
  ~LmStubServer();

  /// Binds (port 0 picks a free one), then serves on a background thread.
  void start(int port = 0);
  void stop();
  int port() const { return port_; }

 private:
  void serve_loop();
  void serve_client(int client_fd);

  const LanguageModel& model_;
  const Vocabulary& vocab_;
  Fault fault_;
  int listen_fd_ = -1;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace limerick
