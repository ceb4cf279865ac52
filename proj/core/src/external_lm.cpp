// Apache License, Version 2.0, refer to LICENSE.txt

#include "limerick/external_lm.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cmath>
#include <cstring>
#include <sstream>

#include "json.hpp"

namespace limerick {

namespace {

using nlohmann::json;

constexpr double kNormalizationTolerance = 1e-6;

std::string hash_hex(std::uint64_t h) {
  std::ostringstream out;
  out << std::hex << h;
  return out.str();
}

void send_line(int fd, const std::string& line) {
  std::string framed = line + "\n";
  std::size_t sent = 0;
  while (sent < framed.size()) {
    ssize_t n = ::send(fd, framed.data() + sent, framed.size() - sent, 0);
    if (n <= 0) throw ConnectError("connection closed while sending");
    sent += static_cast<std::size_t>(n);
  }
}

std::string recv_line(int fd, std::string& buffer) {
  for (;;) {
    std::size_t newline = buffer.find('\n');
    if (newline != std::string::npos) {
      std::string line = buffer.substr(0, newline);
      buffer.erase(0, newline + 1);
      return line;
    }
    char chunk[4096];
    ssize_t n = ::recv(fd, chunk, sizeof(chunk), 0);
    if (n <= 0) throw ConnectError("connection closed while receiving");
    buffer.append(chunk, static_cast<std::size_t>(n));
  }
}

json parse_message(const std::string& line) {
  try {
    return json::parse(line);
  } catch (const json::parse_error& e) {
    throw ProtocolError(std::string("malformed message: ") + e.what());
  }
}

}  // namespace

RemoteModel::RemoteModel(int fd, Direction direction, std::size_t vocab_size)
    : LanguageModel(direction, vocab_size), fd_(fd) {}

RemoteModel::~RemoteModel() {
  if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<RemoteModel> RemoteModel::connect(const std::string& host,
                                                  int port,
                                                  Direction direction,
                                                  const Vocabulary& vocab) {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw ConnectError("cannot create socket");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::inet_pton(AF_INET, host == "localhost" ? "127.0.0.1" : host.c_str(),
                  &addr.sin_addr) != 1) {
    ::close(fd);
    throw ConnectError("cannot resolve host: " + host);
  }
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    ::close(fd);
    throw ConnectError("cannot connect to " + host + ":" +
                       std::to_string(port));
  }

  std::unique_ptr<RemoteModel> model(
      new RemoteModel(fd, direction, vocab.size()));
  json hello = parse_message(model->request(json{{"type", "hello"}}.dump()));
  if (hello.value("type", "") != "hello") {
    throw ProtocolError("handshake did not return a hello message");
  }
  std::string remote_direction = hello.value("direction", "");
  if (remote_direction != to_string(direction)) {
    throw ProtocolError("remote model direction is '" + remote_direction +
                        "', expected '" + std::string(to_string(direction)) +
                        "'");
  }
  if (hello.value("vocab_hash", "") != hash_hex(vocab.hash())) {
    throw VocabularyMismatchError(
        "remote vocabulary hash does not match local vocabulary");
  }
  if (hello.value("vocab_size", std::size_t{0}) != vocab.size()) {
    throw VocabularyMismatchError("remote vocabulary size mismatch");
  }
  return model;
}

std::string RemoteModel::request(const std::string& line) const {
  std::lock_guard<std::mutex> lock(io_mutex_);
  send_line(fd_, line);
  return recv_line(fd_, read_buffer_);
}

std::vector<double> RemoteModel::next_token_dist(
    std::span<const TokenId> context) const {
  json req{{"type", "next_dist"},
           {"context", std::vector<TokenId>(context.begin(), context.end())}};
  json res = parse_message(request(req.dump()));
  if (res.value("type", "") != "dist") {
    throw ProtocolError("expected a dist message");
  }

  std::vector<double> dist;
  if (res.contains("probs")) {
    dist = res["probs"].get<std::vector<double>>();
    if (dist.size() != vocab_size_) {
      throw ProtocolError("probability vector has wrong length");
    }
  } else if (res.contains("top")) {
    double rest_mass = res.value("rest_mass", 0.0);
    const json& top = res["top"];
    std::size_t listed = top.size();
    if (listed > vocab_size_) {
      throw ProtocolError("top list longer than vocabulary");
    }
    double spread =
        vocab_size_ > listed
            ? rest_mass / static_cast<double>(vocab_size_ - listed)
            : 0.0;
    dist.assign(vocab_size_, spread);
    for (const auto& entry : top) {
      std::size_t id = entry.at(0).get<std::size_t>();
      if (id >= vocab_size_) throw ProtocolError("top id out of range");
      dist[id] = std::exp(entry.at(1).get<double>());
    }
  } else {
    throw ProtocolError("dist message carries neither probs nor top");
  }

  double sum = 0.0;
  for (double p : dist) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw ProtocolError("distribution has a negative or non-finite entry");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > kNormalizationTolerance) {
    throw ProtocolError("distribution sums to " + std::to_string(sum) +
                        ", expected 1");
  }
  return dist;
}

double RemoteModel::token_prob(std::span<const TokenId> context,
                               TokenId token) const {
  std::vector<double> dist = next_token_dist(context);
  if (token >= dist.size()) {
    throw ProtocolError("token id out of range for remote vocabulary");
  }
  return dist[token];
}

LmStubServer::LmStubServer(const LanguageModel& model, const Vocabulary& vocab,
                           Fault fault)
    : model_(model), vocab_(vocab), fault_(fault) {}

LmStubServer::~LmStubServer() { stop(); }

void LmStubServer::start(int port) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw ConnectError("cannot create listen socket");
  int reuse = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &reuse, sizeof(reuse));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) !=
      0) {
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw ConnectError("cannot bind stub server");
  }
  socklen_t len = sizeof(addr);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  if (::listen(listen_fd_, 4) != 0) {
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw ConnectError("cannot listen on stub server socket");
  }
  thread_ = std::thread([this] { serve_loop(); });
}

void LmStubServer::stop() {
  if (listen_fd_ >= 0) {
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
    listen_fd_ = -1;
  }
  if (thread_.joinable()) thread_.join();
}

void LmStubServer::serve_loop() {
  for (;;) {
    int client = ::accept(listen_fd_, nullptr, nullptr);
    if (client < 0) return;  // listener closed
    try {
      serve_client(client);
    } catch (const std::exception&) {
      // client went away or spoke garbage; keep serving
    }
    ::close(client);
  }
}

void LmStubServer::serve_client(int client_fd) {
  std::string buffer;
  for (;;) {
    std::string line;
    try {
      line = recv_line(client_fd, buffer);
    } catch (const ConnectError&) {
      return;
    }
    json msg = parse_message(line);
    std::string type = msg.value("type", "");
    if (type == "hello") {
      std::uint64_t h = vocab_.hash();
      if (fault_ == Fault::wrong_vocab_hash) h ^= 0xdeadbeefull;
      json reply{{"type", "hello"},
                 {"direction", to_string(model_.direction())},
                 {"vocab_hash", hash_hex(h)},
                 {"vocab_size", vocab_.size()}};
      send_line(client_fd, reply.dump());
    } else if (type == "next_dist") {
      std::vector<TokenId> context =
          msg.value("context", std::vector<TokenId>{});
      std::vector<double> dist = model_.next_token_dist(context);
      if (fault_ == Fault::unnormalized_dist) {
        for (double& p : dist) p *= 2.0;
      }
      json reply{{"type", "dist"}, {"probs", dist}};
      send_line(client_fd, reply.dump());
    } else {
      send_line(client_fd, json{{"type", "error"}}.dump());
    }
  }
}

}  // namespace limerick
