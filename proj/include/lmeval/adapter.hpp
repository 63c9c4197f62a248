#pragma once

#include <atomic>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "lmeval/io.hpp"
#include "lmeval/lm.hpp"

namespace lmeval::lm {

// Line protocol, one request per line:
//   SCORE <ctx ids>|<seq ids>  ->  OK <logprob>
//   DIST <ctx ids>             ->  OK <|V| floats>
// Ids are space-separated decimals. Failures answer `ERR <message>`.
// Floats are written with 17 significant digits so they round-trip.

/// Answers a single request line against `model`. Never throws.
std::string handle_request(const LanguageModel& model, std::string_view line);

/// Serves requests read line by line from `in` until EOF.
void serve_stream(const LanguageModel& model, std::istream& in, std::ostream& out);

/// Loopback TCP server. Connections are handled one at a time.
class TcpServer {
 public:
  /// Binds 127.0.0.1:`port`; 0 picks a free port.
  TcpServer(const LanguageModel& model, std::uint16_t port = 0);
  ~TcpServer();
  TcpServer(const TcpServer&) = delete;
  TcpServer& operator=(const TcpServer&) = delete;

  std::uint16_t port() const noexcept { return port_; }
  /// Accepts and serves connections until stop() or `max_connections`
  /// (0 = unlimited) have been served.
  void run(std::size_t max_connections = 0);
  void stop();

 private:
  const LanguageModel& model_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
};

/// A LanguageModel served by another process. The vocabulary size is learned
/// from an initial `DIST` request with empty context. Requests are serialized
/// through one connection, so the object is safe to share across threads.
class ExternalLM final : public LanguageModel {
 public:
  /// Runs `command` through /bin/sh and talks over its stdin/stdout.
  static std::unique_ptr<ExternalLM> spawn(const std::string& command);
  /// Connects to host:port.
  static std::unique_ptr<ExternalLM> connect(const std::string& host, std::uint16_t port);

  ~ExternalLM() override;

  std::string backend() const override { return "external"; }
  std::size_t vocab_size() const override { return vocab_size_; }
  std::vector<double> next_dist(TokenSpan context) const override;
  double score(TokenSpan seq, TokenSpan context) const override;

 private:
  ExternalLM(int read_fd, int write_fd, int pid);
  std::string request(const std::string& line) const;

  int read_fd_;
  int write_fd_;
  int pid_;
  std::size_t vocab_size_ = 0;
  mutable std::string buffer_;
  mutable std::mutex mutex_;
};

/// Opens a model from a spec: `exec:<command>`, `tcp:<host>:<port>`, or a
/// path to a model file.
io::ModelBundle open_model(const std::string& spec);

}  // namespace lmeval::lm
