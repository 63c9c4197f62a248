#include "lmeval/adapter.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <istream>
#include <ostream>

#include "lmeval/error.hpp"

namespace lmeval::lm {

namespace {

std::string format_double(double v) {
  if (std::isinf(v)) return v < 0 ? "-inf" : "inf";
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<TokenId> parse_id_list(std::string_view s, std::size_t vocab_size) {
  std::vector<TokenId> ids;
  const char* p = s.data();
  const char* e = s.data() + s.size();
  while (p < e) {
    while (p < e && (*p == ' ' || *p == '\t')) ++p;
    if (p == e) break;
    TokenId id = 0;
    auto [ptr, ec] = std::from_chars(p, e, id);
    if (ec != std::errc() || (ptr < e && *ptr != ' ' && *ptr != '\t')) {
      throw Error(Errc::FormatError, "malformed id list");
    }
    ids.push_back(id);
    p = ptr;
  }
  check_ids(ids, vocab_size);
  return ids;
}

std::string join_ids(TokenSpan ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out.push_back(' ');
    out += std::to_string(ids[i]);
  }
  return out;
}

double parse_double(std::string_view s) {
  std::string tmp(s);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(tmp.c_str(), &end);
  if (end == tmp.c_str() || *end != '\0') throw Error(Errc::FormatError, "bad number '" + tmp + "'");
  return v;
}

void write_all(int fd, std::string_view data) {
  while (!data.empty()) {
    const ssize_t n = ::write(fd, data.data(), data.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(Errc::IoError, std::string("write: ") + std::strerror(errno));
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
}

// Reads one line (without the newline) from `fd`, using `buffer` for
// leftovers. Returns false at EOF with no pending data.
bool read_line(int fd, std::string& buffer, std::string& line) {
  for (;;) {
    const auto nl = buffer.find('\n');
    if (nl != std::string::npos) {
      line = buffer.substr(0, nl);
      buffer.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return true;
    }
    char chunk[4096];
    const ssize_t n = ::read(fd, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(Errc::IoError, std::string("read: ") + std::strerror(errno));
    }
    if (n == 0) {
      if (buffer.empty()) return false;
      line = std::move(buffer);
      buffer.clear();
      return true;
    }
    buffer.append(chunk, static_cast<std::size_t>(n));
  }
}

}  // namespace

std::string handle_request(const LanguageModel& model, std::string_view line) {
  try {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const auto sp = line.find(' ');
    const std::string_view verb = line.substr(0, sp);
    const std::string_view rest = sp == std::string_view::npos ? std::string_view{} : line.substr(sp + 1);
    if (verb == "SCORE") {
      const auto bar = rest.find('|');
      if (bar == std::string_view::npos) return "ERR SCORE needs '<ctx ids>|<seq ids>'";
      const auto ctx = parse_id_list(rest.substr(0, bar), model.vocab_size());
      const auto seq = parse_id_list(rest.substr(bar + 1), model.vocab_size());
      return "OK " + format_double(model.score(seq, ctx));
    }
    if (verb == "DIST") {
      const auto ctx = parse_id_list(rest, model.vocab_size());
      const auto dist = model.next_dist(ctx);
      std::string out = "OK";
      for (double p : dist) {
        out.push_back(' ');
        out += format_double(p);
      }
      return out;
    }
    return "ERR unknown request '" + std::string(verb) + "'";
  } catch (const std::exception& e) {
    return std::string("ERR ") + e.what();
  }
}

void serve_stream(const LanguageModel& model, std::istream& in, std::ostream& out) {
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out << handle_request(model, line) << '\n';
    out.flush();
  }
}

TcpServer::TcpServer(const LanguageModel& model, std::uint16_t port) : model_(model) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw Error(Errc::IoError, "socket() failed");
  const int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(port);
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 ||
      ::listen(listen_fd_, 8) < 0) {
    ::close(listen_fd_);
    throw Error(Errc::IoError, "cannot listen on port " + std::to_string(port));
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpServer::~TcpServer() {
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

void TcpServer::stop() {
  stopping_ = true;
  ::shutdown(listen_fd_, SHUT_RDWR);
}

void TcpServer::run(std::size_t max_connections) {
  std::size_t served = 0;
  while (!stopping_ && (max_connections == 0 || served < max_connections)) {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      break;
    }
    std::string buffer, line;
    try {
      while (read_line(fd, buffer, line)) {
        if (line.empty()) continue;
        write_all(fd, handle_request(model_, line) + "\n");
      }
    } catch (const Error&) {
      // client went away mid-request
    }
    ::close(fd);
    ++served;
  }
}

ExternalLM::ExternalLM(int read_fd, int write_fd, int pid)
    : read_fd_(read_fd), write_fd_(write_fd), pid_(pid) {
  const std::string reply = request("DIST ");
  std::size_t n = 0;
  for (std::size_t i = 0; i < reply.size();) {
    while (i < reply.size() && reply[i] == ' ') ++i;
    if (i == reply.size()) break;
    ++n;
    while (i < reply.size() && reply[i] != ' ') ++i;
  }
  if (n == 0) throw Error(Errc::FormatError, "external model reported an empty vocabulary");
  vocab_size_ = n;
}

ExternalLM::~ExternalLM() {
  if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
  if (read_fd_ >= 0) ::close(read_fd_);
  if (pid_ > 0) ::waitpid(pid_, nullptr, 0);
}

std::unique_ptr<ExternalLM> ExternalLM::spawn(const std::string& command) {
  int to_child[2], from_child[2];
  if (::pipe(to_child) < 0) throw Error(Errc::IoError, "pipe() failed");
  if (::pipe(from_child) < 0) {
    ::close(to_child[0]);
    ::close(to_child[1]);
    throw Error(Errc::IoError, "pipe() failed");
  }
  // A dying child must surface as an IoError, not kill this process.
  ::signal(SIGPIPE, SIG_IGN);
  const pid_t pid = ::fork();
  if (pid < 0) throw Error(Errc::IoError, "fork() failed");
  if (pid == 0) {
    ::dup2(to_child[0], STDIN_FILENO);
    ::dup2(from_child[1], STDOUT_FILENO);
    ::close(to_child[0]);
    ::close(to_child[1]);
    ::close(from_child[0]);
    ::close(from_child[1]);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(to_child[0]);
  ::close(from_child[1]);
  return std::unique_ptr<ExternalLM>(new ExternalLM(from_child[0], to_child[1], pid));
}

std::unique_ptr<ExternalLM> ExternalLM::connect(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0) {
    throw Error(Errc::IoError, "cannot resolve " + host);
  }
  int fd = -1;
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw Error(Errc::IoError, "cannot connect to " + host + ":" + std::to_string(port));
  ::signal(SIGPIPE, SIG_IGN);
  return std::unique_ptr<ExternalLM>(new ExternalLM(fd, fd, -1));
}

std::string ExternalLM::request(const std::string& line) const {
  std::lock_guard lock(mutex_);
  write_all(write_fd_, line + "\n");
  std::string reply;
  if (!read_line(read_fd_, buffer_, reply)) throw Error(Errc::IoError, "external model closed the connection");
  if (reply.rfind("OK", 0) == 0 && (reply.size() == 2 || reply[2] == ' ')) {
    return reply.size() > 3 ? reply.substr(3) : std::string{};
  }
  if (reply.rfind("ERR", 0) == 0) {
    throw Error(Errc::IoError, "external model: " + (reply.size() > 4 ? reply.substr(4) : reply));
  }
  throw Error(Errc::FormatError, "external model sent '" + reply + "'");
}

std::vector<double> ExternalLM::next_dist(TokenSpan context) const {
  const std::string reply = request("DIST " + join_ids(context));
  std::vector<double> dist;
  dist.reserve(vocab_size_);
  std::size_t i = 0;
  while (i < reply.size()) {
    while (i < reply.size() && reply[i] == ' ') ++i;
    if (i == reply.size()) break;
    const auto j = reply.find(' ', i);
    dist.push_back(parse_double(std::string_view(reply).substr(i, j == std::string::npos ? j : j - i)));
    i = j == std::string::npos ? reply.size() : j;
  }
  if (dist.size() != vocab_size_) throw Error(Errc::FormatError, "external model returned a wrong-sized distribution");
  return dist;
}

double ExternalLM::score(TokenSpan seq, TokenSpan context) const {
  return parse_double(request("SCORE " + join_ids(context) + "|" + join_ids(seq)));
}

io::ModelBundle open_model(const std::string& spec) {
  if (spec.rfind("exec:", 0) == 0) {
    io::ModelBundle b;
    b.model = ExternalLM::spawn(spec.substr(5));
    return b;
  }
  if (spec.rfind("tcp:", 0) == 0) {
    const auto colon = spec.rfind(':');
    if (colon <= 4) throw Error(Errc::ConfigError, "expected tcp:<host>:<port>, got '" + spec + "'");
    unsigned port = 0;
    const char* b = spec.data() + colon + 1;
    const char* e = spec.data() + spec.size();
    auto [ptr, ec] = std::from_chars(b, e, port);
    if (ec != std::errc() || ptr != e || port == 0 || port > 65535) {
      throw Error(Errc::ConfigError, "bad port in '" + spec + "'");
    }
    io::ModelBundle bundle;
    bundle.model = ExternalLM::connect(spec.substr(4, colon - 4), static_cast<std::uint16_t>(port));
    return bundle;
  }
  return io::load_model(spec);
}

}  // namespace lmeval::lm
