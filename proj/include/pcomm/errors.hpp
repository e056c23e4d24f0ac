#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace pcomm {

// Invalid numeric argument to a model or mapping function.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Bad configuration: unknown key, unknown channel or rank, malformed value.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Wrong call order on a request (start before wait, pready before start).
class LifecycleError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// API misuse that is not an ordering problem (double pready).
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// The two sides disagree (RTS/CTS mismatch).
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The event queue drained while work was still outstanding.
class DeadlockError : public std::runtime_error {
 public:
  explicit DeadlockError(std::vector<std::string> stuck)
      : std::runtime_error(format(stuck)), stuck_(std::move(stuck)) {}

  const std::vector<std::string>& stuck() const noexcept { return stuck_; }

 private:
  static std::string format(const std::vector<std::string>& stuck) {
    std::string out = "protocol deadlock: " + std::to_string(stuck.size()) +
                      " outstanding handle(s)";
    for (const auto& s : stuck) out += "\n  - " + s;
    return out;
  }

  std::vector<std::string> stuck_;
};

}  // namespace pcomm
