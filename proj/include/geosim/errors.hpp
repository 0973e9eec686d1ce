#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace geosim {

// Bad scenario/pod/planner configuration. Carries every violation found so the
// CLI can report them all at once.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::string what) : std::runtime_error(std::move(what)) {}
  explicit ConfigError(const std::vector<std::string>& messages)
      : std::runtime_error(join(messages)), messages_(messages) {}

  const std::vector<std::string>& messages() const { return messages_; }

 private:
  static std::string join(const std::vector<std::string>& m) {
    std::string out;
    for (const auto& s : m) {
      if (!out.empty()) out += "\n";
      out += s;
    }
    return out;
  }
  std::vector<std::string> messages_;
};

enum class PlanFailure { unreachable_goal, timeout };

class PlanError : public std::runtime_error {
 public:
  PlanError(PlanFailure failure, std::string what)
      : std::runtime_error(std::move(what)), failure_(failure) {}
  PlanFailure failure() const { return failure_; }

 private:
  PlanFailure failure_;
};

}  // namespace geosim
