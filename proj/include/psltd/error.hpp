#pragma once

#include <atomic>
#include <iostream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace psltd {

// Exit-code categories surfaced by the CLI: 2 config, 3 data, 4 training.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 1; }
};

class ConfigError : public Error {
public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

class DataError : public Error {
public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

class TrainingError : public Error {
public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
};

namespace log {

inline std::atomic<bool>& quiet_flag() {
  static std::atomic<bool> quiet{false};
  return quiet;
}

inline void set_quiet(bool q) { quiet_flag().store(q); }

inline void warn(std::string_view msg) {
  if (!quiet_flag().load()) std::cerr << "warning: " << msg << '\n';
}

inline void info(std::string_view msg) {
  if (!quiet_flag().load()) std::cerr << msg << '\n';
}

}  // namespace log
}  // namespace psltd
