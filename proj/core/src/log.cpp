#include "ngmix/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace ngmix {
namespace {

std::atomic<int> g_level{static_cast<int>(LogLevel::Warning)};
std::mutex g_mutex;

const char* tag(LogLevel level) {
  switch (level) {
    case LogLevel::Debug:
      return "debug";
    case LogLevel::Info:
      return "info";
    case LogLevel::Warning:
      return "warning";
    case LogLevel::Error:
      return "error";
    default:
      return "";
  }
}

}  // namespace

void set_log_level(LogLevel level) { g_level = static_cast<int>(level); }
LogLevel log_level() { return static_cast<LogLevel>(g_level.load()); }

void log(LogLevel level, const std::string& message) {
  if (static_cast<int>(level) < g_level.load() || level == LogLevel::Off) return;
  std::lock_guard<std::mutex> lock(g_mutex);
  std::cerr << "ngmix " << tag(level) << ": " << message << '\n';
}

}  // namespace ngmix
