#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <string>
#include <string_view>

namespace steerconf::log {

enum class Level { info, warn, error };

using Sink = std::function<void(Level, std::string_view)>;

namespace detail {
inline std::mutex& mutex() {
  static std::mutex m;
  return m;
}
inline Sink& sink() {
  static Sink s = [](Level lvl, std::string_view msg) {
    static constexpr std::string_view kTags[] = {"info", "warn", "error"};
    std::cerr << "[steerconf " << kTags[static_cast<int>(lvl)] << "] " << msg << '\n';
  };
  return s;
}
}  // namespace detail

/// Replaces the process-wide sink; returns the previous one.
inline Sink set_sink(Sink s) {
  std::lock_guard lock(detail::mutex());
  std::swap(detail::sink(), s);
  return s;
}

inline void write(Level lvl, std::string_view msg) {
  std::lock_guard lock(detail::mutex());
  if (detail::sink()) detail::sink()(lvl, msg);
}

inline void info(std::string_view msg) { write(Level::info, msg); }
inline void warn(std::string_view msg) { write(Level::warn, msg); }
inline void error(std::string_view msg) { write(Level::error, msg); }

}  // namespace steerconf::log
