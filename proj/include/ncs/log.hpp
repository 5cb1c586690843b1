#pragma once

#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>

namespace ncs::log {

enum class Level { error = 0, info = 1, debug = 2 };

// Level comes from NCS_LOG (error|info|debug); default is info.
inline Level threshold() {
  static Level lvl = [] {
    const char* env = std::getenv("NCS_LOG");
    if (!env) return Level::info;
    std::string s(env);
    if (s == "error") return Level::error;
    if (s == "debug") return Level::debug;
    return Level::info;
  }();
  return lvl;
}

inline void emit(Level lvl, const std::string& msg) {
  if (static_cast<int>(lvl) > static_cast<int>(threshold())) return;
  const char* tag = lvl == Level::error ? "error" : (lvl == Level::info ? "info" : "debug");
  std::cerr << "[ncs][" << tag << "] " << msg << "\n";
}

inline void error(const std::string& msg) { emit(Level::error, msg); }
inline void info(const std::string& msg) { emit(Level::info, msg); }
inline void debug(const std::string& msg) { emit(Level::debug, msg); }

}  // namespace ncs::log
