#pragma once

#include <functional>
#include <iostream>
#include <string_view>

namespace intendd::log {

using Sink = std::function<void(std::string_view level, std::string_view msg)>;

inline Sink& sink() {
  static Sink s = [](std::string_view level, std::string_view msg) {
    std::clog << "[intendd " << level << "] " << msg << '\n';
  };
  return s;
}

inline void set_sink(Sink s) { sink() = std::move(s); }

inline void warn(std::string_view msg) { sink()("warn", msg); }
inline void info(std::string_view msg) { sink()("info", msg); }

}  // namespace intendd::log
