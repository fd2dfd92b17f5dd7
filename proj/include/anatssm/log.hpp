#pragma once

#include <cstdlib>
#include <memory>
#include <string>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace anatssm {

/// Library logger. Writes to stderr; level taken from ASSM_LOG
/// (trace, debug, info, warn, error, off). Defaults to warn.
inline spdlog::logger& logger() {
  static std::shared_ptr<spdlog::logger> instance = [] {
    auto existing = spdlog::get("anatssm");
    if (existing) return existing;
    auto created = spdlog::stderr_color_mt("anatssm");
    created->set_pattern("[%l] %v");
    spdlog::level::level_enum level = spdlog::level::warn;
    if (const char* env = std::getenv("ASSM_LOG")) level = spdlog::level::from_str(env);
    created->set_level(level);
    return created;
  }();
  return *instance;
}

}  // namespace anatssm
