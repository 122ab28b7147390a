// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#include <dynmap/core/log.hpp>

#include <atomic>
#include <cstdio>
#include <mutex>

namespace dynmap {

namespace {
std::atomic<LogLevel> g_level{LogLevel::info};
std::mutex g_mutex;
constexpr const char* kTags[] = {"debug", "info", "warn", "error"};
} // namespace

void set_log_level(LogLevel level) noexcept { g_level = level; }
LogLevel log_level() noexcept { return g_level; }

void log(LogLevel level, std::string_view message) {
    if (level < g_level.load() || level == LogLevel::off) {
        return;
    }
    std::lock_guard lock(g_mutex);
    std::fprintf(stderr, "[dynmap %s] %.*s\n", kTags[static_cast<int>(level)], static_cast<int>(message.size()),
                 message.data());
}

} // namespace dynmap
