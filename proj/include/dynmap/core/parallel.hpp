// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace dynmap {

/// Number of workers for `requested` (0 = hardware concurrency).
inline int resolve_threads(int requested) {
    if (requested > 0) {
        return requested;
    }
    return std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
}

/// Runs fn(i) for i in [0, n) on up to `threads` workers pulling indices from
/// a shared counter. The first exception is rethrown after all workers join.
template <class Fn>
void parallel_for(std::int64_t n, int threads, Fn&& fn) {
    const int workers = static_cast<int>(std::min<std::int64_t>(resolve_threads(threads), n));
    if (workers <= 1) {
        for (std::int64_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::int64_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto body = [&] {
        for (std::int64_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) {
                    error = std::current_exception();
                }
                next = n;
            }
        }
    };
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w) {
        pool.emplace_back(body);
    }
    body();
    for (auto& t : pool) {
        t.join();
    }
    if (error) {
        std::rethrow_exception(error);
    }
}

} // namespace dynmap
