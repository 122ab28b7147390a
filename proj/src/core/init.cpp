// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#include <dynmap/core/init.hpp>

#include <cmath>

namespace dynmap {

void uniform_fill(diff::Tensor& t, double lo, double hi, Rng& rng) {
    std::uniform_real_distribution<double> dist(lo, hi);
    auto& b = t.buffer();
    for (std::size_t i = 0; i < b.size(); ++i) {
        b.set(i, dist(rng));
    }
}

void kaiming_uniform(diff::Tensor& t, std::int64_t fan_in, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    uniform_fill(t, -bound, bound, rng);
}

void normal_fill(diff::Tensor& t, double mean, double stddev, Rng& rng) {
    std::normal_distribution<double> dist(mean, stddev);
    auto& b = t.buffer();
    for (std::size_t i = 0; i < b.size(); ++i) {
        b.set(i, dist(rng));
    }
}

} // namespace dynmap
