// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <dynmap/diff/tensor.hpp>

#include <cstdint>
#include <random>

namespace dynmap {

using Rng = std::mt19937_64;

/// Uniform(-b, b) with b = sqrt(6 / fan_in).
void kaiming_uniform(diff::Tensor& t, std::int64_t fan_in, Rng& rng);
void uniform_fill(diff::Tensor& t, double lo, double hi, Rng& rng);
void normal_fill(diff::Tensor& t, double mean, double stddev, Rng& rng);

} // namespace dynmap
