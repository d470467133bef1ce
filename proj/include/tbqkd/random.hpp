// Copyright 2026 The tbqkd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>

namespace tbqkd {

using Rng = std::mt19937_64;

constexpr uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Seed for an independent stream identified by a path of counters below the
/// master seed, e.g. {sweep_point, block}. Execution order never enters.
inline uint64_t derive_seed(uint64_t master, std::span<const uint64_t> path) {
    uint64_t h = splitmix64(master);
    for (uint64_t p : path) {
        h = splitmix64(h ^ splitmix64(p + 0x632BE59BD9B4E019ull));
    }
    return h;
}

inline uint64_t derive_seed(uint64_t master, std::initializer_list<uint64_t> path) {
    return derive_seed(master, std::span<const uint64_t>(path.begin(), path.size()));
}

inline Rng make_stream(uint64_t master, std::initializer_list<uint64_t> path) {
    return Rng(derive_seed(master, path));
}

inline double uniform01(Rng &rng) {
    // 53-bit mantissa, [0, 1).
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace tbqkd
