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

// Time-bin qubit states over the {|t0>, |t1>} bin basis, the three mutually
// unbiased bases and the half-wave-plate preparation map.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>

#include "tbqkd/error.hpp"

namespace tbqkd {

using cplx = std::complex<double>;

/// Measurement/preparation basis. Numeric values follow the protocol labels:
/// Phase is basis 0, Time is basis 1. Circular is the third MUB, generated
/// but never sifted.
enum class Basis : int { Phase = 0, Time = 1, Circular = 2 };

inline constexpr std::array<Basis, 2> kSiftedBases = {Basis::Phase, Basis::Time};

inline std::string_view basis_name(Basis b) {
    switch (b) {
        case Basis::Phase: return "phase";
        case Basis::Time: return "time";
        case Basis::Circular: return "circular";
    }
    return "?";
}

inline constexpr int basis_index(Basis b) { return static_cast<int>(b); }

struct TimeBinQubit {
    cplx amp_t0{1.0, 0.0};
    cplx amp_t1{0.0, 0.0};

    double norm_squared() const { return std::norm(amp_t0) + std::norm(amp_t1); }

    bool is_normalized(double tol = 1e-9) const { return std::abs(norm_squared() - 1.0) <= tol; }
};

inline void require_normalized(const TimeBinQubit &q, std::string_view what) {
    if (!std::isfinite(q.norm_squared()) || !q.is_normalized(1e-9)) {
        fail(ErrorCategory::InvalidState,
             std::string(what) + ": qubit is not normalized (|a0|^2+|a1|^2 = " +
                 std::to_string(q.norm_squared()) + ")");
    }
}

namespace detail {

// cos/sin of an angle given in degrees, exact at multiples of 90 degrees.
inline std::pair<double, double> cos_sin_deg(double deg) {
    double x = std::fmod(deg, 360.0);
    if (x < 0) {
        x += 360.0;
    }
    long k = std::lround(x / 90.0);
    double r = (x - 90.0 * static_cast<double>(k)) * std::numbers::pi / 180.0;
    double c = std::cos(r);
    double s = std::sin(r);
    switch (k % 4) {
        case 0: return {c, s};
        case 1: return {-s, c};
        case 2: return {-c, -s};
        default: return {s, -c};
    }
}

}  // namespace detail

/// State leaving the HWP / alpha-BBO / PBS chain for a wave plate at
/// `hwp_angle_deg`: cos(2a)|t0> + sin(2a)|t1>. Angles are taken modulo 180.
inline TimeBinQubit prepare_state(double hwp_angle_deg) {
    if (!std::isfinite(hwp_angle_deg)) {
        fail(ErrorCategory::InvalidInput, "prepare_state: HWP angle must be finite");
    }
    auto [c, s] = detail::cos_sin_deg(2.0 * std::fmod(hwp_angle_deg, 180.0));
    return TimeBinQubit{cplx(c, 0.0), cplx(s, 0.0)};
}

/// The orthonormal pair {bit 0, bit 1} of a basis.
inline std::array<TimeBinQubit, 2> mub_states(Basis basis) {
    const double h = std::sqrt(0.5);
    switch (basis) {
        case Basis::Time:
            return {TimeBinQubit{{1, 0}, {0, 0}}, TimeBinQubit{{0, 0}, {1, 0}}};
        case Basis::Phase:
            return {TimeBinQubit{{h, 0}, {h, 0}}, TimeBinQubit{{h, 0}, {-h, 0}}};
        case Basis::Circular:
            return {TimeBinQubit{{h, 0}, {0, h}}, TimeBinQubit{{h, 0}, {0, -h}}};
    }
    fail(ErrorCategory::InvalidInput, "mub_states: unknown basis");
}

/// |<b|a>|^2. Symmetric; insensitive to global phase.
inline double overlap_probability(const TimeBinQubit &a, const TimeBinQubit &b) {
    require_normalized(a, "overlap_probability");
    require_normalized(b, "overlap_probability");
    cplx ip = std::conj(b.amp_t0) * a.amp_t0 + std::conj(b.amp_t1) * a.amp_t1;
    double p = std::norm(ip);
    return std::clamp(p, 0.0, 1.0);
}

/// Equality up to global phase.
inline bool same_state(const TimeBinQubit &a, const TimeBinQubit &b, double tol = 1e-12) {
    return std::abs(overlap_probability(a, b) - 1.0) <= tol;
}

struct PreparationSetting {
    double hwp_angle_deg = 0.0;
    Basis basis = Basis::Time;
    int bit = 0;
};

/// Wave-plate rotation sense of the preparation stage. The lab angles
/// (-22.5, 22.5) label (phi0, phi1); the bare rotation cos(2a), sin(2a) maps
/// -22.5 to (|t0> - |t1>)/sqrt2, so lab angles are mirrored before rotating.
inline constexpr double kHwpRotationSense = -1.0;

/// Lab HWP angles for the four BB84 states, in protocol order
/// |t0>, |t1>, |phi0>, |phi1>.
inline constexpr std::array<PreparationSetting, 4> kPreparationSettings = {{
    {0.0, Basis::Time, 0},
    {45.0, Basis::Time, 1},
    {-22.5, Basis::Phase, 0},
    {22.5, Basis::Phase, 1},
}};

inline PreparationSetting preparation_for(Basis basis, int bit) {
    for (const auto &s : kPreparationSettings) {
        if (s.basis == basis && s.bit == bit) {
            return s;
        }
    }
    fail(ErrorCategory::InvalidInput,
         "no HWP preparation for basis " + std::string(basis_name(basis)) + " bit " + std::to_string(bit));
}

inline std::optional<PreparationSetting> preparation_for_angle(double hwp_angle_deg) {
    for (const auto &s : kPreparationSettings) {
        if (s.hwp_angle_deg == hwp_angle_deg) {
            return s;
        }
    }
    return std::nullopt;
}

/// Physical qubit Alice emits for a lab setting.
inline TimeBinQubit prepared_state(const PreparationSetting &setting) {
    return prepare_state(kHwpRotationSense * setting.hwp_angle_deg);
}

/// Index 0..3 of a sifted (basis, bit) pair: 2*basis + bit.
inline constexpr int state_index(Basis basis, int bit) { return 2 * basis_index(basis) + bit; }

}  // namespace tbqkd
