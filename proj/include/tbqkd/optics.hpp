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

// Cross-phase-modulation polarization switch. A strong pump co-propagating
// with the signal in single-mode fiber acts as a transient wave plate on the
// time bin it overlaps; the overlap window is set by the group-velocity
// walkoff between the two pulses.

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "tbqkd/error.hpp"
#include "tbqkd/qubit.hpp"

namespace tbqkd {

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s

enum class Bin : int { T0 = 0, T1 = 1 };

struct SwitchModel {
    double theta = std::numbers::pi / 4;      // pump-signal polarization angle, rad
    double delta_phi_peak = std::numbers::pi; // nonlinear phase at full overlap, rad
    double pump_fwhm_ps = 0.4486;
    double signal_fwhm_ps = 0.4499;
    double walkoff_ps = 6.0;
    double pump_delay_ps = 2.25;       // pump position relative to the |t0> bin
    double bin_phase_offset = 0.0;     // phase imparted to switched light, rad

    void validate() const {
        auto bad = [](const std::string &m) { fail(ErrorCategory::InvalidInput, "SwitchModel: " + m); };
        if (!(pump_fwhm_ps > 0) || !(signal_fwhm_ps > 0) || !(walkoff_ps > 0)) {
            bad("pulse durations and walkoff must be > 0");
        }
        if (!(theta >= 0 && theta <= std::numbers::pi / 2)) {
            bad("theta must lie in [0, pi/2]");
        }
        if (!(delta_phi_peak >= 0) || !std::isfinite(delta_phi_peak)) {
            bad("delta_phi_peak must be finite and >= 0");
        }
        if (!std::isfinite(pump_delay_ps) || !std::isfinite(bin_phase_offset)) {
            bad("pump_delay_ps and bin_phase_offset must be finite");
        }
    }
};

/// Intensity FWHM (ps) of a transform-limited Gaussian pulse with the given
/// spectral FWHM: dt = (2 ln2 / pi) * lambda^2 / (c * dlambda).
inline double transform_limited_fwhm_ps(double wavelength_nm, double bandwidth_nm) {
    if (!(wavelength_nm > 0) || !(bandwidth_nm > 0)) {
        fail(ErrorCategory::InvalidInput, "transform_limited_fwhm_ps: wavelength and bandwidth must be > 0");
    }
    const double tbp = 2.0 * std::numbers::ln2 / std::numbers::pi;
    double lambda = wavelength_nm * 1e-9;
    double dlambda = bandwidth_nm * 1e-9;
    return tbp * lambda * lambda / (kSpeedOfLight * dlambda) * 1e12;
}

/// Kerr cross-phase shift 8 pi n2 L_eff I / (3 lambda). n2 in m^2/W, L_eff in
/// m, intensity in W/m^2, wavelength in m.
inline double nonlinear_phase(double n2, double l_eff, double pump_intensity, double lambda_signal) {
    if (!(n2 > 0) || !(l_eff > 0) || !(lambda_signal > 0)) {
        fail(ErrorCategory::InvalidInput, "nonlinear_phase: n2, L_eff and wavelength must be > 0");
    }
    if (!(pump_intensity >= 0) || !std::isfinite(pump_intensity)) {
        fail(ErrorCategory::InvalidInput, "nonlinear_phase: pump intensity must be finite and >= 0");
    }
    return 8.0 * std::numbers::pi * n2 * l_eff * pump_intensity / (3.0 * lambda_signal);
}

/// Pump intensity giving a pi phase shift for the given fiber.
inline double pi_phase_intensity(double n2, double l_eff, double lambda_signal) {
    return 3.0 * lambda_signal / (8.0 * n2 * l_eff);
}

/// eta = sin^2(2 theta) sin^2(delta_phi / 2).
inline double switching_efficiency(double theta, double delta_phi) {
    double a = std::sin(2.0 * theta);
    double b = std::sin(0.5 * delta_phi);
    return a * a * b * b;
}

namespace detail {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

inline double fwhm_to_sigma(double fwhm) { return fwhm / (2.0 * std::sqrt(2.0 * std::numbers::ln2)); }

}  // namespace detail

/// Fraction of the peak cross-phase picked up by a signal pulse when the pump
/// starts `offset_ps` after it and walks across by `walkoff_ps`.
///
/// A signal slice at local time t sees the pump centre sweep the interval
/// [offset - walkoff, offset]; integrating the pump intensity over that sweep
/// gives Phi((t - offset + W)/s_p) - Phi((t - offset)/s_p) of the full-passage
/// phase. The result is that slice weight averaged over the signal intensity
/// profile, evaluated with composite Simpson quadrature over +-9 sigma.
inline double pump_overlap_fraction_at(const SwitchModel &m, double offset_ps) {
    const double sp = detail::fwhm_to_sigma(m.pump_fwhm_ps);
    const double ss = detail::fwhm_to_sigma(m.signal_fwhm_ps);
    constexpr int kIntervals = 1200;  // even
    const double lo = -9.0 * ss;
    const double h = 18.0 * ss / kIntervals;
    const double norm = 1.0 / (ss * std::sqrt(2.0 * std::numbers::pi));
    double acc = 0.0;
    for (int k = 0; k <= kIntervals; ++k) {
        double t = lo + h * k;
        double profile = norm * std::exp(-0.5 * (t / ss) * (t / ss));
        double slice = detail::normal_cdf((t - offset_ps + m.walkoff_ps) / sp) -
                       detail::normal_cdf((t - offset_ps) / sp);
        double weight = (k == 0 || k == kIntervals) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
        acc += weight * profile * slice;
    }
    return std::clamp(acc * h / 3.0, 0.0, 1.0);
}

/// Overlap weight of the pump with the bin it targets, at `m.pump_delay_ps`.
inline double pump_overlap_fraction(const SwitchModel &m) {
    m.validate();
    return pump_overlap_fraction_at(m, m.pump_delay_ps);
}

/// Switching efficiency for a bin sitting `offset_ps` before the pump start.
/// The accumulated phase, not eta, scales with the overlap weight.
inline double effective_efficiency(const SwitchModel &m, double offset_ps) {
    return switching_efficiency(m.theta, m.delta_phi_peak * pump_overlap_fraction_at(m, offset_ps));
}

/// Amplitudes over bin x polarization. Unswitched light is H, switched is V.
struct SwitchedState {
    enum Mode : int { T0H = 0, T0V = 1, T1H = 2, T1V = 3 };
    std::array<cplx, 4> amp{};

    double norm_squared() const {
        double s = 0;
        for (const auto &a : amp) {
            s += std::norm(a);
        }
        return s;
    }
};

namespace detail {

inline void split_bin(cplx in, double eta, double phase, cplx &h, cplx &v) {
    eta = std::clamp(eta, 0.0, 1.0);
    v = in * std::sqrt(eta) * std::polar(1.0, phase);
    h = in * std::sqrt(1.0 - eta);
}

}  // namespace detail

/// Switch acting on one bin only; `m.pump_delay_ps` is measured from that bin.
inline SwitchedState apply_switch(const TimeBinQubit &q, const SwitchModel &m, Bin target) {
    require_normalized(q, "apply_switch");
    double eta = switching_efficiency(m.theta, m.delta_phi_peak * pump_overlap_fraction(m));
    SwitchedState out;
    if (target == Bin::T0) {
        detail::split_bin(q.amp_t0, eta, m.bin_phase_offset, out.amp[SwitchedState::T0H],
                          out.amp[SwitchedState::T0V]);
        out.amp[SwitchedState::T1H] = q.amp_t1;
    } else {
        out.amp[SwitchedState::T0H] = q.amp_t0;
        detail::split_bin(q.amp_t1, eta, m.bin_phase_offset, out.amp[SwitchedState::T1H],
                          out.amp[SwitchedState::T1V]);
    }
    return out;
}

/// Switch acting on both bins, each with the overlap it actually gets: |t0>
/// sits at `m.pump_delay_ps` from the pump, |t1> a further `bin_separation_ps`
/// away. This is what the receiver sees for arbitrary pump delays.
inline SwitchedState apply_switch_both_bins(const TimeBinQubit &q, const SwitchModel &m,
                                            double bin_separation_ps) {
    require_normalized(q, "apply_switch_both_bins");
    m.validate();
    double eta0 = effective_efficiency(m, m.pump_delay_ps);
    double eta1 = effective_efficiency(m, m.pump_delay_ps - bin_separation_ps);
    SwitchedState out;
    detail::split_bin(q.amp_t0, eta0, m.bin_phase_offset, out.amp[SwitchedState::T0H],
                      out.amp[SwitchedState::T0V]);
    detail::split_bin(q.amp_t1, eta1, m.bin_phase_offset, out.amp[SwitchedState::T1H],
                      out.amp[SwitchedState::T1V]);
    return out;
}

}  // namespace tbqkd
