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

// Counts -> probability-of-detection matrix -> fidelities -> QBER -> decoy
// bounds -> asymptotic decoy-state BB84 secret key rate.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "tbqkd/detection.hpp"
#include "tbqkd/error.hpp"
#include "tbqkd/qubit.hpp"
#include "tbqkd/source.hpp"

namespace tbqkd {

/// P_{i,j}^{(alpha,beta)}, indexed p[alpha][i][beta][j]; rows normalized over j.
struct ProbabilityMatrix {
    std::array<std::array<std::array<std::array<double, 2>, 2>, 2>, 2> p{};

    double at(int alpha, int i, int beta, int j) const { return p[alpha][i][beta][j]; }
};

using RowCounts = std::array<std::array<std::array<std::array<uint64_t, 2>, 2>, 2>, 2>;

inline ProbabilityMatrix probability_matrix(const RowCounts &n, std::string_view label = "") {
    ProbabilityMatrix m;
    for (int a = 0; a < 2; ++a)
        for (int i = 0; i < 2; ++i)
            for (int b = 0; b < 2; ++b) {
                uint64_t total = n[a][i][b][0] + n[a][i][b][1];
                if (total == 0) {
                    fail(ErrorCategory::NoData, "probability_matrix: no detections in row " +
                                                    (label.empty() ? std::string() : std::string(label) + " ") +
                                                    "alpha=" + std::string(basis_name(static_cast<Basis>(a))) +
                                                    " i=" + std::to_string(i) +
                                                    " beta=" + std::string(basis_name(static_cast<Basis>(b))));
                }
                m.p[a][i][b][0] = static_cast<double>(n[a][i][b][0]) / static_cast<double>(total);
                m.p[a][i][b][1] = static_cast<double>(n[a][i][b][1]) / static_cast<double>(total);
            }
    return m;
}

inline ProbabilityMatrix probability_matrix(const SessionCounts &c, IntensityClass cls = IntensityClass::Signal) {
    return probability_matrix(c.counts[static_cast<int>(cls)], class_name(cls));
}

/// F_i^{(alpha)} = P_{i,i}^{(alpha,alpha)}, ordered phi0, phi1, t0, t1.
inline std::array<double, 4> fidelities(const ProbabilityMatrix &m) {
    return {m.at(0, 0, 0, 0), m.at(0, 1, 0, 1), m.at(1, 0, 1, 0), m.at(1, 1, 1, 1)};
}

inline double qber(const std::array<double, 4> &f) {
    double s = 0;
    for (double v : f) {
        if (!(v >= 0 && v <= 1)) {
            fail(ErrorCategory::InvalidInput, "qber: fidelities must lie in [0, 1]");
        }
        s += v;
    }
    return 1.0 - 0.25 * s;
}

inline double binary_entropy(double x) {
    if (!(x >= 0 && x <= 1)) {
        fail(ErrorCategory::InvalidInput, "binary_entropy: argument must lie in [0, 1]");
    }
    if (x == 0.0 || x == 1.0) {
        return 0.0;
    }
    return -x * std::log2(x) - (1.0 - x) * std::log2(1.0 - x);
}

struct DecoyEstimates {
    double mu = 0, nu = 0;
    double Y0 = 0;
    double Y1_lower = 0;
    double Q1_lower = 0;
    double e1_upper = 0;
    double Q_mu = 0, E_mu = 0;
    double Q_nu = 0, E_nu = 0;
    bool y1_clamped = false;
    bool e1_clamped = false;
    bool no_single_photon_signal = false;
};

/// Background error rate of uniformly random dark/background clicks.
inline constexpr double kBackgroundErrorRate = 0.5;

/// Vacuum + weak decoy bounds on the single-photon yield, gain and error rate.
inline DecoyEstimates decoy_bounds(double Q_mu, double E_mu, double Q_nu, double E_nu, double Y0, double mu,
                                   double nu) {
    if (!(nu > 0 && nu < mu) || !std::isfinite(mu)) {
        fail(ErrorCategory::InvalidInput, "decoy_bounds: require 0 < nu < mu");
    }
    for (double v : {Q_mu, E_mu, Q_nu, E_nu, Y0}) {
        if (!(v >= 0 && v <= 1)) {
            fail(ErrorCategory::InvalidInput, "decoy_bounds: gains, error rates and Y0 must lie in [0, 1]");
        }
    }
    DecoyEstimates d;
    d.mu = mu;
    d.nu = nu;
    d.Y0 = Y0;
    d.Q_mu = Q_mu;
    d.E_mu = E_mu;
    d.Q_nu = Q_nu;
    d.E_nu = E_nu;

    const double mu2 = mu * mu;
    const double nu2 = nu * nu;
    double y1 = mu / (mu * nu - nu2) *
                (Q_nu * std::exp(nu) - Q_mu * std::exp(mu) * nu2 / mu2 - (mu2 - nu2) / mu2 * Y0);
    if (y1 < 0 || y1 > 1) {
        d.y1_clamped = true;
        y1 = std::clamp(y1, 0.0, 1.0);
    }
    d.Y1_lower = y1;
    if (!(y1 > 0)) {
        d.no_single_photon_signal = true;
        d.Q1_lower = 0;
        d.e1_upper = kBackgroundErrorRate;
        return d;
    }
    d.Q1_lower = y1 * mu * std::exp(-mu);
    double e1 = (E_nu * Q_nu * std::exp(nu) - kBackgroundErrorRate * Y0) / (y1 * nu);
    if (e1 < 0 || e1 > 1) {
        d.e1_clamped = true;
        e1 = std::clamp(e1, 0.0, 1.0);
    }
    d.e1_upper = e1;
    return d;
}

/// Error-correction inefficiency f(E). Constant unless a table of
/// (max QBER, f) steps is given, in which case the first step whose bound
/// covers E applies.
struct ErrorCorrectionModel {
    double constant = 1.22;
    std::vector<std::pair<double, double>> table;

    double operator()(double qber_value) const {
        for (const auto &[bound, f] : table) {
            if (qber_value <= bound) return f;
        }
        return table.empty() ? constant : table.back().second;
    }
};

struct KeyRateReport {
    double q = 0.5;
    double f = 1.22;
    double f_rep = 80e6;
    double Q_mu = 0;
    double E_mu = 0;
    double Q_1 = 0;
    double e_1 = 0;
    double H2_E_mu = 0;
    double H2_e_1 = 0;
    double ec_cost = 0;        // Q_mu f H2(E_mu)
    double privacy_term = 0;   // Q_1 (1 - H2(e_1))
    double rate_per_pulse = 0; // bits / pulse
    double rate_per_second = 0;
    bool clamped = false;
    bool no_single_photon_signal = false;
};

/// R >= q (-Q_mu f H2(E_mu) + Q_1 [1 - H2(e_1)]), clamped at 0. Error rates
/// above 1/2 carry no less information than 1/2, so the entropies saturate.
inline KeyRateReport secret_key_rate(double q, double Q_mu, double E_mu, double f, const DecoyEstimates &est,
                                     double f_rep) {
    if (!(q > 0 && q <= 1)) fail(ErrorCategory::InvalidInput, "secret_key_rate: q must lie in (0, 1]");
    if (!(f >= 1)) fail(ErrorCategory::InvalidInput, "secret_key_rate: f must be >= 1");
    if (!(f_rep > 0)) fail(ErrorCategory::InvalidInput, "secret_key_rate: repetition rate must be > 0");
    if (!(Q_mu >= 0 && Q_mu <= 1) || !(E_mu >= 0 && E_mu <= 1)) {
        fail(ErrorCategory::InvalidInput, "secret_key_rate: Q_mu and E_mu must lie in [0, 1]");
    }
    KeyRateReport r;
    r.q = q;
    r.f = f;
    r.f_rep = f_rep;
    r.Q_mu = Q_mu;
    r.E_mu = E_mu;
    r.Q_1 = est.Q1_lower;
    r.e_1 = est.e1_upper;
    r.H2_E_mu = binary_entropy(std::min(E_mu, 0.5));
    r.H2_e_1 = binary_entropy(std::min(est.e1_upper, 0.5));
    r.ec_cost = Q_mu * f * r.H2_E_mu;
    r.privacy_term = est.Q1_lower * (1.0 - r.H2_e_1);
    r.no_single_photon_signal = est.no_single_photon_signal;
    double bound = q * (r.privacy_term - r.ec_cost);
    if (est.no_single_photon_signal || !(bound > 0)) {
        r.clamped = bound < 0 || est.no_single_photon_signal;
        bound = 0;
    }
    r.rate_per_pulse = bound;
    r.rate_per_second = bound * f_rep;
    return r;
}

/// Linear-loss channel with background: an n-photon pulse is detected with
/// Y_n = Y0 + 1 - (1 - eta)^n; background errs with 1/2, signal with e_d.
struct AnalyticChannel {
    double eta = 1.0;          // end-to-end transmittance including detectors
    double Y0 = 0.0;
    double misalignment = 0.0;

    double gain(double mean) const { return Y0 - std::expm1(-eta * mean); }

    double qber(double mean) const {
        double q = gain(mean);
        return q > 0 ? (kBackgroundErrorRate * Y0 + misalignment * -std::expm1(-eta * mean)) / q : 0.0;
    }

    double single_photon_yield() const { return Y0 + eta; }

    double single_photon_error() const {
        double y1 = single_photon_yield();
        return y1 > 0 ? (kBackgroundErrorRate * Y0 + misalignment * eta) / y1 : 0.0;
    }
};

struct KeyRateParameters {
    double q = 0.5;
    ErrorCorrectionModel f{};
    double f_rep = 80e6;
};

/// Expected key rate of a channel for signal `mu` and decoy `nu`.
inline KeyRateReport analytic_key_rate(const AnalyticChannel &ch, double mu, double nu,
                                       const KeyRateParameters &params = {}) {
    double Q_mu = ch.gain(mu);
    double E_mu = ch.qber(mu);
    DecoyEstimates est = decoy_bounds(Q_mu, E_mu, ch.gain(nu), ch.qber(nu), ch.Y0, mu, nu);
    return secret_key_rate(params.q, Q_mu, E_mu, params.f(E_mu), est, params.f_rep);
}

/// Decoy intensity in [nu_min, nu_max] maximizing the analytic key rate: a
/// 50-point grid, then golden-section refinement around the best grid cell.
inline double optimize_decoy_intensity(const AnalyticChannel &ch, double mu, double nu_min, double nu_max,
                                       const KeyRateParameters &params = {}, double tol = 1e-4) {
    if (!(nu_min > 0) || !(nu_max < mu) || !(nu_min <= nu_max)) {
        fail(ErrorCategory::InvalidInput, "optimize_decoy_intensity: require 0 < nu_min <= nu_max < mu");
    }
    if (nu_min == nu_max) {
        return nu_min;
    }
    auto rate = [&](double nu) { return analytic_key_rate(ch, mu, nu, params).rate_per_pulse; };
    constexpr int kGrid = 50;
    const double step = (nu_max - nu_min) / (kGrid - 1);
    int best = 0;
    double best_rate = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < kGrid; ++k) {
        double r = rate(nu_min + step * k);
        if (r > best_rate) {
            best_rate = r;
            best = k;
        }
    }
    double a = nu_min + step * std::max(0, best - 1);
    double b = nu_min + step * std::min(kGrid - 1, best + 1);
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = rate(c);
    double fd = rate(d);
    while (b - a > tol) {
        if (fc >= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = rate(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = rate(d);
        }
    }
    double x = 0.5 * (a + b);
    // Keep the grid winner if refinement landed on a flat or worse point.
    double grid_x = nu_min + step * best;
    return rate(x) >= best_rate ? x : grid_x;
}

/// Everything the analysis chain derives from one set of counts.
struct SessionAnalysis {
    ProbabilityMatrix signal_matrix;
    std::array<double, 4> fidelity{};
    double Q_mu = 0, E_mu = 0;
    double Q_nu = 0, E_nu = 0;
    double Y0 = 0;
    double matched_fraction = 0;
    DecoyEstimates decoy;
    KeyRateReport key;
};

inline SessionAnalysis analyze_counts(const SessionCounts &c, double mu, double nu,
                                      const KeyRateParameters &params = {}) {
    SessionAnalysis a;
    uint64_t sent_mu = c.total_sent(IntensityClass::Signal);
    uint64_t sent_nu = c.total_sent(IntensityClass::Decoy);
    if (sent_mu == 0 || sent_nu == 0) {
        fail(ErrorCategory::NoData, "analyze: no signal or decoy pulses were sent");
    }
    a.signal_matrix = probability_matrix(c, IntensityClass::Signal);
    a.fidelity = fidelities(a.signal_matrix);
    a.E_mu = qber(a.fidelity);
    // Decoy rows are sparse; pool all matched-basis decoy clicks instead.
    uint64_t decoy_matched = c.matched_clicks(IntensityClass::Decoy);
    if (decoy_matched == 0) fail(ErrorCategory::NoData, "analyze: no matched-basis decoy detections");
    a.E_nu = static_cast<double>(c.matched_errors(IntensityClass::Decoy)) / static_cast<double>(decoy_matched);
    a.Q_mu = static_cast<double>(c.total_clicks(IntensityClass::Signal)) / static_cast<double>(sent_mu);
    a.Q_nu = static_cast<double>(c.total_clicks(IntensityClass::Decoy)) / static_cast<double>(sent_nu);
    uint64_t sent_vac = c.total_sent(IntensityClass::Vacuum);
    a.Y0 = sent_vac > 0 ? static_cast<double>(c.total_clicks(IntensityClass::Vacuum)) / static_cast<double>(sent_vac)
                        : 0.0;
    uint64_t all = c.total_clicks(IntensityClass::Signal);
    a.matched_fraction = all > 0 ? static_cast<double>(c.matched_clicks(IntensityClass::Signal)) / static_cast<double>(all)
                                 : 0.0;
    a.decoy = decoy_bounds(a.Q_mu, a.E_mu, a.Q_nu, a.E_nu, a.Y0, mu, nu);
    a.key = secret_key_rate(params.q, a.Q_mu, a.E_mu, params.f(a.E_mu), a.decoy, params.f_rep);
    return a;
}

}  // namespace tbqkd
