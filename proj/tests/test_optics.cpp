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

#include "tbqkd/optics.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace tbqkd;

namespace {

constexpr double kPi = std::numbers::pi;

double sigma_of(double fwhm) { return fwhm / (2.0 * std::sqrt(2.0 * std::log(2.0))); }

double phi(double z) { return 0.5 * (1.0 + std::erf(z / std::sqrt(2.0))); }

// A Gaussian convolved with a Gaussian-edged box has erf edges of the combined
// width; closed form for the overlap weight at pump offset x.
double overlap_closed_form(const SwitchModel &m, double x) {
    double s = std::hypot(sigma_of(m.pump_fwhm_ps), sigma_of(m.signal_fwhm_ps));
    return phi((m.walkoff_ps - x) / s) - phi(-x / s);
}

// Midpoint double sum over signal time t and pump centre c in [x - W, x].
double overlap_brute_force(const SwitchModel &m, double x, int nt, int nc) {
    double ss = sigma_of(m.signal_fwhm_ps);
    double sp = sigma_of(m.pump_fwhm_ps);
    double t_lo = -8 * ss, t_hi = 8 * ss;
    double dt = (t_hi - t_lo) / nt;
    double dc = m.walkoff_ps / nc;
    auto gauss = [](double u, double s) { return std::exp(-0.5 * u * u / (s * s)) / (s * std::sqrt(2 * kPi)); };
    double acc = 0;
    for (int i = 0; i < nt; ++i) {
        double t = t_lo + (i + 0.5) * dt;
        double slice = 0;
        for (int k = 0; k < nc; ++k) {
            double c = x - m.walkoff_ps + (k + 0.5) * dc;
            slice += gauss(t - c, sp) * dc;
        }
        acc += gauss(t, ss) * slice * dt;
    }
    return acc;
}

}  // namespace

TEST(SwitchingEfficiency, Examples) {
    EXPECT_NEAR(switching_efficiency(kPi / 4, kPi), 1.0, 1e-15);
    EXPECT_NEAR(switching_efficiency(0.0, kPi), 0.0, 1e-15);
    EXPECT_NEAR(switching_efficiency(kPi / 4, kPi / 2), 0.5, 1e-15);
}

TEST(SwitchingEfficiency, FormulaPeriodicityAndBounds) {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(-20.0, 20.0);
    for (int k = 0; k < 100000; ++k) {
        double th = u(rng), dp = u(rng);
        double eta = switching_efficiency(th, dp);
        double s2 = std::sin(2 * th), sh = std::sin(dp / 2);
        ASSERT_NEAR(eta, s2 * s2 * sh * sh, 1e-12);
        ASSERT_GE(eta, 0.0);
        ASSERT_LE(eta, 1.0);
        ASSERT_NEAR(switching_efficiency(th + kPi, dp), eta, 1e-12);
        ASSERT_NEAR(switching_efficiency(th, dp + 2 * kPi), eta, 1e-12);
    }
}

TEST(NonlinearPhase, ZeroAndLinearity) {
    const double n2 = 2.6e-20, L = 1.0, lam = 720.8e-9;
    EXPECT_EQ(nonlinear_phase(n2, L, 0.0, lam), 0.0);
    for (double I : {1e12, 3.7e14, 5e15}) {
        EXPECT_NEAR(nonlinear_phase(n2, L, 2 * I, lam), 2 * nonlinear_phase(n2, L, I, lam),
                    1e-12 * nonlinear_phase(n2, L, 2 * I, lam));
        EXPECT_NEAR(nonlinear_phase(2 * n2, L, I, lam), 2 * nonlinear_phase(n2, L, I, lam),
                    1e-12 * nonlinear_phase(n2, L, 2 * I, lam));
        EXPECT_NEAR(nonlinear_phase(n2, 2 * L, I, lam), 2 * nonlinear_phase(n2, L, I, lam),
                    1e-12 * nonlinear_phase(n2, L, 2 * I, lam));
    }
}

TEST(NonlinearPhase, PiCalibrationPoint) {
    const double n2 = 2.6e-20, L = 0.75, lam = 720.8e-9;
    // Inverting 8 pi n2 L I / (3 lambda) = pi by hand.
    double I_pi = 3.0 * lam / (8.0 * n2 * L);
    EXPECT_NEAR(pi_phase_intensity(n2, L, lam), I_pi, 1e-9 * I_pi);
    EXPECT_NEAR(nonlinear_phase(n2, L, I_pi, lam), kPi, 1e-12);
}

TEST(NonlinearPhase, RejectsNonPositive) {
    EXPECT_THROW(nonlinear_phase(0.0, 1.0, 1.0, 1e-6), Error);
    EXPECT_THROW(nonlinear_phase(1e-20, -1.0, 1.0, 1e-6), Error);
    EXPECT_THROW(nonlinear_phase(1e-20, 1.0, -1.0, 1e-6), Error);
    EXPECT_THROW(nonlinear_phase(1e-20, 1.0, 1.0, 0.0), Error);
}

TEST(PulseDuration, TransformLimitedGaussian) {
    // FWHM_t = (2 ln2 / pi) lambda^2 / (c dlambda)
    auto oracle = [](double lnm, double dlnm) {
        return 2 * std::log(2.0) / kPi * (lnm * 1e-9) * (lnm * 1e-9) / (299792458.0 * dlnm * 1e-9) * 1e12;
    };
    EXPECT_NEAR(transform_limited_fwhm_ps(720.8, 1.7), oracle(720.8, 1.7), 1e-12);
    EXPECT_NEAR(transform_limited_fwhm_ps(800.0, 2.1), oracle(800.0, 2.1), 1e-12);
    EXPECT_NEAR(transform_limited_fwhm_ps(720.8, 1.7), 0.4499, 1e-4);
    EXPECT_THROW(transform_limited_fwhm_ps(720.8, 0.0), Error);
}

TEST(PumpOverlap, ClosedFormOracle) {
    SwitchModel m;
    for (double x = -4.0; x <= 10.0; x += 0.05) {
        ASSERT_NEAR(pump_overlap_fraction_at(m, x), overlap_closed_form(m, x), 1e-9) << x;
    }
    SwitchModel wide;
    wide.pump_fwhm_ps = 1.3;
    wide.signal_fwhm_ps = 2.1;
    wide.walkoff_ps = 3.0;
    for (double x = -8.0; x <= 12.0; x += 0.1) {
        ASSERT_NEAR(pump_overlap_fraction_at(wide, x), overlap_closed_form(wide, x), 1e-9) << x;
    }
}

TEST(PumpOverlap, BruteForceGridOracle) {
    SwitchModel m;
    for (double x : {-1.0, -0.2, 0.0, 0.3, 2.25, 5.7, 6.0, 6.4}) {
        EXPECT_NEAR(pump_overlap_fraction_at(m, x), overlap_brute_force(m, x, 2000, 2000), 1e-4) << x;
    }
}

TEST(PumpOverlap, FarAndPlateau) {
    SwitchModel m;
    m.pump_delay_ps = 10 * (m.pump_fwhm_ps + m.walkoff_ps) + m.walkoff_ps;
    EXPECT_LT(pump_overlap_fraction(m), 1e-6);
    m.pump_delay_ps = -10 * (m.pump_fwhm_ps + m.walkoff_ps);
    EXPECT_LT(pump_overlap_fraction(m), 1e-6);

    SwitchModel wide;
    wide.walkoff_ps = 100.0;
    wide.pump_delay_ps = 50.0;
    EXPECT_NEAR(pump_overlap_fraction(wide), 1.0, 1e-6);
    EXPECT_NEAR(pump_overlap_fraction(wide), overlap_brute_force(wide, 50.0, 400, 20000), 1e-4);
}

TEST(PumpOverlap, SymmetricAboutPlateauCentre) {
    SwitchModel m;
    double c = 0.5 * m.walkoff_ps;
    for (double d = 0; d < 8.0; d += 0.1) {
        ASSERT_NEAR(pump_overlap_fraction_at(m, c + d), pump_overlap_fraction_at(m, c - d), 1e-12) << d;
    }
}

TEST(PumpOverlap, PlateauMaximumEqualsPeakEfficiency) {
    for (auto [th, dp] : {std::pair{kPi / 4, kPi}, std::pair{0.6, 2.0}, std::pair{0.3, 1.1}}) {
        SwitchModel m;
        m.theta = th;
        m.delta_phi_peak = dp;
        double best = 0;
        for (double x = -3.0; x <= 9.0; x += 0.01) best = std::max(best, effective_efficiency(m, x));
        EXPECT_NEAR(best, switching_efficiency(th, dp), 1e-6);
        // Plateau width at half of the peak phase is about the walkoff.
        double lo = 1e9, hi = -1e9;
        for (double x = -3.0; x <= 9.0; x += 0.001) {
            if (pump_overlap_fraction_at(m, x) >= 0.5) {
                lo = std::min(lo, x);
                hi = std::max(hi, x);
            }
        }
        EXPECT_NEAR(hi - lo, m.walkoff_ps, 0.01);
    }
}

TEST(SwitchModel, Validation) {
    SwitchModel m;
    EXPECT_NO_THROW(m.validate());
    m.theta = 2.0;
    EXPECT_THROW(m.validate(), Error);
    m = {};
    m.walkoff_ps = 0.0;
    EXPECT_THROW(m.validate(), Error);
    m = {};
    m.delta_phi_peak = -0.1;
    EXPECT_THROW(m.validate(), Error);
}

TEST(ApplySwitch, Examples) {
    SwitchModel m;  // default pump delay sits on the plateau; theta = pi/4, dphi = pi
    ASSERT_NEAR(switching_efficiency(m.theta, m.delta_phi_peak * pump_overlap_fraction(m)), 1.0, 1e-12);
    const auto t = mub_states(Basis::Time);
    const auto p = mub_states(Basis::Phase);

    auto s = apply_switch(t[0], m, Bin::T0);
    EXPECT_NEAR(std::abs(s.amp[SwitchedState::T0V]), 1.0, 1e-12);
    EXPECT_NEAR(s.norm_squared(), 1.0, 1e-12);

    for (double delay : {-3.0, 0.5, 2.25, 20.0}) {
        m.pump_delay_ps = delay;
        auto u = apply_switch(t[1], m, Bin::T0);
        EXPECT_EQ(u.amp[SwitchedState::T1H], cplx(1.0));
        EXPECT_EQ(std::abs(u.amp[SwitchedState::T1V]), 0.0);
    }

    m = {};
    auto ph = apply_switch(p[0], m, Bin::T0);
    const double r = 1.0 / std::sqrt(2.0);
    // Matrix oracle: diag block [[sqrt(1-eta), 0], [0, sqrt(eta)]] on (t0H, t0V) from t0H input.
    EXPECT_NEAR(ph.amp[SwitchedState::T0V].real(), r, 1e-12);
    EXPECT_NEAR(ph.amp[SwitchedState::T1H].real(), r, 1e-12);
    EXPECT_NEAR(std::abs(ph.amp[SwitchedState::T0H]), 0.0, 1e-6);
    EXPECT_NEAR(std::abs(ph.amp[SwitchedState::T1V]), 0.0, 1e-15);
}

TEST(ApplySwitch, PartialSwitchAndPhaseOffset) {
    SwitchModel m;
    m.delta_phi_peak = kPi / 2;  // eta = 1/2 on the plateau
    m.bin_phase_offset = 0.7;
    auto s = apply_switch(mub_states(Basis::Time)[0], m, Bin::T0);
    EXPECT_NEAR(std::norm(s.amp[SwitchedState::T0V]), 0.5, 1e-9);
    EXPECT_NEAR(std::norm(s.amp[SwitchedState::T0H]), 0.5, 1e-9);
    EXPECT_NEAR(std::arg(s.amp[SwitchedState::T0V]), 0.7, 1e-12);

    auto s1 = apply_switch(mub_states(Basis::Time)[1], m, Bin::T1);
    EXPECT_NEAR(std::norm(s1.amp[SwitchedState::T1V]), 0.5, 1e-9);
}

TEST(ApplySwitch, NormPreservedForRandomStatesAndModels) {
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 10000; ++k) {
        TimeBinQubit q{cplx(g(rng), g(rng)), cplx(g(rng), g(rng))};
        double n = std::sqrt(q.norm_squared());
        q = {q.amp_t0 / n, q.amp_t1 / n};
        SwitchModel m;
        m.theta = u(rng) * kPi / 2;
        m.delta_phi_peak = u(rng) * 3 * kPi;
        m.pump_fwhm_ps = 0.1 + 2 * u(rng);
        m.signal_fwhm_ps = 0.1 + 2 * u(rng);
        m.walkoff_ps = 0.5 + 10 * u(rng);
        m.pump_delay_ps = -5 + 20 * u(rng);
        m.bin_phase_offset = 2 * kPi * u(rng);
        ASSERT_NEAR(apply_switch(q, m, k % 2 ? Bin::T1 : Bin::T0).norm_squared(), 1.0, 1e-12);
        ASSERT_NEAR(apply_switch_both_bins(q, m, 4.5).norm_squared(), 1.0, 1e-12);
    }
}

TEST(ApplySwitch, BothBinsMissesLateBinOnDefaultDelay) {
    SwitchModel m;
    auto s = apply_switch_both_bins(mub_states(Basis::Time)[1], m, 4.5);
    EXPECT_NEAR(std::norm(s.amp[SwitchedState::T1H]), 1.0, 1e-9);
    auto s0 = apply_switch_both_bins(mub_states(Basis::Time)[0], m, 4.5);
    EXPECT_NEAR(std::norm(s0.amp[SwitchedState::T0V]), 1.0, 1e-9);
}

TEST(ApplySwitch, RejectsInvalidState) {
    SwitchModel m;
    EXPECT_THROW(apply_switch(TimeBinQubit{1.0, 1.0}, m, Bin::T0), Error);
}
