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

#include "tbqkd/analysis.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace tbqkd;

namespace {

// Key-rate bound written out term by term, independent of the library path.
double key_rate_by_hand(double q, double Qmu, double Emu, double f, double Q1, double e1) {
    auto h = [](double x) { return x <= 0 || x >= 1 ? 0.0 : -x * std::log(x) / std::log(2.0) - (1 - x) * std::log(1 - x) / std::log(2.0); };
    double r = q * (-Qmu * f * h(Emu) + Q1 * (1 - h(e1)));
    return r > 0 ? r : 0.0;
}

// Ground-truth channel: n-photon yield Y_n = Y0 + 1 - (1 - eta)^n, errors
// e0 = 1/2 on background and ed on signal.
struct TruthChannel {
    double eta, Y0, ed;
    double Q(double m) const { return Y0 + 1 - std::exp(-eta * m); }
    double E(double m) const { return (0.5 * Y0 + ed * (1 - std::exp(-eta * m))) / Q(m); }
    double Y1() const { return Y0 + eta; }
    double e1() const { return (0.5 * Y0 + ed * eta) / Y1(); }
};

RowCounts rows(uint64_t diag, uint64_t off, uint64_t cross0, uint64_t cross1) {
    RowCounts n{};
    for (int a = 0; a < 2; ++a)
        for (int i = 0; i < 2; ++i)
            for (int b = 0; b < 2; ++b) {
                if (a == b) {
                    n[a][i][b][i] = diag;
                    n[a][i][b][1 - i] = off;
                } else {
                    n[a][i][b][0] = cross0;
                    n[a][i][b][1] = cross1;
                }
            }
    return n;
}

}  // namespace

TEST(ProbabilityMatrix, Examples) {
    auto id = probability_matrix(rows(100, 0, 50, 50));
    for (int a = 0; a < 2; ++a)
        for (int i = 0; i < 2; ++i) {
            EXPECT_EQ(id.at(a, i, a, i), 1.0);
            EXPECT_EQ(id.at(a, i, a, 1 - i), 0.0);
            EXPECT_EQ(id.at(a, i, 1 - a, 0), 0.5);
        }
    auto f = fidelities(id);
    for (double v : f) EXPECT_EQ(v, 1.0);
    EXPECT_EQ(qber(f), 0.0);

    auto uniform = probability_matrix(rows(50, 50, 50, 50));
    for (double v : fidelities(uniform)) EXPECT_EQ(v, 0.5);
}

TEST(ProbabilityMatrix, RowsSumToOne) {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<uint64_t> u(1, 1000000);
    RowCounts n{};
    for (auto &a : n)
        for (auto &i : a)
            for (auto &b : i)
                for (auto &j : b) j = u(rng);
    auto m = probability_matrix(n);
    for (int a = 0; a < 2; ++a)
        for (int i = 0; i < 2; ++i)
            for (int b = 0; b < 2; ++b) {
                EXPECT_NEAR(m.at(a, i, b, 0) + m.at(a, i, b, 1), 1.0, 1e-15);
                EXPECT_GE(m.at(a, i, b, 0), 0.0);
                EXPECT_LE(m.at(a, i, b, 0), 1.0);
            }
}

TEST(ProbabilityMatrix, EmptyRowNamesTheRow) {
    auto n = rows(10, 1, 5, 5);
    n[1][0][0][0] = 0;
    n[1][0][0][1] = 0;
    try {
        probability_matrix(n, "signal");
        FAIL() << "expected no-data";
    } catch (const Error &e) {
        EXPECT_EQ(e.category(), ErrorCategory::NoData);
        std::string msg = e.what();
        EXPECT_NE(msg.find("signal"), std::string::npos);
        EXPECT_NE(msg.find("alpha=time i=0 beta=phase"), std::string::npos) << msg;
    }
}

TEST(Qber, Examples) {
    EXPECT_NEAR(qber({0.992, 0.992, 0.992, 0.992}), 0.008, 1e-15);
    EXPECT_NEAR(qber({1, 1, 0.98, 0.98}), 0.01, 1e-15);
    EXPECT_THROW(qber({1.1, 1, 1, 1}), Error);
}

TEST(BinaryEntropy, ValuesAndSymmetry) {
    EXPECT_EQ(binary_entropy(0.5), 1.0);
    EXPECT_EQ(binary_entropy(0.0), 0.0);
    EXPECT_EQ(binary_entropy(1.0), 0.0);
    // -0.008 log2 0.008 - 0.992 log2 0.992
    EXPECT_NEAR(binary_entropy(0.008), 0.0672216, 1e-7);
    EXPECT_THROW(binary_entropy(-1e-9), Error);
    EXPECT_THROW(binary_entropy(1.5), Error);
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 1000; ++k) {
        double x = u(rng);
        ASSERT_NEAR(binary_entropy(x), binary_entropy(1 - x), 1e-12);
    }
}

TEST(DecoyBounds, IdealSinglePhotonChannel) {
    TruthChannel ch{0.0347, 0.0, 0.0};
    auto d = decoy_bounds(ch.Q(0.8), ch.E(0.8), ch.Q(0.1), ch.E(0.1), 0.0, 0.8, 0.1);
    // Photon-number series: Y1_L = mu/(mu nu - nu^2) sum_n Y_n (nu^n - nu^2 mu^(n-2)) / n!
    const double mu = 0.8, nu = 0.1;
    double series = 0, fact = 1;
    for (int n = 1; n < 60; ++n) {
        fact *= n;
        double yn = 1 - std::pow(1 - ch.eta, n);
        series += yn * (std::pow(nu, n) - nu * nu * std::pow(mu, n - 2)) / fact;
    }
    series *= mu / (mu * nu - nu * nu);
    EXPECT_NEAR(d.Y1_lower, series, 1e-12);
    // Small-eta limit of the bound's tightness: mu/(mu-nu) (e^nu - nu e^mu / mu) ~ 0.945.
    double tight = mu / (mu - nu) * (std::exp(nu) - nu * std::exp(mu) / mu);
    EXPECT_NEAR(d.Y1_lower / ch.eta, tight, 5e-3);
    EXPECT_LE(d.Y1_lower, ch.eta);
    EXPECT_GE(d.Y1_lower, 0.9 * ch.eta);
    EXPECT_NEAR(d.Q1_lower, d.Y1_lower * 0.8 * std::exp(-0.8), 1e-15);
    EXPECT_FALSE(d.no_single_photon_signal);
    EXPECT_EQ(d.e1_upper, 0.0);
}

TEST(DecoyBounds, NoSignalIsFlagged) {
    auto d = decoy_bounds(0, 0, 0, 0, 0, 0.8, 0.1);
    EXPECT_TRUE(d.no_single_photon_signal);
    EXPECT_EQ(d.Q1_lower, 0.0);
    auto r = secret_key_rate(0.5, 0, 0, 1.22, d, 80e6);
    EXPECT_EQ(r.rate_per_pulse, 0.0);
    EXPECT_TRUE(r.clamped);
}

TEST(DecoyBounds, RejectsBadIntensities) {
    EXPECT_THROW(decoy_bounds(0.01, 0.01, 0.001, 0.01, 0, 0.1, 0.2), Error);
    EXPECT_THROW(decoy_bounds(0.01, 0.01, 0.001, 0.01, 0, 0.8, 0.0), Error);
    EXPECT_THROW(decoy_bounds(1.5, 0.01, 0.001, 0.01, 0, 0.8, 0.1), Error);
}

TEST(DecoyBounds, SandwichOverRandomChannels) {
    std::mt19937_64 rng(2718);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int violations = 0;
    for (int k = 0; k < 2000; ++k) {
        TruthChannel ch{std::exp(std::log(1e-3) + u(rng) * (std::log(0.5) - std::log(1e-3))), 1e-4 * u(rng),
                        0.05 * u(rng)};
        double mu = 0.3 + 0.6 * u(rng);
        double nu = (0.02 + 0.9 * u(rng)) * mu * 0.5;
        auto d = decoy_bounds(ch.Q(mu), ch.E(mu), ch.Q(nu), ch.E(nu), ch.Y0, mu, nu);
        if (d.Y1_lower > ch.Y1() * (1 + 1e-12) || d.e1_upper < ch.e1() * (1 - 1e-12)) ++violations;
    }
    EXPECT_EQ(violations, 0);
}

TEST(DecoyBounds, ErrorBoundCoversPhotonNumberIndependentErrors) {
    for (double ed : {0.001, 0.008, 0.03}) {
        for (double eta : {0.001, 0.0347, 0.3}) {
            TruthChannel ch{eta, 0.0, ed};
            auto d = decoy_bounds(ch.Q(0.8), ch.E(0.8), ch.Q(0.1), ch.E(0.1), 0.0, 0.8, 0.1);
            EXPECT_GE(d.e1_upper, ch.E(0.8) * (1 - 1e-12));
        }
    }
}

TEST(KeyRate, HandEvaluatedOperatingPoint) {
    DecoyEstimates est;
    est.Q1_lower = 0.01247;
    est.e1_upper = 0.012;
    auto r = secret_key_rate(0.5, 0.0274, 0.008, 1.22, est, 80e6);
    double by_hand = key_rate_by_hand(0.5, 0.0274, 0.008, 1.22, 0.01247, 0.012);
    EXPECT_NEAR(r.rate_per_pulse, by_hand, 1e-12 * by_hand);
    EXPECT_NEAR(r.rate_per_second, by_hand * 80e6, 1e-12 * by_hand * 80e6);
    EXPECT_NEAR(r.rate_per_second, 0.36e6, 0.01e6);
    EXPECT_FALSE(r.clamped);
    EXPECT_NEAR(r.H2_E_mu, binary_entropy(0.008), 0);
    EXPECT_NEAR(r.ec_cost, 0.0274 * 1.22 * binary_entropy(0.008), 1e-18);
}

TEST(KeyRate, AgreesWithHandFormulaOnRandomInputs) {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 10000; ++k) {
        double Qmu = 0.1 * u(rng), Emu = 0.1 * u(rng), f = 1 + u(rng), q = 0.1 + 0.9 * u(rng);
        DecoyEstimates est;
        est.Q1_lower = Qmu * u(rng);
        est.e1_upper = 0.1 * u(rng);
        auto r = secret_key_rate(q, Qmu, Emu, f, est, 1.0);
        ASSERT_NEAR(r.rate_per_pulse, key_rate_by_hand(q, Qmu, Emu, f, est.Q1_lower, est.e1_upper), 1e-12);
    }
}

TEST(KeyRate, ClampsAndMonotonicity) {
    DecoyEstimates est;
    est.Q1_lower = 0.0;
    est.e1_upper = 0.01;
    auto zero = secret_key_rate(0.5, 0.0274, 0.008, 1.22, est, 80e6);
    EXPECT_EQ(zero.rate_per_second, 0.0);
    EXPECT_TRUE(zero.clamped);

    est.Q1_lower = 0.0125;
    auto maxed = secret_key_rate(0.5, 0.0274, 0.5, 1.22, est, 80e6);
    EXPECT_EQ(maxed.rate_per_pulse, 0.0);
    EXPECT_TRUE(maxed.clamped);

    double prev = std::numeric_limits<double>::infinity();
    for (double e = 0; e <= 0.5; e += 0.001) {
        double r = secret_key_rate(0.5, 0.0274, e, 1.22, est, 80e6).rate_per_pulse;
        ASSERT_LE(r, prev);
        prev = r;
    }
    prev = -1;
    for (double q1 = 0; q1 <= 0.02; q1 += 0.0001) {
        est.Q1_lower = q1;
        double r = secret_key_rate(0.5, 0.0274, 0.008, 1.22, est, 80e6).rate_per_pulse;
        ASSERT_GE(r, prev);
        prev = r;
    }
    EXPECT_THROW(secret_key_rate(0.0, 0.01, 0.01, 1.22, est, 80e6), Error);
    EXPECT_THROW(secret_key_rate(0.5, 0.01, 0.01, 0.9, est, 80e6), Error);
}

TEST(ErrorCorrection, ConstantAndTable) {
    ErrorCorrectionModel f;
    EXPECT_EQ(f(0.01), 1.22);
    f.table = {{0.01, 1.16}, {0.05, 1.22}, {0.11, 1.35}};
    EXPECT_EQ(f(0.008), 1.16);
    EXPECT_EQ(f(0.02), 1.22);
    EXPECT_EQ(f(0.2), 1.35);
}

TEST(AnalyticChannel, GainAndErrors) {
    AnalyticChannel ch{0.0347, 1.6e-7, 0.008};
    TruthChannel t{0.0347, 1.6e-7, 0.008};
    for (double m : {0.0, 0.1, 0.8}) {
        EXPECT_NEAR(ch.gain(m), t.Q(m), 1e-15);
        if (m > 0) {
            EXPECT_NEAR(ch.qber(m), t.E(m), 1e-15);
        }
    }
    EXPECT_NEAR(ch.single_photon_yield(), t.Y1(), 1e-15);
    EXPECT_NEAR(ch.single_photon_error(), t.e1(), 1e-15);
    EXPECT_NEAR(ch.gain(0.0), ch.Y0, 0);
}

TEST(AnalyticKeyRate, DefaultOperatingPoint) {
    AnalyticChannel ch{transmittance(14.55), 0.0, 0.008};
    auto r = analytic_key_rate(ch, 0.8, 0.1);
    EXPECT_NEAR(r.Q_mu, 1 - std::exp(-0.8 * transmittance(14.55)), 1e-15);
    EXPECT_NEAR(r.rate_per_second, 0.36e6, 0.02e6);
}

TEST(OptimizeDecoy, DegenerateAndInvalidIntervals) {
    AnalyticChannel ch{0.0347, 1.6e-7, 0.008};
    EXPECT_EQ(optimize_decoy_intensity(ch, 0.8, 0.2, 0.2), 0.2);
    EXPECT_THROW(optimize_decoy_intensity(ch, 0.8, 0.3, 0.2), Error);
    EXPECT_THROW(optimize_decoy_intensity(ch, 0.8, 0.0, 0.2), Error);
    EXPECT_THROW(optimize_decoy_intensity(ch, 0.8, 0.1, 0.9), Error);
}

TEST(OptimizeDecoy, BeatsExhaustiveFineGrid) {
    for (double eta : {0.0347, 0.003, 0.2}) {
        AnalyticChannel ch{eta, 1e-5, 0.008};
        double nu = optimize_decoy_intensity(ch, 0.8, 0.01, 0.4);
        double r_star = analytic_key_rate(ch, 0.8, nu).rate_per_pulse;
        double best = 0;
        for (int k = 0; k < 10000; ++k) {
            double x = 0.01 + (0.4 - 0.01) * k / 9999.0;
            best = std::max(best, analytic_key_rate(ch, 0.8, x).rate_per_pulse);
        }
        EXPECT_GE(r_star, best * (1 - 1e-6)) << eta;
        EXPECT_GE(nu, 0.01);
        EXPECT_LE(nu, 0.4);
    }
}

TEST(OptimizeDecoy, OptimalRateFallsWithLoss) {
    double prev = std::numeric_limits<double>::infinity();
    for (double db = 14.0; db <= 30.0; db += 0.5) {
        AnalyticChannel ch{transmittance(db), 1.6e-7, 0.008};
        double nu = optimize_decoy_intensity(ch, 0.8, 0.01, 0.4);
        double r = analytic_key_rate(ch, 0.8, nu).rate_per_pulse;
        ASSERT_LE(r, prev * (1 + 1e-9)) << db;
        prev = r;
    }
}
