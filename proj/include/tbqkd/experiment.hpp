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

// Experiment orchestration: a full key session, the loss sweep, the
// pump-delay scan and the long stability run. All Monte Carlo work is split
// into fixed pulse blocks with their own derived RNG stream, so results do not
// depend on thread count or scheduling.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "tbqkd/analysis.hpp"
#include "tbqkd/detection.hpp"
#include "tbqkd/error.hpp"
#include "tbqkd/optics.hpp"
#include "tbqkd/random.hpp"
#include "tbqkd/source.hpp"

namespace tbqkd {

enum class OutputFormat { Csv, Json };

struct PulseSpectra {
    double signal_wavelength_nm = 720.8;
    double signal_bandwidth_nm = 1.7;
    double pump_wavelength_nm = 800.0;
    double pump_bandwidth_nm = 2.1;
    std::optional<double> signal_fwhm_ps;  // transform limit when unset
    std::optional<double> pump_fwhm_ps;
};

struct ExperimentConfig {
    SourceConfig source;
    LossBudget loss;  // detector_db is taken from detector.efficiency_db
    SwitchModel sw;   // pulse durations are taken from spectra
    PulseSpectra spectra;
    DetectorModel detector;
    DriftModel drift;
    KeyRateParameters key;

    bool optimize_nu = false;
    double nu_min = 0.01;
    double nu_max = 0.4;

    uint64_t n_pulses_per_setting = 10'000'000;
    uint64_t seed = 1;
    uint64_t block_pulses = 1u << 18;
    unsigned threads = 0;  // 0: hardware concurrency
    std::string output_path;
    OutputFormat output_format = OutputFormat::Csv;

    std::vector<double> sweep_channel_db{0.45, 1.5, 3.0, 4.5, 6.0, 7.5, 9.0, 10.5, 12.0};
    double scan_start_ps = -3.0;
    double scan_stop_ps = 13.5;
    double scan_step_ps = 0.25;
    uint64_t scan_pulses_per_point = 1'000'000;
    double stability_hours = 28.0;
    unsigned stability_samples_per_hour = 4;
    uint64_t stability_pulses_per_sample = 100'000;

    /// Key-rate constants; the repetition rate always follows the source.
    KeyRateParameters key_params() const {
        KeyRateParameters k = key;
        k.f_rep = source.rep_rate_hz;
        return k;
    }

    LossBudget budget() const {
        LossBudget b = loss;
        b.detector_db = detector.efficiency_db;
        return b;
    }

    SwitchModel switch_model() const {
        SwitchModel m = sw;
        m.signal_fwhm_ps = spectra.signal_fwhm_ps.value_or(
            transform_limited_fwhm_ps(spectra.signal_wavelength_nm, spectra.signal_bandwidth_nm));
        m.pump_fwhm_ps = spectra.pump_fwhm_ps.value_or(
            transform_limited_fwhm_ps(spectra.pump_wavelength_nm, spectra.pump_bandwidth_nm));
        return m;
    }

    /// Expected-value model of this configuration's channel and receiver.
    AnalyticChannel analytic_channel() const {
        double capture = std::erf(0.5 * detector.window_ns * 1e3 / (std::sqrt(2.0) * std::max(detector.jitter_sigma_ps, 1e-9)));
        if (detector.jitter_sigma_ps == 0) capture = 1.0;
        return {transmittance(total_loss(budget())) * capture, 2.0 * detector.dark_probability_per_window(),
                detector.misalignment_error};
    }

    void validate() const {
        if (n_pulses_per_setting == 0) fail(ErrorCategory::Config, "run.pulses_per_setting must be > 0");
        if (block_pulses == 0) fail(ErrorCategory::Config, "run.block_pulses must be > 0");
        if (optimize_nu && !(nu_min > 0 && nu_min <= nu_max && nu_max < source.mu)) {
            fail(ErrorCategory::Config, "source.nu_min/nu_max must satisfy 0 < nu_min <= nu_max < mu");
        }
        source.validate();
        budget().validate();
        switch_model().validate();
        detector.validate();
        drift.validate();
        if (!(key.q > 0 && key.q <= 1) || !(key.f.constant >= 1)) {
            fail(ErrorCategory::Config, "analysis.sifting_q must lie in (0, 1] and analysis.ec_efficiency >= 1");
        }
    }
};

/// Table of (independent variable, metrics) rows.
struct SweepResult {
    std::string independent;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    std::size_t column(std::string_view name) const {
        for (std::size_t k = 0; k < columns.size(); ++k) {
            if (columns[k] == name) return k;
        }
        fail(ErrorCategory::InvalidInput, "no column named " + std::string(name));
    }

    std::vector<double> values(std::string_view name) const {
        std::size_t c = column(name);
        std::vector<double> out;
        out.reserve(rows.size());
        for (const auto &r : rows) out.push_back(r[c]);
        return out;
    }

    bool operator==(const SweepResult &) const = default;
};

/// Runs `task(k)` for k in [0, n) on a small thread pool; rethrows the first
/// failure.
inline void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)> &task) {
    unsigned hw = threads != 0 ? threads : std::max(1u, std::thread::hardware_concurrency());
    unsigned workers = static_cast<unsigned>(std::min<std::size_t>(hw, n));
    if (workers <= 1) {
        for (std::size_t k = 0; k < n; ++k) task(k);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t k = next++; k < n; k = next++) {
                try {
                    task(k);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto &t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

/// Splits `n_pulses` into blocks and simulates them; block k draws from
/// stream (seed, stream_prefix..., k) and owns pulse indices [k*B, (k+1)*B).
inline std::vector<SessionCounts> simulate_blocks(const PulseSimulator &sim, uint64_t n_pulses, PreparationChoice choice,
                                                  uint64_t seed, std::vector<uint64_t> stream_prefix,
                                                  uint64_t block_pulses, unsigned threads) {
    uint64_t n_blocks = (n_pulses + block_pulses - 1) / block_pulses;
    std::vector<SessionCounts> out(n_blocks);
    parallel_for(n_blocks, threads, [&](std::size_t k) {
        std::vector<uint64_t> path = stream_prefix;
        path.push_back(k);
        Rng rng(derive_seed(seed, path));
        uint64_t first = k * block_pulses;
        uint64_t len = std::min(block_pulses, n_pulses - first);
        out[k] = sim.run(first, len, choice, rng);
    });
    return out;
}

inline SessionCounts merge(const std::vector<SessionCounts> &parts) {
    SessionCounts total;
    for (const auto &p : parts) total += p;
    return total;
}

struct SessionResult {
    SessionCounts counts;
    SessionAnalysis analysis;
    double nu = 0;
    double rate_sigma_bps = std::numeric_limits<double>::quiet_NaN();
    uint64_t pulses = 0;
};

inline const std::vector<std::string> &report_columns() {
    static const std::vector<std::string> cols = {
        "channel_db", "total_loss_db", "mu",     "nu",     "Q_mu",       "E_mu",        "Q_nu",
        "E_nu",       "Y0",            "Y1_L",   "Q_1",    "e_1",        "H2_E_mu",     "H2_e_1",
        "q",          "f",             "R_per_pulse",      "R_bps",      "R_bps_sigma", "F_phi0",
        "F_phi1",     "F_t0",          "F_t1",   "matched_fraction",     "pulses",      "clamped",
        "no_single_photon_signal"};
    return cols;
}

inline std::vector<double> report_row(const ExperimentConfig &cfg, const SessionResult &r) {
    const auto &a = r.analysis;
    return {cfg.loss.channel_db,
            total_loss(cfg.budget()),
            cfg.source.mu,
            r.nu,
            a.Q_mu,
            a.E_mu,
            a.Q_nu,
            a.E_nu,
            a.Y0,
            a.decoy.Y1_lower,
            a.key.Q_1,
            a.key.e_1,
            a.key.H2_E_mu,
            a.key.H2_e_1,
            a.key.q,
            a.key.f,
            a.key.rate_per_pulse,
            a.key.rate_per_second,
            r.rate_sigma_bps,
            a.fidelity[0],
            a.fidelity[1],
            a.fidelity[2],
            a.fidelity[3],
            a.matched_fraction,
            static_cast<double>(r.pulses),
            a.key.clamped ? 1.0 : 0.0,
            a.key.no_single_photon_signal ? 1.0 : 0.0};
}

/// Leave-one-group-out jackknife standard error of the key rate.
inline double jackknife_rate_sigma(const std::vector<SessionCounts> &blocks, const SessionCounts &total, double mu,
                                   double nu, const KeyRateParameters &params) {
    const std::size_t groups = std::min<std::size_t>(10, blocks.size());
    if (groups < 2) return std::numeric_limits<double>::quiet_NaN();
    std::vector<SessionCounts> grouped(groups);
    for (std::size_t k = 0; k < blocks.size(); ++k) grouped[k % groups] += blocks[k];
    std::vector<double> rates;
    try {
        for (const auto &g : grouped) {
            SessionCounts rest = total;
            rest -= g;
            rates.push_back(analyze_counts(rest, mu, nu, params).key.rate_per_second);
        }
    } catch (const Error &) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    double mean = 0;
    for (double r : rates) mean += r;
    mean /= static_cast<double>(groups);
    double ss = 0;
    for (double r : rates) ss += (r - mean) * (r - mean);
    return std::sqrt(ss * static_cast<double>(groups - 1) / static_cast<double>(groups));
}

/// Decoy intensity used by a session: the configured one, or the analytic
/// optimum when enabled.
inline double session_decoy_intensity(const ExperimentConfig &cfg) {
    if (!cfg.optimize_nu) return cfg.source.nu;
    return optimize_decoy_intensity(cfg.analytic_channel(), cfg.source.mu, cfg.nu_min, cfg.nu_max, cfg.key_params());
}

/// Decoy-state BB84 session: every pulse picks one of the four preparations
/// and an intensity class at random, Bob picks his basis 50:50. The total
/// pulse count is 4 x pulses_per_setting.
inline SessionResult run_session(const ExperimentConfig &cfg, const TagSink *sink = nullptr) {
    cfg.validate();
    SessionResult r;
    r.nu = session_decoy_intensity(cfg);
    SourceConfig source = cfg.source;
    source.nu = r.nu;
    PulseSimulator sim(source, cfg.budget(), cfg.switch_model(), cfg.detector);
    r.pulses = 4 * cfg.n_pulses_per_setting;
    std::vector<SessionCounts> blocks;
    if (sink != nullptr) {
        // Tag dumps need a single ordered stream; same blocks, same streams.
        uint64_t n_blocks = (r.pulses + cfg.block_pulses - 1) / cfg.block_pulses;
        for (uint64_t k = 0; k < n_blocks; ++k) {
            Rng rng = make_stream(cfg.seed, {0, k});
            uint64_t first = k * cfg.block_pulses;
            blocks.push_back(sim.run(first, std::min(cfg.block_pulses, r.pulses - first), PreparationChoice::uniform(),
                                     rng, sink));
        }
    } else {
        blocks = simulate_blocks(sim, r.pulses, PreparationChoice::uniform(), cfg.seed, {0}, cfg.block_pulses,
                                 cfg.threads);
    }
    r.counts = merge(blocks);
    r.analysis = analyze_counts(r.counts, source.mu, r.nu, cfg.key_params());
    r.rate_sigma_bps = jackknife_rate_sigma(blocks, r.counts, source.mu, r.nu, cfg.key_params());
    return r;
}

inline SweepResult session_table(const ExperimentConfig &cfg, const SessionResult &r) {
    SweepResult t{"channel_db", report_columns(), {}};
    t.rows.push_back(report_row(cfg, r));
    return t;
}

/// Key rate versus channel loss. Every point reuses the session seed (common
/// random numbers), so a one-point sweep reproduces `run_session` exactly.
inline SweepResult run_loss_sweep(const ExperimentConfig &cfg, std::vector<double> channel_db_list) {
    if (channel_db_list.empty()) fail(ErrorCategory::InvalidInput, "run_loss_sweep: empty loss list");
    for (double l : channel_db_list) {
        if (!(l >= 0) || !std::isfinite(l)) fail(ErrorCategory::InvalidInput, "run_loss_sweep: losses must be >= 0 dB");
    }
    std::sort(channel_db_list.begin(), channel_db_list.end());
    SweepResult t{"channel_db", report_columns(), {}};
    for (double l : channel_db_list) {
        ExperimentConfig point = cfg;
        point.loss.channel_db = l;
        t.rows.push_back(report_row(point, run_session(point)));
    }
    return t;
}

inline std::vector<double> delay_grid(double start, double stop, double step) {
    if (!(step > 0) || !(stop >= start)) fail(ErrorCategory::InvalidInput, "delay grid: need step > 0, stop >= start");
    std::vector<double> d;
    auto n = static_cast<long>(std::floor((stop - start) / step + 1e-9));
    for (long k = 0; k <= n; ++k) d.push_back(start + step * static_cast<double>(k));
    return d;
}

/// Time-basis fidelities of |t0> and |t1> as the pump delay is swept. The
/// scan is a calibration run: signal-intensity pulses only, measured in the
/// time basis only.
inline SweepResult run_pump_delay_scan(const ExperimentConfig &cfg, const std::vector<double> &delays_ps) {
    cfg.validate();
    if (delays_ps.empty()) fail(ErrorCategory::InvalidInput, "run_pump_delay_scan: empty delay list");
    if (!std::is_sorted(delays_ps.begin(), delays_ps.end())) {
        fail(ErrorCategory::InvalidInput, "run_pump_delay_scan: delays must be sorted");
    }
    SweepResult t{"pump_delay_ps", {"pump_delay_ps", "F_t0", "F_t1", "eta_t0", "eta_t1", "clicks_t0", "clicks_t1"}, {}};
    t.rows.resize(delays_ps.size());
    const int t0 = 0;
    const int t1 = 1;
    SourceConfig source = cfg.source;
    source.class_probabilities = {1.0, 0.0, 0.0};
    DetectorModel det = cfg.detector;
    det.time_basis_probability = 1.0;
    parallel_for(delays_ps.size(), cfg.threads, [&](std::size_t p) {
        SwitchModel sw = cfg.switch_model();
        sw.pump_delay_ps = delays_ps[p];
        PulseSimulator sim(source, cfg.budget(), sw, det);
        std::array<double, 2> fid{};
        std::array<double, 2> clicks{};
        for (int s : {t0, t1}) {
            auto blocks = simulate_blocks(sim, cfg.scan_pulses_per_point, PreparationChoice{s}, cfg.seed,
                                          {1, static_cast<uint64_t>(s)}, cfg.block_pulses, 1);
            SessionCounts c = merge(blocks);
            const int time = basis_index(Basis::Time);
            uint64_t right = c.at(IntensityClass::Signal, time, s, time, s);
            uint64_t total = right + c.at(IntensityClass::Signal, time, s, time, 1 - s);
            if (total == 0) {
                fail(ErrorCategory::NoData, "pump scan: no time-basis detections at delay " + std::to_string(delays_ps[p]));
            }
            fid[s] = static_cast<double>(right) / static_cast<double>(total);
            clicks[s] = static_cast<double>(total);
        }
        t.rows[p] = {delays_ps[p],
                     fid[0],
                     fid[1],
                     effective_efficiency(sw, sw.pump_delay_ps),
                     effective_efficiency(sw, sw.pump_delay_ps - cfg.source.bin_separation_ps),
                     clicks[0],
                     clicks[1]};
    });
    return t;
}

/// Centre of the single bump or dip of y(x): midpoint of the two crossings of
/// the level halfway between the extremum and the baseline (mean of the end
/// points), located by linear interpolation.
inline double half_maximum_center(const std::vector<double> &x, const std::vector<double> &y) {
    if (x.size() != y.size() || x.size() < 3) fail(ErrorCategory::InvalidInput, "half_maximum_center: need >= 3 points");
    double baseline = 0.5 * (y.front() + y.back());
    auto [mn, mx] = std::minmax_element(y.begin(), y.end());
    bool bump = (*mx - baseline) >= (baseline - *mn);
    auto peak = static_cast<std::size_t>((bump ? mx : mn) - y.begin());
    double level = 0.5 * (y[peak] + baseline);
    auto inside = [&](std::size_t k) { return bump ? y[k] >= level : y[k] <= level; };
    auto cross = [&](std::size_t a, std::size_t b) {
        return x[a] + (level - y[a]) * (x[b] - x[a]) / (y[b] - y[a]);
    };
    std::size_t l = peak;
    while (l > 0 && inside(l - 1)) --l;
    std::size_t r = peak;
    while (r + 1 < y.size() && inside(r + 1)) ++r;
    if (l == 0 || r + 1 == y.size()) {
        fail(ErrorCategory::NoData, "half_maximum_center: curve does not return to baseline inside the scan");
    }
    return 0.5 * (cross(l - 1, l) + cross(r, r + 1));
}

struct ScanFeatures {
    double center_t0 = 0;
    double center_t1 = 0;
    double separation = 0;
    double max_F_t0 = 0;
};

inline ScanFeatures scan_features(const SweepResult &scan) {
    auto x = scan.values("pump_delay_ps");
    auto f0 = scan.values("F_t0");
    auto f1 = scan.values("F_t1");
    ScanFeatures s;
    s.center_t0 = half_maximum_center(x, f0);
    s.center_t1 = half_maximum_center(x, f1);
    s.separation = s.center_t1 - s.center_t0;
    s.max_F_t0 = *std::max_element(f0.begin(), f0.end());
    return s;
}

struct StabilityResult {
    SweepResult series;
    SessionCounts total;
    ProbabilityMatrix aggregate;
    std::array<double, 4> fidelity{};
    double E_mu = 0;
};

/// Fidelity and QBER time series under slow pump drift. Sample s sits at
/// t = s / samples_per_hour and simulates 4 x pulses_per_sample pulses.
inline StabilityResult run_stability(const ExperimentConfig &cfg, double hours, unsigned samples_per_hour) {
    cfg.validate();
    if (!(hours > 0) || samples_per_hour == 0) fail(ErrorCategory::InvalidInput, "run_stability: need hours > 0 and samples_per_hour > 0");
    auto n_samples = static_cast<std::size_t>(std::ceil(hours * samples_per_hour - 1e-9));
    DriftPath path(cfg.drift, hours);
    uint64_t pulses = 4 * cfg.stability_pulses_per_sample;
    StabilityResult out;
    out.series = {"t_hours",
                  {"t_hours", "F_phi0", "F_phi1", "F_t0", "F_t1", "E_mu", "drift_rel_pump_power", "drift_theta_rad"},
                  {}};
    out.series.rows.resize(n_samples);
    std::vector<SessionCounts> per_sample(n_samples);
    parallel_for(n_samples, cfg.threads, [&](std::size_t s) {
        double t = static_cast<double>(s) / samples_per_hour;
        DriftPerturbation d = path.at(t);
        SwitchModel sw = cfg.switch_model();
        sw.delta_phi_peak *= std::max(0.0, 1.0 + d.rel_pump_power);
        sw.theta = std::clamp(sw.theta + d.theta, 0.0, std::numbers::pi / 2);
        PulseSimulator sim(cfg.source, cfg.budget(), sw, cfg.detector);
        per_sample[s] = merge(simulate_blocks(sim, pulses, PreparationChoice::uniform(), cfg.seed,
                                              {2, static_cast<uint64_t>(s)}, cfg.block_pulses, 1));
        auto f = fidelities(probability_matrix(per_sample[s], IntensityClass::Signal));
        out.series.rows[s] = {t, f[0], f[1], f[2], f[3], qber(f), d.rel_pump_power, d.theta};
    });
    out.total = merge(per_sample);
    out.aggregate = probability_matrix(out.total, IntensityClass::Signal);
    out.fidelity = fidelities(out.aggregate);
    out.E_mu = qber(out.fidelity);
    return out;
}

}  // namespace tbqkd
