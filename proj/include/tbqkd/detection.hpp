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

// Bob's receiver: 50:50 basis choice, the XPM switch, the polarizing delayed
// interferometer that turns polarization into nanosecond arrival slots,
// threshold detectors, time tagging and windowed counting.
//
// Detector D0 sits on the phase-basis exit port and D1 on the time-basis exit
// port. On each detector bit 0 arrives in the early slot and bit 1 one
// interferometer delay later.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "tbqkd/error.hpp"
#include "tbqkd/optics.hpp"
#include "tbqkd/qubit.hpp"
#include "tbqkd/random.hpp"
#include "tbqkd/source.hpp"

namespace tbqkd {

enum class DoubleClickPolicy { RandomBit, Discard };

struct DetectorModel {
    double efficiency_db = 2.2;
    double dark_count_rate_hz = 100.0;  // per detector
    double jitter_sigma_ps = 150.0;
    double window_ns = 0.8;
    double dead_time_ns = 50.0;
    // Probability that a detected photon lands in the wrong slot (optical
    // misalignment, finite polarization extinction).
    double misalignment_error = 0.008;
    double recombination_phase = 0.0;     // rad, phase-basis alpha-BBO recombination
    double time_basis_probability = 0.5;  // reflectivity of the basis-choice splitter
    double interferometer_path_m = 0.88;
    double basis_offset_ns = 8.0;         // time-basis slots relative to phase-basis slots
    DoubleClickPolicy double_click = DoubleClickPolicy::RandomBit;

    double interferometer_delay_ps() const { return interferometer_path_m / kSpeedOfLight * 1e12; }

    double slot_center_ps(Basis basis, int bit) const {
        double base = basis == Basis::Time ? basis_offset_ns * 1e3 : 0.0;
        return base + bit * interferometer_delay_ps();
    }

    /// Dark-count probability per detector per coincidence window.
    double dark_probability_per_window() const { return dark_count_rate_hz * window_ns * 1e-9; }

    void validate() const {
        auto bad = [](const std::string &m) { fail(ErrorCategory::InvalidInput, "DetectorModel: " + m); };
        if (!(window_ns > 0)) bad("window_ns must be > 0");
        if (!(efficiency_db >= 0) || !(dark_count_rate_hz >= 0) || !(jitter_sigma_ps >= 0) || !(dead_time_ns >= 0)) {
            bad("efficiency loss, rates, jitter and dead time must be >= 0");
        }
        if (!(misalignment_error >= 0 && misalignment_error <= 0.5)) bad("misalignment_error must lie in [0, 0.5]");
        if (!(time_basis_probability >= 0 && time_basis_probability <= 1)) {
            bad("time_basis_probability must lie in [0, 1]");
        }
        if (!(interferometer_path_m > 0) || !(basis_offset_ns >= 0)) bad("slot layout must be positive");
        if (dark_probability_per_window() > 1.0) bad("dark count rate x window exceeds 1");
    }
};

inline constexpr int detector_for(Basis b) { return b == Basis::Time ? 1 : 0; }

enum class Outcome { Bit0, Bit1, NoClick, DoubleClick };

/// Single-photon outcome probabilities {P(bit0), P(bit1)} of a switched state,
/// before detector efficiency and misalignment.
///
/// Time basis: the delayed interferometer sends V (switched) to the bit-0 slot
/// and H to the bit-1 slot. Phase basis: the recombining alpha-BBO overlaps the
/// switched early bin (t0,V) with the unswitched late bin (t1,H) and a 45 degree
/// analyser projects onto their sum / difference; the non-overlapping modes
/// (t0,H) and (t1,V) split evenly. The circular basis adds a -pi/2 on (t1,H).
inline std::array<double, 2> detection_probabilities(const SwitchedState &s, Basis basis, const DetectorModel &det) {
    double norm = s.norm_squared();
    if (!(norm > 1e-15) || !std::isfinite(norm) || norm > 1.0 + 1e-9) {
        fail(ErrorCategory::InvalidState, "measure: switched state norm out of range");
    }
    const auto &a = s.amp;
    double p0 = 0;
    double p1 = 0;
    if (basis == Basis::Time) {
        p0 = std::norm(a[SwitchedState::T0V]) + std::norm(a[SwitchedState::T1V]);
        p1 = std::norm(a[SwitchedState::T0H]) + std::norm(a[SwitchedState::T1H]);
    } else {
        cplx early = a[SwitchedState::T0V] * std::polar(1.0, det.recombination_phase);
        cplx late = a[SwitchedState::T1H];
        if (basis == Basis::Circular) {
            late *= cplx(0.0, -1.0);
        }
        double stray = 0.5 * (std::norm(a[SwitchedState::T0H]) + std::norm(a[SwitchedState::T1V]));
        p0 = 0.5 * std::norm(early + late) + stray;
        p1 = 0.5 * std::norm(early - late) + stray;
    }
    return {p0 / norm, p1 / norm};
}

/// Per (state, basis) constants of a measurement, hoisted out of the pulse loop.
struct PreparedMeasurement {
    double p_bit0 = 0.5;
    double detect = 1.0;
    double flip = 0.0;
    double dark = 0.0;
};

inline PreparedMeasurement prepare_measurement(const SwitchedState &s, Basis basis, const DetectorModel &det) {
    auto p = detection_probabilities(s, basis, det);
    return {p[0] / (p[0] + p[1]), transmittance(det.efficiency_db), det.misalignment_error,
            det.dark_probability_per_window()};
}

inline Outcome measure(const PreparedMeasurement &m, Rng &rng, unsigned photons) {
    bool fired[2] = {false, false};
    for (unsigned k = 0; k < photons; ++k) {
        if (uniform01(rng) >= m.detect) {
            continue;
        }
        int bit = uniform01(rng) < m.p_bit0 ? 0 : 1;
        if (m.flip > 0 && uniform01(rng) < m.flip) {
            bit ^= 1;
        }
        fired[bit] = true;
    }
    if (m.dark > 0) {
        if (uniform01(rng) < m.dark) fired[0] = true;
        if (uniform01(rng) < m.dark) fired[1] = true;
    }
    if (fired[0] && fired[1]) return Outcome::DoubleClick;
    if (fired[0]) return Outcome::Bit0;
    if (fired[1]) return Outcome::Bit1;
    return Outcome::NoClick;
}

/// Measures `photons` photons that reached the receiver in `q_switched` (the
/// basis has already been drawn by the caller).
inline Outcome measure(const SwitchedState &q_switched, Basis basis, const DetectorModel &det, Rng &rng,
                       unsigned photons = 1) {
    return measure(prepare_measurement(q_switched, basis, det), rng, photons);
}

struct ClickEvent {
    int detector_id = 0;
    double timestamp_ps = 0.0;  // since the pulse epoch
    uint64_t pulse_index = 0;

    bool operator==(const ClickEvent &) const = default;
};

inline std::vector<ClickEvent> to_time_tags(Outcome outcome, Basis basis, uint64_t pulse_index,
                                            const DetectorModel &det, Rng &rng) {
    std::vector<ClickEvent> tags;
    auto emit = [&](int bit) {
        double t = det.slot_center_ps(basis, bit);
        if (det.jitter_sigma_ps > 0) {
            t += std::normal_distribution<double>(0.0, det.jitter_sigma_ps)(rng);
        }
        tags.push_back({detector_for(basis), t, pulse_index});
    };
    switch (outcome) {
        case Outcome::Bit0: emit(0); break;
        case Outcome::Bit1: emit(1); break;
        case Outcome::DoubleClick:
            emit(0);
            emit(1);
            break;
        case Outcome::NoClick: break;
    }
    return tags;
}

/// Non-paralyzable dead time per detector over absolute time. Tags must be
/// fed in non-decreasing time order per detector.
class DeadTimeFilter {
  public:
    DeadTimeFilter(double dead_time_ns, double frame_ps) : dead_ps_(dead_time_ns * 1e3), frame_ps_(frame_ps) {}

    bool accept(const ClickEvent &tag) {
        double t = static_cast<double>(tag.pulse_index) * frame_ps_ + tag.timestamp_ps;
        auto &last = last_[tag.detector_id & 1];
        if (has_[tag.detector_id & 1] && t - last < dead_ps_) {
            return false;
        }
        has_[tag.detector_id & 1] = true;
        last = t;
        return true;
    }

  private:
    double dead_ps_;
    double frame_ps_;
    std::array<double, 2> last_{};
    std::array<bool, 2> has_{};
};

struct Window {
    int detector_id = 0;
    Basis basis = Basis::Time;
    int bit = 0;
    double center_ps = 0.0;
    double width_ps = 800.0;

    bool contains(double t) const { return t >= center_ps - 0.5 * width_ps && t < center_ps + 0.5 * width_ps; }
};

class WindowSet {
  public:
    WindowSet() = default;

    explicit WindowSet(std::vector<Window> windows) : windows_(std::move(windows)) {
        std::vector<Window> sorted = windows_;
        std::sort(sorted.begin(), sorted.end(), [](const Window &a, const Window &b) {
            return a.detector_id != b.detector_id ? a.detector_id < b.detector_id : a.center_ps < b.center_ps;
        });
        for (std::size_t k = 0; k < sorted.size(); ++k) {
            if (!(sorted[k].width_ps > 0)) {
                fail(ErrorCategory::Config, "window widths must be > 0");
            }
            if (k > 0 && sorted[k].detector_id == sorted[k - 1].detector_id &&
                sorted[k - 1].center_ps + 0.5 * sorted[k - 1].width_ps > sorted[k].center_ps - 0.5 * sorted[k].width_ps) {
                fail(ErrorCategory::Config, "overlapping windows on detector D" + std::to_string(sorted[k].detector_id));
            }
        }
    }

    /// The four slot windows of the receiver.
    static WindowSet from_detector(const DetectorModel &det) {
        std::vector<Window> w;
        for (Basis b : kSiftedBases) {
            for (int bit = 0; bit < 2; ++bit) {
                w.push_back({detector_for(b), b, bit, det.slot_center_ps(b, bit), det.window_ns * 1e3});
            }
        }
        return WindowSet(std::move(w));
    }

    const Window *find(const ClickEvent &tag) const {
        for (const auto &w : windows_) {
            if (w.detector_id == tag.detector_id && w.contains(tag.timestamp_ps)) {
                return &w;
            }
        }
        return nullptr;
    }

    const std::vector<Window> &windows() const { return windows_; }

  private:
    std::vector<Window> windows_;
};

/// Alice's record for one pulse.
struct PulseLabel {
    IntensityClass cls = IntensityClass::Signal;
    Basis basis = Basis::Time;
    int bit = 0;

    bool operator==(const PulseLabel &) const = default;
};

struct LabeledPulse {
    uint64_t pulse_index = 0;
    PulseLabel label;
};

/// N_{i,j}^{(alpha,beta)} per intensity class, plus pulses sent per
/// (class, alpha, i). alpha/beta use the basis index (0 phase, 1 time).
struct SessionCounts {
    using Clicks = std::array<std::array<std::array<std::array<std::array<uint64_t, 2>, 2>, 2>, 2>, kNumClasses>;
    using Sent = std::array<std::array<std::array<uint64_t, 2>, 2>, kNumClasses>;

    Clicks counts{};
    Sent pulses_sent{};
    uint64_t double_clicks = 0;
    uint64_t multi_basis_frames = 0;
    uint64_t out_of_window_tags = 0;
    uint64_t dead_time_blocked = 0;

    uint64_t &at(IntensityClass c, int alpha, int i, int beta, int j) {
        return counts[static_cast<int>(c)][alpha][i][beta][j];
    }
    uint64_t at(IntensityClass c, int alpha, int i, int beta, int j) const {
        return counts[static_cast<int>(c)][alpha][i][beta][j];
    }
    uint64_t sent(IntensityClass c, int alpha, int i) const { return pulses_sent[static_cast<int>(c)][alpha][i]; }

    uint64_t total_sent(IntensityClass c) const {
        uint64_t s = 0;
        for (int a = 0; a < 2; ++a)
            for (int i = 0; i < 2; ++i) s += sent(c, a, i);
        return s;
    }

    /// Detections in either basis.
    uint64_t total_clicks(IntensityClass c) const {
        uint64_t s = 0;
        for (int a = 0; a < 2; ++a)
            for (int i = 0; i < 2; ++i)
                for (int b = 0; b < 2; ++b)
                    for (int j = 0; j < 2; ++j) s += at(c, a, i, b, j);
        return s;
    }

    uint64_t matched_clicks(IntensityClass c) const {
        uint64_t s = 0;
        for (int a = 0; a < 2; ++a)
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) s += at(c, a, i, a, j);
        return s;
    }

    uint64_t matched_errors(IntensityClass c) const {
        uint64_t s = 0;
        for (int a = 0; a < 2; ++a)
            for (int i = 0; i < 2; ++i) s += at(c, a, i, a, 1 - i);
        return s;
    }

    SessionCounts &operator+=(const SessionCounts &o) {
        for (int c = 0; c < kNumClasses; ++c)
            for (int a = 0; a < 2; ++a)
                for (int i = 0; i < 2; ++i) {
                    pulses_sent[c][a][i] += o.pulses_sent[c][a][i];
                    for (int b = 0; b < 2; ++b)
                        for (int j = 0; j < 2; ++j) counts[c][a][i][b][j] += o.counts[c][a][i][b][j];
                }
        double_clicks += o.double_clicks;
        multi_basis_frames += o.multi_basis_frames;
        out_of_window_tags += o.out_of_window_tags;
        dead_time_blocked += o.dead_time_blocked;
        return *this;
    }

    SessionCounts &operator-=(const SessionCounts &o) {
        for (int c = 0; c < kNumClasses; ++c)
            for (int a = 0; a < 2; ++a)
                for (int i = 0; i < 2; ++i) {
                    pulses_sent[c][a][i] -= o.pulses_sent[c][a][i];
                    for (int b = 0; b < 2; ++b)
                        for (int j = 0; j < 2; ++j) counts[c][a][i][b][j] -= o.counts[c][a][i][b][j];
                }
        double_clicks -= o.double_clicks;
        multi_basis_frames -= o.multi_basis_frames;
        out_of_window_tags -= o.out_of_window_tags;
        dead_time_blocked -= o.dead_time_blocked;
        return *this;
    }

    friend SessionCounts operator+(SessionCounts a, const SessionCounts &b) { return a += b; }
    bool operator==(const SessionCounts &) const = default;
};

/// Assigns windowed tags to (class, prepared state, measured outcome) counts.
/// Counting depends only on the set of tags per pulse, so streams can be
/// split and merged in any order.
class WindowCounter {
  public:
    WindowCounter(WindowSet windows, DoubleClickPolicy policy) : windows_(std::move(windows)), policy_(policy) {}

    void add_pulse(const PulseLabel &label) {
        if (label.basis == Basis::Circular) {
            return;
        }
        ++counts_.pulses_sent[static_cast<int>(label.cls)][basis_index(label.basis)][label.bit];
    }

    /// All (post dead-time) tags of one pulse.
    void add_frame(uint64_t pulse_index, const PulseLabel &label, std::span<const ClickEvent> tags) {
        bool fired[2][2] = {{false, false}, {false, false}};
        bool any = false;
        for (const auto &t : tags) {
            const Window *w = windows_.find(t);
            if (w == nullptr) {
                ++counts_.out_of_window_tags;
                continue;
            }
            fired[basis_index(w->basis)][w->bit] = true;
            any = true;
        }
        if (!any || label.basis == Basis::Circular) {
            return;
        }
        bool phase = fired[0][0] || fired[0][1];
        bool time = fired[1][0] || fired[1][1];
        if (phase && time) {
            ++counts_.multi_basis_frames;
            return;
        }
        int beta = time ? 1 : 0;
        int j = fired[beta][0] ? 0 : 1;
        if (fired[beta][0] && fired[beta][1]) {
            ++counts_.double_clicks;
            if (policy_ == DoubleClickPolicy::Discard) {
                return;
            }
            j = static_cast<int>(splitmix64(pulse_index ^ 0xD0B1EC11C4ull) & 1u);
        }
        ++counts_.at(label.cls, basis_index(label.basis), label.bit, beta, j);
    }

    void note_dead_time_block() { ++counts_.dead_time_blocked; }

    const SessionCounts &counts() const { return counts_; }

  private:
    WindowSet windows_;
    DoubleClickPolicy policy_;
    SessionCounts counts_;
};

/// Windowed counting of a recorded tag stream against Alice's labels. Every
/// labeled pulse counts as sent; tags must reference labeled pulses.
inline SessionCounts accumulate(std::span<const ClickEvent> tags, const WindowSet &windows,
                                std::span<const LabeledPulse> labels,
                                DoubleClickPolicy policy = DoubleClickPolicy::RandomBit) {
    WindowCounter counter(windows, policy);
    std::unordered_map<uint64_t, PulseLabel> by_index;
    by_index.reserve(labels.size());
    for (const auto &l : labels) {
        counter.add_pulse(l.label);
        by_index[l.pulse_index] = l.label;
    }
    std::vector<ClickEvent> sorted(tags.begin(), tags.end());
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const ClickEvent &a, const ClickEvent &b) { return a.pulse_index < b.pulse_index; });
    std::size_t k = 0;
    while (k < sorted.size()) {
        std::size_t e = k;
        while (e < sorted.size() && sorted[e].pulse_index == sorted[k].pulse_index) ++e;
        auto it = by_index.find(sorted[k].pulse_index);
        if (it == by_index.end()) {
            fail(ErrorCategory::InvalidInput,
                 "accumulate: tag references unlabeled pulse " + std::to_string(sorted[k].pulse_index));
        }
        counter.add_frame(sorted[k].pulse_index, it->second, std::span<const ClickEvent>(sorted.data() + k, e - k));
        k = e;
    }
    return counter.counts();
}

/// Receives the raw tag stream and Alice's labels of a simulation, e.g. for
/// dumping to disk.
struct TagSink {
    std::function<void(const LabeledPulse &)> on_pulse;
    std::function<void(const ClickEvent &)> on_tag;
};

/// Which preparation each pulse uses.
struct PreparationChoice {
    // Index into kPreparationSettings, or -1 for a uniformly random setting.
    int fixed_setting = -1;

    static PreparationChoice uniform() { return {-1}; }
    static PreparationChoice fixed(const PreparationSetting &s) {
        for (int k = 0; k < 4; ++k) {
            if (kPreparationSettings[k].basis == s.basis && kPreparationSettings[k].bit == s.bit) return {k};
        }
        fail(ErrorCategory::InvalidInput, "PreparationChoice: not a BB84 preparation");
    }
};

/// Full pulse-level Monte Carlo: source -> channel -> switch -> measure ->
/// time tags -> dead time -> windows.
class PulseSimulator {
  public:
    PulseSimulator(const SourceConfig &source, const LossBudget &budget, const SwitchModel &sw,
                   const DetectorModel &det)
        : source_(source), det_(det), windows_(WindowSet::from_detector(det)) {
        source.validate();
        budget.validate();
        sw.validate();
        det.validate();
        channel_t_ = transmittance(loss_before_detector(budget));
        for (int s = 0; s < 4; ++s) {
            SwitchedState st = apply_switch_both_bins(prepared_state(kPreparationSettings[s]), sw,
                                                      source.bin_separation_ps);
            for (Basis b : kSiftedBases) {
                prepared_[s][basis_index(b)] = prepare_measurement(st, b, det);
            }
        }
        for (int c = 0; c < kNumClasses; ++c) {
            means_[c] = source.mean_photon_number(static_cast<IntensityClass>(c));
        }
    }

    double channel_transmittance() const { return channel_t_; }

    SessionCounts run(uint64_t first_pulse_index, uint64_t n_pulses, PreparationChoice choice, Rng &rng,
                      const TagSink *sink = nullptr) const {
        std::array<PhotonNumberSampler, kNumClasses> samplers{PhotonNumberSampler(means_[0]),
                                                              PhotonNumberSampler(means_[1]),
                                                              PhotonNumberSampler(means_[2])};
        WindowCounter counter(windows_, det_.double_click);
        DeadTimeFilter dead(det_.dead_time_ns, source_.frame_ps());
        std::vector<ClickEvent> kept;
        for (uint64_t k = 0; k < n_pulses; ++k) {
            uint64_t index = first_pulse_index + k;
            IntensityClass cls = sample_class(source_, rng);
            int setting = choice.fixed_setting >= 0 ? choice.fixed_setting : static_cast<int>(rng() >> 62);
            const auto &prep = kPreparationSettings[setting];
            PulseLabel label{cls, prep.basis, prep.bit};
            unsigned emitted = samplers[static_cast<int>(cls)](rng);
            unsigned arrived = 0;
            for (unsigned p = 0; p < emitted; ++p) {
                if (uniform01(rng) < channel_t_) ++arrived;
            }
            Basis basis = uniform01(rng) < det_.time_basis_probability ? Basis::Time : Basis::Phase;
            Outcome outcome = measure(prepared_[setting][basis_index(basis)], rng, arrived);
            counter.add_pulse(label);
            if (sink && sink->on_pulse) sink->on_pulse({index, label});
            if (outcome == Outcome::NoClick) {
                continue;
            }
            kept.clear();
            auto tags = to_time_tags(outcome, basis, index, det_, rng);
            std::sort(tags.begin(), tags.end(),
                      [](const ClickEvent &a, const ClickEvent &b) { return a.timestamp_ps < b.timestamp_ps; });
            for (const auto &t : tags) {
                if (dead.accept(t)) {
                    kept.push_back(t);
                    if (sink && sink->on_tag) sink->on_tag(t);
                } else {
                    counter.note_dead_time_block();
                }
            }
            counter.add_frame(index, label, kept);
        }
        return counter.counts();
    }

  private:
    SourceConfig source_;
    DetectorModel det_;
    WindowSet windows_;
    double channel_t_ = 1.0;
    std::array<double, kNumClasses> means_{};
    std::array<std::array<PreparedMeasurement, 2>, 4> prepared_{};
};

/// Monte Carlo of one preparation setting over `n_pulses` pulses. Intensity
/// class and Bob's basis are drawn per pulse.
inline SessionCounts simulate_block(const PreparationSetting &prep, uint64_t n_pulses, const SourceConfig &source,
                                    const LossBudget &budget, const SwitchModel &sw, const DetectorModel &det,
                                    Rng &rng_stream, uint64_t first_pulse_index = 0) {
    PulseSimulator sim(source, budget, sw, det);
    return sim.run(first_pulse_index, n_pulses, PreparationChoice::fixed(prep), rng_stream);
}

}  // namespace tbqkd
