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

// Weak-coherent-pulse source with signal / decoy / vacuum intensity classes,
// the loss budget between Alice and Bob's detectors, and the slow pump drift
// seen over long integrations.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "tbqkd/error.hpp"
#include "tbqkd/random.hpp"

namespace tbqkd {

enum class IntensityClass : int { Signal = 0, Decoy = 1, Vacuum = 2 };

inline constexpr int kNumClasses = 3;

inline std::string_view class_name(IntensityClass c) {
    switch (c) {
        case IntensityClass::Signal: return "signal";
        case IntensityClass::Decoy: return "decoy";
        case IntensityClass::Vacuum: return "vacuum";
    }
    return "?";
}

struct SourceConfig {
    double rep_rate_hz = 80e6;
    double mu = 0.8;
    double nu = 0.1;
    bool vacuum_included = true;
    // signal, decoy, vacuum
    std::array<double, kNumClasses> class_probabilities{0.7, 0.2, 0.1};
    double bin_separation_ps = 4.5;

    double mean_photon_number(IntensityClass c) const {
        switch (c) {
            case IntensityClass::Signal: return mu;
            case IntensityClass::Decoy: return nu;
            case IntensityClass::Vacuum: return 0.0;
        }
        return 0.0;
    }

    double frame_ps() const { return 1e12 / rep_rate_hz; }

    void validate() const {
        auto bad = [](const std::string &m) { fail(ErrorCategory::InvalidInput, "SourceConfig: " + m); };
        if (!(rep_rate_hz > 0) || !std::isfinite(rep_rate_hz)) {
            bad("rep_rate_hz must be > 0");
        }
        if (!(nu >= 0) || !(nu < mu) || !std::isfinite(mu)) {
            bad("require 0 <= nu < mu");
        }
        double sum = 0;
        for (double p : class_probabilities) {
            if (!(p >= 0)) {
                bad("class probabilities must be >= 0");
            }
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-12) {
            bad("class probabilities must sum to 1 (got " + std::to_string(sum) + ")");
        }
        if (!vacuum_included && class_probabilities[2] != 0.0) {
            bad("vacuum class probability must be 0 when vacuum_included is false");
        }
        if (!(bin_separation_ps > 0)) {
            bad("bin_separation_ps must be > 0");
        }
    }
};

/// Draws the intensity class of a pulse.
inline IntensityClass sample_class(const SourceConfig &cfg, Rng &rng) {
    double u = uniform01(rng);
    if (u < cfg.class_probabilities[0]) {
        return IntensityClass::Signal;
    }
    if (u < cfg.class_probabilities[0] + cfg.class_probabilities[1]) {
        return IntensityClass::Decoy;
    }
    return IntensityClass::Vacuum;
}

inline unsigned sample_photon_number(double mean, Rng &rng) {
    if (!(mean >= 0) || !std::isfinite(mean)) {
        fail(ErrorCategory::InvalidInput, "sample_photon_number: mean must be finite and >= 0");
    }
    if (mean == 0.0) {
        return 0;
    }
    std::poisson_distribution<unsigned> dist(mean);
    return dist(rng);
}

/// Reusable Poisson sampler for one intensity class.
class PhotonNumberSampler {
  public:
    explicit PhotonNumberSampler(double mean) : mean_(mean) {
        if (!(mean >= 0) || !std::isfinite(mean)) {
            fail(ErrorCategory::InvalidInput, "PhotonNumberSampler: mean must be finite and >= 0");
        }
        if (mean > 0) {
            dist_ = std::poisson_distribution<unsigned>(mean);
        }
    }

    unsigned operator()(Rng &rng) { return mean_ > 0 ? dist_(rng) : 0u; }

  private:
    double mean_;
    std::poisson_distribution<unsigned> dist_;
};

inline double transmittance(double loss_db) {
    if (!(loss_db >= 0) || !std::isfinite(loss_db)) {
        fail(ErrorCategory::InvalidInput, "transmittance: loss must be finite and >= 0 dB");
    }
    return std::pow(10.0, -loss_db / 10.0);
}

struct LossBudget {
    double channel_db = 0.45;
    double coupling_db = 3.0;
    double detector_db = 2.2;
    double receiver_optics_db = 8.9;

    void validate() const {
        for (double v : {channel_db, coupling_db, detector_db, receiver_optics_db}) {
            if (!(v >= 0) || !std::isfinite(v)) {
                fail(ErrorCategory::InvalidInput, "LossBudget: every component must be finite and >= 0 dB");
            }
        }
    }
};

inline double total_loss(const LossBudget &b) {
    return b.channel_db + b.coupling_db + b.detector_db + b.receiver_optics_db;
}

/// Loss in front of the detectors (everything except detector efficiency).
inline double loss_before_detector(const LossBudget &b) {
    return b.channel_db + b.coupling_db + b.receiver_optics_db;
}

struct DriftModel {
    double pump_power_rel_sigma = 0.004;   // per-hour random-walk step
    double pump_polarization_sigma = 0.002; // rad, per-hour step
    uint64_t seed = 7;
    double bound_sigmas = 5.0;              // reflecting barrier in units of the step

    void validate() const {
        if (!(pump_power_rel_sigma >= 0) || !(pump_polarization_sigma >= 0) || !(bound_sigmas > 0)) {
            fail(ErrorCategory::InvalidInput, "DriftModel: sigmas must be >= 0 and bound > 0");
        }
    }
};

struct DriftPerturbation {
    double rel_pump_power = 0.0;  // fractional change of the pump power
    double theta = 0.0;           // change of pump-signal polarization angle, rad
};

/// Hourly reflected random walk for pump power and polarization, linearly
/// interpolated between hours. Node values depend only on the seed, so a
/// longer path shares its prefix with a shorter one.
class DriftPath {
  public:
    DriftPath(const DriftModel &model, double horizon_hours) {
        model.validate();
        if (!(horizon_hours >= 0) || !std::isfinite(horizon_hours)) {
            fail(ErrorCategory::InvalidInput, "DriftPath: horizon must be finite and >= 0");
        }
        auto nodes = static_cast<std::size_t>(std::ceil(horizon_hours)) + 1;
        power_ = walk(model.pump_power_rel_sigma, model.bound_sigmas, derive_seed(model.seed, {0}), nodes);
        theta_ = walk(model.pump_polarization_sigma, model.bound_sigmas, derive_seed(model.seed, {1}), nodes);
    }

    DriftPerturbation at(double t_hours) const {
        if (!(t_hours >= 0)) {
            fail(ErrorCategory::InvalidInput, "DriftPath: time must be >= 0");
        }
        double pos = std::min(t_hours, static_cast<double>(power_.size() - 1));
        auto i = static_cast<std::size_t>(std::floor(pos));
        if (i + 1 >= power_.size()) {
            return {power_.back(), theta_.back()};
        }
        double f = pos - static_cast<double>(i);
        return {power_[i] + f * (power_[i + 1] - power_[i]), theta_[i] + f * (theta_[i + 1] - theta_[i])};
    }

  private:
    static std::vector<double> walk(double sigma, double bound_sigmas, uint64_t seed, std::size_t nodes) {
        std::vector<double> x(nodes, 0.0);
        if (sigma == 0.0) {
            return x;
        }
        Rng rng(seed);
        std::normal_distribution<double> step(0.0, sigma);
        const double bound = bound_sigmas * sigma;
        for (std::size_t k = 1; k < nodes; ++k) {
            double v = x[k - 1] + step(rng);
            while (v > bound || v < -bound) {
                v = v > bound ? 2 * bound - v : -2 * bound - v;
            }
            x[k] = v;
        }
        return x;
    }

    std::vector<double> power_;
    std::vector<double> theta_;
};

inline DriftPerturbation drift_state(const DriftModel &model, double t_hours) {
    if (!(t_hours >= 0) || !std::isfinite(t_hours)) {
        fail(ErrorCategory::InvalidInput, "drift_state: time must be finite and >= 0");
    }
    return DriftPath(model, t_hours).at(t_hours);
}

}  // namespace tbqkd
