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

// Experiment configuration as layered JSON: built-in defaults, then a config
// file, then `section.key=value` overrides. Every key must already exist in
// the defaults and keep its type.

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "tbqkd/error.hpp"
#include "tbqkd/experiment.hpp"

namespace tbqkd {

using json = nlohmann::json;

namespace detail {

inline json optional_number(const std::optional<double> &v) { return v ? json(*v) : json(nullptr); }

inline std::string_view double_click_name(DoubleClickPolicy p) {
    return p == DoubleClickPolicy::Discard ? "discard" : "random";
}

inline std::string_view format_name(OutputFormat f) { return f == OutputFormat::Json ? "json" : "csv"; }

}  // namespace detail

inline json config_to_json(const ExperimentConfig &c) {
    json j;
    j["source"] = {{"rep_rate_hz", c.source.rep_rate_hz},
                   {"mu", c.source.mu},
                   {"nu", c.source.nu},
                   {"vacuum_included", c.source.vacuum_included},
                   {"class_probabilities", c.source.class_probabilities},
                   {"bin_separation_ps", c.source.bin_separation_ps},
                   {"optimize_nu", c.optimize_nu},
                   {"nu_min", c.nu_min},
                   {"nu_max", c.nu_max}};
    j["loss"] = {{"channel_db", c.loss.channel_db},
                 {"coupling_db", c.loss.coupling_db},
                 {"receiver_optics_db", c.loss.receiver_optics_db}};
    j["switch"] = {{"theta_rad", c.sw.theta},
                   {"delta_phi_peak_rad", c.sw.delta_phi_peak},
                   {"walkoff_ps", c.sw.walkoff_ps},
                   {"pump_delay_ps", c.sw.pump_delay_ps},
                   {"bin_phase_offset_rad", c.sw.bin_phase_offset},
                   {"signal_wavelength_nm", c.spectra.signal_wavelength_nm},
                   {"signal_bandwidth_nm", c.spectra.signal_bandwidth_nm},
                   {"pump_wavelength_nm", c.spectra.pump_wavelength_nm},
                   {"pump_bandwidth_nm", c.spectra.pump_bandwidth_nm},
                   {"signal_fwhm_ps", detail::optional_number(c.spectra.signal_fwhm_ps)},
                   {"pump_fwhm_ps", detail::optional_number(c.spectra.pump_fwhm_ps)}};
    j["detector"] = {{"efficiency_db", c.detector.efficiency_db},
                     {"dark_count_rate_hz", c.detector.dark_count_rate_hz},
                     {"jitter_sigma_ps", c.detector.jitter_sigma_ps},
                     {"window_ns", c.detector.window_ns},
                     {"dead_time_ns", c.detector.dead_time_ns},
                     {"misalignment_error", c.detector.misalignment_error},
                     {"recombination_phase_rad", c.detector.recombination_phase},
                     {"time_basis_probability", c.detector.time_basis_probability},
                     {"interferometer_path_m", c.detector.interferometer_path_m},
                     {"basis_offset_ns", c.detector.basis_offset_ns},
                     {"double_click", detail::double_click_name(c.detector.double_click)}};
    j["drift"] = {{"pump_power_rel_sigma", c.drift.pump_power_rel_sigma},
                  {"pump_polarization_sigma_rad", c.drift.pump_polarization_sigma},
                  {"bound_sigmas", c.drift.bound_sigmas},
                  {"seed", c.drift.seed}};
    j["analysis"] = {{"sifting_q", c.key.q}, {"ec_efficiency", c.key.f.constant}};
    j["run"] = {{"pulses_per_setting", c.n_pulses_per_setting},
                {"seed", c.seed},
                {"block_pulses", c.block_pulses},
                {"threads", c.threads},
                {"output_path", c.output_path},
                {"format", detail::format_name(c.output_format)}};
    j["sweep_loss"] = {{"channel_db", c.sweep_channel_db}};
    j["pump_scan"] = {{"start_ps", c.scan_start_ps},
                      {"stop_ps", c.scan_stop_ps},
                      {"step_ps", c.scan_step_ps},
                      {"pulses_per_point", c.scan_pulses_per_point}};
    j["stability"] = {{"hours", c.stability_hours},
                      {"samples_per_hour", c.stability_samples_per_hour},
                      {"pulses_per_sample", c.stability_pulses_per_sample}};
    return j;
}

namespace detail {

inline bool same_kind(const json &base, const json &v) {
    if (base.is_null()) return v.is_null() || v.is_number();
    if (base.is_number_unsigned() || base.is_number_integer()) return v.is_number_integer() && v >= 0;
    if (base.is_number()) return v.is_number();
    if (base.is_array()) return v.is_array();
    return base.type() == v.type();
}

inline void merge_strict(json &base, const json &overlay, const std::string &path) {
    if (!overlay.is_object()) {
        fail(ErrorCategory::Config, (path.empty() ? std::string("config") : path) + ": expected an object");
    }
    for (auto it = overlay.begin(); it != overlay.end(); ++it) {
        std::string key = path.empty() ? it.key() : path + "." + it.key();
        if (!base.contains(it.key())) {
            fail(ErrorCategory::Config, "unknown config key '" + key + "'");
        }
        json &target = base[it.key()];
        if (target.is_object()) {
            merge_strict(target, it.value(), key);
        } else if (!same_kind(target, it.value())) {
            fail(ErrorCategory::Config, "config key '" + key + "' has the wrong type (expected " +
                                            std::string(target.type_name()) + ")");
        } else {
            target = it.value();
        }
    }
}

template <typename T>
T get(const json &j, const char *section, const char *key) {
    try {
        return j.at(section).at(key).get<T>();
    } catch (const json::exception &e) {
        fail(ErrorCategory::Config, std::string("config key '") + section + "." + key + "': " + e.what());
    }
}

inline std::optional<double> get_optional(const json &j, const char *section, const char *key) {
    const json &v = j.at(section).at(key);
    if (v.is_null()) return std::nullopt;
    return v.get<double>();
}

}  // namespace detail

/// Builds a config from a complete JSON document (as produced by merging onto
/// `config_to_json(ExperimentConfig{})`).
inline ExperimentConfig config_from_json(const json &j) {
    using detail::get;
    ExperimentConfig c;
    c.source.rep_rate_hz = get<double>(j, "source", "rep_rate_hz");
    c.source.mu = get<double>(j, "source", "mu");
    c.source.nu = get<double>(j, "source", "nu");
    c.source.vacuum_included = get<bool>(j, "source", "vacuum_included");
    auto probs = get<std::vector<double>>(j, "source", "class_probabilities");
    if (probs.size() != 3) fail(ErrorCategory::Config, "source.class_probabilities needs 3 entries (signal, decoy, vacuum)");
    std::copy(probs.begin(), probs.end(), c.source.class_probabilities.begin());
    c.source.bin_separation_ps = get<double>(j, "source", "bin_separation_ps");
    c.optimize_nu = get<bool>(j, "source", "optimize_nu");
    c.nu_min = get<double>(j, "source", "nu_min");
    c.nu_max = get<double>(j, "source", "nu_max");

    c.loss.channel_db = get<double>(j, "loss", "channel_db");
    c.loss.coupling_db = get<double>(j, "loss", "coupling_db");
    c.loss.receiver_optics_db = get<double>(j, "loss", "receiver_optics_db");

    c.sw.theta = get<double>(j, "switch", "theta_rad");
    c.sw.delta_phi_peak = get<double>(j, "switch", "delta_phi_peak_rad");
    c.sw.walkoff_ps = get<double>(j, "switch", "walkoff_ps");
    c.sw.pump_delay_ps = get<double>(j, "switch", "pump_delay_ps");
    c.sw.bin_phase_offset = get<double>(j, "switch", "bin_phase_offset_rad");
    c.spectra.signal_wavelength_nm = get<double>(j, "switch", "signal_wavelength_nm");
    c.spectra.signal_bandwidth_nm = get<double>(j, "switch", "signal_bandwidth_nm");
    c.spectra.pump_wavelength_nm = get<double>(j, "switch", "pump_wavelength_nm");
    c.spectra.pump_bandwidth_nm = get<double>(j, "switch", "pump_bandwidth_nm");
    c.spectra.signal_fwhm_ps = detail::get_optional(j, "switch", "signal_fwhm_ps");
    c.spectra.pump_fwhm_ps = detail::get_optional(j, "switch", "pump_fwhm_ps");

    c.detector.efficiency_db = get<double>(j, "detector", "efficiency_db");
    c.detector.dark_count_rate_hz = get<double>(j, "detector", "dark_count_rate_hz");
    c.detector.jitter_sigma_ps = get<double>(j, "detector", "jitter_sigma_ps");
    c.detector.window_ns = get<double>(j, "detector", "window_ns");
    c.detector.dead_time_ns = get<double>(j, "detector", "dead_time_ns");
    c.detector.misalignment_error = get<double>(j, "detector", "misalignment_error");
    c.detector.recombination_phase = get<double>(j, "detector", "recombination_phase_rad");
    c.detector.time_basis_probability = get<double>(j, "detector", "time_basis_probability");
    c.detector.interferometer_path_m = get<double>(j, "detector", "interferometer_path_m");
    c.detector.basis_offset_ns = get<double>(j, "detector", "basis_offset_ns");
    auto policy = get<std::string>(j, "detector", "double_click");
    if (policy == "random") {
        c.detector.double_click = DoubleClickPolicy::RandomBit;
    } else if (policy == "discard") {
        c.detector.double_click = DoubleClickPolicy::Discard;
    } else {
        fail(ErrorCategory::Config, "detector.double_click must be 'random' or 'discard'");
    }

    c.drift.pump_power_rel_sigma = get<double>(j, "drift", "pump_power_rel_sigma");
    c.drift.pump_polarization_sigma = get<double>(j, "drift", "pump_polarization_sigma_rad");
    c.drift.bound_sigmas = get<double>(j, "drift", "bound_sigmas");
    c.drift.seed = get<uint64_t>(j, "drift", "seed");

    c.key.q = get<double>(j, "analysis", "sifting_q");
    c.key.f.constant = get<double>(j, "analysis", "ec_efficiency");

    c.n_pulses_per_setting = get<uint64_t>(j, "run", "pulses_per_setting");
    c.seed = get<uint64_t>(j, "run", "seed");
    c.block_pulses = get<uint64_t>(j, "run", "block_pulses");
    c.threads = get<unsigned>(j, "run", "threads");
    c.output_path = get<std::string>(j, "run", "output_path");
    auto fmt = get<std::string>(j, "run", "format");
    if (fmt == "csv") {
        c.output_format = OutputFormat::Csv;
    } else if (fmt == "json") {
        c.output_format = OutputFormat::Json;
    } else {
        fail(ErrorCategory::Config, "run.format must be 'csv' or 'json'");
    }

    c.sweep_channel_db = get<std::vector<double>>(j, "sweep_loss", "channel_db");
    c.scan_start_ps = get<double>(j, "pump_scan", "start_ps");
    c.scan_stop_ps = get<double>(j, "pump_scan", "stop_ps");
    c.scan_step_ps = get<double>(j, "pump_scan", "step_ps");
    c.scan_pulses_per_point = get<uint64_t>(j, "pump_scan", "pulses_per_point");
    c.stability_hours = get<double>(j, "stability", "hours");
    c.stability_samples_per_hour = get<unsigned>(j, "stability", "samples_per_hour");
    c.stability_pulses_per_sample = get<uint64_t>(j, "stability", "pulses_per_sample");
    return c;
}

/// Parses the value side of `section.key=value`: JSON when it parses,
/// otherwise a bare string.
inline json parse_override_value(const std::string &text) {
    json v = json::parse(text, nullptr, false);
    if (v.is_discarded()) return json(text);
    return v;
}

inline void apply_override(json &doc, const std::string &assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        fail(ErrorCategory::Config, "override '" + assignment + "' must look like section.key=value");
    }
    std::string path = assignment.substr(0, eq);
    json v = parse_override_value(assignment.substr(eq + 1));
    json overlay = v;
    std::vector<std::string> parts;
    std::stringstream ss(path);
    for (std::string p; std::getline(ss, p, '.');) parts.push_back(p);
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) overlay = json{{*it, overlay}};
    detail::merge_strict(doc, overlay, "");
}

inline json read_json_file(const std::string &path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCategory::Io, "cannot open '" + path + "'");
    json j = json::parse(in, nullptr, false, true);
    if (j.is_discarded()) fail(ErrorCategory::Config, "'" + path + "' is not valid JSON");
    return j;
}

/// Defaults <- optional config file <- overrides, validated.
inline ExperimentConfig load_config(const std::string &config_path, const std::vector<std::string> &overrides) {
    json doc = config_to_json(ExperimentConfig{});
    if (!config_path.empty()) detail::merge_strict(doc, read_json_file(config_path), "");
    for (const auto &o : overrides) apply_override(doc, o);
    ExperimentConfig c = config_from_json(doc);
    try {
        c.validate();
    } catch (const Error &e) {
        fail(ErrorCategory::Config, e.what());
    }
    return c;
}

}  // namespace tbqkd
