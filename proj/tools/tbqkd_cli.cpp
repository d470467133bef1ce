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

// tbqkd: command-line front end.
//
//   tbqkd session     [--counts-out F] [--tags-out F --labels-out F]
//   tbqkd sweep-loss  [--losses 0.45,3,6]
//   tbqkd pump-scan   [--delays start:stop:step]
//   tbqkd stability   [--hours H] [--samples-per-hour N] [--pulses-per-sample N]
//   tbqkd analyze     --counts F | --tags F --labels F
//
// Common: --config F --seed N --pulses N --out F --format csv|json --set k=v.
// Failures print `error[<category>]: <message>` and exit nonzero.

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tbqkd/tbqkd.hpp"

using namespace tbqkd;

namespace {

struct Common {
    std::string config;
    std::optional<uint64_t> seed;
    std::optional<uint64_t> pulses;
    std::string out;
    std::string format;
    std::vector<std::string> overrides;

    ExperimentConfig load() const {
        std::vector<std::string> all = overrides;
        if (seed) all.push_back("run.seed=" + std::to_string(*seed));
        if (pulses) all.push_back("run.pulses_per_setting=" + std::to_string(*pulses));
        if (!out.empty()) all.push_back("run.output_path=\"" + out + "\"");
        if (!format.empty()) all.push_back("run.format=\"" + format + "\"");
        return load_config(config, all);
    }
};

void add_common(CLI::App *cmd, Common &c) {
    cmd->add_option("--config", c.config, "JSON config file (layered over the defaults)");
    cmd->add_option("--seed", c.seed, "master seed");
    cmd->add_option("--pulses", c.pulses, "pulses per preparation setting");
    cmd->add_option("--out", c.out, "output file (stdout when omitted)");
    cmd->add_option("--format", c.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    cmd->add_option("--set", c.overrides, "override, section.key=value (repeatable)")->take_all();
}

void write_result(const SweepResult &t, const ExperimentConfig &cfg, const nlohmann::json &extra = {}) {
    nlohmann::json more = extra.is_null() ? nlohmann::json::object() : extra;
    if (!cfg.output_path.empty()) {
        emit(t, cfg.output_format, cfg.output_path, more);
        return;
    }
    if (cfg.output_format == OutputFormat::Csv) {
        write_csv(t, std::cout);
    } else {
        nlohmann::json doc = sweep_to_json(t);
        for (auto it = more.begin(); it != more.end(); ++it) doc[it.key()] = it.value();
        std::cout << doc.dump(2) << "\n";
    }
}

nlohmann::json key_report_json(const KeyRateReport &k) {
    return {{"q", k.q},
            {"f", k.f},
            {"f_rep", k.f_rep},
            {"Q_mu", k.Q_mu},
            {"E_mu", k.E_mu},
            {"Q_1", k.Q_1},
            {"e_1", k.e_1},
            {"H2_E_mu", k.H2_E_mu},
            {"H2_e_1", k.H2_e_1},
            {"ec_cost", k.ec_cost},
            {"privacy_term", k.privacy_term},
            {"R_per_pulse", k.rate_per_pulse},
            {"R_bps", k.rate_per_second},
            {"clamped", k.clamped},
            {"no_single_photon_signal", k.no_single_photon_signal}};
}

nlohmann::json session_extra(const ExperimentConfig &cfg, const SessionResult &r) {
    return {{"key_rate", key_report_json(r.analysis.key)},
            {"probability_matrix", matrix_to_json(r.analysis.signal_matrix)},
            {"config", config_to_json(cfg)}};
}

std::vector<double> parse_list(const std::string &text) {
    std::vector<double> v;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');) v.push_back(parse_double(item, "--losses"));
    return v;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Decoy-state BB84 time-bin QKD simulator with an optical Kerr-switch receiver"};
    app.require_subcommand(1);

    Common common;
    auto *session = app.add_subcommand("session", "simulate and analyze one QKD session");
    add_common(session, common);
    std::string counts_out, tags_out, labels_out;
    session->add_option("--counts-out", counts_out, "write the session counts file");
    session->add_option("--tags-out", tags_out, "write the raw time-tag stream");
    session->add_option("--labels-out", labels_out, "write the per-pulse preparation labels");

    auto *sweep = app.add_subcommand("sweep-loss", "key rate versus channel loss");
    add_common(sweep, common);
    std::string losses;
    sweep->add_option("--losses", losses, "comma-separated channel losses in dB");

    auto *scan = app.add_subcommand("pump-scan", "time-basis fidelities versus pump delay");
    add_common(scan, common);
    std::string delays;
    scan->add_option("--delays", delays, "start:stop:step in ps");

    auto *stab = app.add_subcommand("stability", "fidelity time series under pump drift");
    add_common(stab, common);
    std::optional<double> hours;
    std::optional<unsigned> per_hour;
    std::optional<uint64_t> per_sample;
    stab->add_option("--hours", hours, "duration in hours");
    stab->add_option("--samples-per-hour", per_hour, "samples per hour");
    stab->add_option("--pulses-per-sample", per_sample, "pulses per setting per sample");

    auto *analyze = app.add_subcommand("analyze", "run the analysis chain on recorded counts or tags");
    add_common(analyze, common);
    std::string counts_in, tags_in, labels_in;
    analyze->add_option("--counts", counts_in, "counts file");
    analyze->add_option("--tags", tags_in, "time-tag file");
    analyze->add_option("--labels", labels_in, "label file (with --tags)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        std::cerr << "error[config]: " << e.what() << "\n";
        return exit_code(ErrorCategory::Config);
    }

    try {
        ExperimentConfig cfg = common.load();

        if (session->parsed()) {
            if (tags_out.empty() != labels_out.empty()) {
                fail(ErrorCategory::Config, "--tags-out and --labels-out must be given together");
            }
            SessionResult r;
            if (!tags_out.empty()) {
                TagDumper dump(tags_out, labels_out);
                r = run_session(cfg, dump.sink());
            } else {
                r = run_session(cfg);
            }
            if (!counts_out.empty()) write_counts(r.counts, counts_out);
            write_result(session_table(cfg, r), cfg, session_extra(cfg, r));
        } else if (sweep->parsed()) {
            auto list = losses.empty() ? cfg.sweep_channel_db : parse_list(losses);
            write_result(run_loss_sweep(cfg, list), cfg);
        } else if (scan->parsed()) {
            double start = cfg.scan_start_ps, stop = cfg.scan_stop_ps, step = cfg.scan_step_ps;
            if (!delays.empty()) {
                std::vector<std::string> parts;
                std::stringstream ss(delays);
                for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
                if (parts.size() != 3) fail(ErrorCategory::Config, "--delays must be start:stop:step");
                start = parse_double(parts[0], "--delays");
                stop = parse_double(parts[1], "--delays");
                step = parse_double(parts[2], "--delays");
            }
            if (common.pulses) cfg.scan_pulses_per_point = *common.pulses;
            auto t = run_pump_delay_scan(cfg, delay_grid(start, stop, step));
            nlohmann::json extra = nlohmann::json::object();
            try {
                auto f = scan_features(t);
                extra["features"] = {{"center_t0_ps", f.center_t0},
                                     {"center_t1_ps", f.center_t1},
                                     {"separation_ps", f.separation},
                                     {"max_F_t0", f.max_F_t0}};
            } catch (const Error &) {
                // Scan too narrow to locate both edges; the table still stands.
            }
            write_result(t, cfg, extra);
        } else if (stab->parsed()) {
            if (per_sample) cfg.stability_pulses_per_sample = *per_sample;
            else if (common.pulses) cfg.stability_pulses_per_sample = *common.pulses;
            auto r = run_stability(cfg, hours.value_or(cfg.stability_hours),
                                   per_hour.value_or(cfg.stability_samples_per_hour));
            write_result(r.series, cfg,
                         {{"aggregate",
                           {{"F_phi0", r.fidelity[0]},
                            {"F_phi1", r.fidelity[1]},
                            {"F_t0", r.fidelity[2]},
                            {"F_t1", r.fidelity[3]},
                            {"E_mu", r.E_mu}}},
                          {"probability_matrix", matrix_to_json(r.aggregate)}});
        } else if (analyze->parsed()) {
            SessionCounts counts;
            if (!counts_in.empty()) {
                if (!tags_in.empty() || !labels_in.empty()) {
                    fail(ErrorCategory::Config, "give either --counts or --tags/--labels");
                }
                counts = read_counts(counts_in);
            } else if (!tags_in.empty() && !labels_in.empty()) {
                auto tags = read_tags(tags_in);
                auto labels = read_labels(labels_in);
                counts = accumulate(tags, WindowSet::from_detector(cfg.detector), labels, cfg.detector.double_click);
            } else {
                fail(ErrorCategory::Config, "analyze needs --counts, or --tags with --labels");
            }
            SessionResult r;
            r.counts = counts;
            r.nu = session_decoy_intensity(cfg);
            r.pulses = counts.total_sent(IntensityClass::Signal) + counts.total_sent(IntensityClass::Decoy) +
                       counts.total_sent(IntensityClass::Vacuum);
            r.analysis = analyze_counts(counts, cfg.source.mu, r.nu, cfg.key_params());
            write_result(session_table(cfg, r), cfg, session_extra(cfg, r));
        }
    } catch (const Error &e) {
        std::cerr << "error[" << category_name(e.category()) << "]: " << e.what() << "\n";
        return exit_code(e.category());
    } catch (const std::exception &e) {
        std::cerr << "error[internal]: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
