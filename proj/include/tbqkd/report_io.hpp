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

// On-disk formats: result tables (CSV / JSON), session counts, raw time-tag
// dumps and Alice's pulse labels. See docs/formats.md.

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "tbqkd/analysis.hpp"
#include "tbqkd/detection.hpp"
#include "tbqkd/error.hpp"
#include "tbqkd/experiment.hpp"

namespace tbqkd {

inline constexpr const char *kSweepSchema = "tbqkd.sweep.v1";

inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline double parse_double(const std::string &s, const std::string &context) {
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    char *end = nullptr;
    errno = 0;
    double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) {
        fail(ErrorCategory::InvalidInput, context + ": '" + s + "' is not a number");
    }
    return v;
}

inline std::vector<std::string> split_csv_line(const std::string &line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline std::ofstream open_for_write(const std::string &path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCategory::Io, "cannot write '" + path + "': " + std::strerror(errno));
    return out;
}

inline std::ifstream open_for_read(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCategory::Io, "cannot read '" + path + "': " + std::strerror(errno));
    return in;
}

inline void write_csv(const SweepResult &t, std::ostream &out) {
    for (std::size_t k = 0; k < t.columns.size(); ++k) out << (k ? "," : "") << t.columns[k];
    out << "\n";
    for (const auto &row : t.rows) {
        for (std::size_t k = 0; k < row.size(); ++k) out << (k ? "," : "") << format_double(row[k]);
        out << "\n";
    }
}

inline nlohmann::json sweep_to_json(const SweepResult &t) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto &row : t.rows) {
        nlohmann::json r = nlohmann::json::object();
        for (std::size_t k = 0; k < t.columns.size(); ++k) {
            r[t.columns[k]] = std::isfinite(row[k]) ? nlohmann::json(row[k]) : nlohmann::json(nullptr);
        }
        rows.push_back(std::move(r));
    }
    return {{"schema", kSweepSchema}, {"independent", t.independent}, {"columns", t.columns}, {"rows", rows}};
}

inline SweepResult sweep_from_json(const nlohmann::json &j) {
    if (!j.is_object() || j.value("schema", "") != kSweepSchema) {
        fail(ErrorCategory::InvalidInput, std::string("JSON result is not a ") + kSweepSchema + " document");
    }
    SweepResult t;
    t.independent = j.at("independent").get<std::string>();
    t.columns = j.at("columns").get<std::vector<std::string>>();
    for (const auto &r : j.at("rows")) {
        std::vector<double> row;
        for (const auto &c : t.columns) {
            const auto &v = r.at(c);
            row.push_back(v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>());
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

/// Writes a table; `extra` members are merged into the JSON document.
inline void emit(const SweepResult &t, OutputFormat format, const std::string &path,
                 const nlohmann::json &extra = nlohmann::json::object()) {
    auto out = open_for_write(path);
    if (format == OutputFormat::Csv) {
        write_csv(t, out);
    } else {
        nlohmann::json doc = sweep_to_json(t);
        for (auto it = extra.begin(); it != extra.end(); ++it) doc[it.key()] = it.value();
        out << doc.dump(2) << "\n";
    }
    if (!out) fail(ErrorCategory::Io, "write to '" + path + "' failed");
}

inline SweepResult load_sweep(const std::string &path) {
    auto in = open_for_read(path);
    std::stringstream buf;
    buf << in.rdbuf();
    std::string text = buf.str();
    auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') {
        auto j = nlohmann::json::parse(text, nullptr, false);
        if (j.is_discarded()) fail(ErrorCategory::InvalidInput, "'" + path + "' is not valid JSON");
        return sweep_from_json(j);
    }
    SweepResult t;
    std::stringstream lines(text);
    std::string line;
    if (!std::getline(lines, line)) fail(ErrorCategory::InvalidInput, "'" + path + "' is empty");
    t.columns = split_csv_line(line);
    t.independent = t.columns.empty() ? "" : t.columns.front();
    std::size_t n = 1;
    while (std::getline(lines, line)) {
        ++n;
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != t.columns.size()) {
            fail(ErrorCategory::InvalidInput, path + ":" + std::to_string(n) + ": expected " +
                                                  std::to_string(t.columns.size()) + " cells");
        }
        std::vector<double> row;
        for (const auto &c : cells) row.push_back(parse_double(c, path + ":" + std::to_string(n)));
        t.rows.push_back(std::move(row));
    }
    return t;
}

inline nlohmann::json matrix_to_json(const ProbabilityMatrix &m) {
    // Rows: prepared phi0, phi1, t0, t1; columns: measured phi0, phi1, t0, t1.
    nlohmann::json rows = nlohmann::json::array();
    for (int a = 0; a < 2; ++a)
        for (int i = 0; i < 2; ++i) {
            nlohmann::json row = nlohmann::json::array();
            for (int b = 0; b < 2; ++b)
                for (int j = 0; j < 2; ++j) row.push_back(m.at(a, i, b, j));
            rows.push_back(row);
        }
    return {{"order", {"phi0", "phi1", "t0", "t1"}}, {"conditional", rows}};
}

// --- session counts --------------------------------------------------------

inline IntensityClass parse_class(const std::string &s, const std::string &context) {
    for (int c = 0; c < kNumClasses; ++c) {
        if (s == class_name(static_cast<IntensityClass>(c))) return static_cast<IntensityClass>(c);
    }
    fail(ErrorCategory::InvalidInput, context + ": unknown intensity class '" + s + "'");
}

inline int parse_bit(const std::string &s, const std::string &context) {
    if (s == "0") return 0;
    if (s == "1") return 1;
    fail(ErrorCategory::InvalidInput, context + ": expected 0 or 1, got '" + s + "'");
}

inline void write_counts(const SessionCounts &c, std::ostream &out) {
    out << "kind,class,alpha,i,beta,j,value\n";
    for (int k = 0; k < kNumClasses; ++k) {
        auto cls = static_cast<IntensityClass>(k);
        for (int a = 0; a < 2; ++a)
            for (int i = 0; i < 2; ++i) {
                out << "sent," << class_name(cls) << "," << a << "," << i << ",,," << c.sent(cls, a, i) << "\n";
                for (int b = 0; b < 2; ++b)
                    for (int j = 0; j < 2; ++j)
                        out << "click," << class_name(cls) << "," << a << "," << i << "," << b << "," << j << ","
                            << c.at(cls, a, i, b, j) << "\n";
            }
    }
    out << "double_clicks,,,,,," << c.double_clicks << "\n";
    out << "multi_basis_frames,,,,,," << c.multi_basis_frames << "\n";
    out << "out_of_window_tags,,,,,," << c.out_of_window_tags << "\n";
    out << "dead_time_blocked,,,,,," << c.dead_time_blocked << "\n";
}

inline void write_counts(const SessionCounts &c, const std::string &path) {
    auto out = open_for_write(path);
    write_counts(c, out);
}

inline SessionCounts read_counts(std::istream &in, const std::string &name = "counts") {
    SessionCounts c;
    std::string line;
    std::size_t n = 0;
    if (!std::getline(in, line) || line.rfind("kind,class,alpha,i,beta,j,value", 0) != 0) {
        fail(ErrorCategory::InvalidInput, name + ": missing counts header");
    }
    ++n;
    while (std::getline(in, line)) {
        ++n;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::string ctx = name + ":" + std::to_string(n);
        auto cells = split_csv_line(line);
        if (cells.size() != 7) fail(ErrorCategory::InvalidInput, ctx + ": expected 7 cells");
        uint64_t value = 0;
        try {
            std::size_t used = 0;
            value = std::stoull(cells[6], &used);
            if (used != cells[6].size()) throw std::invalid_argument("trailing");
        } catch (const std::exception &) {
            fail(ErrorCategory::InvalidInput, ctx + ": bad count '" + cells[6] + "'");
        }
        const std::string &kind = cells[0];
        if (kind == "sent") {
            auto cls = parse_class(cells[1], ctx);
            c.pulses_sent[static_cast<int>(cls)][parse_bit(cells[2], ctx)][parse_bit(cells[3], ctx)] = value;
        } else if (kind == "click") {
            auto cls = parse_class(cells[1], ctx);
            c.at(cls, parse_bit(cells[2], ctx), parse_bit(cells[3], ctx), parse_bit(cells[4], ctx),
                 parse_bit(cells[5], ctx)) = value;
        } else if (kind == "double_clicks") {
            c.double_clicks = value;
        } else if (kind == "multi_basis_frames") {
            c.multi_basis_frames = value;
        } else if (kind == "out_of_window_tags") {
            c.out_of_window_tags = value;
        } else if (kind == "dead_time_blocked") {
            c.dead_time_blocked = value;
        } else {
            fail(ErrorCategory::InvalidInput, ctx + ": unknown record kind '" + kind + "'");
        }
    }
    return c;
}

inline SessionCounts read_counts(const std::string &path) {
    auto in = open_for_read(path);
    return read_counts(in, path);
}

// --- time tags and labels --------------------------------------------------

inline constexpr const char *kTagHeader = "pulse_index,detector_id,timestamp_ps";
inline constexpr const char *kLabelHeader = "pulse_index,class,alpha,i";

inline void write_tag(std::ostream &out, const ClickEvent &t) {
    out << t.pulse_index << "," << t.detector_id << "," << format_double(t.timestamp_ps) << "\n";
}

inline void write_label(std::ostream &out, const LabeledPulse &p) {
    out << p.pulse_index << "," << class_name(p.label.cls) << "," << basis_index(p.label.basis) << "," << p.label.bit
        << "\n";
}

inline std::vector<ClickEvent> read_tags(const std::string &path) {
    auto in = open_for_read(path);
    std::string line;
    if (!std::getline(in, line) || line.rfind(kTagHeader, 0) != 0) {
        fail(ErrorCategory::InvalidInput, path + ": missing tag header '" + kTagHeader + "'");
    }
    std::vector<ClickEvent> tags;
    std::size_t n = 1;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        std::string ctx = path + ":" + std::to_string(n);
        auto cells = split_csv_line(line);
        if (cells.size() != 3) fail(ErrorCategory::InvalidInput, ctx + ": expected 3 cells");
        ClickEvent t;
        try {
            t.pulse_index = std::stoull(cells[0]);
            t.detector_id = std::stoi(cells[1]);
        } catch (const std::exception &) {
            fail(ErrorCategory::InvalidInput, ctx + ": bad pulse index or detector id");
        }
        if (t.detector_id != 0 && t.detector_id != 1) fail(ErrorCategory::InvalidInput, ctx + ": detector id must be 0 or 1");
        t.timestamp_ps = parse_double(cells[2], ctx);
        tags.push_back(t);
    }
    return tags;
}

inline std::vector<LabeledPulse> read_labels(const std::string &path) {
    auto in = open_for_read(path);
    std::string line;
    if (!std::getline(in, line) || line.rfind(kLabelHeader, 0) != 0) {
        fail(ErrorCategory::InvalidInput, path + ": missing label header '" + kLabelHeader + "'");
    }
    std::vector<LabeledPulse> labels;
    std::size_t n = 1;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        std::string ctx = path + ":" + std::to_string(n);
        auto cells = split_csv_line(line);
        if (cells.size() != 4) fail(ErrorCategory::InvalidInput, ctx + ": expected 4 cells");
        LabeledPulse p;
        try {
            p.pulse_index = std::stoull(cells[0]);
        } catch (const std::exception &) {
            fail(ErrorCategory::InvalidInput, ctx + ": bad pulse index");
        }
        p.label.cls = parse_class(cells[1], ctx);
        p.label.basis = static_cast<Basis>(parse_bit(cells[2], ctx));
        p.label.bit = parse_bit(cells[3], ctx);
        labels.push_back(p);
    }
    return labels;
}

/// Streams a simulation's tags and labels to two CSV files.
class TagDumper {
  public:
    TagDumper(const std::string &tags_path, const std::string &labels_path)
        : tags_(open_for_write(tags_path)), labels_(open_for_write(labels_path)) {
        tags_ << kTagHeader << "\n";
        labels_ << kLabelHeader << "\n";
        sink_.on_tag = [this](const ClickEvent &t) { write_tag(tags_, t); };
        sink_.on_pulse = [this](const LabeledPulse &p) { write_label(labels_, p); };
    }

    TagDumper(const TagDumper &) = delete;
    TagDumper &operator=(const TagDumper &) = delete;

    const TagSink *sink() const { return &sink_; }

  private:
    std::ofstream tags_;
    std::ofstream labels_;
    TagSink sink_;
};

}  // namespace tbqkd
