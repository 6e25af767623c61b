#pragma once

#include <cerrno>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <ctime>
#include <fstream>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "memcomp/entropy_chain.hpp"
#include "memcomp/bounds.hpp"
#include "memcomp/core.hpp"
#include "memcomp/experiment.hpp"
#include "memcomp/relay.hpp"

#ifndef MEMCOMP_VERSION
#define MEMCOMP_VERSION "0.0.0"
#endif

namespace memcomp {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

/// Empty, real, count, text or flag.
using Cell = std::variant<std::monostate, double, std::uint64_t, std::string, bool>;

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
};

template <class T>
Cell opt_cell(const std::optional<T>& v) {
    if (!v) return std::monostate{};
    return Cell(*v);
}

// ---------------------------------------------------------------------------
// CSV

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

inline std::string cell_text(const Cell& c) {
    struct Visitor {
        std::string operator()(std::monostate) const { return {}; }
        std::string operator()(double v) const { return format_number(v); }
        std::string operator()(std::uint64_t v) const { return std::to_string(v); }
        std::string operator()(const std::string& v) const { return v; }
        std::string operator()(bool v) const { return v ? "true" : "false"; }
    };
    return std::visit(Visitor{}, c);
}

inline std::string to_csv(const Table& t) {
    std::string out;
    for (std::size_t i = 0; i < t.columns.size(); ++i) out += (i ? "," : "") + csv_field(t.columns[i]);
    out += "\n";
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + csv_field(cell_text(row[i]));
        out += "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON

struct RunMeta {
    std::string command;
    std::optional<std::uint64_t> seed;
    std::string timestamp;
    std::vector<std::string> notes;
};

inline std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline Json cell_json(const Cell& c) {
    struct Visitor {
        Json operator()(std::monostate) const { return nullptr; }
        Json operator()(double v) const { return v; }
        Json operator()(std::uint64_t v) const { return v; }
        Json operator()(const std::string& v) const { return v; }
        Json operator()(bool v) const { return v; }
    };
    return std::visit(Visitor{}, c);
}

inline Json to_json(const Table& t, const RunMeta& meta) {
    Json env;
    env["schema_version"] = kSchemaVersion;
    env["tool"] = "memcomp";
    env["version"] = MEMCOMP_VERSION;
    env["command"] = meta.command;
    env["seed"] = meta.seed ? Json(*meta.seed) : Json(nullptr);
    env["timestamp"] = meta.timestamp;
    env["notes"] = meta.notes;
    env["columns"] = t.columns;
    Json records = Json::array();
    for (const auto& row : t.rows) {
        Json rec = Json::object();
        for (std::size_t i = 0; i < row.size(); ++i) rec[t.columns[i]] = cell_json(row[i]);
        records.push_back(std::move(rec));
    }
    env["records"] = std::move(records);
    return env;
}

/// Inverse of to_json for the record part: column order from "columns",
/// values typed by their JSON kind.
inline Table table_from_json(const Json& env) {
    if (!env.contains("schema_version") || env["schema_version"] != kSchemaVersion)
        throw ArgumentError("unsupported or missing schema_version");
    Table t;
    for (const auto& c : env.at("columns")) t.columns.push_back(c.get<std::string>());
    for (const auto& rec : env.at("records")) {
        std::vector<Cell> row;
        for (const auto& col : t.columns) {
            const Json& v = rec.at(col);
            if (v.is_null())
                row.emplace_back(std::monostate{});
            else if (v.is_boolean())
                row.emplace_back(v.get<bool>());
            else if (v.is_number_unsigned())
                row.emplace_back(v.get<std::uint64_t>());
            else if (v.is_number())
                row.emplace_back(v.get<double>());
            else
                row.emplace_back(v.get<std::string>());
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

// ---------------------------------------------------------------------------
// Tables for each report kind

inline const std::vector<std::string>& experiment_columns() {
    static const std::vector<std::string> cols = {
        "family", "d", "corr_kind", "alpha", "n", "m", "p_e", "strategy", "trials", "emp_redundancy_bits",
        "stderr_bits", "bound_main_bits", "bound_lb_bits", "bound_ub_bits", "pass"};
    return cols;
}

inline Table experiment_table(const std::vector<CodeLengthReport>& reports) {
    Table t;
    t.columns = experiment_columns();
    for (const auto& r : reports) {
        t.rows.push_back({r.family, static_cast<std::uint64_t>(r.d), r.corr_kind, opt_cell(r.alpha), r.n, r.m, r.p_e,
                          to_string(r.strategy), static_cast<std::uint64_t>(r.trials), r.emp_redundancy_bits,
                          opt_cell(r.stderr_bits), r.bound_main_bits, opt_cell(r.bound_lb_bits),
                          opt_cell(r.bound_ub_bits), opt_cell(r.pass)});
    }
    return t;
}

namespace detail {

inline double as_real(const Cell& c) {
    if (auto p = std::get_if<double>(&c)) return *p;
    if (auto p = std::get_if<std::uint64_t>(&c)) return static_cast<double>(*p);
    throw ArgumentError("expected a number in report table");
}
inline std::optional<double> as_opt_real(const Cell& c) {
    if (std::holds_alternative<std::monostate>(c)) return std::nullopt;
    return as_real(c);
}
inline std::uint64_t as_count(const Cell& c) {
    if (auto p = std::get_if<std::uint64_t>(&c)) return *p;
    throw ArgumentError("expected a count in report table");
}

}  // namespace detail

inline std::vector<CodeLengthReport> experiment_reports_from_table(const Table& t) {
    if (t.columns != experiment_columns()) throw ArgumentError("not an experiment table");
    std::vector<CodeLengthReport> out;
    for (const auto& row : t.rows) {
        CodeLengthReport r;
        r.family = std::get<std::string>(row[0]);
        r.d = static_cast<int>(detail::as_count(row[1]));
        r.corr_kind = std::get<std::string>(row[2]);
        r.alpha = detail::as_opt_real(row[3]);
        r.n = detail::as_count(row[4]);
        r.m = detail::as_count(row[5]);
        r.p_e = detail::as_real(row[6]);
        const auto& s = std::get<std::string>(row[7]);
        r.strategy = s == "ucomp" ? Strategy::ucomp : s == "ducompmd" ? Strategy::ducompmd : Strategy::ducompme;
        r.trials = detail::as_count(row[8]);
        r.emp_redundancy_bits = detail::as_real(row[9]);
        r.stderr_bits = detail::as_opt_real(row[10]);
        r.bound_main_bits = detail::as_real(row[11]);
        r.bound_lb_bits = detail::as_opt_real(row[12]);
        r.bound_ub_bits = detail::as_opt_real(row[13]);
        if (auto b = std::get_if<bool>(&row[14])) r.pass = *b;
        out.push_back(std::move(r));
    }
    return out;
}

inline Table bounds_table(const std::vector<BoundResult>& results) {
    Table t;
    t.columns = {"strategy", "regime", "direction", "n", "m", "p_e", "value_bits", "residual_note"};
    for (const auto& r : results)
        t.rows.push_back({to_string(r.strategy), to_string(r.regime), to_string(r.direction), r.n, r.m, r.p_e,
                          r.value_bits, r.residual_note});
    return t;
}

inline Table scenario_table(const std::vector<TrafficReport>& reports) {
    Table t;
    t.columns = {"family", "corr_kind", "alpha", "n", "m", "trials", "link", "strategy", "mean_bits", "stderr",
                 "gain_total", "gain_redundancy", "gain_stderr", "error"};
    for (const auto& rep : reports) {
        const auto& c = rep.config;
        const std::string corr = CorrelationSpec::kind_name(c.corr_kind);
        if (rep.error) {
            t.rows.push_back({c.family.name(), corr, opt_cell(c.alpha), c.n, c.m, static_cast<std::uint64_t>(c.trials),
                              std::monostate{}, std::monostate{}, std::monostate{}, std::monostate{}, std::monostate{},
                              std::monostate{}, std::monostate{}, *rep.error});
            continue;
        }
        for (const auto& r : rep.rows)
            t.rows.push_back({c.family.name(), corr, opt_cell(c.alpha), c.n, c.m, static_cast<std::uint64_t>(c.trials),
                              to_string(r.link), to_string(r.strategy), r.mean_bits, opt_cell(r.stderr_bits),
                              opt_cell(r.gain_total), opt_cell(r.gain_redundancy), opt_cell(r.gain_stderr),
                              std::monostate{}});
    }
    return t;
}

inline Table battery_table(const BatteryResult& res) {
    Table t;
    t.columns = {"check", "enforced", "instances", "violations", "min_slack_bits", "worst_instance"};
    for (const auto& s : res.summaries)
        t.rows.push_back({s.check, s.enforced, static_cast<std::uint64_t>(s.instances),
                          static_cast<std::uint64_t>(s.violations), s.min_slack, s.worst_instance});
    return t;
}

// ---------------------------------------------------------------------------
// Output

enum class Format { csv, json };

inline std::string render(const Table& t, Format f, const RunMeta& meta) {
    return f == Format::csv ? to_csv(t) : to_json(t, meta).dump(2) + "\n";
}

/// Writes `content` to `path`; failures name the path.
inline void write_text(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot open " + path + " for writing: " + std::strerror(errno));
    f << content;
    f.flush();
    if (!f) throw Error("write to " + path + " failed: " + std::strerror(errno));
}

}  // namespace memcomp
