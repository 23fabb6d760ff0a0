#pragma once

// Subcommand orchestration and result emission (CSV tables + JSON sidecar).

#include <string>
#include <vector>

#include <json.hpp>

#include "phonon/config.hpp"
#include "phonon/parallel.hpp"

namespace phonon {

/// CSV table; every column name carries its unit (e.g. "delta_MHz").
struct Table {
    std::string name;
    std::vector<std::string> comments;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    void add_row(const std::vector<double>& values);
};

/// Shortest round-trip decimal text of a double ("nan" / "inf" for non-finite values).
std::string format_number(double v);

struct ConvergenceEntry {
    std::string quantity;
    double base = 0.0;
    double refined = 0.0;
    double relative_change = 0.0;
};

struct ConvergenceReport {
    bool performed = false;
    std::string note;
    int n_q = 0, n_m = 0;
    int n_q_refined = 0, n_m_refined = 0;
    double tolerance = 1e-3;
    std::vector<ConvergenceEntry> entries;

    bool passed() const;
    void add(const std::string& quantity, double base, double refined);
};

struct ResultBundle {
    std::string subcommand;
    std::string version;
    std::string config_hash;
    double wall_time_s = 0.0;
    nlohmann::json summary = nlohmann::json::object();
    std::vector<Table> tables;
    ConvergenceReport convergence;
    std::vector<std::string> warnings;
};

const std::vector<std::string>& subcommands();

/// Runs one subcommand; ConfigError for an unknown name.
ResultBundle run(const std::string& subcommand, const RunConfig& config, const FanOut& fan_out);

/// Writes <dir>/<subcommand>/<table>.csv and <dir>/<subcommand>/metadata.json.
void write_bundle(const ResultBundle& bundle, const RunConfig& config, const std::string& dir);

void write_table(const Table& table, const std::string& path);

/// Record-set CSV: columns (record_id, kind in {tracking, data}, frequency_MHz, response).
std::vector<TrackingRecord> read_record_set(const std::string& path);
Table record_set_table(const std::vector<TrackingRecord>& records);
void write_record_set(const std::vector<TrackingRecord>& records, const std::string& path);

std::string code_version();

} // namespace phonon
