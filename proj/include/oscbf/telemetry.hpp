#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "oscbf/simulator.hpp"

namespace oscbf {

inline constexpr int kLogSchemaVersion = 1;

/// CSV header for a log of a model with n joints and the given barrier rows.
std::vector<std::string> log_columns(int dof, const std::vector<std::string>& row_labels, bool per_row);

void write_log_csv(std::ostream& out, const RunResult& result, int dof, bool per_row);
void write_log_csv(const std::filesystem::path& path, const RunResult& result, int dof, bool per_row);

/// Summary JSON; wall-clock fields are grouped under "timing".
nlohmann::json summary_to_json(const RunSummary& summary);
void write_json(const std::filesystem::path& path, const nlohmann::json& doc);

struct BenchRow {
    std::string experiment;
    int constraints = 0;
    FrequencyStats velocity;
    FrequencyStats torque;
};

nlohmann::json bench_report_json(const std::vector<BenchRow>& rows);
std::string bench_report_markdown(const std::vector<BenchRow>& rows);

/// Schema check for a bench report; returns problems found (empty = valid).
std::vector<std::string> validate_bench_report(const nlohmann::json& doc);

}  // namespace oscbf
