#include "oscbf/telemetry.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace oscbf {

std::vector<std::string> log_columns(int dof, const std::vector<std::string>& row_labels, bool per_row)
{
    std::vector<std::string> cols{"t"};
    for (const char* prefix : {"q", "qd", "u"}) {
        for (int i = 0; i < dof; ++i) cols.push_back(prefix + std::to_string(i));
    }
    for (const char* c : {"min_h", "slack_max", "ee_x", "ee_y", "ee_z", "ee_qw", "ee_qx", "ee_qy", "ee_qz",
                          "target_x", "target_y", "target_z", "pos_err", "ori_err", "line_dev", "iterations",
                          "status", "clamp", "latency_s"}) {
        cols.emplace_back(c);
    }
    if (per_row) {
        for (const auto& l : row_labels) cols.push_back("h:" + l);
    }
    return cols;
}

namespace {

std::string csv_escape(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

void write_log_csv(std::ostream& out, const RunResult& result, int dof, bool per_row)
{
    const auto cols = log_columns(dof, result.row_labels, per_row);
    for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << csv_escape(cols[i]);
    out << '\n';
    out << std::setprecision(10);
    for (const auto& r : result.log) {
        out << r.t;
        for (const Vec* v : {&r.q, &r.qd, &r.command}) {
            for (Eigen::Index i = 0; i < v->size(); ++i) out << ',' << (*v)[i];
        }
        out << ',' << r.min_h << ',' << r.slack_max << ',' << r.ee_position.x() << ',' << r.ee_position.y() << ','
            << r.ee_position.z() << ',' << r.ee_orientation.w() << ',' << r.ee_orientation.x() << ','
            << r.ee_orientation.y() << ',' << r.ee_orientation.z() << ',' << r.target_position.x() << ','
            << r.target_position.y() << ',' << r.target_position.z() << ',' << r.position_error << ','
            << r.orientation_error << ',' << r.line_deviation << ',' << r.iterations << ',' << to_string(r.status)
            << ',' << (r.emergency_clamp ? 1 : 0) << ',' << r.latency;
        if (per_row) {
            for (Eigen::Index i = 0; i < r.h.size(); ++i) out << ',' << r.h[i];
        }
        out << '\n';
    }
}

void write_log_csv(const std::filesystem::path& path, const RunResult& result, int dof, bool per_row)
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    write_log_csv(out, result, dof, per_row);
}

nlohmann::json summary_to_json(const RunSummary& s)
{
    const auto num = [](double v) -> nlohmann::json {
        if (std::isfinite(v)) return v;
        return nullptr;
    };
    nlohmann::json j;
    j["schema"] = kLogSchemaVersion;
    j["name"] = s.name;
    j["mode"] = std::string(to_string(s.mode));
    j["steps"] = s.steps;
    j["barrier_rows"] = s.barrier_rows;
    j["qp_rows"] = s.qp_rows;
    j["min_h"] = num(s.min_h);
    nlohmann::json by_kind = nlohmann::json::object();
    for (const auto& [k, v] : s.min_h_by_kind) by_kind[k] = num(v);
    j["min_h_by_kind"] = by_kind;
    j["max_slack"] = s.max_slack;
    j["rms_position_error"] = s.rms_position_error;
    j["rms_orientation_error"] = s.rms_orientation_error;
    j["rms_line_deviation"] = s.rms_line_deviation;
    j["final_position_error"] = s.final_position_error;
    j["emergency_clamps"] = s.emergency_clamps;
    j["torque_saturated_steps"] = s.torque_saturated_steps;
    j["null_motion"] = s.null_motion;
    j["infeasible_steps"] = s.infeasible_steps;
    j["max_iter_steps"] = s.max_iter_steps;
    j["degenerate_rows"] = s.degenerate_rows;
    j["diverged"] = s.diverged;
    j["safe"] = s.safe;
    if (!s.error.empty()) j["error"] = s.error;
    j["timing"] = {{"mean_hz", s.mean_hz}, {"p5_hz", s.p5_hz}, {"median_step_s", s.median_latency}};
    return j;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& doc)
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << doc.dump(2) << '\n';
}

nlohmann::json bench_report_json(const std::vector<BenchRow>& rows)
{
    nlohmann::json j;
    j["schema"] = kLogSchemaVersion;
    j["units"] = "kHz";
    auto arr = nlohmann::json::array();
    for (const auto& r : rows) {
        arr.push_back({{"experiment", r.experiment},
                       {"constraints", r.constraints},
                       {"velocity", {{"mean_khz", r.velocity.mean_hz / 1e3}, {"p5_khz", r.velocity.p5_hz / 1e3},
                                     {"median_step_s", r.velocity.median_step}, {"samples", r.velocity.samples}}},
                       {"torque", {{"mean_khz", r.torque.mean_hz / 1e3}, {"p5_khz", r.torque.p5_hz / 1e3},
                                   {"median_step_s", r.torque.median_step}, {"samples", r.torque.samples}}}});
    }
    j["rows"] = arr;
    return j;
}

std::string bench_report_markdown(const std::vector<BenchRow>& rows)
{
    std::ostringstream o;
    o << std::fixed << std::setprecision(2);
    o << "| Experiment | CBF constraints | Velocity mean (kHz) | Velocity p5 (kHz) | Torque mean (kHz) | "
         "Torque p5 (kHz) |\n";
    o << "|---|---:|---:|---:|---:|---:|\n";
    for (const auto& r : rows) {
        o << "| " << r.experiment << " | " << r.constraints << " | " << r.velocity.mean_hz / 1e3 << " | "
          << r.velocity.p5_hz / 1e3 << " | " << r.torque.mean_hz / 1e3 << " | " << r.torque.p5_hz / 1e3 << " |\n";
    }
    return o.str();
}

std::vector<std::string> validate_bench_report(const nlohmann::json& doc)
{
    std::vector<std::string> problems;
    if (!doc.is_object()) return {"report is not a JSON object"};
    if (doc.value("schema", 0) != kLogSchemaVersion) problems.push_back("schema version mismatch");
    if (!doc.contains("rows") || !doc["rows"].is_array()) {
        problems.push_back("missing rows array");
        return problems;
    }
    for (std::size_t i = 0; i < doc["rows"].size(); ++i) {
        const auto& r = doc["rows"][i];
        const std::string where = "rows[" + std::to_string(i) + "]";
        if (!r.contains("experiment") || !r["experiment"].is_string()) problems.push_back(where + ": experiment");
        if (!r.contains("constraints") || !r["constraints"].is_number_integer()) {
            problems.push_back(where + ": constraints");
        }
        for (const char* mode : {"velocity", "torque"}) {
            if (!r.contains(mode) || !r[mode].is_object()) {
                problems.push_back(where + ": " + mode);
                continue;
            }
            for (const char* field : {"mean_khz", "p5_khz"}) {
                if (!r[mode].contains(field) || !r[mode][field].is_number() || !(r[mode][field].get<double>() > 0)) {
                    problems.push_back(where + "." + mode + ": " + field);
                }
            }
        }
    }
    return problems;
}

}  // namespace oscbf
