#pragma once

// Run summaries, comparisons and file exports (Chrome trace, metrics CSV, job log).

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gpusim/engine.hpp"
#include "gpusim/error.hpp"
#include "gpusim/time.hpp"

namespace gpusim {

struct RunReport {
    std::string label;
    std::string scheduler;
    std::string placement;
    bool migration = false;
    std::string trace_hash;

    std::size_t jobs = 0;
    std::size_t completed = 0;
    std::vector<JobId> unsatisfiable;

    std::optional<double> avg_jct_s;
    std::optional<double> median_jct_s;
    std::optional<double> p95_jct_s;
    std::optional<double> avg_pending_time_s;
    std::optional<double> mean_effective_service_s;
    std::uint32_t max_pending_jobs = 0;
    std::optional<double> mean_frag_ratio;
    std::optional<double> min_frag_ratio;
    double makespan_s = 0;
    std::uint64_t preemptions = 0;
    std::uint64_t migrations = 0;
};

/// Nearest-rank percentile of an ascending sequence (p in (0, 100]).
inline Time nearest_rank(const std::vector<Time>& sorted, double p) {
    if (sorted.empty()) throw std::invalid_argument("percentile of an empty sequence");
    auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(sorted.size())));
    rank = std::clamp<std::size_t>(rank, 1, sorted.size());
    return sorted[rank - 1];
}

inline double mean_seconds(const std::vector<Time>& xs) {
    std::int64_t sum = 0;
    for (auto t : xs) sum += t.us;
    return static_cast<double>(sum) / static_cast<double>(xs.size()) / static_cast<double>(Time::ticks_per_second);
}

/// Time-weighted mean and minimum of the fragmentation ratio over the series,
/// treating each sample as holding until the next one. Samples without any
/// used node are skipped.
inline std::pair<std::optional<double>, std::optional<double>> fragmentation_summary(
    const std::vector<MetricsSample>& samples) {
    double weighted = 0, weight = 0, plain = 0;
    std::size_t defined = 0;
    std::optional<double> lo;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (!samples[i].frag_ratio) continue;
        double r = *samples[i].frag_ratio;
        lo = lo ? std::min(*lo, r) : r;
        plain += r;
        ++defined;
        if (i + 1 < samples.size()) {
            double dt = (samples[i + 1].t - samples[i].t).to_seconds();
            weighted += r * dt;
            weight += dt;
        }
    }
    if (defined == 0) return {std::nullopt, std::nullopt};
    return {weight > 0 ? weighted / weight : plain / static_cast<double>(defined), lo};
}

inline std::string run_label(const RunLog& log) {
    return log.scheduler + "/" + log.placement + (log.migration ? "+mig" : "");
}

inline RunReport summarize(const RunLog& log) {
    RunReport r;
    r.label = run_label(log);
    r.scheduler = log.scheduler;
    r.placement = log.placement;
    r.migration = log.migration;
    r.trace_hash = log.trace_hash;
    r.jobs = log.jobs.size();
    r.makespan_s = log.end_time.to_seconds();
    r.migrations = log.migrations.size();

    std::vector<Time> jct, pending, service;
    for (const auto& j : log.jobs) {
        r.preemptions += j.preemptions;
        if (j.status == JobStatus::Unsatisfiable) r.unsatisfiable.push_back(j.job_id);
        if (j.status != JobStatus::Done || !j.finish) continue;
        Time t = *j.finish - j.submit;
        jct.push_back(t);
        pending.push_back(t - j.running_time());
        service.push_back(j.effective_service);
    }
    r.completed = jct.size();
    if (!jct.empty()) {
        r.avg_jct_s = mean_seconds(jct);
        r.avg_pending_time_s = mean_seconds(pending);
        r.mean_effective_service_s = mean_seconds(service);
        std::sort(jct.begin(), jct.end());
        r.median_jct_s = nearest_rank(jct, 50).to_seconds();
        r.p95_jct_s = nearest_rank(jct, 95).to_seconds();
    }
    for (const auto& s : log.samples) r.max_pending_jobs = std::max(r.max_pending_jobs, s.pending);
    std::tie(r.mean_frag_ratio, r.min_frag_ratio) = fragmentation_summary(log.samples);
    return r;
}

namespace detail {

inline nlohmann::json opt_json(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline std::optional<double> opt_from(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << content;
    if (!out) throw IoError("error writing '" + path + "'");
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

}  // namespace detail

inline nlohmann::json report_to_json(const RunReport& r) {
    using detail::opt_json;
    return nlohmann::json{{"label", r.label},
                          {"scheduler", r.scheduler},
                          {"placement", r.placement},
                          {"migration", r.migration},
                          {"trace_hash", r.trace_hash},
                          {"jobs", r.jobs},
                          {"completed_jobs", r.completed},
                          {"unsatisfiable_jobs", r.unsatisfiable},
                          {"avg_jct_s", opt_json(r.avg_jct_s)},
                          {"median_jct_s", opt_json(r.median_jct_s)},
                          {"p95_jct_s", opt_json(r.p95_jct_s)},
                          {"avg_pending_time_s", opt_json(r.avg_pending_time_s)},
                          {"mean_effective_service_s", opt_json(r.mean_effective_service_s)},
                          {"max_pending_jobs", r.max_pending_jobs},
                          {"mean_frag_ratio", opt_json(r.mean_frag_ratio)},
                          {"min_frag_ratio", opt_json(r.min_frag_ratio)},
                          {"makespan_s", r.makespan_s},
                          {"preemptions", r.preemptions},
                          {"migrations", r.migrations}};
}

inline RunReport report_from_json(const nlohmann::json& j) {
    RunReport r;
    r.label = j.at("label").get<std::string>();
    r.scheduler = j.at("scheduler").get<std::string>();
    r.placement = j.at("placement").get<std::string>();
    r.migration = j.at("migration").get<bool>();
    r.trace_hash = j.at("trace_hash").get<std::string>();
    r.jobs = j.at("jobs").get<std::size_t>();
    r.completed = j.at("completed_jobs").get<std::size_t>();
    r.unsatisfiable = j.at("unsatisfiable_jobs").get<std::vector<JobId>>();
    r.avg_jct_s = detail::opt_from(j, "avg_jct_s");
    r.median_jct_s = detail::opt_from(j, "median_jct_s");
    r.p95_jct_s = detail::opt_from(j, "p95_jct_s");
    r.avg_pending_time_s = detail::opt_from(j, "avg_pending_time_s");
    r.mean_effective_service_s = detail::opt_from(j, "mean_effective_service_s");
    r.max_pending_jobs = j.at("max_pending_jobs").get<std::uint32_t>();
    r.mean_frag_ratio = detail::opt_from(j, "mean_frag_ratio");
    r.min_frag_ratio = detail::opt_from(j, "min_frag_ratio");
    r.makespan_s = j.at("makespan_s").get<double>();
    r.preemptions = j.at("preemptions").get<std::uint64_t>();
    r.migrations = j.at("migrations").get<std::uint64_t>();
    return r;
}

/// Trace Event Format (array form): one complete ("X") event per running
/// interval. pid is the partition index, tid the first node of the allocation,
/// ts/dur are microseconds.
inline nlohmann::json chrome_trace_json(const RunLog& log) {
    nlohmann::json events = nlohmann::json::array();
    for (const auto& j : log.jobs) {
        for (const auto& iv : j.intervals) {
            std::vector<std::string> nodes;
            for (NodeIndex n : iv.allocation.nodes()) nodes.push_back(log.nodes.at(n));
            events.push_back({{"name", j.job_name},
                              {"cat", "job"},
                              {"ph", "X"},
                              {"ts", iv.start.us},
                              {"dur", (iv.end - iv.start).us},
                              {"pid", j.partition_index},
                              {"tid", iv.allocation.slots.front().node},
                              {"args",
                               {{"job_id", j.job_id},
                                {"partition", j.partition},
                                {"gpus", iv.allocation.total_gpus()},
                                {"nodes", nodes}}}});
        }
    }
    return events;
}

inline void export_chrome_trace(const RunLog& log, const std::string& path) {
    detail::write_file(path, chrome_trace_json(log).dump() + "\n");
}

inline constexpr std::string_view metrics_header = "t,pending,running,used_gpus,used_nodes,frag_ratio";

inline std::string metrics_csv(const std::vector<MetricsSample>& series) {
    std::string out(metrics_header);
    out += '\n';
    for (const auto& s : series) {
        out += format_seconds(s.t);
        out += ',' + std::to_string(s.pending) + ',' + std::to_string(s.running) + ',' + std::to_string(s.used_gpus) +
               ',' + std::to_string(s.used_nodes) + ',';
        if (s.frag_ratio) out += format_real(*s.frag_ratio);
        out += '\n';
    }
    return out;
}

inline void export_metrics_csv(const std::vector<MetricsSample>& series, const std::string& path) {
    detail::write_file(path, metrics_csv(series));
}

inline std::vector<MetricsSample> parse_metrics_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != metrics_header) throw ParseError(1, "header", "bad metrics header");
    std::vector<MetricsSample> out;
    std::size_t row = 1;
    auto u32 = [&](const std::string& s, const char* field) {
        std::uint32_t v = 0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (s.empty() || ec != std::errc{} || p != s.data() + s.size()) throw ParseError(row, field, "bad count");
        return v;
    };
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        auto f = detail::split_csv_line(line);
        if (f.size() != 6) throw ParseError(row, "row", "expected 6 fields");
        MetricsSample s;
        if (!parse_seconds(f[0], s.t)) throw ParseError(row, "t", "bad time");
        s.pending = u32(f[1], "pending");
        s.running = u32(f[2], "running");
        s.used_gpus = u32(f[3], "used_gpus");
        s.used_nodes = u32(f[4], "used_nodes");
        if (!f[5].empty()) {
            double v = 0;
            auto [p, ec] = std::from_chars(f[5].data(), f[5].data() + f[5].size(), v);
            if (ec != std::errc{} || p != f[5].data() + f[5].size()) throw ParseError(row, "frag_ratio", "bad number");
            s.frag_ratio = v;
        }
        out.push_back(s);
    }
    return out;
}

inline std::string joblog_csv(const RunLog& log) {
    std::string out =
        "job_id,job_name,partition,total_gpus,state,final_state,submit_time,start_time,finish_time,jct,service_time,"
        "effective_service,overheads,preemptions,migrations,intervals\n";
    auto opt = [](const std::optional<Time>& t) { return t ? format_seconds(*t) : std::string{}; };
    for (const auto& j : log.jobs) {
        std::optional<Time> jct;
        if (j.finish) jct = *j.finish - j.submit;
        out += std::to_string(j.job_id) + ',' + j.job_name + ',' + j.partition + ',' + std::to_string(j.total_gpus) +
               ',' + std::string(to_string(j.status)) + ',' + std::string(to_string(j.final_state)) + ',' +
               format_seconds(j.submit) + ',' + opt(j.start) + ',' + opt(j.finish) + ',' + opt(jct) + ',' +
               format_seconds(j.service_time) + ',' + format_seconds(j.effective_service) + ',' +
               format_seconds(j.overheads) + ',' + std::to_string(j.preemptions) + ',' +
               std::to_string(j.migrations) + ',' + std::to_string(j.intervals.size()) + '\n';
    }
    return out;
}

struct ComparisonRow {
    RunReport report;
    std::map<std::string, std::optional<double>> metrics;
    std::map<std::string, std::optional<double>> delta;  // metric - baseline metric
};

struct ComparisonTable {
    std::string baseline;
    std::vector<ComparisonRow> rows;  // ordered by label
    std::vector<std::string> warnings;
};

inline std::map<std::string, std::optional<double>> comparison_metrics(const RunReport& r) {
    return {{"avg_jct_s", r.avg_jct_s},
            {"median_jct_s", r.median_jct_s},
            {"p95_jct_s", r.p95_jct_s},
            {"avg_pending_time_s", r.avg_pending_time_s},
            {"max_pending_jobs", static_cast<double>(r.max_pending_jobs)},
            {"mean_frag_ratio", r.mean_frag_ratio},
            {"makespan_s", r.makespan_s}};
}

/// Side-by-side metrics with deltas against `baseline` (a label; defaults to
/// the first label in order).
inline ComparisonTable compare_runs(std::vector<RunReport> reports, std::string baseline = {}) {
    if (reports.size() < 2) throw std::invalid_argument("compare_runs needs at least two reports");
    std::stable_sort(reports.begin(), reports.end(),
                     [](const RunReport& a, const RunReport& b) { return a.label < b.label; });
    ComparisonTable t;
    if (baseline.empty()) baseline = reports.front().label;
    auto base = std::find_if(reports.begin(), reports.end(), [&](const RunReport& r) { return r.label == baseline; });
    if (base == reports.end()) throw std::invalid_argument("baseline '" + baseline + "' is not among the reports");
    t.baseline = baseline;
    auto base_metrics = comparison_metrics(*base);
    for (const auto& r : reports) {
        if (r.trace_hash != base->trace_hash)
            t.warnings.push_back("MismatchedWorkload: " + r.label + " ran trace " + r.trace_hash + ", baseline ran " +
                                 base->trace_hash);
        ComparisonRow row{r, comparison_metrics(r), {}};
        for (const auto& [k, v] : row.metrics) {
            const auto& b = base_metrics.at(k);
            row.delta[k] = v && b ? std::optional<double>(*v - *b) : std::nullopt;
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

inline nlohmann::json comparison_to_json(const ComparisonTable& t) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : t.rows) {
        nlohmann::json m = nlohmann::json::object(), d = nlohmann::json::object();
        for (const auto& [k, v] : r.metrics) m[k] = detail::opt_json(v);
        for (const auto& [k, v] : r.delta) d[k] = detail::opt_json(v);
        rows.push_back({{"label", r.report.label},
                        {"scheduler", r.report.scheduler},
                        {"placement", r.report.placement},
                        {"migration", r.report.migration},
                        {"metrics", m},
                        {"delta_vs_baseline", d}});
    }
    return {{"baseline", t.baseline}, {"rows", rows}, {"warnings", t.warnings}};
}

}  // namespace gpusim
