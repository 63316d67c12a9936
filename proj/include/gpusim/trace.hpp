#pragma once

// Accounting-style job traces: the CSV schema, validation and serialization.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "gpusim/cluster.hpp"
#include "gpusim/error.hpp"
#include "gpusim/time.hpp"

namespace gpusim {

enum class FinalState { Completed, Failed, Cancelled };

inline std::string_view to_string(FinalState s) {
    switch (s) {
        case FinalState::Completed: return "Completed";
        case FinalState::Failed: return "Failed";
        case FinalState::Cancelled: return "Cancelled";
    }
    return "Completed";
}

inline std::optional<FinalState> final_state_from_string(std::string_view s) {
    if (s == "Completed") return FinalState::Completed;
    if (s == "Failed") return FinalState::Failed;
    if (s == "Cancelled") return FinalState::Cancelled;
    return std::nullopt;
}

/// One traced job. Either the (nodes, GPUs per node) tuple or the total GPU
/// count is present; when both tuple fields are given total_gpus is their product.
struct JobRecord {
    JobId job_id = 0;
    std::string job_name;
    std::string partition;
    std::optional<std::uint32_t> req_nodes;
    std::optional<std::uint32_t> req_gpus_per_node;
    std::uint32_t total_gpus = 0;
    Time submit_time;
    std::optional<Time> start_time;
    std::optional<Time> end_time;
    FinalState final_state = FinalState::Completed;
    Time service_time;

    bool has_tuple() const noexcept { return req_nodes.has_value() && req_gpus_per_node.has_value(); }

    bool operator==(const JobRecord&) const = default;
};

struct Workload {
    std::vector<JobRecord> jobs;  // sorted by submit_time (stable)
    Time horizon;

    bool operator==(const Workload&) const = default;
};

inline constexpr std::string_view trace_header =
    "job_id,job_name,partition,req_nodes,req_gpus_per_node,total_gpus,submit_time,start_time,end_time,final_state,"
    "service_time";

/// Throws ValidationError if `r` breaks a record invariant.
inline void validate_record(const JobRecord& r) {
    auto fail = [&](const std::string& what) {
        throw ValidationError("job " + std::to_string(r.job_id) + ": " + what);
    };
    if (r.partition.empty()) fail("partition is empty");
    if (r.req_nodes.has_value() != r.req_gpus_per_node.has_value())
        fail("req_nodes and req_gpus_per_node must be given together");
    if (r.has_tuple()) {
        if (*r.req_nodes == 0 || *r.req_gpus_per_node == 0) fail("request counts must be >= 1");
        if (r.total_gpus != *r.req_nodes * *r.req_gpus_per_node)
            fail("total_gpus != req_nodes * req_gpus_per_node");
    }
    if (r.total_gpus == 0) fail("no resource request");
    if (r.submit_time < Time::zero()) fail("negative submit_time");
    if (r.service_time < Time::zero()) fail("negative service_time");
    if (r.final_state == FinalState::Completed && r.service_time <= Time::zero())
        fail("completed job needs service_time > 0");
    if (r.start_time && *r.start_time < r.submit_time) fail("start_time < submit_time");
    if (r.end_time && r.start_time && *r.end_time < *r.start_time) fail("end_time < start_time");
    if (r.end_time && *r.end_time < r.submit_time) fail("end_time < submit_time");
    if (r.start_time && r.end_time && r.service_time != *r.end_time - *r.start_time)
        fail("service_time != end_time - start_time");
}

/// Sorts by submit time (stable), checks id uniqueness and every record.
inline Workload make_workload(std::vector<JobRecord> jobs) {
    std::stable_sort(jobs.begin(), jobs.end(),
                     [](const JobRecord& a, const JobRecord& b) { return a.submit_time < b.submit_time; });
    std::set<JobId> ids;
    Workload w;
    for (const auto& r : jobs) {
        validate_record(r);
        if (!ids.insert(r.job_id).second) throw ValidationError("duplicate job_id " + std::to_string(r.job_id));
        w.horizon = max(w.horizon, r.end_time.value_or(r.submit_time));
    }
    w.jobs = std::move(jobs);
    return w;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(std::move(cur));
    return out;
}

inline std::int64_t parse_int(const std::string& s, std::size_t row, const char* field) {
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || p != s.data() + s.size())
        throw ParseError(row, field, "expected an integer, got '" + s + "'");
    return v;
}

inline std::optional<std::uint32_t> parse_count(const std::string& s, std::size_t row, const char* field) {
    if (s.empty()) return std::nullopt;
    auto v = parse_int(s, row, field);
    if (v < 0 || v > 1'000'000) throw ParseError(row, field, "count out of range");
    return static_cast<std::uint32_t>(v);
}

inline std::optional<Time> parse_time(const std::string& s, std::size_t row, const char* field) {
    if (s.empty()) return std::nullopt;
    return Time::seconds(parse_int(s, row, field));
}

inline void require_whole_seconds(Time t, const char* field) {
    if (t.us % Time::ticks_per_second != 0)
        throw ValidationError(std::string(field) + " must be a whole number of seconds in the trace format");
}

}  // namespace detail

/// Parses trace CSV text. Row numbers in diagnostics are 1-based file lines.
inline Workload parse_trace_text(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError(1, "header", "missing header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != trace_header) throw ParseError(1, "header", "expected '" + std::string(trace_header) + "'");

    std::vector<JobRecord> jobs;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto f = detail::split_csv_line(line);
        if (f.size() != 11)
            throw ParseError(row, "row", "expected 11 fields, got " + std::to_string(f.size()));
        JobRecord r;
        r.job_id = detail::parse_int(f[0], row, "job_id");
        r.job_name = f[1];
        r.partition = f[2];
        r.req_nodes = detail::parse_count(f[3], row, "req_nodes");
        r.req_gpus_per_node = detail::parse_count(f[4], row, "req_gpus_per_node");
        auto total = detail::parse_count(f[5], row, "total_gpus");
        if (total) {
            r.total_gpus = *total;
        } else if (r.has_tuple()) {
            r.total_gpus = *r.req_nodes * *r.req_gpus_per_node;
        }
        auto submit = detail::parse_time(f[6], row, "submit_time");
        if (!submit) throw ParseError(row, "submit_time", "required");
        r.submit_time = *submit;
        r.start_time = detail::parse_time(f[7], row, "start_time");
        r.end_time = detail::parse_time(f[8], row, "end_time");
        auto state = final_state_from_string(f[9]);
        if (!state) throw ParseError(row, "final_state", "unknown state '" + f[9] + "'");
        r.final_state = *state;
        auto service = detail::parse_time(f[10], row, "service_time");
        if (service) {
            r.service_time = *service;
        } else if (r.start_time && r.end_time) {
            r.service_time = *r.end_time - *r.start_time;
        } else {
            throw ParseError(row, "service_time", "required when start/end times are absent");
        }
        try {
            validate_record(r);
        } catch (const ValidationError& e) {
            throw ValidationError("row " + std::to_string(row) + ": " + e.what());
        }
        jobs.push_back(std::move(r));
    }
    return make_workload(std::move(jobs));
}

inline Workload parse_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open trace '" + path + "'");
    return parse_trace_text(in);
}

inline void write_trace(std::ostream& out, const Workload& w) {
    out << trace_header << '\n';
    auto opt = [](const auto& v) { return v ? std::to_string(*v) : std::string{}; };
    auto opt_time = [](const std::optional<Time>& t) { return t ? format_seconds(*t) : std::string{}; };
    for (const auto& r : w.jobs) {
        if (r.job_name.find(',') != std::string::npos) throw ValidationError("job_name may not contain ','");
        detail::require_whole_seconds(r.submit_time, "submit_time");
        detail::require_whole_seconds(r.service_time, "service_time");
        out << r.job_id << ',' << r.job_name << ',' << r.partition << ',' << opt(r.req_nodes) << ','
            << opt(r.req_gpus_per_node) << ',' << r.total_gpus << ',' << format_seconds(r.submit_time) << ','
            << opt_time(r.start_time) << ',' << opt_time(r.end_time) << ',' << to_string(r.final_state) << ','
            << format_seconds(r.service_time) << '\n';
    }
}

inline std::string serialize_trace(const Workload& w) {
    std::ostringstream os;
    write_trace(os, w);
    return os.str();
}

inline void save_trace(const std::string& path, const Workload& w) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write trace '" + path + "'");
    write_trace(out, w);
    if (!out) throw IoError("error writing trace '" + path + "'");
}

/// FNV-1a over the canonical serialization; identifies the workload a report came from.
inline std::string workload_hash(const Workload& w) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : serialize_trace(w)) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    static constexpr char hex[] = "0123456789abcdef";
    for (int i = 15; i >= 0; --i) {
        buf[i] = hex[h & 0xf];
        h >>= 4;
    }
    buf[16] = '\0';
    return buf;
}

}  // namespace gpusim
