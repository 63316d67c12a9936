#pragma once

// Run configuration: a single JSON file naming the topology, the trace (or
// synthetic parameters) and the policies.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gpusim/analysis.hpp"
#include "gpusim/cluster.hpp"
#include "gpusim/engine.hpp"
#include "gpusim/error.hpp"
#include "gpusim/synth.hpp"
#include "gpusim/trace.hpp"

namespace gpusim {

struct RunConfig {
    std::filesystem::path base_dir;  // relative paths resolve against this
    TopologyConfig topology;
    std::optional<std::filesystem::path> trace_path;
    std::optional<SynthParams> synth;
    EngineConfig engine;
    std::uint64_t seed = 7;
    std::filesystem::path output_dir = "out";
    std::vector<SchedulerKind> sweep_schedulers;
    std::vector<PlacementPolicy> sweep_placements;
};

namespace detail {

inline nlohmann::json load_json(const std::filesystem::path& path, const char* what) {
    std::ifstream in(path);
    if (!in) throw ConfigError(std::string("cannot open ") + what + " '" + path.string() + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string(what) + " '" + path.string() + "' is not valid JSON: " + e.what());
    }
}

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return (path.is_absolute() ? path : base / path).lexically_normal();
}

inline Seconds seconds_from_json(const nlohmann::json& v, const char* field) {
    if (v.is_number_integer()) return Seconds(v.get<std::int64_t>());
    if (v.is_number()) return to_seconds(Time::from_seconds(v.get<double>()));
    throw ConfigError(std::string(field) + ": expected a number of seconds");
}

inline Time time_from_json(const nlohmann::json& v, const char* field) {
    if (!v.is_number()) throw ConfigError(std::string(field) + ": expected a number of seconds");
    return v.is_number_integer() ? Time::seconds(v.get<std::int64_t>()) : Time::from_seconds(v.get<double>());
}

inline SchedulerKind scheduler_field(const nlohmann::json& v, const std::string& field) {
    if (!v.is_string()) throw ConfigError(field + ": expected a scheduler name");
    auto k = scheduler_from_string(v.get<std::string>());
    if (!k)
        throw ConfigError(field + ": unknown scheduler '" + v.get<std::string>() +
                          "' (expected fcfs, fcfs-backfill, sjf, las, rr, mlfq or las-mlfq)");
    return *k;
}

inline PlacementPolicy placement_field(const nlohmann::json& v, const std::string& field) {
    if (!v.is_string()) throw ConfigError(field + ": expected a placement name");
    auto k = placement_from_string(v.get<std::string>());
    if (!k)
        throw ConfigError(field + ": unknown placement '" + v.get<std::string>() +
                          "' (expected first-fit, best-fit or free-gpu)");
    return *k;
}

}  // namespace detail

inline RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    if (!j.is_object()) throw ConfigError("run config must be a JSON object");
    RunConfig c;
    c.base_dir = base_dir;
    try {
        if (!j.contains("topology")) throw ConfigError("topology: required");
        const auto& topo = j.at("topology");
        if (topo.is_string())
            c.topology = topology_from_json(
                detail::load_json(detail::resolve(base_dir, topo.get<std::string>()), "topology"));
        else
            c.topology = topology_from_json(topo);

        if (j.contains("trace")) c.trace_path = detail::resolve(base_dir, j.at("trace").get<std::string>());
        if (j.contains("synth")) {
            const auto& s = j.at("synth");
            c.synth = synth_params_from_json(
                s.is_string() ? detail::load_json(detail::resolve(base_dir, s.get<std::string>()), "synth params") : s);
        }
        if (c.trace_path.has_value() == c.synth.has_value())
            throw ConfigError("trace: exactly one of 'trace' and 'synth' is required");

        auto& e = c.engine;
        if (j.contains("scheduler")) e.scheduler.kind = detail::scheduler_field(j.at("scheduler"), "scheduler");
        if (j.contains("placement")) e.placement = detail::placement_field(j.at("placement"), "placement");
        if (j.contains("mlfq")) {
            const auto& m = j.at("mlfq");
            if (m.contains("quanta_s")) {
                e.scheduler.mlfq.quanta.clear();
                for (const auto& q : m.at("quanta_s"))
                    e.scheduler.mlfq.quanta.push_back(detail::seconds_from_json(q, "mlfq.quanta_s"));
            }
            if (m.contains("scaling")) {
                auto s = m.at("scaling").get<std::string>();
                if (s == "none")
                    e.scheduler.mlfq.scaling = QuantumScaling::None;
                else if (s == "per-gpu")
                    e.scheduler.mlfq.scaling = QuantumScaling::PerGpu;
                else
                    throw ConfigError("mlfq.scaling: expected 'none' or 'per-gpu', got '" + s + "'");
            }
            validate(e.scheduler.mlfq);
        }
        if (j.contains("rr")) {
            e.scheduler.rr_slice = detail::time_from_json(j.at("rr").at("slice_s"), "rr.slice_s");
            if (e.scheduler.rr_slice <= Time::zero()) throw ConfigError("rr.slice_s: must be > 0");
        }
        if (j.contains("migration")) {
            const auto& m = j.at("migration");
            e.migration_enabled = m.value("enabled", false);
            if (m.contains("fixed_overhead_s"))
                e.migration.fixed_overhead = detail::time_from_json(m.at("fixed_overhead_s"), "migration.fixed_overhead_s");
            if (m.contains("model_size_bytes")) e.migration.model_size_bytes = m.at("model_size_bytes").get<double>();
            if (m.contains("pcie_bw_bytes_per_s"))
                e.migration.pcie_bw_bytes_per_s = m.at("pcie_bw_bytes_per_s").get<double>();
            try {
                validate(e.migration);
            } catch (const CostModelError& err) {
                throw ConfigError(std::string("migration: ") + err.what());
            }
        }
        if (j.contains("penalty")) {
            e.penalty.cross_switch_ratio = j.at("penalty").value("cross_switch_ratio", 1.0);
            validate(e.penalty);
        }
        if (j.contains("preemption_overhead_s"))
            e.preemption_overhead = detail::time_from_json(j.at("preemption_overhead_s"), "preemption_overhead_s");
        if (j.contains("sample_interval_s"))
            e.sample_interval = detail::time_from_json(j.at("sample_interval_s"), "sample_interval_s");
        if (e.preemption_overhead < Time::zero() || e.sample_interval < Time::zero())
            throw ConfigError("overhead and sample interval must be >= 0");
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        else if (c.synth) c.seed = c.synth->seed;
        if (j.contains("output_dir")) c.output_dir = detail::resolve(base_dir, j.at("output_dir").get<std::string>());
        else c.output_dir = base_dir / "out";
        if (j.contains("sweep")) {
            const auto& s = j.at("sweep");
            if (s.contains("schedulers"))
                for (const auto& v : s.at("schedulers"))
                    c.sweep_schedulers.push_back(detail::scheduler_field(v, "sweep.schedulers"));
            if (s.contains("placements"))
                for (const auto& v : s.at("placements"))
                    c.sweep_placements.push_back(detail::placement_field(v, "sweep.placements"));
        }
    } catch (const nlohmann::json::exception& err) {
        throw ConfigError(std::string("run config: ") + err.what());
    } catch (const ParamError& err) {
        throw ConfigError(std::string("synth: ") + err.what());
    }
    return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
    auto j = detail::load_json(path, "run config");
    return run_config_from_json(j, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

inline Workload load_workload(const RunConfig& c) {
    if (c.trace_path) return parse_trace(c.trace_path->string());
    return synth_workload(*c.synth, c.seed);
}

}  // namespace gpusim
