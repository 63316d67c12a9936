#pragma once

// Command implementations behind the gpusim executable. Each returns the
// process exit status: 0 success, 1 configuration/parse error, 2 internal
// invariant violation.

#include <atomic>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "gpusim/analysis.hpp"
#include "gpusim/config.hpp"
#include "gpusim/engine.hpp"
#include "gpusim/synth.hpp"
#include "gpusim/trace.hpp"

namespace gpusim::cli {

enum ExitCode : int { ok = 0, config_error = 1, internal_error = 2 };

struct RunOptions {
    std::optional<std::uint64_t> seed;
    std::optional<std::filesystem::path> output_dir;
    bool debug_invariants = false;
    unsigned jobs = 1;  // sweep parallelism
};

struct RunArtifacts {
    RunLog log;
    RunReport report;
};

/// Simulates one configuration and writes report.json, metrics.csv,
/// timeline.trace.json and joblog.csv into `out_dir`.
inline RunArtifacts simulate_to(const RunConfig& cfg, const Workload& workload, const std::filesystem::path& out_dir) {
    Cluster cluster = build_cluster(cfg.topology);
    RunArtifacts a{run(workload, cluster, cfg.engine), {}};
    a.report = summarize(a.log);
    std::filesystem::create_directories(out_dir);
    detail::write_file((out_dir / "report.json").string(), report_to_json(a.report).dump(2) + "\n");
    export_metrics_csv(a.log.samples, (out_dir / "metrics.csv").string());
    export_chrome_trace(a.log, (out_dir / "timeline.trace.json").string());
    detail::write_file((out_dir / "joblog.csv").string(), joblog_csv(a.log));
    return a;
}

template <typename F>
int guarded(std::ostream& err, F&& body) {
    try {
        return body();
    } catch (const InvariantViolation& e) {
        err << "internal error: " << e.what() << '\n';
        return internal_error;
    } catch (const SlotConflict& e) {
        err << "internal error: " << e.what() << '\n';
        return internal_error;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return config_error;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return config_error;
    }
}

inline int cmd_run(const std::filesystem::path& config_path, const RunOptions& opts, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
    return guarded(err, [&] {
        RunConfig cfg = load_run_config(config_path);
        if (opts.seed) cfg.seed = *opts.seed;
        if (opts.output_dir) cfg.output_dir = *opts.output_dir;
        cfg.engine.debug_invariants = cfg.engine.debug_invariants || opts.debug_invariants;
        Workload w = load_workload(cfg);
        auto a = simulate_to(cfg, w, cfg.output_dir);
        for (JobId id : a.report.unsatisfiable)
            err << "warning: job " << id << " requests more than its partition can ever provide\n";
        out << a.report.label << ": " << a.report.completed << "/" << a.report.jobs << " jobs, avg JCT "
            << (a.report.avg_jct_s ? format_real(*a.report.avg_jct_s) : std::string("n/a")) << " s -> "
            << cfg.output_dir.string() << '\n';
        return static_cast<int>(ok);
    });
}

struct SweepMatrix {
    std::vector<SchedulerKind> schedulers;
    std::vector<PlacementPolicy> placements;
};

inline SweepMatrix load_matrix(const std::filesystem::path& path) {
    auto j = detail::load_json(path, "sweep matrix");
    SweepMatrix m;
    try {
        for (const auto& v : j.value("schedulers", nlohmann::json::array()))
            m.schedulers.push_back(detail::scheduler_field(v, "schedulers"));
        for (const auto& v : j.value("placements", nlohmann::json::array()))
            m.placements.push_back(detail::placement_field(v, "placements"));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("sweep matrix: ") + e.what());
    }
    return m;
}

inline std::string cell_name(SchedulerKind s, PlacementPolicy p) {
    return std::string(to_string(s)) + "__" + std::string(to_string(p));
}

/// Runs every scheduler x placement cell (in parallel when opts.jobs > 1)
/// and writes comparison.json next to the per-cell directories.
inline int cmd_sweep(const std::filesystem::path& config_path, const std::optional<std::filesystem::path>& matrix_path,
                     const RunOptions& opts, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    return guarded(err, [&] {
        RunConfig base = load_run_config(config_path);
        if (opts.seed) base.seed = *opts.seed;
        if (opts.output_dir) base.output_dir = *opts.output_dir;
        base.engine.debug_invariants = base.engine.debug_invariants || opts.debug_invariants;
        SweepMatrix m = matrix_path ? load_matrix(*matrix_path) : SweepMatrix{base.sweep_schedulers, base.sweep_placements};
        if (m.schedulers.empty() || m.placements.empty()) {
            err << "error: sweep matrix is empty (need at least one scheduler and one placement)\n";
            return static_cast<int>(config_error);
        }
        Workload w = load_workload(base);

        struct Cell {
            SchedulerKind scheduler;
            PlacementPolicy placement;
            std::optional<RunReport> report;
            std::string error;
            int code = ok;
        };
        std::vector<Cell> cells;
        for (auto s : m.schedulers)
            for (auto p : m.placements) cells.push_back({s, p, std::nullopt, {}, ok});

        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (std::size_t i; (i = next.fetch_add(1)) < cells.size();) {
                Cell& c = cells[i];
                RunConfig cfg = base;
                cfg.engine.scheduler.kind = c.scheduler;
                cfg.engine.placement = c.placement;
                try {
                    c.report = simulate_to(cfg, w, base.output_dir / cell_name(c.scheduler, c.placement)).report;
                } catch (const InvariantViolation& e) {
                    c.error = e.what();
                    c.code = internal_error;
                } catch (const SlotConflict& e) {
                    c.error = e.what();
                    c.code = internal_error;
                } catch (const std::exception& e) {
                    c.error = e.what();
                    c.code = config_error;
                }
            }
        };
        unsigned threads = std::max(1u, std::min<unsigned>(opts.jobs, static_cast<unsigned>(cells.size())));
        std::vector<std::thread> pool;
        for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
        worker();
        for (auto& t : pool) t.join();

        int code = ok;
        std::vector<RunReport> reports;
        for (const auto& c : cells) {
            if (c.report) {
                reports.push_back(*c.report);
                out << cell_name(c.scheduler, c.placement) << ": avg JCT "
                    << (c.report->avg_jct_s ? format_real(*c.report->avg_jct_s) : std::string("n/a")) << " s\n";
            } else {
                err << "error: cell " << cell_name(c.scheduler, c.placement) << " failed: " << c.error << '\n';
                code = std::max(code, c.code);
            }
        }
        std::filesystem::create_directories(base.output_dir);
        if (reports.size() >= 2) {
            auto table = compare_runs(reports);
            for (const auto& wmsg : table.warnings) err << "warning: " << wmsg << '\n';
            detail::write_file((base.output_dir / "comparison.json").string(), comparison_to_json(table).dump(2) + "\n");
        }
        return code;
    });
}

inline int cmd_synth(const std::filesystem::path& params_path, const std::filesystem::path& out_path,
                     std::optional<std::uint64_t> seed, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    return guarded(err, [&] {
        SynthParams p;
        try {
            p = synth_params_from_json(detail::load_json(params_path, "synth params"));
        } catch (const ConfigError& e) {
            throw ParamError(e.what());
        }
        Workload w = synth_workload(p, seed.value_or(p.seed));
        if (out_path.has_parent_path()) std::filesystem::create_directories(out_path.parent_path());
        save_trace(out_path.string(), w);
        out << "wrote " << w.jobs.size() << " jobs to " << out_path.string() << '\n';
        return static_cast<int>(ok);
    });
}

inline int cmd_validate_trace(const std::filesystem::path& path, std::ostream& out = std::cout,
                              std::ostream& err = std::cerr) {
    return guarded(err, [&] {
        Workload w = parse_trace(path.string());
        std::size_t large = 0;
        for (const auto& j : w.jobs) large += j.total_gpus > 4 ? 1 : 0;
        out << path.string() << ": " << w.jobs.size() << " jobs, horizon " << format_seconds(w.horizon) << " s";
        if (!w.jobs.empty())
            out << ", " << format_real(100.0 * static_cast<double>(large) / static_cast<double>(w.jobs.size()))
                << "% need more than 4 GPUs";
        out << '\n';
        return static_cast<int>(ok);
    });
}

}  // namespace gpusim::cli
