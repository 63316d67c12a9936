#pragma once

// Randomized scenarios and whole-run ledger checks shared by the engine tests
// and the acceptance suite.

#include <random>
#include <string>
#include <vector>

#include "gpusim/engine.hpp"

namespace gpusim::fixture {

struct Scenario {
    TopologyConfig topology;
    Workload workload;
};

/// Up to `max_nodes` nodes (4 or 8 GPUs) split into one or two partitions and
/// up to `max_jobs` jobs with clustered submit times. A few requests can
/// never be satisfied.
inline Scenario random_scenario(std::mt19937_64& rng, std::uint32_t max_jobs = 50, std::uint32_t max_nodes = 6) {
    auto pick = [&](std::uint32_t lo, std::uint32_t hi) {
        return std::uniform_int_distribution<std::uint32_t>(lo, hi)(rng);
    };
    std::uint32_t nodes = pick(1, max_nodes);
    std::vector<std::uint32_t> gpus(nodes);
    for (auto& g : gpus) g = pick(0, 3) == 0 ? 4 : 8;
    std::vector<std::uint32_t> parts;
    if (nodes >= 2 && pick(0, 1)) {
        std::uint32_t first = pick(1, nodes - 1);
        parts = {first, nodes - first};
    } else {
        parts = {nodes};
    }
    Scenario s;
    s.topology = make_topology(gpus, pick(1, 3), parts);

    std::uint32_t count = pick(0, max_jobs);
    std::vector<JobRecord> jobs;
    for (std::uint32_t i = 0; i < count; ++i) {
        JobRecord r;
        r.job_id = static_cast<JobId>(i + 1);
        r.job_name = "j" + std::to_string(i + 1);
        std::uint32_t p = pick(0, static_cast<std::uint32_t>(parts.size()) - 1);
        r.partition = "p" + std::to_string(p);
        if (pick(0, 4) == 0) {
            r.total_gpus = pick(1, 20);
        } else {
            r.req_nodes = pick(1, std::min<std::uint32_t>(parts[p] + (pick(0, 9) == 0 ? 1 : 0), 3));
            r.req_gpus_per_node = pick(1, 8);
            r.total_gpus = *r.req_nodes * *r.req_gpus_per_node;
        }
        r.submit_time = Time::seconds(pick(0, 20) * 25);
        r.service_time = Time::seconds(pick(1, 400));
        jobs.push_back(std::move(r));
    }
    s.workload = make_workload(std::move(jobs));
    return s;
}

/// Checks a finished run against its own records without re-running any
/// policy. Returns human-readable violations (empty when consistent).
inline std::vector<std::string> ledger_violations(const RunLog& log, const Cluster& cluster) {
    std::vector<std::string> out;
    auto fail = [&](const JobLog& j, const std::string& what) {
        out.push_back("job " + std::to_string(j.job_id) + ": " + what);
    };
    std::int64_t job_gpu_us = 0;
    for (const auto& j : log.jobs) {
        if (j.status == JobStatus::Unsatisfiable) {
            if (!j.intervals.empty() || j.start) fail(j, "unsatisfiable job ran");
            continue;
        }
        if (j.status != JobStatus::Done) fail(j, "did not finish");
        if (!j.start || !j.finish) continue;
        if (*j.start < j.submit) fail(j, "started before submit");
        if (j.running_time() != j.effective_service + j.overheads) fail(j, "run time != service + overheads");
        if (j.overheads.us != 0 && j.resumes + j.migrations == 0) fail(j, "overhead without resume or migration");
        Time prev = j.submit;
        for (const auto& iv : j.intervals) {
            if (iv.start < prev || iv.end <= iv.start) fail(j, "intervals overlap or are empty");
            if (iv.allocation.total_gpus() != j.total_gpus) fail(j, "allocation size differs from request");
            prev = iv.end;
            job_gpu_us += (iv.end - iv.start).us * static_cast<std::int64_t>(iv.allocation.total_gpus());
        }
        if (j.intervals.empty() || j.intervals.front().start != *j.start || j.intervals.back().end != *j.finish)
            fail(j, "intervals do not span start..finish");
    }

    // The sampled used-GPU curve is piecewise constant between samples, so its
    // integral must equal the GPU time recorded per job.
    std::int64_t sampled_gpu_us = 0;
    for (std::size_t k = 0; k + 1 < log.samples.size(); ++k) {
        const auto& s = log.samples[k];
        if (s.used_gpus > cluster.total_gpus()) out.push_back("sample exceeds cluster capacity");
        sampled_gpu_us += (log.samples[k + 1].t - s.t).us * static_cast<std::int64_t>(s.used_gpus);
    }
    if (!log.samples.empty() && log.samples.back().used_gpus != 0) out.push_back("GPUs still held at the end");
    if (sampled_gpu_us != job_gpu_us) out.push_back("sampled GPU time differs from per-job GPU time");

    // No two intervals may hold the same GPU at the same time.
    struct Edge {
        Time t;
        int delta;
        GpuSlot slot;
    };
    std::vector<Edge> edges;
    for (const auto& j : log.jobs)
        for (const auto& iv : j.intervals)
            for (const auto& s : iv.allocation.slots) {
                edges.push_back({iv.start, +1, s});
                edges.push_back({iv.end, -1, s});
            }
    std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
        return std::tie(a.t, a.delta, a.slot.node, a.slot.gpu) < std::tie(b.t, b.delta, b.slot.node, b.slot.gpu);
    });
    std::vector<std::vector<int>> held(cluster.nodes().size());
    for (const auto& n : cluster.nodes()) held[n.index].assign(n.gpu_count, 0);
    for (const auto& e : edges) {
        int& h = held[e.slot.node][e.slot.gpu];
        h += e.delta;
        if (h > 1) {
            out.push_back("GPU " + std::to_string(e.slot.node) + ":" + std::to_string(e.slot.gpu) + " double-booked");
            break;
        }
    }
    return out;
}

}  // namespace gpusim::fixture
