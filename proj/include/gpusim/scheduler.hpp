#pragma once

// Job-scheduling policies. Every policy is a deterministic function of the
// partition's queue, a cluster snapshot and the current time; the engine
// applies the returned Decision atomically.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <boost/rational.hpp>

#include "gpusim/cluster.hpp"
#include "gpusim/error.hpp"
#include "gpusim/placement.hpp"
#include "gpusim/time.hpp"
#include "gpusim/trace.hpp"

namespace gpusim {

using Seconds = boost::rational<std::int64_t>;

/// Converts exact seconds to simulation ticks, rounding to the nearest microsecond.
inline Time to_time(Seconds s) {
    const std::int64_t num = s.numerator() * Time::ticks_per_second;
    const std::int64_t den = s.denominator();
    std::int64_t q = num / den, r = num % den;
    if (2 * (r < 0 ? -r : r) >= den) q += num < 0 ? -1 : 1;
    return Time::micros(q);
}

inline Seconds to_seconds(Time t) { return Seconds(t.us, Time::ticks_per_second); }

enum class SchedulerKind { Fcfs, FcfsBackfill, Sjf, Las, RoundRobin, Mlfq, LasMlfq };

inline constexpr SchedulerKind all_schedulers[] = {SchedulerKind::Fcfs, SchedulerKind::FcfsBackfill,
                                                   SchedulerKind::Sjf,  SchedulerKind::Las,
                                                   SchedulerKind::RoundRobin, SchedulerKind::Mlfq,
                                                   SchedulerKind::LasMlfq};

inline std::string_view to_string(SchedulerKind k) {
    switch (k) {
        case SchedulerKind::Fcfs: return "fcfs";
        case SchedulerKind::FcfsBackfill: return "fcfs-backfill";
        case SchedulerKind::Sjf: return "sjf";
        case SchedulerKind::Las: return "las";
        case SchedulerKind::RoundRobin: return "rr";
        case SchedulerKind::Mlfq: return "mlfq";
        case SchedulerKind::LasMlfq: return "las-mlfq";
    }
    return "fcfs";
}

inline std::optional<SchedulerKind> scheduler_from_string(std::string_view s) {
    for (auto k : all_schedulers)
        if (to_string(k) == s) return k;
    return std::nullopt;
}

inline bool is_preemptive(SchedulerKind k) {
    return k == SchedulerKind::RoundRobin || k == SchedulerKind::Mlfq || k == SchedulerKind::LasMlfq;
}

enum class QuantumScaling { None, PerGpu };

struct MlfqConfig {
    std::vector<Seconds> quanta{Seconds(3250), Seconds(7200), Seconds(18000)};
    QuantumScaling scaling = QuantumScaling::None;

    std::uint32_t levels() const noexcept { return static_cast<std::uint32_t>(quanta.size()); }
};

inline void validate(const MlfqConfig& cfg) {
    if (cfg.quanta.empty()) throw ConfigError("mlfq.quanta_s must list at least one level");
    for (std::size_t i = 0; i < cfg.quanta.size(); ++i) {
        if (cfg.quanta[i] <= 0) throw ConfigError("mlfq.quanta_s entries must be > 0");
        if (i > 0 && cfg.quanta[i] <= cfg.quanta[i - 1]) throw ConfigError("mlfq.quanta_s must be strictly increasing");
    }
}

struct SchedulerConfig {
    SchedulerKind kind = SchedulerKind::Fcfs;
    MlfqConfig mlfq;
    Time rr_slice = Time::seconds(3600);
};

/// LAS-MLFQ quantum: every GPU of the job consumes the level's quantum, so a
/// job on g GPUs gets base/g seconds.
inline Seconds las_mlfq_quantum(Seconds base_quantum, std::uint32_t total_gpus) {
    if (total_gpus == 0) throw std::invalid_argument("total_gpus must be >= 1");
    return base_quantum / static_cast<std::int64_t>(total_gpus);
}

/// Quantum a job receives at `level` under the given policy.
inline Time level_quantum(const SchedulerConfig& cfg, std::uint32_t level, std::uint32_t total_gpus) {
    if (cfg.kind == SchedulerKind::RoundRobin) return cfg.rr_slice;
    Seconds base = cfg.mlfq.quanta.at(std::min<std::size_t>(level, cfg.mlfq.quanta.size() - 1));
    bool scaled = cfg.kind == SchedulerKind::LasMlfq || cfg.mlfq.scaling == QuantumScaling::PerGpu;
    return to_time(scaled ? las_mlfq_quantum(base, total_gpus) : base);
}

enum class JobStatus { Pending, Running, Preempted, Done, Unsatisfiable };

inline std::string_view to_string(JobStatus s) {
    switch (s) {
        case JobStatus::Pending: return "Pending";
        case JobStatus::Running: return "Running";
        case JobStatus::Preempted: return "Preempted";
        case JobStatus::Done: return "Done";
        case JobStatus::Unsatisfiable: return "Unsatisfiable";
    }
    return "Pending";
}

/// Evolving simulation state of one job.
///
/// Service accounting: attained + remaining == effective_service + overheads_charged
/// once the job has started. Overheads (resume, migration) are added to
/// `remaining` and burned first, before the quantum clock runs again.
struct JobState {
    JobRecord record;
    ResourceRequest request;
    JobStatus status = JobStatus::Pending;

    Time attained;
    Time remaining;
    Time effective_service;
    Time overheads_charged;
    Time overhead_due;        // charged when the job next starts
    Time overhead_remaining;  // not yet burned in the current run

    std::uint32_t queue_level = 0;
    Time quantum_remaining;
    std::optional<Allocation> allocation;

    std::uint32_t resume_count = 0;
    std::uint32_t preempt_count = 0;
    std::uint32_t migrate_count = 0;

    bool started = false;
    Time submit;
    Time start;
    Time finish;
    Time enqueued;     // last time the job entered the wait queue
    Time last_update;  // accounting is current up to here while running
    std::uint64_t epoch = 0;

    JobId id() const noexcept { return record.job_id; }
    bool waiting() const noexcept { return status == JobStatus::Pending || status == JobStatus::Preempted; }
    std::uint32_t total_gpus() const { return request.total_gpus(); }
};

/// Demotes a job whose quantum ran out: one level down (clamped at the bottom),
/// back to the wait queue, with a fresh quantum for the new level and the
/// resume overhead due at its next start. The caller releases the GPUs.
inline JobState mlfq_on_quantum_expiry(JobState job, const SchedulerConfig& cfg, Time now, Time resume_overhead) {
    const std::uint32_t levels = cfg.mlfq.levels();
    job.queue_level = std::min(job.queue_level + 1, levels - 1);
    job.quantum_remaining = level_quantum(cfg, job.queue_level, job.total_gpus());
    job.status = JobStatus::Preempted;
    job.allocation.reset();
    job.overhead_due = resume_overhead;
    job.enqueued = now;
    ++job.preempt_count;
    return job;
}

enum class ExpiryAction { Renew, Preempt };

struct ExpiryOutcome {
    ExpiryAction action = ExpiryAction::Renew;
    JobState job;
};

/// Quantum expiry for the preemptive policies.
///  - MLFQ / LAS-MLFQ above the bottom level: always demote and requeue.
///  - bottom level and round-robin: requeue only when someone is waiting,
///    otherwise the quantum renews in place.
inline ExpiryOutcome on_quantum_expiry(const SchedulerConfig& cfg, JobState job, bool has_waiters, Time now,
                                       Time resume_overhead) {
    if (cfg.kind == SchedulerKind::Mlfq || cfg.kind == SchedulerKind::LasMlfq) {
        if (job.queue_level + 1 < cfg.mlfq.levels() || has_waiters)
            return {ExpiryAction::Preempt, mlfq_on_quantum_expiry(std::move(job), cfg, now, resume_overhead)};
    } else if (cfg.kind == SchedulerKind::RoundRobin && has_waiters) {
        job.quantum_remaining = cfg.rr_slice;
        job.status = JobStatus::Preempted;
        job.allocation.reset();
        job.overhead_due = resume_overhead;
        job.enqueued = now;
        ++job.preempt_count;
        return {ExpiryAction::Preempt, std::move(job)};
    }
    job.quantum_remaining = level_quantum(cfg, job.queue_level, job.total_gpus());
    return {ExpiryAction::Renew, std::move(job)};
}

/// LAS order: least attained service, then earlier submit, then lower id.
inline auto las_priority(const JobState& j) { return std::make_tuple(j.attained, j.submit, j.id()); }

/// Ordering key of waiting jobs; smaller runs first.
inline std::tuple<std::int64_t, std::int64_t, std::int64_t, JobId> priority_key(SchedulerKind kind,
                                                                              const JobState& j) {
    switch (kind) {
        case SchedulerKind::Fcfs:
        case SchedulerKind::FcfsBackfill: return {j.submit.us, 0, 0, j.id()};
        case SchedulerKind::Sjf: return {j.record.service_time.us, j.submit.us, 0, j.id()};
        case SchedulerKind::Las: return {j.attained.us, j.submit.us, 0, j.id()};
        case SchedulerKind::RoundRobin: return {j.enqueued.us, 0, 0, j.id()};
        case SchedulerKind::Mlfq: return {j.queue_level, j.enqueued.us, 0, j.id()};
        case SchedulerKind::LasMlfq: return {j.queue_level, j.attained.us, j.submit.us, j.id()};
    }
    return {0, 0, 0, j.id()};
}

struct Admission {
    JobId job = 0;
    ResourceRequest request;
    Allocation allocation;  // planned on the snapshot; committed as-is
};

struct Decision {
    std::vector<Admission> admit;
    std::vector<JobId> preempt;  // built-in policies preempt only at quantum expiry

    bool empty() const noexcept { return admit.empty() && preempt.empty(); }
};

/// Everything a policy may look at for one partition.
struct QueueView {
    PartitionIndex partition = 0;
    PlacementPolicy placement = PlacementPolicy::BestFit;
    PenaltyModel penalty;
    std::vector<const JobState*> jobs;  // waiting and running jobs of the partition
};

namespace detail {

/// Remembers requests that failed on a cluster that only fills up, so that
/// larger requests can be rejected without a placement attempt.
class FailureCache {
public:
    bool known_infeasible(const ResourceRequest& r, std::uint32_t idle_gpus) const {
        if (r.total_gpus() > idle_gpus) return true;
        if (const auto* p = std::get_if<PerNodeRequest>(&r.mode); p && !free_gpu_) {
            for (const auto& f : per_node_)
                if (p->nodes >= f.nodes && p->gpus_per_node >= f.gpus_per_node) return true;
            return false;
        }
        return min_total_ && r.total_gpus() >= *min_total_;
    }

    void record(const ResourceRequest& r, bool free_gpu_policy) {
        free_gpu_ = free_gpu_policy;
        if (const auto* p = std::get_if<PerNodeRequest>(&r.mode); p && !free_gpu_policy)
            per_node_.push_back(*p);
        else
            min_total_ = std::min(min_total_.value_or(r.total_gpus()), r.total_gpus());
    }

private:
    bool free_gpu_ = false;
    std::vector<PerNodeRequest> per_node_;
    std::optional<std::uint32_t> min_total_;
};

inline std::vector<const JobState*> waiting_in_order(SchedulerKind kind, const QueueView& q) {
    std::vector<const JobState*> w;
    for (const auto* j : q.jobs)
        if (j->waiting()) w.push_back(j);
    std::sort(w.begin(), w.end(),
              [&](const JobState* a, const JobState* b) { return priority_key(kind, *a) < priority_key(kind, *b); });
    return w;
}

/// Greedy list scheduling: every waiting job, in priority order, that can be
/// placed on what is left of the snapshot is admitted.
inline void greedy_admit(const std::vector<const JobState*>& order, const QueueView& q, Cluster& trial,
                         Decision& out) {
    FailureCache cache;
    const bool free_gpu = q.placement == PlacementPolicy::FreeGpu;
    std::uint32_t idle = trial.partition_idle_gpus(q.partition);
    for (const JobState* j : order) {
        std::optional<Allocation> alloc;
        if (!cache.known_infeasible(j->request, idle)) alloc = place(q.placement, trial, j->request);
        if (!alloc) {
            cache.record(j->request, free_gpu);
            continue;
        }
        trial.commit(*alloc);
        idle -= alloc->total_gpus();
        out.admit.push_back({j->id(), j->request, std::move(*alloc)});
    }
}

/// Time left before a running job completes.
inline Time remaining_estimate(const JobState& j) { return j.remaining; }

/// Service time a waiting job is expected to need from its next start.
inline Time start_estimate(const JobState& j, const Allocation& alloc, const PenaltyModel& penalty) {
    if (!j.started) return effective_service_time(alloc, j.record.service_time, penalty);
    return j.remaining + j.overhead_due;
}

}  // namespace detail

/// EASY backfill over a submit-ordered queue. Jobs start in order until the
/// first one that does not fit (the head). The head is given a reservation at
/// the earliest instant running jobs free enough GPUs; a later job may start
/// now only if it ends by that instant or leaves the head placeable at it.
inline Decision fcfs_backfill_order(const QueueView& q, const Cluster& snapshot, Time now) {
    Decision out;
    auto order = detail::waiting_in_order(SchedulerKind::FcfsBackfill, q);
    Cluster trial = snapshot;

    struct Ending {
        Time at;
        JobId job;
    };
    std::vector<Ending> endings;
    for (const auto* j : q.jobs)
        if (j->status == JobStatus::Running) endings.push_back({now + detail::remaining_estimate(*j), j->id()});

    std::size_t i = 0;
    for (; i < order.size(); ++i) {
        auto alloc = place(q.placement, trial, order[i]->request);
        if (!alloc) break;
        trial.commit(*alloc);
        endings.push_back({now + detail::start_estimate(*order[i], *alloc, q.penalty), order[i]->id()});
        out.admit.push_back({order[i]->id(), order[i]->request, std::move(*alloc)});
    }
    if (i == order.size()) return out;

    const JobState& head = *order[i];
    std::sort(endings.begin(), endings.end(),
              [](const Ending& a, const Ending& b) { return std::tie(a.at, a.job) < std::tie(b.at, b.job); });
    Cluster shadow = trial;
    Time reservation = Time::max();
    for (const auto& e : endings) {
        if (shadow.holds(e.job)) shadow.release(e.job);
        if (place(q.placement, shadow, head.request)) {
            reservation = e.at;
            // Everything ending at the same instant is free at the reservation too.
            for (const auto& f : endings)
                if (f.at == e.at && shadow.holds(f.job)) shadow.release(f.job);
            break;
        }
    }
    if (reservation == Time::max()) return out;

    detail::FailureCache cache;
    std::uint32_t idle = trial.partition_idle_gpus(q.partition);
    for (++i; i < order.size(); ++i) {
        const JobState& cand = *order[i];
        if (cache.known_infeasible(cand.request, idle)) continue;
        auto alloc = place(q.placement, trial, cand.request);
        if (!alloc) {
            cache.record(cand.request, q.placement == PlacementPolicy::FreeGpu);
            continue;
        }
        bool admit = now + detail::start_estimate(cand, *alloc, q.penalty) <= reservation;
        if (!admit) {
            Cluster probe = shadow;
            probe.commit(*alloc);
            if (place(q.placement, probe, head.request)) {
                admit = true;
                shadow = std::move(probe);
            }
        }
        if (!admit) continue;
        trial.commit(*alloc);
        idle -= alloc->total_gpus();
        out.admit.push_back({cand.id(), cand.request, std::move(*alloc)});
    }
    return out;
}

/// Decision point for one partition.
inline Decision decide(const SchedulerConfig& cfg, const QueueView& q, const Cluster& snapshot, Time now) {
    if (cfg.kind == SchedulerKind::FcfsBackfill) return fcfs_backfill_order(q, snapshot, now);

    Decision out;
    auto order = detail::waiting_in_order(cfg.kind, q);
    if (order.empty()) return out;
    Cluster trial = snapshot;
    detail::greedy_admit(order, q, trial, out);
    return out;
}

}  // namespace gpusim
