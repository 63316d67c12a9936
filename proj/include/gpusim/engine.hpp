#pragma once

// Deterministic discrete-event loop driving placement and scheduling over a
// replayed workload.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <queue>
#include <string>
#include <unordered_map>
#include <vector>

#include "gpusim/cluster.hpp"
#include "gpusim/error.hpp"
#include "gpusim/placement.hpp"
#include "gpusim/scheduler.hpp"
#include "gpusim/time.hpp"
#include "gpusim/trace.hpp"

namespace gpusim {

struct EngineConfig {
    SchedulerConfig scheduler;
    PlacementPolicy placement = PlacementPolicy::BestFit;
    PenaltyModel penalty;
    bool migration_enabled = false;
    MigrationCostModel migration;
    Time preemption_overhead = Time::seconds(8);
    Time sample_interval = Time::seconds(60);  // zero disables fixed-cadence samples
    bool debug_invariants = false;
};

enum class EventKind { Completion = 0, QuantumExpiry = 1, Submit = 2, Reschedule = 3 };

/// Ordered by (time, kind, seq).
struct SimEvent {
    Time time;
    EventKind kind = EventKind::Submit;
    std::uint64_t seq = 0;
    std::size_t job = 0;  // index into the workload (unused for Reschedule)
    PartitionIndex partition = 0;
    std::uint64_t epoch = 0;

    auto order() const { return std::make_tuple(time, static_cast<int>(kind), seq); }
    friend bool operator>(const SimEvent& a, const SimEvent& b) { return a.order() > b.order(); }
};

struct RunInterval {
    Time start;
    Time end;
    Allocation allocation;
};

struct JobLog {
    JobId job_id = 0;
    std::string job_name;
    std::string partition;
    PartitionIndex partition_index = 0;
    std::uint32_t total_gpus = 0;
    FinalState final_state = FinalState::Completed;
    JobStatus status = JobStatus::Pending;
    Time submit;
    std::optional<Time> start;
    std::optional<Time> finish;
    Time service_time;
    Time effective_service;
    Time overheads;
    std::uint32_t preemptions = 0;
    std::uint32_t resumes = 0;
    std::uint32_t migrations = 0;
    std::uint32_t final_queue_level = 0;
    std::vector<RunInterval> intervals;

    Time running_time() const {
        Time t;
        for (const auto& i : intervals) t += i.end - i.start;
        return t;
    }
};

struct MigrationEvent {
    Time time;
    PartitionIndex partition = 0;
    std::vector<JobId> jobs;
    std::uint32_t used_nodes_before = 0;
    std::uint32_t used_nodes_after = 0;
    std::uint32_t freed_nodes = 0;
};

struct MetricsSample {
    Time t;
    std::uint32_t pending = 0;
    std::uint32_t running = 0;
    std::uint32_t used_gpus = 0;
    std::uint32_t used_nodes = 0;
    std::optional<double> frag_ratio;

    bool operator==(const MetricsSample&) const = default;
};

struct RunLog {
    std::string scheduler;
    std::string placement;
    bool migration = false;
    std::string trace_hash;
    std::vector<std::string> partitions;
    std::vector<std::string> nodes;
    std::uint32_t max_node_gpus = 0;
    std::vector<JobLog> jobs;  // workload order
    std::vector<MetricsSample> samples;
    std::vector<MigrationEvent> migrations;
    Time end_time;
    std::uint64_t events_processed = 0;

    std::size_t interval_count() const {
        std::size_t n = 0;
        for (const auto& j : jobs) n += j.intervals.size();
        return n;
    }
};

/// Charges `interval` of uninterrupted running time to a job. Pending
/// overhead is burned first; only the rest counts against the quantum.
inline void advance_running_job(JobState& job, Time interval, bool track_quantum = true) {
    if (interval < Time::zero()) throw AccountingError("negative interval for job " + std::to_string(job.id()));
    if (interval > job.remaining)
        throw AccountingError("job " + std::to_string(job.id()) + " would run past its remaining service");
    Time overhead = min(interval, job.overhead_remaining);
    job.overhead_remaining -= overhead;
    if (track_quantum) job.quantum_remaining -= interval - overhead;
    job.attained += interval;
    job.remaining -= interval;
}

/// Resource request implied by a trace record.
inline ResourceRequest request_for(const JobRecord& r, PartitionIndex p) {
    ResourceRequest req;
    req.job = r.job_id;
    req.partition = p;
    if (r.has_tuple())
        req.mode = PerNodeRequest{*r.req_nodes, *r.req_gpus_per_node};
    else
        req.mode = FreeGpuRequest{r.total_gpus};
    return req;
}

class Simulation {
public:
    Simulation(const Workload& workload, Cluster cluster, EngineConfig config)
        : workload_(workload), cluster_(std::move(cluster)), empty_(cluster_), config_(std::move(config)) {
        validate(config_.penalty);
        if (config_.migration_enabled) validate(config_.migration);
        if (is_preemptive(config_.scheduler.kind)) validate(config_.scheduler.mlfq);
        if (cluster_.used_gpus() != 0) throw ConfigError("simulation must start from an idle cluster");

        const auto& parts = cluster_.partitions();
        policies_.resize(parts.size());
        for (const auto& p : parts) {
            auto& pol = policies_[p.index];
            pol.scheduler = config_.scheduler;
            pol.placement = config_.placement;
            if (!p.scheduler.empty()) {
                auto k = scheduler_from_string(p.scheduler);
                if (!k) throw ConfigError("partition " + p.id + ": unknown scheduler '" + p.scheduler + "'");
                pol.scheduler.kind = *k;
            }
            if (!p.placement.empty()) {
                auto k = placement_from_string(p.placement);
                if (!k) throw ConfigError("partition " + p.id + ": unknown placement '" + p.placement + "'");
                pol.placement = *k;
            }
            if (is_preemptive(pol.scheduler.kind)) validate(pol.scheduler.mlfq);
            if (pol.scheduler.kind == SchedulerKind::RoundRobin && pol.scheduler.rr_slice <= Time::zero())
                throw ConfigError("rr.slice_s must be > 0");
        }
        active_.resize(parts.size());
        reschedule_pending_.assign(parts.size(), false);

        jobs_.reserve(workload_.jobs.size());
        logs_.reserve(workload_.jobs.size());
        for (const auto& r : workload_.jobs) {
            auto p = cluster_.find_partition(r.partition);
            if (!p) throw ConfigError("job " + std::to_string(r.job_id) + " targets unknown partition '" + r.partition + "'");
            JobState s;
            s.record = r;
            s.request = request_for(r, *p);
            jobs_.push_back(std::move(s));
            JobLog log;
            log.job_id = r.job_id;
            log.job_name = r.job_name;
            log.partition = r.partition;
            log.partition_index = *p;
            log.total_gpus = r.total_gpus;
            log.final_state = r.final_state;
            log.submit = r.submit_time;
            log.service_time = r.service_time;
            logs_.push_back(std::move(log));
        }
    }

    RunLog run() {
        for (std::size_t i = 0; i < jobs_.size(); ++i)
            push({jobs_[i].record.submit_time, EventKind::Submit, 0, i, jobs_[i].request.partition, 0});

        Time next_cadence = config_.sample_interval;
        while (!events_.empty()) {
            SimEvent ev = events_.top();
            if (ev.time < now_) throw InvariantViolation("event scheduled in the past");
            if (config_.sample_interval > Time::zero()) {
                while (next_cadence < ev.time) {
                    if (next_cadence > now_) record_sample(next_cadence);
                    next_cadence += config_.sample_interval;
                }
            }
            events_.pop();
            now_ = ev.time;
            handle(ev);
            ++events_processed_;
            if (config_.debug_invariants) check_invariants();
            record_sample(now_);
        }
        return finish_log();
    }

    const Cluster& cluster() const noexcept { return cluster_; }

private:
    struct PartitionPolicy {
        SchedulerConfig scheduler;
        PlacementPolicy placement = PlacementPolicy::BestFit;
    };

    void push(SimEvent ev) {
        ev.seq = seq_++;
        events_.push(ev);
    }

    void handle(const SimEvent& ev) {
        switch (ev.kind) {
            case EventKind::Submit: on_submit(ev.job); break;
            case EventKind::Completion: on_completion(ev.job, ev.epoch); break;
            case EventKind::QuantumExpiry: on_quantum_expiry(ev.job, ev.epoch); break;
            case EventKind::Reschedule: on_reschedule(ev.partition); break;
        }
    }

    void request_reschedule(PartitionIndex p) {
        if (reschedule_pending_[p]) return;
        reschedule_pending_[p] = true;
        push({now_, EventKind::Reschedule, 0, 0, p, 0});
    }

    const PartitionPolicy& policy_of(const JobState& j) const { return policies_[j.request.partition]; }

    void on_submit(std::size_t i) {
        JobState& j = jobs_[i];
        const auto& pol = policy_of(j);
        j.submit = now_;
        j.enqueued = now_;
        j.queue_level = 0;
        if (is_preemptive(pol.scheduler.kind))
            j.quantum_remaining = level_quantum(pol.scheduler, 0, j.total_gpus());
        if (!place(pol.placement, empty_, j.request)) {
            j.status = JobStatus::Unsatisfiable;
            return;
        }
        j.status = JobStatus::Pending;
        active_[j.request.partition].push_back(i);
        request_reschedule(j.request.partition);
    }

    void sync(JobState& j) {
        if (j.status != JobStatus::Running) return;
        advance_running_job(j, now_ - j.last_update, is_preemptive(policy_of(j).scheduler.kind));
        j.last_update = now_;
    }

    void schedule_timers(std::size_t i) {
        JobState& j = jobs_[i];
        push({now_ + j.remaining, EventKind::Completion, 0, i, j.request.partition, j.epoch});
        if (is_preemptive(policy_of(j).scheduler.kind))
            push({now_ + j.overhead_remaining + j.quantum_remaining, EventKind::QuantumExpiry, 0, i,
                  j.request.partition, j.epoch});
    }

    void open_interval(std::size_t i) {
        logs_[i].intervals.push_back({now_, now_, *jobs_[i].allocation});
    }

    void close_interval(std::size_t i) {
        auto& iv = logs_[i].intervals;
        if (iv.empty()) throw InvariantViolation("closing an interval that was never opened");
        iv.back().end = now_;
        if (iv.back().end == iv.back().start) iv.pop_back();  // zero-length runs carry no work
    }

    void start_job(std::size_t i, const Allocation& alloc) {
        JobState& j = jobs_[i];
        if (!j.waiting()) throw InvariantViolation("admitting job " + std::to_string(j.id()) + " that is not waiting");
        cluster_.commit(alloc);
        j.allocation = alloc;
        j.status = JobStatus::Running;
        if (!j.started) {
            j.started = true;
            j.start = now_;
            j.effective_service = effective_service_time(alloc, j.record.service_time, config_.penalty);
            j.remaining = j.effective_service;
        } else {
            ++j.resume_count;
            j.remaining += j.overhead_due;
            j.overhead_remaining += j.overhead_due;
            j.overheads_charged += j.overhead_due;
            j.overhead_due = Time::zero();
        }
        j.last_update = now_;
        ++j.epoch;
        open_interval(i);
        schedule_timers(i);
    }

    void stop_job(std::size_t i) {
        JobState& j = jobs_[i];
        close_interval(i);
        cluster_.release(j.id());
        j.allocation.reset();
        ++j.epoch;
    }

    void on_reschedule(PartitionIndex p) {
        reschedule_pending_[p] = false;
        const auto& pol = policies_[p];
        QueueView view;
        view.partition = p;
        view.placement = pol.placement;
        view.penalty = config_.penalty;
        for (std::size_t i : active_[p]) {
            sync(jobs_[i]);
            view.jobs.push_back(&jobs_[i]);
        }
        Decision d = decide(pol.scheduler, view, cluster_, now_);
        if (!is_preemptive(pol.scheduler.kind) && !d.preempt.empty())
            throw InvariantViolation("non-preemptive policy emitted a preemption");
        for (JobId id : d.preempt) {
            std::size_t i = index_of(id);
            JobState& j = jobs_[i];
            if (j.status != JobStatus::Running) throw InvariantViolation("preempting a job that is not running");
            stop_job(i);
            j.status = JobStatus::Preempted;
            j.overhead_due = config_.preemption_overhead;
            j.enqueued = now_;
            ++j.preempt_count;
        }
        for (const auto& a : d.admit) start_job(index_of(a.job), a.allocation);
    }

    void on_completion(std::size_t i, std::uint64_t epoch) {
        JobState& j = jobs_[i];
        if (j.status != JobStatus::Running || j.epoch != epoch) return;
        sync(j);
        if (j.remaining != Time::zero())
            throw AccountingError("job " + std::to_string(j.id()) + " completed with service left");
        stop_job(i);
        j.status = JobStatus::Done;
        j.finish = now_;
        auto& act = active_[j.request.partition];
        act.erase(std::find(act.begin(), act.end(), i));
        if (config_.migration_enabled) migrate(j.request.partition);
        request_reschedule(j.request.partition);
    }

    void on_quantum_expiry(std::size_t i, std::uint64_t epoch) {
        JobState& j = jobs_[i];
        if (j.status != JobStatus::Running || j.epoch != epoch) return;
        sync(j);
        if (j.quantum_remaining != Time::zero())
            throw AccountingError("quantum expiry for job " + std::to_string(j.id()) + " with quantum left");
        const PartitionIndex p = j.request.partition;
        bool has_waiters = false;
        for (std::size_t k : active_[p]) has_waiters = has_waiters || jobs_[k].waiting();
        Allocation held = *j.allocation;
        auto outcome = gpusim::on_quantum_expiry(policy_of(j).scheduler, j, has_waiters, now_,
                                                 config_.preemption_overhead);
        if (outcome.action == ExpiryAction::Preempt) {
            stop_job(i);
            std::uint64_t epoch_after = j.epoch;
            j = std::move(outcome.job);
            j.epoch = epoch_after;
            request_reschedule(p);
        } else {
            j.quantum_remaining = outcome.job.quantum_remaining;
            push({now_ + j.quantum_remaining, EventKind::QuantumExpiry, 0, i, p, j.epoch});
        }
    }

    void migrate(PartitionIndex p) {
        std::vector<RunningJob> running;
        for (std::size_t k : active_[p]) {
            if (jobs_[k].status != JobStatus::Running) continue;
            sync(jobs_[k]);
            running.push_back({jobs_[k].request, policies_[p].placement});
        }
        auto plan = plan_migration(cluster_, running, config_.migration);
        if (!plan) return;
        if (plan->used_nodes_after >= plan->used_nodes_before)
            throw InvariantViolation("migration plan does not reduce used nodes");
        for (const auto& m : plan->moves) {
            std::size_t i = index_of(m.job);
            close_interval(i);
            cluster_.release(m.job);
        }
        MigrationEvent ev{now_, p, {}, plan->used_nodes_before, plan->used_nodes_after, plan->freed_nodes};
        for (const auto& m : plan->moves) {
            std::size_t i = index_of(m.job);
            JobState& j = jobs_[i];
            cluster_.commit(m.to);
            j.allocation = m.to;
            j.remaining += m.overhead;
            j.overhead_remaining += m.overhead;
            j.overheads_charged += m.overhead;
            ++j.migrate_count;
            ++j.epoch;
            open_interval(i);
            schedule_timers(i);
            ev.jobs.push_back(m.job);
        }
        if (cluster_.used_nodes() != plan->used_nodes_after)
            throw InvariantViolation("applied migration does not match its plan");
        migrations_.push_back(std::move(ev));
    }

    std::size_t index_of(JobId id) {
        if (index_.empty())
            for (std::size_t i = 0; i < jobs_.size(); ++i) index_.emplace(jobs_[i].id(), i);
        auto it = index_.find(id);
        if (it == index_.end()) throw UnknownJob("job " + std::to_string(id));
        return it->second;
    }

    void record_sample(Time t) {
        MetricsSample s;
        s.t = t;
        for (const auto& part : active_)
            for (std::size_t i : part) {
                s.pending += jobs_[i].waiting() ? 1 : 0;
                s.running += jobs_[i].status == JobStatus::Running ? 1 : 0;
            }
        s.used_gpus = cluster_.used_gpus();
        s.used_nodes = cluster_.used_nodes();
        s.frag_ratio = cluster_.fragmentation_ratio();
        if (!samples_.empty() && samples_.back().t == t)
            samples_.back() = s;
        else
            samples_.push_back(s);
    }

    void check_invariants() {
        cluster_.check_conservation();
        std::size_t running = 0;
        for (const auto& j : jobs_) {
            bool is_running = j.status == JobStatus::Running;
            if (is_running != j.allocation.has_value())
                throw InvariantViolation("job " + std::to_string(j.id()) + ": running state and allocation disagree");
            if (is_running) {
                ++running;
                if (cluster_.slots_of(j.id()) != j.allocation->slots)
                    throw InvariantViolation("job " + std::to_string(j.id()) + ": allocation differs from cluster");
            }
            if (j.started && j.attained + j.remaining != j.effective_service + j.overheads_charged)
                throw AccountingError("job " + std::to_string(j.id()) + ": attained + remaining drifted");
            const auto& sched = policy_of(j).scheduler;
            if (is_preemptive(sched.kind) && sched.kind != SchedulerKind::RoundRobin &&
                j.queue_level >= sched.mlfq.levels())
                throw InvariantViolation("job " + std::to_string(j.id()) + ": queue level out of range");
        }
        if (running != cluster_.holdings().size())
            throw InvariantViolation("cluster holds allocations of jobs that are not running");
    }

    RunLog finish_log() {
        RunLog log;
        log.scheduler = std::string(to_string(config_.scheduler.kind));
        log.placement = std::string(to_string(config_.placement));
        log.migration = config_.migration_enabled;
        log.trace_hash = workload_hash(workload_);
        for (const auto& p : cluster_.partitions()) log.partitions.push_back(p.id);
        for (const auto& n : cluster_.nodes()) {
            log.nodes.push_back(n.id);
            log.max_node_gpus = std::max(log.max_node_gpus, n.gpu_count);
        }
        for (std::size_t i = 0; i < jobs_.size(); ++i) {
            const JobState& j = jobs_[i];
            JobLog& l = logs_[i];
            l.status = j.status;
            if (j.started) l.start = j.start;
            if (j.status == JobStatus::Done) l.finish = j.finish;
            l.effective_service = j.effective_service;
            l.overheads = j.overheads_charged;
            l.preemptions = j.preempt_count;
            l.resumes = j.resume_count;
            l.migrations = j.migrate_count;
            l.final_queue_level = j.queue_level;
        }
        log.jobs = std::move(logs_);
        log.samples = std::move(samples_);
        log.migrations = std::move(migrations_);
        log.end_time = now_;
        log.events_processed = events_processed_;
        return log;
    }

    const Workload& workload_;
    Cluster cluster_;
    Cluster empty_;
    EngineConfig config_;
    std::vector<PartitionPolicy> policies_;
    std::vector<JobState> jobs_;
    std::vector<JobLog> logs_;
    std::vector<std::vector<std::size_t>> active_;
    std::vector<bool> reschedule_pending_;
    std::unordered_map<JobId, std::size_t> index_;
    std::priority_queue<SimEvent, std::vector<SimEvent>, std::greater<>> events_;
    std::vector<MetricsSample> samples_;
    std::vector<MigrationEvent> migrations_;
    Time now_;
    std::uint64_t seq_ = 0;
    std::uint64_t events_processed_ = 0;
};

/// Runs a workload to quiescence on an idle cluster.
inline RunLog run(const Workload& workload, const Cluster& cluster, const EngineConfig& config) {
    return Simulation(workload, cluster, config).run();
}

}  // namespace gpusim
