#pragma once

// Resource-request placement (first-fit, best-fit, free-GPU), cross-switch
// penalty and post-completion migration planning.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "gpusim/cluster.hpp"
#include "gpusim/error.hpp"
#include "gpusim/time.hpp"

namespace gpusim {

struct PerNodeRequest {
    std::uint32_t nodes = 1;
    std::uint32_t gpus_per_node = 1;

    bool operator==(const PerNodeRequest&) const = default;
};

struct FreeGpuRequest {
    std::uint32_t total = 1;

    bool operator==(const FreeGpuRequest&) const = default;
};

struct ResourceRequest {
    JobId job = 0;
    PartitionIndex partition = 0;
    std::variant<PerNodeRequest, FreeGpuRequest> mode;

    std::uint32_t total_gpus() const {
        if (const auto* p = std::get_if<PerNodeRequest>(&mode)) return p->nodes * p->gpus_per_node;
        return std::get<FreeGpuRequest>(mode).total;
    }
    bool is_per_node() const noexcept { return std::holds_alternative<PerNodeRequest>(mode); }

    bool operator==(const ResourceRequest&) const = default;
};

enum class PlacementPolicy { FirstFit, BestFit, FreeGpu };

inline std::string_view to_string(PlacementPolicy p) {
    switch (p) {
        case PlacementPolicy::FirstFit: return "first-fit";
        case PlacementPolicy::BestFit: return "best-fit";
        case PlacementPolicy::FreeGpu: return "free-gpu";
    }
    return "first-fit";
}

inline std::optional<PlacementPolicy> placement_from_string(std::string_view s) {
    if (s == "first-fit") return PlacementPolicy::FirstFit;
    if (s == "best-fit") return PlacementPolicy::BestFit;
    if (s == "free-gpu") return PlacementPolicy::FreeGpu;
    return std::nullopt;
}

namespace detail {

inline void check_counts(const ResourceRequest& req) {
    if (const auto* p = std::get_if<PerNodeRequest>(&req.mode)) {
        if (p->nodes == 0 || p->gpus_per_node == 0) throw std::invalid_argument("request counts must be >= 1");
    } else if (std::get<FreeGpuRequest>(req.mode).total == 0) {
        throw std::invalid_argument("request counts must be >= 1");
    }
}

inline const PerNodeRequest& per_node(const ResourceRequest& req) {
    check_counts(req);
    const auto* p = std::get_if<PerNodeRequest>(&req.mode);
    if (!p) throw std::invalid_argument("first-fit / best-fit need a (nodes, GPUs per node) request");
    return *p;
}

inline Allocation take_lowest(const Cluster& c, JobId job, std::span<const NodeIndex> chosen, auto&& count_for) {
    std::vector<GpuSlot> slots;
    for (NodeIndex n : chosen)
        for (std::uint32_t g : c.idle_indexes(n, count_for(n))) slots.push_back({n, g});
    return c.make_allocation(job, std::move(slots));
}

inline std::optional<Allocation> first_fit_on(const Cluster& c, JobId job, std::span<const NodeIndex> nodes,
                                              const PerNodeRequest& r) {
    std::vector<NodeIndex> chosen;
    for (NodeIndex n : nodes) {
        if (c.node(n).idle() >= r.gpus_per_node) chosen.push_back(n);
        if (chosen.size() == r.nodes) break;
    }
    if (chosen.size() < r.nodes) return std::nullopt;
    return take_lowest(c, job, chosen, [&](NodeIndex) { return r.gpus_per_node; });
}

inline std::optional<Allocation> best_fit_on(const Cluster& c, JobId job, std::span<const NodeIndex> nodes,
                                             const PerNodeRequest& r) {
    std::vector<NodeIndex> qualifying;
    for (NodeIndex n : nodes)
        if (c.node(n).idle() >= r.gpus_per_node) qualifying.push_back(n);
    if (qualifying.size() < r.nodes) return std::nullopt;
    std::stable_sort(qualifying.begin(), qualifying.end(), [&](NodeIndex a, NodeIndex b) {
        return c.node(a).idle() < c.node(b).idle();
    });
    qualifying.resize(r.nodes);
    std::sort(qualifying.begin(), qualifying.end());
    return take_lowest(c, job, qualifying, [&](NodeIndex) { return r.gpus_per_node; });
}

inline std::optional<Allocation> free_gpu_on(const Cluster& c, JobId job, std::span<const NodeIndex> nodes,
                                             std::uint32_t total) {
    std::vector<NodeIndex> order;
    std::uint64_t idle = 0;
    for (NodeIndex n : nodes) {
        if (c.node(n).idle() == 0) continue;
        order.push_back(n);
        idle += c.node(n).idle();
    }
    if (idle < total) return std::nullopt;
    std::stable_sort(order.begin(), order.end(), [&](NodeIndex a, NodeIndex b) {
        return c.node(a).idle() > c.node(b).idle();
    });
    std::map<NodeIndex, std::uint32_t> take;
    std::uint32_t need = total;
    for (NodeIndex n : order) {
        if (need == 0) break;
        std::uint32_t k = std::min(need, c.node(n).idle());
        take[n] = k;
        need -= k;
    }
    std::vector<NodeIndex> chosen;
    for (const auto& [n, k] : take) chosen.push_back(n);
    return take_lowest(c, job, chosen, [&](NodeIndex n) { return take.at(n); });
}

}  // namespace detail

/// First `nodes` partition nodes (ascending index) with enough idle GPUs.
inline std::optional<Allocation> place_first_fit(const Cluster& c, const ResourceRequest& req) {
    const auto& r = detail::per_node(req);
    return detail::first_fit_on(c, req.job, c.partition(req.partition).nodes, r);
}

/// Smallest sufficient nodes: qualifying nodes ordered by (idle GPUs, index).
inline std::optional<Allocation> place_best_fit(const Cluster& c, const ResourceRequest& req) {
    const auto& r = detail::per_node(req);
    return detail::best_fit_on(c, req.job, c.partition(req.partition).nodes, r);
}

/// Any idle GPUs of the partition, fewest nodes first: nodes are taken by
/// descending idle count (ties by index). Taking the largest capacities first
/// is optimal for minimizing the number of nodes covering `total`.
/// A per-node request is treated as its GPU total.
inline std::optional<Allocation> place_free_gpu(const Cluster& c, const ResourceRequest& req) {
    detail::check_counts(req);
    return detail::free_gpu_on(c, req.job, c.partition(req.partition).nodes, req.total_gpus());
}

/// Dispatches on the policy. Requests that only carry a GPU total are always
/// placed free-GPU style.
inline std::optional<Allocation> place(PlacementPolicy policy, const Cluster& c, const ResourceRequest& req) {
    if (policy == PlacementPolicy::FreeGpu || !req.is_per_node()) return place_free_gpu(c, req);
    if (policy == PlacementPolicy::FirstFit) return place_first_fit(c, req);
    return place_best_fit(c, req);
}

struct PenaltyModel {
    double cross_switch_ratio = 1.0;
};

inline void validate(const PenaltyModel& p) {
    if (!(p.cross_switch_ratio >= 1.0)) throw ConfigError("penalty.cross_switch_ratio must be >= 1");
}

/// Service time once communication across switches is accounted for.
inline Time effective_service_time(const Allocation& alloc, Time base_service, const PenaltyModel& penalty) {
    if (alloc.switch_span <= 1 || penalty.cross_switch_ratio == 1.0) return base_service;
    return Time::micros(
        static_cast<std::int64_t>(std::llround(static_cast<double>(base_service.us) * penalty.cross_switch_ratio)));
}

struct MigrationCostModel {
    Time fixed_overhead = Time::seconds(8);
    double model_size_bytes = 0;
    double pcie_bw_bytes_per_s = 16e9;
    std::map<JobId, double> model_size_overrides;
};

inline void validate(const MigrationCostModel& m) {
    if (!(m.pcie_bw_bytes_per_s > 0)) throw CostModelError("pcie bandwidth must be > 0");
    if (m.fixed_overhead < Time::zero() || !(m.model_size_bytes >= 0))
        throw CostModelError("migration overhead terms must be >= 0");
}

/// Fixed stop/resume cost plus the time to copy the model over PCI-e.
inline Time migration_overhead(JobId job, const MigrationCostModel& cost) {
    validate(cost);
    auto it = cost.model_size_overrides.find(job);
    double bytes = it != cost.model_size_overrides.end() ? it->second : cost.model_size_bytes;
    if (!(bytes >= 0)) throw CostModelError("model size must be >= 0");
    return cost.fixed_overhead + Time::from_seconds(bytes / cost.pcie_bw_bytes_per_s);
}

struct RunningJob {
    ResourceRequest request;
    PlacementPolicy placement = PlacementPolicy::BestFit;
};

struct MigrationMove {
    JobId job = 0;
    Allocation from;
    Allocation to;
    Time overhead;
};

struct MigrationPlan {
    std::vector<MigrationMove> moves;
    Time overhead_per_job;
    std::uint32_t used_nodes_before = 0;
    std::uint32_t used_nodes_after = 0;
    std::uint32_t freed_nodes = 0;
};

/// Consolidation pass run after a completion. Jobs are visited smallest first
/// (ties by id); each is tentatively re-placed best-fit onto nodes that host
/// other jobs of its partition, and the move is kept only if it lowers the
/// number of used nodes. Returns nullopt when nothing moved.
inline std::optional<MigrationPlan> plan_migration(const Cluster& cluster, std::span<const RunningJob> running,
                                                   const MigrationCostModel& cost) {
    validate(cost);
    std::vector<const RunningJob*> order;
    for (const auto& r : running)
        if (cluster.holds(r.request.job)) order.push_back(&r);
    std::stable_sort(order.begin(), order.end(), [&](const RunningJob* a, const RunningJob* b) {
        auto ga = cluster.slots_of(a->request.job).size(), gb = cluster.slots_of(b->request.job).size();
        return ga != gb ? ga < gb : a->request.job < b->request.job;
    });

    Cluster work = cluster;
    MigrationPlan plan;
    plan.used_nodes_before = cluster.used_nodes();
    plan.overhead_per_job = migration_overhead(0, MigrationCostModel{cost.fixed_overhead, cost.model_size_bytes,
                                                                     cost.pcie_bw_bytes_per_s, {}});
    for (const RunningJob* r : order) {
        const JobId job = r->request.job;
        const std::uint32_t before = work.used_nodes();
        Allocation from = work.make_allocation(job, work.slots_of(job));
        work.release(job);

        std::vector<NodeIndex> hosts;
        for (NodeIndex n : work.partition(r->request.partition).nodes)
            if (work.node(n).in_use()) hosts.push_back(n);

        std::optional<Allocation> to;
        if (r->placement == PlacementPolicy::FreeGpu || !r->request.is_per_node())
            to = detail::free_gpu_on(work, job, hosts, r->request.total_gpus());
        else
            to = detail::best_fit_on(work, job, hosts, std::get<PerNodeRequest>(r->request.mode));

        if (to) {
            work.commit(*to);
            if (work.used_nodes() < before) {
                plan.moves.push_back({job, std::move(from), *to, migration_overhead(job, cost)});
                continue;
            }
            work.release(job);
        }
        work.commit(from);
    }
    if (plan.moves.empty()) return std::nullopt;
    plan.used_nodes_after = work.used_nodes();
    plan.freed_nodes = plan.used_nodes_before - plan.used_nodes_after;
    return plan;
}

}  // namespace gpusim
