#pragma once

// Physical topology, logical partitions and per-GPU occupancy of a simulated
// cluster.

#include <algorithm>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "gpusim/error.hpp"
#include "gpusim/time.hpp"

namespace gpusim {

using NodeIndex = std::uint32_t;
using SwitchIndex = std::uint32_t;
using PartitionIndex = std::uint32_t;
using JobId = std::int64_t;

/// One GPU card, addressed by node and ordinal within the node.
struct GpuSlot {
    NodeIndex node = 0;
    std::uint32_t gpu = 0;

    auto operator<=>(const GpuSlot&) const = default;
};

struct Node {
    NodeIndex index = 0;
    std::string id;
    std::uint32_t gpu_count = 8;
    SwitchIndex switch_index = 0;
    PartitionIndex partition_index = 0;
    std::vector<std::optional<JobId>> occupancy;
    std::uint32_t used = 0;

    std::uint32_t idle() const noexcept { return gpu_count - used; }
    bool in_use() const noexcept { return used > 0; }

    bool operator==(const Node&) const = default;
};

struct Switch {
    SwitchIndex index = 0;
    std::string id;
    std::vector<NodeIndex> nodes;

    bool operator==(const Switch&) const = default;
};

struct Partition {
    PartitionIndex index = 0;
    std::string id;
    std::vector<NodeIndex> nodes;  // ascending
    // Optional per-partition policy overrides; empty means "use the run default".
    std::string scheduler;
    std::string placement;

    bool operator==(const Partition&) const = default;
};

/// GPUs held by one running job. Slots are sorted and unique.
struct Allocation {
    JobId job = 0;
    std::vector<GpuSlot> slots;
    std::uint32_t node_span = 0;
    std::uint32_t switch_span = 0;

    std::uint32_t total_gpus() const noexcept { return static_cast<std::uint32_t>(slots.size()); }

    std::vector<NodeIndex> nodes() const {
        std::vector<NodeIndex> out;
        for (const auto& s : slots)
            if (out.empty() || out.back() != s.node) out.push_back(s.node);
        return out;
    }

    bool operator==(const Allocation&) const = default;
};

/// Declarative topology as read from the topology JSON file.
struct TopologyConfig {
    struct NodeSpec {
        std::string id;
        std::uint32_t gpus = 8;
    };
    struct GroupSpec {
        std::string id;
        std::vector<std::string> nodes;
        std::string scheduler;
        std::string placement;
    };

    std::vector<GroupSpec> partitions;
    std::vector<GroupSpec> switches;
    std::vector<NodeSpec> nodes;
};

struct PartitionUsage {
    std::uint32_t used_gpus = 0;
    std::uint32_t used_nodes = 0;
    std::uint32_t idle_gpus = 0;

    bool operator==(const PartitionUsage&) const = default;
};

struct UsageSample {
    Time t;
    std::uint32_t used_gpus = 0;
    std::uint32_t used_nodes = 0;
    std::uint32_t idle_gpus = 0;
    std::vector<PartitionUsage> partitions;

    bool operator==(const UsageSample&) const = default;
};

class Cluster {
public:
    Cluster() = default;

    const std::vector<Node>& nodes() const noexcept { return nodes_; }
    const std::vector<Switch>& switches() const noexcept { return switches_; }
    const std::vector<Partition>& partitions() const noexcept { return partitions_; }

    const Node& node(NodeIndex i) const { return nodes_.at(i); }
    const Partition& partition(PartitionIndex i) const {
        if (i >= partitions_.size()) throw UnknownPartition("partition index " + std::to_string(i));
        return partitions_[i];
    }

    std::optional<PartitionIndex> find_partition(const std::string& id) const {
        for (const auto& p : partitions_)
            if (p.id == id) return p.index;
        return std::nullopt;
    }

    std::uint32_t total_gpus() const noexcept {
        std::uint32_t n = 0;
        for (const auto& node : nodes_) n += node.gpu_count;
        return n;
    }

    std::uint32_t partition_idle_gpus(PartitionIndex p) const {
        std::uint32_t n = 0;
        for (NodeIndex i : partition(p).nodes) n += nodes_[i].idle();
        return n;
    }

    std::uint32_t partition_max_node_gpus(PartitionIndex p) const {
        std::uint32_t m = 0;
        for (NodeIndex i : partition(p).nodes) m = std::max(m, nodes_[i].gpu_count);
        return m;
    }

    bool is_idle(GpuSlot s) const {
        return s.node < nodes_.size() && s.gpu < nodes_[s.node].gpu_count &&
               !nodes_[s.node].occupancy[s.gpu].has_value();
    }

    /// Lowest-index idle GPUs on a node, at most `count` of them.
    std::vector<std::uint32_t> idle_indexes(NodeIndex n, std::uint32_t count) const {
        std::vector<std::uint32_t> out;
        const auto& node = nodes_.at(n);
        for (std::uint32_t g = 0; g < node.gpu_count && out.size() < count; ++g)
            if (!node.occupancy[g]) out.push_back(g);
        return out;
    }

    bool holds(JobId job) const { return held_.contains(job); }

    const std::vector<GpuSlot>& slots_of(JobId job) const {
        auto it = held_.find(job);
        if (it == held_.end()) throw UnknownJob("job " + std::to_string(job) + " holds no GPUs");
        return it->second;
    }

    /// Live allocations keyed by job, in ascending job order.
    const std::map<JobId, std::vector<GpuSlot>>& holdings() const noexcept { return held_; }

    /// Builds an Allocation for `job` over `slots`, computing its spans.
    Allocation make_allocation(JobId job, std::vector<GpuSlot> slots) const {
        if (slots.empty()) throw InvariantViolation("allocation for job " + std::to_string(job) + " is empty");
        std::sort(slots.begin(), slots.end());
        if (std::adjacent_find(slots.begin(), slots.end()) != slots.end())
            throw InvariantViolation("allocation for job " + std::to_string(job) + " has duplicate slots");
        std::set<NodeIndex> node_set;
        std::set<SwitchIndex> switch_set;
        std::set<PartitionIndex> part_set;
        for (const auto& s : slots) {
            if (s.node >= nodes_.size() || s.gpu >= nodes_[s.node].gpu_count)
                throw InvariantViolation("allocation for job " + std::to_string(job) + " names a nonexistent GPU");
            node_set.insert(s.node);
            switch_set.insert(nodes_[s.node].switch_index);
            part_set.insert(nodes_[s.node].partition_index);
        }
        if (part_set.size() != 1)
            throw InvariantViolation("allocation for job " + std::to_string(job) + " spans partitions");
        return Allocation{job, std::move(slots), static_cast<std::uint32_t>(node_set.size()),
                          static_cast<std::uint32_t>(switch_set.size())};
    }

    /// Marks every slot of `alloc` as held by alloc.job. All-or-nothing.
    void commit(const Allocation& alloc) {
        if (alloc.slots.empty()) throw InvariantViolation("empty allocation");
        if (held_.contains(alloc.job))
            throw SlotConflict("job " + std::to_string(alloc.job) + " already holds an allocation");
        for (const auto& s : alloc.slots) {
            if (s.node >= nodes_.size() || s.gpu >= nodes_[s.node].gpu_count)
                throw InvariantViolation("slot outside the cluster");
            const auto& owner = nodes_[s.node].occupancy[s.gpu];
            if (owner)
                throw SlotConflict("slot " + nodes_[s.node].id + ":" + std::to_string(s.gpu) +
                                   " already held by job " + std::to_string(*owner));
        }
        for (const auto& s : alloc.slots) {
            nodes_[s.node].occupancy[s.gpu] = alloc.job;
            ++nodes_[s.node].used;
        }
        held_.emplace(alloc.job, alloc.slots);
    }

    /// Frees every GPU held by `job` and returns the released slots.
    std::vector<GpuSlot> release(JobId job) {
        auto it = held_.find(job);
        if (it == held_.end()) throw UnknownJob("job " + std::to_string(job) + " holds no GPUs");
        std::vector<GpuSlot> slots = std::move(it->second);
        held_.erase(it);
        for (const auto& s : slots) {
            nodes_[s.node].occupancy[s.gpu].reset();
            --nodes_[s.node].used;
        }
        return slots;
    }

    std::uint32_t used_gpus() const noexcept {
        std::uint32_t n = 0;
        for (const auto& node : nodes_) n += node.used;
        return n;
    }

    std::uint32_t used_nodes() const noexcept {
        return static_cast<std::uint32_t>(
            std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.in_use(); }));
    }

    std::uint32_t used_nodes(PartitionIndex p) const {
        std::uint32_t n = 0;
        for (NodeIndex i : partition(p).nodes) n += nodes_[i].in_use() ? 1 : 0;
        return n;
    }

    /// Occupied GPUs per occupied node; empty when no node is in use.
    std::optional<double> fragmentation_ratio() const {
        std::uint32_t nodes = used_nodes();
        if (nodes == 0) return std::nullopt;
        return static_cast<double>(used_gpus()) / static_cast<double>(nodes);
    }

    UsageSample utilization_snapshot(Time t) const {
        UsageSample s;
        s.t = t;
        s.partitions.resize(partitions_.size());
        for (const auto& node : nodes_) {
            auto& p = s.partitions[node.partition_index];
            p.used_gpus += node.used;
            p.idle_gpus += node.idle();
            p.used_nodes += node.in_use() ? 1 : 0;
        }
        for (const auto& p : s.partitions) {
            s.used_gpus += p.used_gpus;
            s.used_nodes += p.used_nodes;
            s.idle_gpus += p.idle_gpus;
        }
        return s;
    }

    /// Checks occupancy maps against the per-job holdings and cached counters.
    void check_conservation() const {
        std::size_t held_slots = 0;
        for (const auto& [job, slots] : held_) {
            for (const auto& s : slots) {
                const auto& owner = nodes_.at(s.node).occupancy.at(s.gpu);
                if (!owner || *owner != job)
                    throw InvariantViolation("slot " + nodes_[s.node].id + ":" + std::to_string(s.gpu) +
                                             " not owned by job " + std::to_string(job));
            }
            held_slots += slots.size();
        }
        std::size_t occupied = 0;
        for (const auto& node : nodes_) {
            std::uint32_t used = 0;
            for (const auto& o : node.occupancy) used += o ? 1 : 0;
            if (used != node.used) throw InvariantViolation("stale usage counter on node " + node.id);
            occupied += used;
        }
        if (occupied != held_slots) throw InvariantViolation("occupied slots do not match live allocations");
    }

    bool operator==(const Cluster&) const = default;

    friend Cluster build_cluster(const TopologyConfig& config);

private:
    std::vector<Node> nodes_;
    std::vector<Switch> switches_;
    std::vector<Partition> partitions_;
    std::map<JobId, std::vector<GpuSlot>> held_;
};

/// Validates a topology and returns a cluster with every GPU idle. Node order
/// in the config defines node indexes (and therefore scan order).
inline Cluster build_cluster(const TopologyConfig& config) {
    if (config.nodes.empty()) throw ConfigError("topology lists no nodes");
    if (config.partitions.empty()) throw ConfigError("topology lists no partitions");
    if (config.switches.empty()) throw ConfigError("topology lists no switches");

    Cluster c;
    std::unordered_map<std::string, NodeIndex> by_id;
    for (const auto& spec : config.nodes) {
        if (spec.id.empty()) throw ConfigError("node with empty id");
        if (spec.gpus == 0) throw ConfigError("node " + spec.id + " has zero GPUs");
        auto index = static_cast<NodeIndex>(c.nodes_.size());
        if (!by_id.emplace(spec.id, index).second) throw ConfigError("duplicate node id " + spec.id);
        Node n;
        n.index = index;
        n.id = spec.id;
        n.gpu_count = spec.gpus;
        n.occupancy.assign(spec.gpus, std::nullopt);
        c.nodes_.push_back(std::move(n));
    }

    auto assign = [&](const std::vector<TopologyConfig::GroupSpec>& groups, const char* kind, auto&& setter) {
        std::set<std::string> ids;
        std::vector<int> seen(c.nodes_.size(), 0);
        std::vector<std::vector<NodeIndex>> members;
        for (std::size_t g = 0; g < groups.size(); ++g) {
            const auto& group = groups[g];
            if (group.id.empty()) throw ConfigError(std::string(kind) + " with empty id");
            if (!ids.insert(group.id).second) throw ConfigError(std::string("duplicate ") + kind + " id " + group.id);
            std::vector<NodeIndex> nodes;
            for (const auto& nid : group.nodes) {
                auto it = by_id.find(nid);
                if (it == by_id.end())
                    throw ConfigError(std::string(kind) + " " + group.id + " references unknown node " + nid);
                if (++seen[it->second] > 1)
                    throw ConfigError("node " + nid + " appears in multiple " + kind + "s");
                setter(c.nodes_[it->second], static_cast<std::uint32_t>(g));
                nodes.push_back(it->second);
            }
            if (nodes.empty()) throw ConfigError(std::string(kind) + " " + group.id + " has no nodes");
            std::sort(nodes.begin(), nodes.end());
            members.push_back(std::move(nodes));
        }
        for (std::size_t i = 0; i < seen.size(); ++i)
            if (seen[i] == 0) throw ConfigError("node " + c.nodes_[i].id + " belongs to no " + kind);
        return members;
    };

    auto part_members = assign(config.partitions, "partition",
                               [](Node& n, std::uint32_t g) { n.partition_index = g; });
    auto switch_members = assign(config.switches, "switch",
                                 [](Node& n, std::uint32_t g) { n.switch_index = g; });

    for (std::size_t g = 0; g < config.partitions.size(); ++g) {
        const auto& spec = config.partitions[g];
        c.partitions_.push_back(Partition{static_cast<PartitionIndex>(g), spec.id, std::move(part_members[g]),
                                          spec.scheduler, spec.placement});
    }
    for (std::size_t g = 0; g < config.switches.size(); ++g)
        c.switches_.push_back(
            Switch{static_cast<SwitchIndex>(g), config.switches[g].id, std::move(switch_members[g])});
    return c;
}

// JSON form: { "partitions": [{"id", "nodes": [...]}], "switches": [{"id", "nodes": [...]}],
//              "nodes": [{"id", "gpus": int}] }

namespace detail {

inline std::string json_id(const nlohmann::json& j, const char* what) {
    if (j.is_string()) return j.get<std::string>();
    if (j.is_number_integer()) return std::to_string(j.get<long long>());
    throw ConfigError(std::string(what) + " id must be a string or integer");
}

inline std::vector<TopologyConfig::GroupSpec> groups_from_json(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || !j.at(key).is_array()) throw ConfigError(std::string("topology: missing array '") + key + "'");
    std::vector<TopologyConfig::GroupSpec> out;
    for (const auto& g : j.at(key)) {
        if (!g.is_object() || !g.contains("id") || !g.contains("nodes") || !g.at("nodes").is_array())
            throw ConfigError(std::string("topology: malformed entry in '") + key + "'");
        TopologyConfig::GroupSpec spec;
        spec.id = json_id(g.at("id"), key);
        for (const auto& n : g.at("nodes")) spec.nodes.push_back(json_id(n, "node"));
        if (g.contains("scheduler")) spec.scheduler = g.at("scheduler").get<std::string>();
        if (g.contains("placement")) spec.placement = g.at("placement").get<std::string>();
        out.push_back(std::move(spec));
    }
    return out;
}

}  // namespace detail

inline TopologyConfig topology_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("topology must be a JSON object");
    TopologyConfig cfg;
    cfg.partitions = detail::groups_from_json(j, "partitions");
    cfg.switches = detail::groups_from_json(j, "switches");
    if (!j.contains("nodes") || !j.at("nodes").is_array()) throw ConfigError("topology: missing array 'nodes'");
    for (const auto& n : j.at("nodes")) {
        if (!n.is_object() || !n.contains("id")) throw ConfigError("topology: malformed node entry");
        TopologyConfig::NodeSpec spec;
        spec.id = detail::json_id(n.at("id"), "node");
        if (n.contains("gpus")) {
            if (!n.at("gpus").is_number_integer() || n.at("gpus").get<long long>() <= 0)
                throw ConfigError("topology: node " + spec.id + " has invalid 'gpus'");
            spec.gpus = n.at("gpus").get<std::uint32_t>();
        }
        cfg.nodes.push_back(std::move(spec));
    }
    return cfg;
}

inline nlohmann::json topology_to_json(const TopologyConfig& cfg) {
    auto groups = [](const std::vector<TopologyConfig::GroupSpec>& gs) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& g : gs) {
            nlohmann::json o{{"id", g.id}, {"nodes", g.nodes}};
            if (!g.scheduler.empty()) o["scheduler"] = g.scheduler;
            if (!g.placement.empty()) o["placement"] = g.placement;
            arr.push_back(std::move(o));
        }
        return arr;
    };
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : cfg.nodes) nodes.push_back({{"id", n.id}, {"gpus", n.gpus}});
    return {{"partitions", groups(cfg.partitions)}, {"switches", groups(cfg.switches)}, {"nodes", nodes}};
}

/// Evenly laid-out topology: `node_gpus[i]` GPUs on node i, consecutive
/// blocks of `nodes_per_switch` nodes under one switch, and partitions formed
/// from consecutive node ranges of the given sizes.
inline TopologyConfig make_topology(std::span<const std::uint32_t> node_gpus, std::uint32_t nodes_per_switch,
                                    std::span<const std::uint32_t> partition_sizes) {
    TopologyConfig cfg;
    for (std::size_t i = 0; i < node_gpus.size(); ++i)
        cfg.nodes.push_back({"n" + std::to_string(i), node_gpus[i]});
    for (std::size_t i = 0; i < node_gpus.size(); ++i) {
        if (i % nodes_per_switch == 0) cfg.switches.push_back({"s" + std::to_string(cfg.switches.size()), {}, {}, {}});
        cfg.switches.back().nodes.push_back(cfg.nodes[i].id);
    }
    std::size_t next = 0;
    for (std::size_t p = 0; p < partition_sizes.size(); ++p) {
        TopologyConfig::GroupSpec g{"p" + std::to_string(p), {}, {}, {}};
        for (std::uint32_t k = 0; k < partition_sizes[p] && next < node_gpus.size(); ++k)
            g.nodes.push_back(cfg.nodes[next++].id);
        cfg.partitions.push_back(std::move(g));
    }
    return cfg;
}

/// Single-partition topology of `nodes` identical nodes.
inline TopologyConfig make_uniform_topology(std::uint32_t nodes, std::uint32_t gpus_per_node,
                                            std::uint32_t nodes_per_switch = 8) {
    std::vector<std::uint32_t> gpus(nodes, gpus_per_node);
    std::uint32_t sizes[] = {nodes};
    return make_topology(gpus, nodes_per_switch, sizes);
}

}  // namespace gpusim
