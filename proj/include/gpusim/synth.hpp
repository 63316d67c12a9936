#pragma once

// Synthetic workload generator: Poisson arrivals, a discrete GPU-size mix and
// log-normal service times.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "gpusim/error.hpp"
#include "gpusim/trace.hpp"

namespace gpusim {

struct SynthParams {
    struct PartitionWeight {
        std::string id = "p0";
        double weight = 1.0;
    };

    std::int64_t num_jobs = 470;
    // Mean arrivals per second. When horizon_s is set it takes precedence:
    // rate = num_jobs / horizon_s.
    double arrival_rate_per_s = 470.0 / 86400.0;
    std::optional<double> horizon_s;

    std::vector<std::uint32_t> gpu_sizes{1, 2, 4, 8, 16, 32, 48, 64};
    std::vector<double> gpu_weights{0.30, 0.15, 0.15, 0.20, 0.10, 0.05, 0.03, 0.02};
    // Probability mass of sizes > 4 GPUs; the size weights are rescaled to hit it.
    std::optional<double> large_job_fraction = 0.40;
    std::uint32_t gpus_per_node = 8;

    double service_log_mean = 7.5;  // ln(seconds)
    double service_log_sigma = 1.5;
    double service_min_s = 60;
    double service_max_s = 14 * 86400;

    double failed_fraction = 0.0;
    double cancelled_fraction = 0.0;

    std::vector<PartitionWeight> partitions{PartitionWeight{}};
    std::uint64_t seed = 7;

    /// Fraction of generated jobs expected to need more than 4 GPUs.
    double expected_large_fraction() const {
        double large = 0, total = 0;
        for (std::size_t i = 0; i < gpu_sizes.size(); ++i) {
            total += gpu_weights[i];
            if (gpu_sizes[i] > 4) large += gpu_weights[i];
        }
        return total > 0 ? large / total : 0.0;
    }
};

inline void validate(const SynthParams& p) {
    if (p.num_jobs < 0) throw ParamError("num_jobs must be >= 0");
    if (p.horizon_s && !(*p.horizon_s > 0)) throw ParamError("horizon_s must be > 0");
    if (!p.horizon_s && !(p.arrival_rate_per_s > 0)) throw ParamError("arrival_rate_per_s must be > 0");
    if (p.gpu_sizes.empty() || p.gpu_sizes.size() != p.gpu_weights.size())
        throw ParamError("gpu_sizes and gpu_weights must be non-empty and of equal length");
    double total = 0;
    bool has_small = false, has_large = false;
    for (std::size_t i = 0; i < p.gpu_sizes.size(); ++i) {
        if (p.gpu_sizes[i] == 0) throw ParamError("gpu size must be >= 1");
        if (!(p.gpu_weights[i] >= 0)) throw ParamError("gpu weights must be >= 0");
        total += p.gpu_weights[i];
        if (p.gpu_weights[i] > 0) (p.gpu_sizes[i] > 4 ? has_large : has_small) = true;
    }
    if (!(total > 0)) throw ParamError("gpu weights sum to zero");
    if (p.large_job_fraction) {
        double f = *p.large_job_fraction;
        if (!(f >= 0 && f <= 1)) throw ParamError("large_job_fraction must be within [0, 1]");
        if ((f > 0 && !has_large) || (f < 1 && !has_small))
            throw ParamError("large_job_fraction unreachable with the given size weights");
    }
    if (p.gpus_per_node == 0) throw ParamError("gpus_per_node must be >= 1");
    if (!(p.service_log_sigma >= 0)) throw ParamError("service_log_sigma must be >= 0");
    if (!(p.service_min_s >= 1) || p.service_max_s < p.service_min_s)
        throw ParamError("service bounds must satisfy 1 <= min <= max");
    if (p.failed_fraction < 0 || p.cancelled_fraction < 0 || p.failed_fraction + p.cancelled_fraction > 1)
        throw ParamError("failed/cancelled fractions must be within [0, 1]");
    if (p.partitions.empty()) throw ParamError("at least one partition is required");
    double pw = 0;
    for (const auto& part : p.partitions) {
        if (part.id.empty() || !(part.weight >= 0)) throw ParamError("invalid partition weight entry");
        pw += part.weight;
    }
    if (!(pw > 0)) throw ParamError("partition weights sum to zero");
}

/// Size weights after rescaling the >4-GPU mass to large_job_fraction.
inline std::vector<double> effective_size_weights(const SynthParams& p) {
    std::vector<double> w = p.gpu_weights;
    if (!p.large_job_fraction) return w;
    double large = 0, small = 0;
    for (std::size_t i = 0; i < w.size(); ++i) (p.gpu_sizes[i] > 4 ? large : small) += w[i];
    double f = *p.large_job_fraction;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (p.gpu_sizes[i] > 4)
            w[i] = large > 0 ? w[i] / large * f : 0.0;
        else
            w[i] = small > 0 ? w[i] / small * (1 - f) : 0.0;
    }
    return w;
}

/// Deterministic for a given (params, seed). Job ids are 1..num_jobs in submit order.
inline Workload synth_workload(const SynthParams& p, std::uint64_t seed) {
    validate(p);
    std::mt19937_64 rng(seed);
    const double rate = p.horizon_s ? static_cast<double>(p.num_jobs) / *p.horizon_s : p.arrival_rate_per_s;
    if (p.num_jobs > 0 && !(rate > 0)) throw ParamError("arrival rate must be > 0");

    std::exponential_distribution<double> gap(rate > 0 ? rate : 1.0);
    auto weights = effective_size_weights(p);
    std::discrete_distribution<std::size_t> size_pick(weights.begin(), weights.end());

    // With a target fraction the large/small split is exact and only its order is random.
    std::vector<char> large_slot;
    std::discrete_distribution<std::size_t> large_pick, small_pick;
    if (p.large_job_fraction) {
        auto n = static_cast<std::size_t>(p.num_jobs);
        auto k = static_cast<std::size_t>(std::llround(*p.large_job_fraction * static_cast<double>(n)));
        large_slot.assign(n, 0);
        std::fill_n(large_slot.begin(), k, 1);
        std::mt19937_64 shuffle_rng(seed ^ 0x9e3779b97f4a7c15ULL);
        std::shuffle(large_slot.begin(), large_slot.end(), shuffle_rng);
        std::vector<double> lw(weights), sw(weights);
        for (std::size_t i = 0; i < weights.size(); ++i) (p.gpu_sizes[i] > 4 ? sw : lw)[i] = 0.0;
        if (k > 0) large_pick = std::discrete_distribution<std::size_t>(lw.begin(), lw.end());
        if (k < n) small_pick = std::discrete_distribution<std::size_t>(sw.begin(), sw.end());
    }
    std::lognormal_distribution<double> service(p.service_log_mean, p.service_log_sigma);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> pweights;
    for (const auto& part : p.partitions) pweights.push_back(part.weight);
    std::discrete_distribution<std::size_t> part_pick(pweights.begin(), pweights.end());

    static const char* const names[] = {"train-resnet", "train-bert", "train-gpt", "finetune-vit",
                                        "eval-detector", "train-yolo", "rl-agent", "train-unet"};

    std::vector<JobRecord> jobs;
    jobs.reserve(static_cast<std::size_t>(p.num_jobs));
    double clock = 0.0;
    for (std::int64_t i = 0; i < p.num_jobs; ++i) {
        clock += gap(rng);
        JobRecord r;
        r.job_id = i + 1;
        r.job_name = std::string(names[rng() % std::size(names)]) + "-" + std::to_string(i + 1);
        r.partition = p.partitions[part_pick(rng)].id;
        std::size_t pick = large_slot.empty() ? size_pick(rng)
                           : large_slot[static_cast<std::size_t>(i)] ? large_pick(rng)
                                                                    : small_pick(rng);
        std::uint32_t size = p.gpu_sizes[pick];
        if (size <= p.gpus_per_node) {
            r.req_nodes = 1;
            r.req_gpus_per_node = size;
        } else if (size % p.gpus_per_node == 0) {
            r.req_nodes = size / p.gpus_per_node;
            r.req_gpus_per_node = p.gpus_per_node;
        }
        r.total_gpus = size;
        r.submit_time = Time::seconds(static_cast<std::int64_t>(std::floor(clock)));
        double s = std::clamp(std::round(service(rng)), p.service_min_s, p.service_max_s);
        r.service_time = Time::seconds(static_cast<std::int64_t>(s));
        double u = unit(rng);
        if (u < p.failed_fraction)
            r.final_state = FinalState::Failed;
        else if (u < p.failed_fraction + p.cancelled_fraction)
            r.final_state = FinalState::Cancelled;
        jobs.push_back(std::move(r));
    }
    auto w = make_workload(std::move(jobs));
    if (p.horizon_s) w.horizon = max(w.horizon, Time::from_seconds(*p.horizon_s));
    return w;
}

inline SynthParams synth_params_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ParamError("synth params must be a JSON object");
    SynthParams p;
    try {
        if (j.contains("num_jobs")) p.num_jobs = j.at("num_jobs").get<std::int64_t>();
        if (j.contains("arrival_rate_per_s")) p.arrival_rate_per_s = j.at("arrival_rate_per_s").get<double>();
        if (j.contains("horizon_s")) p.horizon_s = j.at("horizon_s").get<double>();
        if (j.contains("gpu_sizes")) p.gpu_sizes = j.at("gpu_sizes").get<std::vector<std::uint32_t>>();
        if (j.contains("gpu_weights")) p.gpu_weights = j.at("gpu_weights").get<std::vector<double>>();
        if (j.contains("large_job_fraction")) {
            if (j.at("large_job_fraction").is_null())
                p.large_job_fraction.reset();
            else
                p.large_job_fraction = j.at("large_job_fraction").get<double>();
        }
        if (j.contains("gpus_per_node")) p.gpus_per_node = j.at("gpus_per_node").get<std::uint32_t>();
        if (j.contains("service")) {
            const auto& s = j.at("service");
            if (s.contains("log_mean")) p.service_log_mean = s.at("log_mean").get<double>();
            if (s.contains("log_sigma")) p.service_log_sigma = s.at("log_sigma").get<double>();
            if (s.contains("min_s")) p.service_min_s = s.at("min_s").get<double>();
            if (s.contains("max_s")) p.service_max_s = s.at("max_s").get<double>();
        }
        if (j.contains("failed_fraction")) p.failed_fraction = j.at("failed_fraction").get<double>();
        if (j.contains("cancelled_fraction")) p.cancelled_fraction = j.at("cancelled_fraction").get<double>();
        if (j.contains("partitions")) {
            p.partitions.clear();
            for (const auto& part : j.at("partitions"))
                p.partitions.push_back({part.at("id").get<std::string>(), part.value("weight", 1.0)});
        }
        if (j.contains("seed")) p.seed = j.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ParamError(std::string("synth params: ") + e.what());
    }
    validate(p);
    return p;
}

}  // namespace gpusim
