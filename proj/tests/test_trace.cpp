#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "gpusim/synth.hpp"
#include "gpusim/trace.hpp"

using namespace gpusim;

namespace {

Workload parse(const std::string& body) {
    std::istringstream in(std::string(trace_header) + "\n" + body);
    return parse_trace_text(in);
}

}  // namespace

TEST(ParseTrace, DirectFieldMapping) {
    auto w = parse("1,train-resnet,p0,2,8,,0,,,Completed,3600\n");
    ASSERT_EQ(w.jobs.size(), 1u);
    const auto& r = w.jobs[0];
    EXPECT_EQ(r.job_id, 1);
    EXPECT_EQ(r.job_name, "train-resnet");
    EXPECT_EQ(r.partition, "p0");
    EXPECT_EQ(r.req_nodes, 2u);
    EXPECT_EQ(r.req_gpus_per_node, 8u);
    EXPECT_EQ(r.total_gpus, 16u);
    EXPECT_EQ(r.submit_time, Time::zero());
    EXPECT_FALSE(r.start_time.has_value());
    EXPECT_EQ(r.final_state, FinalState::Completed);
    EXPECT_EQ(r.service_time, Time::seconds(3600));
}

TEST(ParseTrace, TotalOnlyRequestForm) {
    auto w = parse("4,x,p0,,,12,5,,,Completed,10\n");
    EXPECT_FALSE(w.jobs[0].has_tuple());
    EXPECT_EQ(w.jobs[0].total_gpus, 12u);
}

TEST(ParseTrace, StartAfterEndIsValidationError) {
    EXPECT_THROW(parse("1,a,p0,1,1,1,0,100,50,Completed,\n"), ValidationError);
}

TEST(ParseTrace, ServiceMustMatchRecordedTimes) {
    EXPECT_THROW(parse("1,a,p0,1,1,1,0,10,50,Completed,30\n"), ValidationError);
    auto w = parse("1,a,p0,1,1,1,0,10,50,Completed,\n");
    EXPECT_EQ(w.jobs[0].service_time, Time::seconds(40));
}

TEST(ParseTrace, RejectsInconsistentOrMissingRequests) {
    EXPECT_THROW(parse("1,a,p0,2,4,9,0,,,Completed,5\n"), ValidationError);
    EXPECT_THROW(parse("1,a,p0,,,,0,,,Completed,5\n"), ValidationError);
    EXPECT_THROW(parse("1,a,p0,2,,,0,,,Completed,5\n"), ValidationError);
    EXPECT_THROW(parse("1,a,p0,1,1,1,0,,,Completed,0\n"), ValidationError);
    EXPECT_THROW(parse("1,a,p0,1,1,1,10,5,,Completed,5\n"), ValidationError);
}

TEST(ParseTrace, FailedJobsMayHaveZeroService) {
    auto w = parse("1,a,p0,1,1,1,0,,,Failed,0\n");
    EXPECT_EQ(w.jobs[0].final_state, FinalState::Failed);
}

TEST(ParseTrace, RowNumberedParseErrors) {
    try {
        parse("1,a,p0,1,1,1,0,,,Completed,5\n2,b,p0,x,1,1,0,,,Completed,5\n");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.row(), 3u);
        EXPECT_EQ(e.field(), "req_nodes");
    }
    EXPECT_THROW(parse("1,a,p0,1,1,1,0,,,Done,5\n"), ParseError);
    EXPECT_THROW(parse("1,a,p0,1,1,1,0,,Completed,5\n"), ParseError);
    std::istringstream bad_header("id,name\n");
    EXPECT_THROW(parse_trace_text(bad_header), ParseError);
}

TEST(ParseTrace, DuplicateIdsRejected) {
    EXPECT_THROW(parse("1,a,p0,1,1,1,0,,,Completed,5\n1,b,p0,1,1,1,3,,,Completed,5\n"), ValidationError);
}

TEST(ParseTrace, SortsStablyBySubmitTime) {
    auto w = parse("3,c,p0,1,1,1,9,,,Completed,5\n1,a,p0,1,1,1,2,,,Completed,5\n2,b,p0,1,1,1,2,,,Completed,5\n");
    ASSERT_EQ(w.jobs.size(), 3u);
    EXPECT_EQ(w.jobs[0].job_id, 1);
    EXPECT_EQ(w.jobs[1].job_id, 2);
    EXPECT_EQ(w.jobs[2].job_id, 3);
}

TEST(ParseTrace, MissingFileIsIoError) {
    EXPECT_THROW(parse_trace("/nonexistent/trace.csv"), IoError);
}

TEST(ParseTrace, RoundTripOnRandomWorkloads) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<JobRecord> jobs;
        std::uniform_int_distribution<int> n(0, 30), small(1, 8), t(0, 10000);
        int count = n(rng);
        for (int i = 0; i < count; ++i) {
            JobRecord r;
            r.job_id = i * 7 + 1;
            r.job_name = "job" + std::to_string(i);
            r.partition = i % 2 ? "p1" : "p0";
            if (rng() % 3) {
                r.req_nodes = static_cast<std::uint32_t>(small(rng));
                r.req_gpus_per_node = static_cast<std::uint32_t>(small(rng));
                r.total_gpus = *r.req_nodes * *r.req_gpus_per_node;
            } else {
                r.total_gpus = static_cast<std::uint32_t>(small(rng) * 3);
            }
            r.submit_time = Time::seconds(t(rng));
            r.service_time = Time::seconds(t(rng) + 1);
            if (rng() % 2) {
                r.start_time = r.submit_time + Time::seconds(t(rng));
                r.end_time = *r.start_time + r.service_time;
            }
            r.final_state = static_cast<FinalState>(rng() % 3);
            jobs.push_back(r);
        }
        Workload w = make_workload(jobs);
        std::istringstream in(serialize_trace(w));
        Workload back = parse_trace_text(in);
        ASSERT_EQ(back, w);
        EXPECT_EQ(serialize_trace(back), serialize_trace(w));
    }
}

TEST(Synth, LargeJobFractionWithinThreePoints) {
    SynthParams p;
    p.num_jobs = 2000;
    p.large_job_fraction = 0.40;
    auto w = synth_workload(p, 7);
    ASSERT_EQ(w.jobs.size(), 2000u);
    std::size_t large = 0;
    for (const auto& j : w.jobs) large += j.total_gpus > 4 ? 1 : 0;
    double frac = static_cast<double>(large) / 2000.0;
    EXPECT_GE(frac, 0.37);
    EXPECT_LE(frac, 0.43);
}

TEST(Synth, FractionHoldsAcrossSeedsAndTargets) {
    for (double target : {0.2, 0.4, 0.6}) {
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            SynthParams p;
            p.num_jobs = 1000;
            p.large_job_fraction = target;
            auto w = synth_workload(p, seed);
            std::size_t large = 0;
            for (const auto& j : w.jobs) large += j.total_gpus > 4 ? 1 : 0;
            EXPECT_NEAR(static_cast<double>(large) / 1000.0, target, 0.03) << "seed " << seed;
        }
    }
}

TEST(Synth, ZeroJobsGivesEmptyWorkload) {
    SynthParams p;
    p.num_jobs = 0;
    EXPECT_TRUE(synth_workload(p, 1).jobs.empty());
    EXPECT_EQ(serialize_trace(synth_workload(p, 1)), std::string(trace_header) + "\n");
}

TEST(Synth, SameSeedSameBytes) {
    SynthParams p;
    p.num_jobs = 500;
    EXPECT_EQ(serialize_trace(synth_workload(p, 9)), serialize_trace(synth_workload(p, 9)));
    EXPECT_NE(serialize_trace(synth_workload(p, 9)), serialize_trace(synth_workload(p, 10)));
}

TEST(Synth, OutputPassesTraceValidation) {
    SynthParams p;
    p.num_jobs = 1500;
    p.failed_fraction = 0.05;
    p.cancelled_fraction = 0.05;
    p.partitions = {{"p0", 2.0}, {"p1", 1.0}};
    p.gpu_sizes = {1, 2, 4, 8, 12, 16};
    p.gpu_weights = {1, 1, 1, 1, 1, 1};
    auto w = synth_workload(p, 4);
    std::istringstream in(serialize_trace(w));
    EXPECT_EQ(parse_trace_text(in), w);
    bool saw_total_only = false;
    for (const auto& j : w.jobs) saw_total_only = saw_total_only || !j.has_tuple();
    EXPECT_TRUE(saw_total_only);  // 12 GPUs is not a whole number of 8-GPU nodes
}

TEST(Synth, RejectsBadParams) {
    SynthParams p;
    p.num_jobs = -1;
    EXPECT_THROW(synth_workload(p, 1), ParamError);
    p = SynthParams{};
    p.arrival_rate_per_s = 0;
    EXPECT_THROW(synth_workload(p, 1), ParamError);
    p = SynthParams{};
    p.horizon_s = -5;
    EXPECT_THROW(synth_workload(p, 1), ParamError);
    p = SynthParams{};
    p.gpu_weights.pop_back();
    EXPECT_THROW(synth_workload(p, 1), ParamError);
}

TEST(Synth, ParamsFromJson) {
    auto p = synth_params_from_json(nlohmann::json::parse(
        R"({"num_jobs": 10, "horizon_s": 1000, "service": {"log_mean": 5, "log_sigma": 1}, "partitions": [{"id": "a"}]})"));
    EXPECT_EQ(p.num_jobs, 10);
    EXPECT_EQ(p.horizon_s, 1000.0);
    EXPECT_EQ(p.partitions.at(0).id, "a");
    EXPECT_THROW(synth_params_from_json(nlohmann::json::parse(R"({"num_jobs": "x"})")), ParamError);
}
