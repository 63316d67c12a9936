#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "gpusim/analysis.hpp"

using namespace gpusim;

namespace {

JobLog done(JobId id, std::int64_t submit_s, std::int64_t start_s, std::int64_t finish_s, const Cluster& c) {
    JobLog j;
    j.job_id = id;
    j.job_name = "j" + std::to_string(id);
    j.partition = "p0";
    j.total_gpus = 1;
    j.status = JobStatus::Done;
    j.submit = Time::seconds(submit_s);
    j.start = Time::seconds(start_s);
    j.finish = Time::seconds(finish_s);
    j.service_time = j.effective_service = *j.finish - *j.start;
    j.intervals.push_back({*j.start, *j.finish, c.make_allocation(id, {{0, 0}})});
    return j;
}

RunLog two_job_log(const Cluster& c) {
    RunLog log;
    log.scheduler = "fcfs";
    log.placement = "best-fit";
    log.trace_hash = "abc";
    log.partitions = {"p0"};
    log.nodes = {"n0"};
    log.jobs = {done(1, 0, 0, 10, c), done(2, 0, 10, 30, c)};
    log.end_time = Time::seconds(30);
    return log;
}

}  // namespace

TEST(Report, AverageJct) {
    Cluster c = build_cluster(make_uniform_topology(1, 8));
    auto r = summarize(two_job_log(c));
    EXPECT_EQ(r.avg_jct_s, 20.0);
    EXPECT_EQ(r.avg_pending_time_s, 5.0);
    EXPECT_EQ(r.median_jct_s, 10.0);
    EXPECT_EQ(r.p95_jct_s, 30.0);
    EXPECT_EQ(r.completed, 2u);
    EXPECT_EQ(r.label, "fcfs/best-fit");
}

TEST(Report, EmptyRunHasNoJctStatistics) {
    RunLog log;
    auto r = summarize(log);
    EXPECT_FALSE(r.avg_jct_s);
    EXPECT_FALSE(r.mean_frag_ratio);
    auto back = report_from_json(report_to_json(r));
    EXPECT_FALSE(back.avg_jct_s);
    EXPECT_TRUE(report_to_json(r).at("avg_jct_s").is_null());
}

TEST(Report, JsonRoundTrip) {
    Cluster c = build_cluster(make_uniform_topology(1, 8));
    auto r = summarize(two_job_log(c));
    r.unsatisfiable = {7, 9};
    auto back = report_from_json(report_to_json(r));
    EXPECT_EQ(report_to_json(back), report_to_json(r));
}

TEST(Report, NearestRank) {
    std::vector<Time> xs;
    for (int i = 1; i <= 20; ++i) xs.push_back(Time::seconds(i));
    EXPECT_EQ(nearest_rank(xs, 95), Time::seconds(19));
    EXPECT_EQ(nearest_rank(xs, 50), Time::seconds(10));
    EXPECT_EQ(nearest_rank(xs, 100), Time::seconds(20));
    EXPECT_THROW(nearest_rank({}, 50), std::invalid_argument);
}

TEST(Report, FragmentationIsTimeWeighted) {
    std::vector<MetricsSample> s(3);
    s[0] = {Time::seconds(0), 0, 1, 8, 1, 8.0};
    s[1] = {Time::seconds(10), 0, 1, 2, 1, 2.0};
    s[2] = {Time::seconds(40), 0, 0, 0, 0, std::nullopt};
    auto [mean, lo] = fragmentation_summary(s);
    EXPECT_DOUBLE_EQ(*mean, (8.0 * 10 + 2.0 * 30) / 40);
    EXPECT_EQ(lo, 2.0);
}

TEST(ChromeTrace, SingleJobEvent) {
    Cluster c = build_cluster(make_uniform_topology(1, 8));
    RunLog log = two_job_log(c);
    log.jobs.pop_back();
    auto events = chrome_trace_json(log);
    ASSERT_EQ(events.size(), 1u);
    EXPECT_EQ(events[0]["ph"], "X");
    EXPECT_EQ(events[0]["ts"], 0);
    EXPECT_EQ(events[0]["dur"], 10'000'000);
    EXPECT_EQ(events[0]["args"]["job_id"], 1);
    EXPECT_EQ(events[0]["args"]["nodes"], nlohmann::json::array({"n0"}));
}

TEST(ChromeTrace, EventCountMatchesIntervalsOnRandomRuns) {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 10; ++trial) {
        auto s = fixture::random_scenario(rng);
        EngineConfig cfg;
        cfg.scheduler.kind = SchedulerKind::Mlfq;
        cfg.scheduler.mlfq.quanta = {Seconds(40), Seconds(100), Seconds(250)};
        auto log = run(s.workload, build_cluster(s.topology), cfg);
        auto parsed = nlohmann::json::parse(chrome_trace_json(log).dump());
        ASSERT_TRUE(parsed.is_array());
        EXPECT_EQ(parsed.size(), log.interval_count());
        for (const auto& e : parsed) {
            EXPECT_GE(e["dur"].get<std::int64_t>(), 1);
            EXPECT_TRUE(e.contains("pid") && e.contains("tid") && e.contains("name"));
        }
    }
}

TEST(MetricsCsv, HeaderOnlyWhenEmpty) {
    EXPECT_EQ(metrics_csv({}), std::string(metrics_header) + "\n");
    EXPECT_TRUE(parse_metrics_csv(metrics_csv({})).empty());
}

TEST(MetricsCsv, RowFormat) {
    MetricsSample s{Time::seconds(60), 3, 10, 80, 10, 8.0};
    EXPECT_EQ(metrics_csv({s}), std::string(metrics_header) + "\n60,3,10,80,10,8.0\n");
    MetricsSample idle{Time::micros(1'500'000), 0, 0, 0, 0, std::nullopt};
    EXPECT_EQ(metrics_csv({idle}), std::string(metrics_header) + "\n1.5,0,0,0,0,\n");
}

TEST(MetricsCsv, RoundTripIsLossless) {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> ratio(1.0, 8.0);
    std::vector<MetricsSample> series;
    for (int i = 0; i < 500; ++i) {
        MetricsSample s{Time::micros(static_cast<std::int64_t>(rng() % 10'000'000'000ULL)),
                        static_cast<std::uint32_t>(rng() % 100), static_cast<std::uint32_t>(rng() % 100),
                        static_cast<std::uint32_t>(rng() % 1160), static_cast<std::uint32_t>(rng() % 154),
                        std::nullopt};
        if (rng() % 4) s.frag_ratio = ratio(rng);
        series.push_back(s);
    }
    EXPECT_EQ(parse_metrics_csv(metrics_csv(series)), series);
    EXPECT_THROW(parse_metrics_csv("t,x\n"), ParseError);
    EXPECT_THROW(parse_metrics_csv(std::string(metrics_header) + "\n1,2,3\n"), ParseError);
}

TEST(Compare, IdenticalRunsHaveZeroDelta) {
    Cluster c = build_cluster(make_uniform_topology(1, 8));
    auto a = summarize(two_job_log(c));
    auto b = a;
    b.label = "fcfs/best-fit copy";
    auto t = compare_runs({b, a});
    EXPECT_EQ(t.baseline, "fcfs/best-fit");
    ASSERT_EQ(t.rows.size(), 2u);
    for (const auto& row : t.rows)
        for (const auto& [k, d] : row.delta) {
            if (d) {
                EXPECT_EQ(*d, 0.0) << k;
            }
        }
    EXPECT_TRUE(t.warnings.empty());
}

TEST(Compare, DeltaAgainstChosenBaseline) {
    Cluster c = build_cluster(make_uniform_topology(1, 8));
    auto a = summarize(two_job_log(c));
    auto b = a;
    b.label = "mlfq/best-fit";
    b.avg_jct_s = 15.0;
    auto t = compare_runs({a, b}, "mlfq/best-fit");
    EXPECT_EQ(t.rows[0].delta.at("avg_jct_s"), 5.0);
    EXPECT_THROW(compare_runs({a, b}, "missing"), std::invalid_argument);
    EXPECT_THROW(compare_runs({a}), std::invalid_argument);
}

TEST(Compare, DifferentTracesWarn) {
    Cluster c = build_cluster(make_uniform_topology(1, 8));
    auto a = summarize(two_job_log(c));
    auto b = a;
    b.label = "other";
    b.trace_hash = "def";
    auto t = compare_runs({a, b});
    ASSERT_EQ(t.warnings.size(), 1u);
    EXPECT_EQ(t.warnings[0].rfind("MismatchedWorkload", 0), 0u);
    EXPECT_EQ(comparison_to_json(t)["warnings"].size(), 1u);
}
