#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <sstream>

#include "mclip/bench.hpp"

#include "fixtures.hpp"

using namespace mclip;

namespace {

SuiteSpec small_suite() {
    SuiteSpec suite;
    suite.methods = {"exact", "sequential", "gm"};
    suite.scale = GenSpec{.n = 12, .p = 3, .r = 1, .radius = 0.3, .seed = 314, .count = 6};
    suite.time_limit_s = 60.0;
    return suite;
}

// strip the wall_seconds column (7th) from a records CSV
std::string drop_wall_column(const std::string& csv) {
    std::istringstream in(csv);
    std::ostringstream out;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string cell;
        int col = 0;
        while (std::getline(ls, cell, ',')) {
            if (col != 6) out << cell << '|';
            ++col;
        }
        out << '\n';
    }
    return out.str();
}

} // namespace

TEST_CASE("suite parsing round trip and validation") {
    const std::string text = R"({
        "methods": ["exact", "gm", "sa"],
        "scale": {"n": 20, "p": 4, "r": 1, "radius": 0.3, "seed": 42, "count": 10},
        "time_limit_s": 120.0,
        "meta": {"sa_iters": 500, "seed": 7}
    })";
    const SuiteSpec suite = parse_suite(text);
    CHECK(suite.methods.size() == 3);
    CHECK(suite.scale.count == 10);
    CHECK(suite.meta_iters_sa == 500);
    CHECK(suite.meta_seed == 7);

    CHECK_THROWS_AS(parse_suite(R"({"methods": ["nope"], "scale": {"n":5,"p":2,"r":1,"radius":0.3}})"),
                    std::invalid_argument);
    CHECK_THROWS_AS(parse_suite(R"({"methods": ["greedy"], "scale": {"n":5,"p":2,"r":1,"radius":0.3}})"),
                    std::invalid_argument); // neural method without checkpoints
    CHECK_THROWS_AS(parse_suite("not json"), std::invalid_argument);
}

TEST_CASE("benchmark records and summaries are complete and consistent") {
    const SuiteSpec suite = small_suite();
    const BenchResult result = run_benchmark(suite);

    CHECK(result.records.size() == 3 * 6);
    CHECK(result.summaries.size() == 3);
    CHECK(result.reference_note == "reference best: exact oracle");

    // per-record: obj = pre + post, gap in [0,1]
    for (const auto& rec : result.records) {
        CHECK(rec.obj == rec.pre + rec.post);
        CHECK(rec.gap >= 0.0);
        CHECK(rec.gap <= 1.0);
        CHECK(rec.wall_seconds >= 0.0);
    }

    // summary means equal the arithmetic means of records to 1e-9
    for (const auto& s : result.summaries) {
        double pre = 0, post = 0, obj = 0;
        int cnt = 0;
        for (const auto& rec : result.records) {
            if (rec.method != s.method) continue;
            pre += rec.pre;
            post += rec.post;
            obj += rec.obj;
            ++cnt;
        }
        CHECK(std::abs(s.mean_pre - pre / cnt) <= 1e-9);
        CHECK(std::abs(s.mean_post - post / cnt) <= 1e-9);
        CHECK(std::abs(s.mean_obj - obj / cnt) <= 1e-9);
    }

    // the reference method's summary gap is exactly zero, every exact
    // record has gap zero as well
    for (const auto& s : result.summaries)
        if (s.method == "exact") CHECK(s.gap == 0.0);
    for (const auto& rec : result.records)
        if (rec.method == "exact") CHECK(rec.gap == 0.0);
}

TEST_CASE("a single-method suite has gap zero by definition") {
    SuiteSpec suite = small_suite();
    suite.methods = {"gm"};
    suite.scale.n = 60; // large enough that the exact reference is unavailable
    suite.scale.p = 20;
    suite.scale.r = 8;
    suite.scale.count = 2;
    suite.caps.total_cap = 1000; // force the best-method-mean reference
    const BenchResult result = run_benchmark(suite);
    CHECK(result.reference_note == "reference best: best method mean (exact not enumerable)");
    CHECK(result.summaries[0].gap == 0.0);
}

TEST_CASE("reruns with the same seeds are identical except wall clocks") {
    const SuiteSpec suite = small_suite();
    const std::string a = records_csv(run_benchmark(suite).records);
    const std::string b = records_csv(run_benchmark(suite).records);
    CHECK(drop_wall_column(a) == drop_wall_column(b));
}

TEST_CASE("csv emission shapes") {
    const BenchResult result = run_benchmark(small_suite());
    const std::string rec_csv = records_csv(result.records);
    CHECK(rec_csv.find("instance_id,method,pre,post,obj,gap,wall_seconds,seed,config_digest,"
                       "timed_out") == 0);
    const std::string sum_csv = summary_csv(result);
    CHECK(sum_csv.find("# reference best: exact oracle") == 0);
    CHECK(summary_table(result).find("exact") != std::string::npos);
}

TEST_CASE("solve_with_method covers the classical tags on T1") {
    SuiteSpec suite = small_suite();
    const Instance t1 = make_t1();
    for (const std::string method :
         {"exact", "sequential", "gm", "stingy", "as", "ge", "gi", "sa", "ts", "ga", "vns"}) {
        const SolveOutcome out = solve_with_method(t1, method, suite);
        CHECK(out.eval.obj == 6); // T1 optimum; every method finds it
        CHECK_FALSE(out.timed_out);
    }
    CHECK_THROWS_AS(solve_with_method(t1, "nonsense", suite), std::invalid_argument);
}
