#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>

#include "mclip/instance.hpp"
#include "mclip/rng.hpp"

#include "fixtures.hpp"

using namespace mclip;

TEST_CASE("T1 neighbor sets match the hand-checked distances") {
    const Instance t1 = make_t1();
    // |AB| = 0.1 <= 0.15, |CD| = 0.1, every cross-cluster distance >= 0.8.
    CHECK(t1.neighbor_sets[0] == std::vector<int>{0, 1});
    CHECK(t1.neighbor_sets[1] == std::vector<int>{0, 1});
    CHECK(t1.neighbor_sets[2] == std::vector<int>{2, 3});
    CHECK(t1.neighbor_sets[3] == std::vector<int>{2, 3});
}

TEST_CASE("radius zero keeps only exactly coincident sites") {
    std::vector<Point> customers = {{0.0, 0.0}, {0.5, 0.5}};
    std::vector<Point> sites = {{0.0, 0.0}, {0.5, 0.5}, {0.5, 0.5}};
    const auto sets = build_neighbor_sets(customers, sites, 0.0);
    CHECK(sets[0] == std::vector<int>{0});
    CHECK(sets[1] == std::vector<int>{1, 2});
}

TEST_CASE("distance exactly equal to the radius is covered (closed ball)") {
    std::vector<Point> customers = {{0.0, 0.0}};
    std::vector<Point> sites = {{0.25, 0.0}};
    const auto sets = build_neighbor_sets(customers, sites, 0.25);
    CHECK(sets[0] == std::vector<int>{0});
}

TEST_CASE("generation: coordinates in the unit square, co-located lists") {
    GenSpec spec{.n = 20, .p = 4, .r = 1, .radius = 0.3, .seed = 42, .count = 3};
    const Instance inst = generate_uniform_instance(spec, 0);
    CHECK(inst.num_customers() == 20);
    CHECK(inst.num_sites() == 20);
    CHECK(inst.colocated());
    for (const auto& pt : inst.customers) {
        CHECK(pt[0] >= 0.0);
        CHECK(pt[0] <= 1.0);
        CHECK(pt[1] >= 0.0);
        CHECK(pt[1] <= 1.0);
    }
}

TEST_CASE("generation determinism: identical (seed,index) gives identical bytes") {
    GenSpec spec{.n = 20, .p = 4, .r = 1, .radius = 0.3, .seed = 42, .count = 2};
    const std::string a = serialize_instance(generate_uniform_instance(spec, 0));
    const std::string b = serialize_instance(generate_uniform_instance(spec, 0));
    CHECK(a == b);
    const std::string c = serialize_instance(generate_uniform_instance(spec, 1));
    CHECK(a != c);
}

TEST_CASE("single-point instance covers itself") {
    GenSpec spec{.n = 1, .p = 1, .r = 0, .radius = 0.3, .seed = 0, .count = 1};
    const Instance inst = generate_uniform_instance(spec, 0);
    CHECK(inst.neighbor_sets[0] == std::vector<int>{0});
}

TEST_CASE("invalid generation specs are rejected") {
    CHECK_THROWS_AS(generate_uniform_instance({.n = 4, .p = 5, .r = 0, .radius = 0.3, .seed = 0, .count = 1}, 0),
                    std::invalid_argument);
    CHECK_THROWS_AS(generate_uniform_instance({.n = 4, .p = 2, .r = 3, .radius = 0.3, .seed = 0, .count = 1}, 0),
                    std::invalid_argument);
    CHECK_THROWS_AS(generate_uniform_instance({.n = 4, .p = 2, .r = 1, .radius = 0.0, .seed = 0, .count = 1}, 0),
                    std::invalid_argument);
    GenSpec ok{.n = 4, .p = 2, .r = 1, .radius = 0.3, .seed = 0, .count = 1};
    CHECK_THROWS_AS(generate_uniform_instance(ok, 1), std::invalid_argument);
}

TEST_CASE("serialize/parse round trip") {
    const Instance t1 = make_t1();
    const Instance back = parse_instance(serialize_instance(t1));
    CHECK(back.customers == t1.customers);
    CHECK(back.sites == t1.sites);
    CHECK(back.radius == t1.radius);
    CHECK(back.p == t1.p);
    CHECK(back.r == t1.r);
    CHECK(back.neighbor_sets == t1.neighbor_sets);
}

TEST_CASE("parse errors name the offending field") {
    CHECK_THROWS_WITH_AS(
        parse_instance(R"({"version":1,"customers":[[0,0]],"sites":[[0,0]],"radius":0.1,"p":4,"r":5})"),
        "r exceeds p", std::invalid_argument);
    CHECK_THROWS_WITH_AS(
        parse_instance(R"({"version":1,"customers":[[0,0]],"radius":0.1,"p":1,"r":0})"),
        "missing field sites", std::invalid_argument);
    CHECK_THROWS_AS(parse_instance("not json"), std::invalid_argument);
}

TEST_CASE("co-location makes neighbor membership symmetric") {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        const Instance inst = random_small_instance(rng);
        for (int i = 0; i < inst.num_customers(); ++i) {
            for (int j : inst.neighbor_sets[i]) {
                const auto& nj = inst.neighbor_sets[j];
                CHECK(std::binary_search(nj.begin(), nj.end(), i));
            }
        }
    }
}
