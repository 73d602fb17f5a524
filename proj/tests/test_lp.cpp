#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <map>

#include "mclip/exact.hpp"
#include "mclip/lp_model.hpp"
#include "mclip/rng.hpp"

#include "fixtures.hpp"

using namespace mclip;

namespace {

std::map<std::string, int> count_rows_by_prefix(const LpFile& lp) {
    std::map<std::string, int> counts;
    for (const auto& row : lp.rows) {
        const std::size_t underscore = row.name.find('_');
        counts[row.name.substr(0, underscore)]++;
    }
    return counts;
}

} // namespace

TEST_CASE("T1 export has the closed-form constraint counts") {
    const Instance t1 = make_t1();

    const LpFile plain = parse_lp(export_single_level_lp(t1, false));
    auto counts = count_rows_by_prefix(plain);
    CHECK(counts["e9"] == 2);   // |K|
    CHECK(counts["e10"] == 4);  // |J|
    CHECK(counts["e11"] == 4);  // |I|
    CHECK(counts["e12"] == 8);  // |Omega| * |I|
    CHECK(counts["e13"] == 2);  // |Omega|
    CHECK(counts["e14"] == 0);

    const LpFile sym = parse_lp(export_single_level_lp(t1, true));
    counts = count_rows_by_prefix(sym);
    CHECK(counts["e14"] == 4);  // (p-1) * |J|
}

TEST_CASE("pattern count for the small synthetic scale") {
    GenSpec spec{.n = 20, .p = 4, .r = 1, .radius = 0.3, .seed = 3, .count = 1};
    const Instance inst = generate_uniform_instance(spec, 0);
    const SingleLevelModel model = build_single_level_model(inst, true);
    CHECK(model.patterns.size() == 4); // C(4,1)
}

TEST_CASE("export round-trips through the module's own reader") {
    const Instance t1 = make_t1();
    const std::string text = export_single_level_lp(t1, true);
    const LpFile lp = parse_lp(text);
    CHECK(lp.maximize);
    CHECK(lp.objective.size() == 5);          // 4 y's + zp
    CHECK(lp.objective.count("zp") == 1);
    CHECK(lp.binaries.size() == 8);           // |J| * p
    CHECK(lp.bounds.at("y_1") == std::pair<double, double>{0.0, 1.0});
    CHECK(lp.bounds.at("zp").first == 0.0);
}

TEST_CASE("brute-force optimum of the export equals the exact solver on T1") {
    const Instance t1 = make_t1();
    const double with_sym = lp_brute_force_optimum(parse_lp(export_single_level_lp(t1, true)));
    const double without = lp_brute_force_optimum(parse_lp(export_single_level_lp(t1, false)));
    const ExactResult res = exact_solve(t1);
    CHECK(with_sym == doctest::Approx(res.eval.obj).epsilon(1e-12));
    CHECK(without == doctest::Approx(res.eval.obj).epsilon(1e-12));
}

TEST_CASE("export equivalence holds on random small instances") {
    Rng rng(29);
    for (int trial = 0; trial < 8; ++trial) {
        const Instance inst = random_small_instance(rng, 8, 3, 2);
        const double lp_opt = lp_brute_force_optimum(parse_lp(export_single_level_lp(inst, true)));
        CHECK(lp_opt == doctest::Approx(exact_solve(inst).eval.obj).epsilon(1e-12));
    }
}

TEST_CASE("pattern cap exceeded is an explicit error") {
    GenSpec spec{.n = 40, .p = 20, .r = 10, .radius = 0.3, .seed = 7, .count = 1};
    const Instance inst = generate_uniform_instance(spec, 0);
    CHECK_THROWS_AS(export_single_level_lp(inst, true), std::runtime_error);
}
