#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <json.hpp>

#include "medtest/dist_core.hpp"
#include "medtest/tables.hpp"
#include "medtest/test_rules.hpp"

using namespace medtest;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

CriticalTable small_table()
{
    return CriticalTable({{0.0, 1.0, kInf},
                          {0.05, 0.8744039853510005, chisq1_critical(0.05)},
                          {0.1, 0.83, chisq1_critical(0.1)},
                          {1.0, 0.0, 0.0}});
}

}  // namespace

TEST_CASE("statistics")
{
    CHECK(lr_statistic(4.0, 1.0) == 1.0);
    CHECK(lr_statistic(0.5, 3.0) == 0.5);
    CHECK(wald_statistic(0.0, 0.0) == 0.0);
    // 1 / W = 1 / v1 + 1 / v2
    CHECK(wald_statistic(2.0, 6.0) == doctest::Approx(1.0 / (1.0 / 2.0 + 1.0 / 6.0)));
}

TEST_CASE("LR and Wald decisions")
{
    const double c = chisq1_critical(0.05);
    CHECK(decide_lr(OrderedPair(c * 1.0001, 50.0), 0.05));
    CHECK_FALSE(decide_lr(OrderedPair(c * 0.9999, 50.0), 0.05));
    CHECK_FALSE(decide_wald(OrderedPair(c * 1.5, c * 1.5), 0.05));
    CHECK(decide_wald(OrderedPair(c * 2.5, c * 2.5), 0.05));
}

TEST_CASE("simply-augmented decision and causes")
{
    const CriticalPair cp{0.05, 0.874, chisq1_critical(0.05)};
    auto d = decide_simply_augmented(OrderedPair(5.0, 6.0), cp);
    CHECK(d.reject);
    CHECK(d.cause == RejectionCause::lr_boundary);
    d = decide_simply_augmented(OrderedPair(1.0, 1.1), cp);
    CHECK(d.reject);
    CHECK(d.cause == RejectionCause::ratio_boundary);
    d = decide_simply_augmented(OrderedPair(1.0, 2.0), cp);
    CHECK_FALSE(d.reject);
    CHECK(d.cause == RejectionCause::none);
    CHECK_FALSE(decide_simply_augmented(OrderedPair(0.0, 0.0), cp).reject);
    CHECK(std::string(to_string(RejectionCause::ratio_boundary)) == "ratio_boundary");
}

TEST_CASE("truncated decision only augments below the LR boundary")
{
    const double c = chisq1_critical(0.05);
    CHECK(decide_truncated(OrderedPair(3.0, 3.1), 0.05, 0.87));
    CHECK_FALSE(decide_truncated(OrderedPair(3.0, 6.0), 0.05, 0.87));
    CHECK(decide_truncated(OrderedPair(c + 0.01, 100.0), 0.05, 0.87));
}

TEST_CASE("exact test knots")
{
    const auto s0 = build_exact_spec(0);
    CHECK(s0.alpha == 0.5);
    REQUIRE(s0.knots.size() == 1);
    CHECK(s0.knots[0] == doctest::Approx(chisq1_critical(0.5)));
    const auto s18 = build_exact_spec(18);
    CHECK(s18.alpha == doctest::Approx(0.05));
    REQUIRE(s18.knots.size() == 19);
    for (std::size_t i = 0; i < s18.knots.size(); ++i)
        CHECK(s18.knots[i] == doctest::Approx(chisq1_quantile((i + 1) / 20.0)).epsilon(1e-12));
    CHECK(s18.knots.back() == doctest::Approx(chisq1_critical(0.05)).epsilon(1e-12));
    CHECK_THROWS(build_exact_spec(-1));
    CHECK(exact_r_for_alpha(0.05) == 18);
    CHECK(exact_r_for_alpha(0.5) == 0);
    CHECK_FALSE(exact_r_for_alpha(0.07).has_value());
    CHECK(exact_r_for_alpha(0.04) == 23);
    // Band [z_i, z_{i+1}) of v2 rejects once v1 reaches z_i.
    CHECK(decide_exact(OrderedPair(s18.knots[3] + 1e-9, s18.knots[4] - 1e-9), s18));
    CHECK_FALSE(decide_exact(OrderedPair(s18.knots[3] - 1e-6, s18.knots[4] - 1e-9), s18));
    CHECK(decide_exact(OrderedPair(0.0, s18.knots[0] * 0.5), s18));
}

TEST_CASE("critical table validation and lookup")
{
    const auto t = small_table();
    CHECK(t.size() == 4);
    CHECK(t.find(0.05).has_value());
    CHECK_FALSE(t.find(0.07).has_value());
    const auto mid = t.at(0.075);
    CHECK(mid.b == doctest::Approx(0.5 * (0.8744039853510005 + 0.83)));
    CHECK(mid.chi2 == doctest::Approx(chisq1_critical(0.075)));
    CHECK(t.alpha_for_ratio(0.83) == doctest::Approx(0.1));
    CHECK_THROWS(CriticalTable({{0.1, 0.8, 2.0}, {0.05, 0.9, 3.0}}));
    CHECK_THROWS(CriticalTable({{0.05, 0.8, 2.0}, {0.1, 0.9, 3.0}}));
    CHECK_THROWS(CriticalTable({{0.05, 1.2, 2.0}}));
}

TEST_CASE("critical table round trips are bit exact")
{
    const auto& t = builtin_table();
    std::ostringstream csv;
    t.write_csv(csv);
    std::istringstream in(csv.str());
    const auto back = CriticalTable::read_csv(in);
    REQUIRE(back.size() == t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        CHECK(back[i].alpha == t[i].alpha);
        CHECK(back[i].b == t[i].b);
        CHECK(back[i].chi2 == t[i].chi2);
    }
    const auto js = CriticalTable::from_json(t.to_json());
    REQUIRE(js.size() == t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        CHECK(js[i].b == t[i].b);
        CHECK(js[i].chi2 == t[i].chi2);
    }
    CHECK(nlohmann::json::parse(t.to_json())["rows"][0]["chi2"].is_null());
    std::istringstream bad("alpha,b,chi2\n0.05,x,3\n");
    CHECK_THROWS(CriticalTable::read_csv(bad));
}

TEST_CASE("p-values")
{
    const auto& t = builtin_table();
    CHECK(p_value(OrderedPair(0.0, 0.0), t) == 1.0);
    // Far from the diagonal the p-value is the LR one.
    const OrderedPair far(4.0, 40.0);
    CHECK(p_value(far, t) == doctest::Approx(nc_chisq1_sf(4.0, 0.0)).epsilon(1e-12));
    // Consistency with the decisions at tabled levels.
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 6.0);
    for (int i = 0; i < 2000; ++i) {
        const auto pt = OrderedPair::from_unordered(u(rng), u(rng));
        const double p = p_value(pt, t);
        for (double a : {0.02, 0.05, 0.2}) {
            const bool rej = decide_simply_augmented(pt, *t.find(a)).reject;
            if (p < a - 1e-9) CHECK(rej);
            if (p > a + 1e-9) CHECK_FALSE(rej);
        }
    }
}

TEST_CASE("coherence scans")
{
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 8.0);
    std::vector<OrderedPair> pts;
    for (int i = 0; i < 5000; ++i) pts.push_back(OrderedPair::from_unordered(u(rng), u(rng)));
    CHECK(coherence_scan(builtin_table(), pts).empty());

    // A family that rejects at .05 but not at .1 at one point.
    std::vector<LeveledRule> rules{{0.1, [](const OrderedPair& p) { return p.v1() > 2.0; }},
                                   {0.05, [](const OrderedPair& p) { return p.v1() > 1.0; }}};
    const auto v = coherence_scan(rules, {OrderedPair(1.5, 2.0), OrderedPair(3.0, 4.0)});
    REQUIRE(v.size() == 1);
    CHECK(v[0].alpha_low == 0.05);
    CHECK(v[0].alpha_high == 0.1);
}

TEST_CASE("report assembly")
{
    const auto& t = builtin_table();
    const auto r = evaluate_tests(1.12, -1.13, 0.05, t, 0.8697898480585877);
    CHECK(r.f1 == doctest::Approx(1.2544));
    CHECK(r.point.v2() == doctest::Approx(1.2769));
    CHECK_FALSE(r.decisions.lr);
    CHECK(r.decisions.simply_augmented);
    CHECK(r.cause == RejectionCause::ratio_boundary);
    CHECK(r.decisions.exact.has_value());
    const auto j = nlohmann::json::parse(to_json(r));
    for (const char* key : {"t1", "t2", "f1", "f2", "v1", "v2", "lr_stat", "wald_stat", "alpha", "decisions",
                            "p_value", "cause"})
        CHECK(j.contains(key));
    const auto r2 = evaluate_tests(1.0, 1.0, 0.07, t, 0.8);
    CHECK_FALSE(r2.decisions.exact.has_value());
    CHECK(nlohmann::json::parse(to_json(r2))["decisions"]["exact"].is_null());
}
