#include <adaptrial/comparators.hpp>

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace adaptrial;

namespace {

PerDose<PValue> pmap(std::initializer_list<std::pair<int, double>> kv) {
    PerDose<PValue> p;
    for (auto [d, v] : kv) p[d] = PValue(v);
    return p;
}

// Holm written as the textbook loop over sorted p-values.
DoseSet holm_by_hand(const PerDose<PValue>& p, double level) {
    std::vector<std::pair<double, int>> v;
    for (int d = 1; d <= 3; ++d)
        if (p.has(d)) v.emplace_back(p[d]->value(), d);
    std::sort(v.begin(), v.end());
    DoseSet out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i].first > level / static_cast<double>(v.size() - i)) break;
        out.insert(v[i].second);
    }
    return out;
}

}  // namespace

TEST(Holm, Examples) {
    const auto h = bonferroni_holm(pmap({{1, 0.001}, {2, 0.5}}), 0.05);
    EXPECT_EQ(h.rejected, DoseSet{1});
    EXPECT_DOUBLE_EQ(*h.adjusted[1], 0.002);
    EXPECT_DOUBLE_EQ(*h.adjusted[2], 0.5);
    EXPECT_TRUE(bonferroni_holm(pmap({{1, 1.0}, {2, 1.0}, {3, 1.0}}), 0.05).rejected.empty());
    EXPECT_EQ(bonferroni_holm(pmap({{3, 0.04}}), 0.05).rejected, DoseSet{3});
    EXPECT_TRUE(bonferroni_holm(pmap({{3, 0.06}}), 0.05).rejected.empty());
    EXPECT_THROW(bonferroni_holm(pmap({{1, 0.1}}), 1.5), DomainError);
}

TEST(Holm, MatchesHandRuleAndContainsBonferroni) {
    RandomStream rng(17);
    for (int rep = 0; rep < 5000; ++rep) {
        const auto p = pmap({{1, std::pow(rng.uniform(), 3)},
                             {2, std::pow(rng.uniform(), 3)},
                             {3, std::pow(rng.uniform(), 3)}});
        const double level = 0.025;
        const auto h = bonferroni_holm(p, level);
        EXPECT_EQ(h.rejected, holm_by_hand(p, level));
        for (int d = 1; d <= 3; ++d) {
            if (p[d]->value() * 3 <= level) EXPECT_TRUE(h.rejected.contains(d));
            EXPECT_EQ(h.rejected.contains(d), *h.adjusted[d] <= level);
        }
    }
}

TEST(Ma1, ArmSizes) {
    EXPECT_EQ(detail::split_remainder_to_placebo(120, {1, 2}), (std::array<int, 4>{40, 40, 40, 0}));
    EXPECT_EQ(detail::split_remainder_to_placebo(80, {3}), (std::array<int, 4>{40, 0, 0, 40}));
    EXPECT_EQ(detail::split_remainder_to_placebo(200, {1, 2, 3}),
              (std::array<int, 4>{50, 50, 50, 50}));
    EXPECT_EQ(detail::split_remainder_to_placebo(202, {1, 2, 3}),
              (std::array<int, 4>{52, 50, 50, 50}));
}

TEST(Ma1, GatingAndLevels) {
    const auto all = builtin_scenarios(Disease::mansonellosis, ScenarioVariant::standard);
    int ran = 0, gated = 0;
    for (std::uint64_t s = 0; s < 400; ++s) {
        RandomStream rng(s);
        const auto r = run_ma1(all[4], 200, 0.025, Method::wilcox_c, rng);
        EXPECT_EQ(r.design, FixedDesign::MA1);
        const bool study1 = r.rejected.contains(1) || r.rejected.contains(2);
        EXPECT_EQ(r.study2_run, !study1);
        EXPECT_EQ(r.raw_p.has(3), r.study2_run);
        if (r.study2_run) {
            ++ran;
            EXPECT_EQ(r.rejected.contains(3), r.raw_p[3]->value() <= 0.025 / 3);
        } else {
            ++gated;
        }
        const auto h = bonferroni_holm(pmap({{1, r.raw_p[1]->value()}, {2, r.raw_p[2]->value()}}),
                                       2 * 0.025 / 3);
        EXPECT_EQ(h.rejected, (r.rejected & DoseSet{1, 2}));
    }
    EXPECT_GT(ran, 0);
    EXPECT_GT(gated, 0);
}

TEST(Ma2, HolmAtAlphaOverThreeArms) {
    const auto all = builtin_scenarios(Disease::mansonellosis, ScenarioVariant::standard);
    for (std::uint64_t s = 0; s < 100; ++s) {
        RandomStream rng(s);
        const auto r = run_ma2(all[2], 200, 0.025, Method::wilcox_c, rng);
        ASSERT_TRUE(r.raw_p.has(1) && r.raw_p.has(2) && r.raw_p.has(3));
        EXPECT_EQ(r.rejected, bonferroni_holm(r.raw_p, 0.025).rejected);
    }
}

TEST(Ma2, NullRejectionRateControlled) {
    const auto scn = builtin_scenarios(Disease::mansonellosis, ScenarioVariant::standard)[0];
    const CohortSampler sampler(scn);
    constexpr int kRuns = 20000;
    int any = 0;
    for (int i = 0; i < kRuns; ++i) {
        auto rng = RandomStream::derive(31, {static_cast<std::uint64_t>(i)});
        any += !run_ma2(sampler, 200, 0.025, Method::wilcox_c, rng).rejected.empty();
    }
    const double rate = static_cast<double>(any) / kRuns;
    EXPECT_LE(rate, 0.025 + 3 * std::sqrt(0.025 * 0.975 / kRuns));
}
