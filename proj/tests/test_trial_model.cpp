#include <adaptrial/trial_model.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace adaptrial;

TEST(DoseSet, MembershipAndFormatting) {
    const DoseSet s{1, 3};
    EXPECT_TRUE(s.contains(1));
    EXPECT_FALSE(s.contains(2));
    EXPECT_TRUE(s.contains(DoseId::high));
    EXPECT_FALSE(s.contains(0));
    EXPECT_EQ(s.size(), 2u);
    EXPECT_EQ(s.str(), "{1,3}");
    EXPECT_EQ(s.digits(), "13");
    EXPECT_EQ(DoseSet{}.str(), "{}");
    EXPECT_EQ((s & DoseSet{3, 2}), DoseSet{3});
    EXPECT_EQ((s | DoseSet{2}), (DoseSet{1, 2, 3}));
    EXPECT_TRUE(DoseSet{3}.subset_of(s));
    EXPECT_EQ(DoseSet::from_mask(0b101), s);
}

TEST(DoseId, FromInt) {
    EXPECT_EQ(dose_from_int(2), DoseId::medium);
    EXPECT_THROW(dose_from_int(4), InputError);
}

TEST(DesignConfig, WeightsFromSampleSizes) {
    const auto c = validate_config(DesignConfig{});
    EXPECT_NEAR(c.w1, 0.7745967, 1e-7);
    EXPECT_NEAR(c.w2, 0.6324555, 1e-7);
    EXPECT_NEAR(c.w1 * c.w1 + c.w2 * c.w2, 1.0, 1e-15);
    EXPECT_EQ(c.N2(), 80);
}

TEST(DesignConfig, RejectsBrokenInvariants) {
    auto bad = [](auto edit) {
        DesignConfig c;
        edit(c);
        return c;
    };
    EXPECT_THROW(validate_config(bad([](DesignConfig& c) { c.N1 = c.N; })), ValidationError);
    EXPECT_THROW(validate_config(bad([](DesignConfig& c) { c.N1 = 0; })), ValidationError);
    EXPECT_THROW(validate_config(bad([](DesignConfig& c) { c.alpha = 0.5; })), ValidationError);
    EXPECT_THROW(validate_config(bad([](DesignConfig& c) { c.alpha1 = 1.0; })), ValidationError);
    EXPECT_THROW(validate_config(bad([](DesignConfig& c) { c.N = -1; })), ValidationError);
    try {
        validate_config(bad([](DesignConfig& c) { c.alpha1 = 0.0; }));
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_EQ(e.field(), "alpha1");
    }
}

TEST(Scenarios, TrendAReductionRates) {
    const auto all = builtin_scenarios(Disease::mansonellosis, ScenarioVariant::standard);
    const auto& s = find_scenario(all, "Trend (a)");
    EXPECT_DOUBLE_EQ(s.r(DoseId::low, 1), 0.0);
    EXPECT_DOUBLE_EQ(s.r(DoseId::medium, 1), 0.30);
    EXPECT_DOUBLE_EQ(s.r(DoseId::high, 1), 0.50);
    EXPECT_DOUBLE_EQ(s.r(DoseId::medium, 2), 0.40);
    EXPECT_DOUBLE_EQ(s.r(DoseId::high, 2), 0.60);
    EXPECT_DOUBLE_EQ(s.baseline_mean, 1838);
    EXPECT_DOUBLE_EQ(s.baseline_sd, 2565);
    EXPECT_EQ(&find_scenario(all, "trend_a"), &s);
}

TEST(Scenarios, ResponderRates) {
    for (auto d : {Disease::mansonellosis, Disease::onchocerciasis, Disease::loiasis}) {
        const auto all = builtin_scenarios(d, ScenarioVariant::standard);
        const auto& none = find_scenario(all, "no_effect");
        for (auto j : kAllDoses) EXPECT_DOUBLE_EQ(none.pi(j), 0.10);
        for (auto j : kAllDoses) EXPECT_TRUE(none.is_null(j));
        const auto& high = find_scenario(all, "high_only");
        EXPECT_NEAR(high.pi(DoseId::high), 0.40, 1e-15);
        EXPECT_TRUE(high.is_null(DoseId::low));
        EXPECT_FALSE(high.is_null(DoseId::high));
        EXPECT_NEAR(find_scenario(all, "all_effective").pi(DoseId::low), 0.30, 1e-15);
    }
}

TEST(Scenarios, Baselines) {
    auto base = [](Disease d, ScenarioVariant v) {
        const auto s = builtin_scenarios(d, v).front();
        return std::pair{s.baseline_mean, s.baseline_sd};
    };
    EXPECT_EQ(base(Disease::onchocerciasis, ScenarioVariant::standard), (std::pair{19.0, 30.0}));
    EXPECT_EQ(base(Disease::loiasis, ScenarioVariant::standard), (std::pair{5000.0, 4000.0}));
    EXPECT_EQ(base(Disease::loiasis, ScenarioVariant::modified_baseline),
              (std::pair{4000.0, 5000.0}));
    EXPECT_EQ(base(Disease::mansonellosis, ScenarioVariant::modified_baseline),
              (std::pair{1000.0, 3500.0}));
    EXPECT_EQ(base(Disease::onchocerciasis, ScenarioVariant::modified_baseline),
              (std::pair{15.0, 40.0}));
}

TEST(Scenarios, InvariantsHoldForEveryBuiltin) {
    for (auto d : {Disease::mansonellosis, Disease::onchocerciasis, Disease::loiasis}) {
        for (auto v : {ScenarioVariant::standard, ScenarioVariant::modified_rates,
                       ScenarioVariant::modified_baseline}) {
            const auto a = builtin_scenarios(d, v);
            const auto b = builtin_scenarios(d, v);
            ASSERT_EQ(a.size(), 5u);
            const char* order[] = {"no_effect", "high_only", "trend_a", "trend_b", "all_effective"};
            for (std::size_t i = 0; i < a.size(); ++i) {
                EXPECT_EQ(scenario_slug(a[i].label), order[i]);
                EXPECT_EQ(a[i].reduction, b[i].reduction);
                EXPECT_NO_THROW(validate_scenario(a[i]));
                for (int j = 1; j <= 3; ++j) {
                    EXPECT_GE(a[i].pi(static_cast<DoseId>(j)), 0.0);
                    EXPECT_LE(a[i].pi(static_cast<DoseId>(j)), 1.0);
                    EXPECT_LE(a[i].reduction[j][0], a[i].reduction[j][1]);
                }
            }
        }
    }
}

TEST(Scenarios, ModifiedRatesLowerMonthSix) {
    const auto s = find_scenario(
        builtin_scenarios(Disease::mansonellosis, ScenarioVariant::modified_rates), "trend_b");
    EXPECT_DOUBLE_EQ(s.r(DoseId::medium, 1), 0.30);
    EXPECT_DOUBLE_EQ(s.r(DoseId::high, 1), 0.40);
    EXPECT_DOUBLE_EQ(s.r(DoseId::medium, 2), 0.50);
}

TEST(Scenarios, UnknownNamesThrow) {
    EXPECT_THROW(disease_from_name("malaria"), InputError);
    EXPECT_THROW(variant_from_name("x"), InputError);
    EXPECT_THROW(find_scenario(builtin_scenarios(Disease::loiasis, ScenarioVariant::standard), "x"),
                 InputError);
    EXPECT_THROW(method_from_name("t-test"), InputError);
}

TEST(Json, ConfigRoundTrip) {
    DesignConfig c;
    c.N1 = 100;
    c.alpha1 = 0.2;
    c.method = Method::wilcox_cc;
    c.realloc_mode = ReallocMode::pooled;
    const nlohmann::json j = c;
    const auto back = j.get<DesignConfig>();
    EXPECT_EQ(back.N1, 100);
    EXPECT_DOUBLE_EQ(back.alpha1, 0.2);
    EXPECT_EQ(back.method, Method::wilcox_cc);
    EXPECT_EQ(back.realloc_mode, ReallocMode::pooled);
}

TEST(Json, ScenarioRoundTrip) {
    const auto s = builtin_scenarios(Disease::onchocerciasis, ScenarioVariant::standard)[3];
    const nlohmann::json j = s;
    const auto back = j.get<ScenarioSpec>();
    EXPECT_EQ(back.label, s.label);
    EXPECT_EQ(back.reduction, s.reduction);
    EXPECT_EQ(back.responder, s.responder);
    EXPECT_DOUBLE_EQ(back.baseline_sd, s.baseline_sd);
}
