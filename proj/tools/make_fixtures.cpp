// Builds the two worked-example cohorts under tests/fixtures/. Starting from
// simulated data, single-subject follow-up values are perturbed until every
// stage-wise p-value and the observed Month-12 concordances round to the
// published example values.
//
// usage: make_fixtures OUT_DIR [SEED]

#include <adaptrial/adaptrial.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

using namespace adaptrial;

namespace {

struct Target {
    const char* name;
    double value;  // published, rounded to `decimals`
    int decimals;
};

struct Stats {
    double m6_low, m6_med, m12_low, m12_med;
    PerDose<double> s2;
    PerDose<double> point, lower;
};

struct Example {
    std::string file;
    std::string scenario;
    DoseSet K;
    // Stage-1 responder rate override for placebo and low dose (negative: keep).
    double stage1_responders = -1.0;
    std::vector<std::pair<Target, std::function<double(const Stats&)>>> targets;
};

double round1(double v) { return std::round(v * 10.0) / 10.0; }

Stats compute(const std::vector<SubjectRecord>& s1, const std::vector<SubjectRecord>& s2,
              DoseSet K) {
    Stats st{};
    const auto m6 = stage_pvalues(s1, Method::wilcox_c, 1);
    const auto a = stage_pvalues(s1, Method::wilcox_c, 2);
    const auto b = stage_pvalues(s2, Method::wilcox_c, 2);
    st.m6_low = *m6.p[1];
    st.m6_med = *m6.p[2];
    st.m12_low = *a.p[1];
    st.m12_med = *a.p[2];
    std::array<std::vector<double>, 4> arm1, arm2;
    for (const auto& r : s1) arm1[index(r.dose)].push_back(r.x2);
    for (const auto& r : s2) arm2[index(r.dose)].push_back(r.x2);
    for (int d : K.members()) {
        st.s2[d] = b.p[d]->value();
        std::vector<double> t(arm2[d]), c(arm2[0]);
        if (d != 3) {
            t.insert(t.end(), arm1[d].begin(), arm1[d].end());
            c.insert(c.end(), arm1[0].begin(), arm1[0].end());
        }
        const auto e = estimate_pooled(t, c, 0);
        st.point[d] = e.point;
        st.lower[d] = e.ci_lower;
    }
    return st;
}

// Squared distance outside the central 80% of each rounding interval.
double penalty(const Example& ex, const Stats& st) {
    double pen = 0.0;
    for (const auto& [t, get] : ex.targets) {
        const double w = std::pow(10.0, -t.decimals);
        const double lo = t.value - 0.4 * w;
        const double hi = t.value + 0.4 * w;
        const double v = get(st);
        const double d = v < lo ? lo - v : (v > hi ? v - hi : 0.0);
        pen += (d / w) * (d / w);
    }
    return pen;
}

bool solve(const Example& ex, std::uint64_t seed, const std::string& out_dir) {
    const auto scn = find_scenario(
        builtin_scenarios(Disease::mansonellosis, ScenarioVariant::standard), ex.scenario);
    RandomStream rng(seed);
    ScenarioSpec scn1 = scn;
    if (ex.stage1_responders >= 0.0) {
        scn1.responder[0] = scn1.responder[1] = ex.stage1_responders;
    }
    auto s1 = sample_cohort(allocate_stage1(120), scn1, 1, rng);
    auto s2 = sample_cohort(allocate_stage2(80, ex.K), scn, 2, rng);
    for (auto* v : {&s1, &s2}) {
        for (auto& r : *v) {
            r.x0 = std::max(0.1, round1(r.x0));
            r.x1 = round1(r.x1);
            r.x2 = round1(r.x2);
        }
    }
    double cur = penalty(ex, compute(s1, s2, ex.K));
    constexpr long kIterations = 300000;
    for (long it = 0; it < kIterations && cur > 0.0; ++it) {
        // Annealing temperature, zero over the last third.
        const double temp = std::max(0.0, 0.02 * (1.0 - 1.5 * static_cast<double>(it) / kIterations));
        auto& pool = rng.uniform() < 0.6 ? s1 : s2;
        auto pick = [&] { return static_cast<std::size_t>(rng.uniform() * pool.size()); };
        auto& r = pool[pick()];
        const SubjectRecord saved = r;
        const double move = rng.uniform();
        if (move < 0.1) {
            // Toggle total response; the rank-sum variance reacts through the tie term.
            if (r.responder) {
                const auto& donor = pool[pick()];
                if (donor.responder) continue;
                r.responder = false;
                r.x1 = donor.x1;
                r.x2 = donor.x2;
            } else {
                r.responder = true;
                r.x1 = r.x2 = 0.0;
            }
        } else if (r.responder) {
            continue;
        } else if (move < 0.25) {
            // Copy a follow-up value from another subject to create a tie.
            const auto& donor = pool[pick()];
            if (donor.responder) continue;
            if (rng.uniform() < 0.5) {
                r.x1 = donor.x1;
            } else {
                r.x2 = donor.x2;
            }
        } else {
            double& x = rng.uniform() < 0.5 ? r.x1 : r.x2;
            x = std::max(0.1, round1(x * std::exp(0.4 * rng.normal())));
        }
        const double pen = penalty(ex, compute(s1, s2, ex.K));
        if (pen <= cur || (temp > 0.0 && rng.uniform() < std::exp((cur - pen) / temp))) {
            cur = pen;
        } else {
            r = saved;
        }
    }
    const auto st = compute(s1, s2, ex.K);
    std::cerr << ex.file << ":";
    for (const auto& [t, get] : ex.targets) std::cerr << " " << t.name << "=" << get(st);
    std::cerr << "\n";
    if (cur > 0.0) {
        std::cerr << ex.file << ": no solution (penalty " << cur << ")\n";
        return false;
    }
    std::vector<SubjectRecord> all(s1);
    all.insert(all.end(), s2.begin(), s2.end());
    std::ofstream f(out_dir + "/" + ex.file);
    write_cohort_csv(f, all);
    return true;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: make_fixtures OUT_DIR [SEED]\n";
        return 1;
    }
    const std::string out = argv[1];
    const std::uint64_t seed = argc > 2 ? std::stoull(argv[2]) : 20240607;

    // Without a large zero tie group the continuity-corrected rank-sum p of a
    // 40 vs 40 comparison near 0.39 moves in steps of about 0.002 and skips
    // 0.391, so the trend cohort starts with more total responders.
    Example trend{"trend.csv", "trend_a", {2, 3}, 0.25, {}};
    trend.targets = {
        {{"p_low_m6", 0.391, 3}, [](const Stats& s) { return s.m6_low; }},
        {{"p_med_m6", 0.047, 3}, [](const Stats& s) { return s.m6_med; }},
        {{"p_low_m12_s1", 0.692, 3}, [](const Stats& s) { return s.m12_low; }},
        {{"p_med_m12_s1", 0.057, 3}, [](const Stats& s) { return s.m12_med; }},
        {{"p_med_s2", 0.015, 3}, [](const Stats& s) { return *s.s2[2]; }},
        {{"p_high_s2", 0.000, 3}, [](const Stats& s) { return *s.s2[3]; }},
        {{"c_med", 0.64, 2}, [](const Stats& s) { return *s.point[2]; }},
        {{"ci_med", 0.54, 2}, [](const Stats& s) { return *s.lower[2]; }},
        {{"c_high", 0.87, 2}, [](const Stats& s) { return *s.point[3]; }},
        {{"ci_high", 0.73, 2}, [](const Stats& s) { return *s.lower[3]; }},
    };
    Example alleff{"all_effective.csv", "all_effective", {1, 2}, -1.0, {}};
    alleff.targets = {
        {{"p_low_m6", 0.002, 3}, [](const Stats& s) { return s.m6_low; }},
        {{"p_med_m6", 0.005, 3}, [](const Stats& s) { return s.m6_med; }},
        {{"p_low_m12_s1", 0.009, 3}, [](const Stats& s) { return s.m12_low; }},
        {{"p_med_m12_s1", 0.001, 3}, [](const Stats& s) { return s.m12_med; }},
        {{"p_low_s2", 0.045, 3}, [](const Stats& s) { return *s.s2[1]; }},
        {{"p_med_s2", 0.014, 3}, [](const Stats& s) { return *s.s2[2]; }},
        {{"c_low", 0.65, 2}, [](const Stats& s) { return *s.point[1]; }},
        {{"ci_low", 0.55, 2}, [](const Stats& s) { return *s.lower[1]; }},
        {{"c_med", 0.70, 2}, [](const Stats& s) { return *s.point[2]; }},
        {{"ci_med", 0.60, 2}, [](const Stats& s) { return *s.lower[2]; }},
    };
    bool ok = true;
    for (const Example* ex : {&trend, &alleff}) {
        bool solved = false;
        for (std::uint64_t k = 0; k < 20 && !solved; ++k) solved = solve(*ex, seed + 1000 * k, out);
        ok = ok && solved;
    }
    return ok ? 0 : 2;
}
