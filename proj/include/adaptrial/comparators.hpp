#pragma once

#include <adaptrial/analysis.hpp>
#include <adaptrial/datagen.hpp>
#include <adaptrial/error.hpp>
#include <adaptrial/rng.hpp>
#include <adaptrial/stat_kernel.hpp>
#include <adaptrial/trial_model.hpp>

#include <algorithm>
#include <array>
#include <string_view>
#include <vector>

namespace adaptrial {

enum class FixedDesign { MA1, MA2 };

inline std::string_view fixed_design_name(FixedDesign d) {
    return d == FixedDesign::MA1 ? "ma1" : "ma2";
}

struct HolmResult {
    DoseSet rejected;
    PerDose<double> adjusted;
};

struct FixedTrialResult {
    FixedDesign design = FixedDesign::MA2;
    DoseSet rejected;
    PerDose<PValue> raw_p;
    PerDose<double> adjusted_p;
    // MA1 only: whether the high-dose study was run.
    bool study2_run = false;
};

// Step-down Holm over the doses present in `p`.
inline HolmResult bonferroni_holm(const PerDose<PValue>& p, double level) {
    if (!(level > 0.0 && level < 1.0)) throw DomainError("Holm level must lie in (0,1)");
    std::vector<int> doses;
    for (int d = 1; d <= 3; ++d)
        if (p.has(d)) doses.push_back(d);
    std::stable_sort(doses.begin(), doses.end(),
                     [&](int a, int b) { return p[a]->value() < p[b]->value(); });
    HolmResult out;
    const double m = static_cast<double>(doses.size());
    double running = 0.0;
    bool stopped = false;
    for (std::size_t i = 0; i < doses.size(); ++i) {
        const int d = doses[i];
        const double adj = std::min(1.0, (m - static_cast<double>(i)) * p[d]->value());
        running = std::max(running, adj);
        out.adjusted[d] = running;
        if (!stopped && running <= level) {
            out.rejected.insert(d);
        } else {
            stopped = true;
        }
    }
    return out;
}

namespace detail {

// Floor share per arm, remainder to placebo.
inline std::array<int, 4> split_remainder_to_placebo(int total, DoseSet arms) {
    const int k = static_cast<int>(arms.size()) + 1;
    if (total < k) throw InputError("too few subjects for the fixed design");
    std::array<int, 4> n{};
    for (int d = 1; d <= 3; ++d)
        if (arms.contains(d)) n[d] = total / k;
    n[0] = total - (total / k) * (k - 1);
    return n;
}

}  // namespace detail

/*
 * MA1: study 1 randomises 3N/5 to placebo, low and medium and tests both
 * doses by Holm at 2 alpha / 3. Study 2 (high vs its own placebo, the
 * remaining 2N/5) runs only when study 1 rejects nothing, at alpha / 3.
 */
inline FixedTrialResult run_ma1(const CohortSampler& sampler, int N, double alpha,
                                Method method, RandomStream& rng,
                                RankTestMode mode = RankTestMode::automatic) {
    const int n_study1 = 3 * N / 5;
    FixedTrialResult out;
    out.design = FixedDesign::MA1;
    std::vector<SubjectRecord> records;
    sampler.sample(detail::split_remainder_to_placebo(n_study1, {1, 2}), 1, rng, records);
    const auto sp1 = stage_pvalues(records, method, 2, mode);
    PerDose<PValue> p1;
    p1[1] = sp1.p[1];
    p1[2] = sp1.p[2];
    const auto h1 = bonferroni_holm(p1, 2.0 * alpha / 3.0);
    out.raw_p = p1;
    out.adjusted_p = h1.adjusted;
    out.rejected = h1.rejected;
    if (!h1.rejected.empty()) return out;

    out.study2_run = true;
    sampler.sample(detail::split_remainder_to_placebo(N - n_study1, {3}), 1, rng, records);
    const auto sp2 = stage_pvalues(records, method, 2, mode);
    out.raw_p[3] = sp2.p[3];
    out.adjusted_p[3] = sp2.p[3]->value();
    if (sp2.p[3]->value() <= alpha / 3.0) out.rejected.insert(3);
    return out;
}

// MA2: N / 4 per arm, three comparisons against a shared placebo, Holm at alpha.
inline FixedTrialResult run_ma2(const CohortSampler& sampler, int N, double alpha,
                                Method method, RandomStream& rng,
                                RankTestMode mode = RankTestMode::automatic) {
    FixedTrialResult out;
    out.design = FixedDesign::MA2;
    std::vector<SubjectRecord> records;
    sampler.sample(detail::split_remainder_to_placebo(N, {1, 2, 3}), 1, rng, records);
    const auto sp = stage_pvalues(records, method, 2, mode);
    out.raw_p = sp.p;
    const auto h = bonferroni_holm(sp.p, alpha);
    out.adjusted_p = h.adjusted;
    out.rejected = h.rejected;
    return out;
}

inline FixedTrialResult run_ma1(const ScenarioSpec& scn, int N, double alpha, Method method,
                                RandomStream& rng) {
    return run_ma1(CohortSampler(scn), N, alpha, method, rng);
}

inline FixedTrialResult run_ma2(const ScenarioSpec& scn, int N, double alpha, Method method,
                                RandomStream& rng) {
    return run_ma2(CohortSampler(scn), N, alpha, method, rng);
}

}  // namespace adaptrial
