#pragma once

#include <adaptrial/error.hpp>
#include <adaptrial/stat_kernel.hpp>
#include <adaptrial/trial_model.hpp>

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace adaptrial {

struct StagePValues {
    int stage = 1;
    int endpoint_time = 2;
    PerDose<PValue> p;
    // Concordance of the analysed outcome (x_t, or x_t - x0 for wilcox_cc).
    PerDose<Concordance> c;

    DoseSet doses() const {
        DoseSet s;
        for (int d = 1; d <= 3; ++d)
            if (p.has(d)) s.insert(d);
        return s;
    }
};

namespace detail {

// Outcome used by the rank methods: x_t, or the change x_t - x0 for wilcox_cc.
inline double rank_outcome(const SubjectRecord& r, Method m, int t) {
    return m == Method::wilcox_cc ? r.at(t) - r.x0 : r.at(t);
}

}  // namespace detail

/*
 * Stage-wise one-sided p-values of each active arm present in `records`
 * against placebo, at follow-up t (1 = Month 6, 2 = Month 12). `records` must
 * come from a single stage.
 */
inline StagePValues stage_pvalues(std::span<const SubjectRecord> records, Method method,
                                  int endpoint_time,
                                  RankTestMode mode = RankTestMode::automatic) {
    if (endpoint_time != 1 && endpoint_time != 2) {
        throw InputError("endpoint time must be 1 or 2");
    }
    StagePValues out;
    out.endpoint_time = endpoint_time;
    if (records.empty()) throw InputError("no subject records");
    out.stage = records.front().stage;

    std::array<std::vector<double>, 4> arm;
    for (const auto& r : records) {
        if (r.stage != out.stage) throw InputError("records mix stage 1 and stage 2");
        arm[index(r.dose)].push_back(detail::rank_outcome(r, method, endpoint_time));
    }
    if (arm[0].empty()) throw InputError("placebo arm is empty");

    std::vector<int> active;
    for (int d = 1; d <= 3; ++d)
        if (!arm[d].empty()) active.push_back(d);
    if (active.empty()) throw InputError("no active arm present");

    if (method == Method::lm) {
        std::vector<double> y, base;
        std::vector<std::vector<double>> ind(active.size());
        y.reserve(records.size());
        base.reserve(records.size());
        for (const auto& r : records) {
            y.push_back(std::log1p(r.at(endpoint_time)));
            base.push_back(std::log1p(r.x0));
            for (std::size_t k = 0; k < active.size(); ++k) {
                ind[k].push_back(index(r.dose) == active[k] ? 1.0 : 0.0);
            }
        }
        const auto ps = ols_one_sided_pvalues(y, ind, base);
        for (std::size_t k = 0; k < active.size(); ++k) {
            out.p[active[k]] = ps[k];
            out.c[active[k]] = concordance(arm[active[k]], arm[0]);
        }
        return out;
    }

    for (int d : active) {
        if (mode == RankTestMode::automatic) {
            const auto rc = rank_compare(arm[d], arm[0]);
            out.p[d] = rc.p;
            out.c[d] = rc.c;
        } else {
            out.p[d] = rank_sum_pvalue(arm[d], arm[0], mode);
            out.c[d] = concordance(arm[d], arm[0]);
        }
    }
    return out;
}

// Interim rule on the Month-6 stage-1 p-values; "below" is strict.
inline SelectionOutcome interim_select(PValue p_low, PValue p_med, double alpha1) {
    const bool low = p_low.value() < alpha1;
    const bool med = p_med.value() < alpha1;
    SelectionOutcome s;
    if (low && med) {
        s.K = {1, 2};
        s.selection_case = SelectionCase::i;
    } else if (low) {
        s.K = {1, 2};
        s.selection_case = SelectionCase::ii;
    } else if (med) {
        s.K = {2, 3};
        s.selection_case = SelectionCase::iii;
    } else {
        s.K = {3};
        s.selection_case = SelectionCase::iv;
    }
    return s;
}

/*
 * Equal split of `total` over placebo plus the arms in `arms`: floor share
 * each, remainder one per arm starting at placebo, then ascending dose.
 */
inline std::array<int, 4> split_equally(int total, DoseSet arms) {
    const int k = static_cast<int>(arms.size()) + 1;
    if (total < k) {
        throw InputError("cannot split " + std::to_string(total) + " subjects over " +
                         std::to_string(k) + " arms");
    }
    std::array<int, 4> n{};
    int rem = total % k;
    const int base = total / k;
    for (int d = 0; d <= 3; ++d) {
        if (d != 0 && !arms.contains(d)) continue;
        n[d] = base + (rem > 0 ? 1 : 0);
        if (rem > 0) --rem;
    }
    return n;
}

inline std::array<int, 4> allocate_stage2(int N2, DoseSet K) {
    if (K.empty()) throw InputError("selected dose set is empty");
    return split_equally(N2, K);
}

// Stage 1 randomises N1 over placebo, low and medium.
inline std::array<int, 4> allocate_stage1(int N1) { return split_equally(N1, {1, 2}); }

inline SelectionOutcome select_and_allocate(PValue p_low, PValue p_med,
                                            const DesignConfig& cfg) {
    auto s = interim_select(p_low, p_med, cfg.alpha1);
    s.n2_per_arm = allocate_stage2(cfg.N2(), s.K);
    return s;
}

}  // namespace adaptrial
