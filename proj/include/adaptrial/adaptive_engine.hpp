#pragma once

#include <adaptrial/error.hpp>
#include <adaptrial/stat_kernel.hpp>
#include <adaptrial/trial_model.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

namespace adaptrial {

inline constexpr double kPValueClamp = 1e-15;

namespace detail {

inline double clamp_p(double p) { return std::clamp(p, kPValueClamp, 1.0 - kPValueClamp); }

// Phi^{-1}(1 - p) with the clamp applied.
inline double z_upper(double p) { return norm_quantile_upper(clamp_p(p)); }

}  // namespace detail

// Weighted inverse-normal combination of two independent stage-wise p-values.
inline PValue combine_pvalue(PValue p1, PValue p2, double w1, double w2) {
    const double z = w1 * detail::z_upper(p1) + w2 * detail::z_upper(p2);
    return PValue(norm_sf(z));
}

// Conditional probability, given the stage-1 p-value, that the level-gamma
// combination test rejects.
inline double partial_conditional_error(PValue p1, double gamma, double w1, double w2) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("gamma must lie in (0,1)");
    if (!(w2 > 0.0)) throw DomainError("stage-2 weight must be positive");
    const double z = (norm_quantile_upper(gamma) - w1 * detail::z_upper(p1)) / w2;
    return norm_sf(z);
}

/*
 * A_j at levels alpha/1, alpha/2, alpha/3. Dose 3 has no stage-1 data, so
 * its entries are the levels themselves.
 */
struct ConditionalErrorTable {
    double alpha = 0.025;
    // A[j-1][m-1] is A_j at level alpha/m.
    std::array<std::array<double, 3>, 3> A{};

    double at(int dose, int divisor) const {
        if (dose < 1 || dose > 3 || divisor < 1 || divisor > 3) {
            throw ContractViolation("conditional error index out of range");
        }
        return A[dose - 1][divisor - 1];
    }

    static ConditionalErrorTable build(PValue p1_low, PValue p1_med, const DesignConfig& cfg) {
        ConditionalErrorTable t;
        t.alpha = cfg.alpha;
        for (int m = 1; m <= 3; ++m) {
            const double gamma = cfg.alpha / m;
            t.A[0][m - 1] = partial_conditional_error(p1_low, gamma, cfg.w1, cfg.w2);
            t.A[1][m - 1] = partial_conditional_error(p1_med, gamma, cfg.w1, cfg.w2);
            t.A[2][m - 1] = gamma;
        }
        return t;
    }
};

struct IntersectionDecision {
    DoseSet J;
    DoseSet tested;  // J intersected with K
    bool rejected = false;
    // Sum of A_k over the tested doses reached 1.
    bool trivially_rejected = false;
    // Sum of the per-dose thresholds.
    double budget = 0.0;
    // Stage-2 threshold per tested dose; NaN for doses not tested.
    std::array<double, 4> threshold{};
};

/*
 * Adapted stage-2 test of H_J. Per-dose thresholds are v_{j,J} * B with B the
 * sum of A_k over J and K.
 *
 * strict: |J & K| = 1 gives v = 1 (threshold A_j). With K = {2,3} and both
 *   doses tested, dose 2 keeps A_2 and dose 3 gets A_3 plus A_1 when 1 is in J.
 * pooled: as strict, except that a single tested dose receives the summed
 *   conditional error of every dose in J.
 */
inline IntersectionDecision intersection_decision(DoseSet J, DoseSet K,
                                                  const ConditionalErrorTable& table,
                                                  const PerDose<PValue>& p2, ReallocMode mode) {
    const DoseSet S = J & K;
    if (S.empty()) {
        throw ContractViolation("intersection " + J.str() + " does not meet K " + K.str() +
                                " and is accepted at the interim");
    }
    const int m = static_cast<int>(J.size());
    auto A = [&](int j) { return table.at(j, m); };

    IntersectionDecision d;
    d.J = J;
    d.tested = S;
    d.threshold.fill(std::numeric_limits<double>::quiet_NaN());

    double sum_tested = 0.0;
    for (int k : S.members()) sum_tested += A(k);

    if (S.size() == 1) {
        const int j = S.members().front();
        double th = A(j);
        if (mode == ReallocMode::pooled) {
            th = 0.0;
            for (int k : J.members()) th += A(k);
        }
        d.threshold[j] = th;
    } else if (K == DoseSet{2, 3}) {
        d.threshold[2] = A(2);
        d.threshold[3] = A(3) + (J.contains(1) ? A(1) : 0.0);
    } else {
        for (int k : S.members()) d.threshold[k] = A(k);
    }

    d.trivially_rejected = sum_tested >= 1.0;
    d.rejected = d.trivially_rejected;
    for (int k : S.members()) {
        d.budget += d.threshold[k];
        if (!p2.has(k)) {
            throw ContractViolation("missing stage-2 p-value for dose " + std::to_string(k));
        }
        if (p2[k]->value() <= d.threshold[k]) d.rejected = true;
    }
    return d;
}

enum class HypothesisStatus { rejected, accepted_at_interim, accepted_final };

inline std::string_view status_name(HypothesisStatus s) {
    switch (s) {
        case HypothesisStatus::rejected: return "rejected";
        case HypothesisStatus::accepted_at_interim: return "accepted-at-interim";
        case HypothesisStatus::accepted_final: return "accepted-final";
    }
    return "?";
}

struct IntersectionResult {
    HypothesisStatus status = HypothesisStatus::accepted_at_interim;
    IntersectionDecision decision;
};

struct ClosedTestReport {
    DoseSet K;
    ReallocMode mode = ReallocMode::strict;
    ConditionalErrorTable table;
    PerDose<PValue> stage1;
    PerDose<PValue> stage2;
    // Indexed by DoseSet mask 1..7; slot 0 unused.
    std::array<IntersectionResult, 8> results{};
    DoseSet rejected;

    const IntersectionResult& at(DoseSet J) const {
        if (J.empty()) throw ContractViolation("empty intersection");
        return results[J.mask()];
    }
};

// Display order: largest intersections first, then lexicographic.
inline constexpr std::array<unsigned, 7> kIntersectionOrder = {
    0b111, 0b011, 0b101, 0b110, 0b001, 0b010, 0b100};

/*
 * Closed test over H1..H3. stage1 holds the Month-12 stage-1 p-values of
 * doses 1 and 2; stage2 holds a p-value for every dose in K and no other.
 */
inline ClosedTestReport run_closed_test(const PerDose<PValue>& stage1,
                                        const PerDose<PValue>& stage2, DoseSet K,
                                        const DesignConfig& cfg) {
    if (!stage1.has(1) || !stage1.has(2)) {
        throw ContractViolation("stage-1 p-values for doses 1 and 2 are required");
    }
    if (!(K == DoseSet{1, 2} || K == DoseSet{2, 3} || K == DoseSet{3})) {
        throw ContractViolation("selected set " + K.str() + " is not one of {1,2}, {2,3}, {3}");
    }
    for (int d = 1; d <= 3; ++d) {
        if (stage2.has(d) != K.contains(d)) {
            throw ContractViolation("stage-2 p-values do not match K " + K.str());
        }
    }

    ClosedTestReport rep;
    rep.K = K;
    rep.mode = cfg.realloc_mode;
    rep.stage1 = stage1;
    rep.stage2 = stage2;
    rep.table = ConditionalErrorTable::build(*stage1[1], *stage1[2], cfg);

    for (unsigned mask = 1; mask <= 7; ++mask) {
        const DoseSet J = DoseSet::from_mask(mask);
        auto& r = rep.results[mask];
        r.decision.J = J;
        r.decision.threshold.fill(std::numeric_limits<double>::quiet_NaN());
        if ((J & K).empty()) {
            r.status = HypothesisStatus::accepted_at_interim;
            continue;
        }
        r.decision = intersection_decision(J, K, rep.table, stage2, cfg.realloc_mode);
        r.status = r.decision.rejected ? HypothesisStatus::rejected
                                       : HypothesisStatus::accepted_final;
    }

    for (int j = 1; j <= 3; ++j) {
        bool all = true;
        for (unsigned mask = 1; mask <= 7; ++mask) {
            if (DoseSet::from_mask(mask).contains(j) &&
                rep.results[mask].status != HypothesisStatus::rejected) {
                all = false;
                break;
            }
        }
        if (all) rep.rejected.insert(j);
    }
    return rep;
}

/*
 * Text rendering, one line per hypothesis tested at the final analysis:
 *   H123: p1 <= 0.198 [x]  OR  p2 <= 0.597  OR  0.795 >= 1
 * with [x] marking conditions that hold.
 */
inline std::string explain(const ClosedTestReport& rep) {
    auto fmt = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3f", v);
        return std::string(buf);
    };
    std::string out;
    out += "K = " + rep.K.str() + ", reallocation " + std::string(realloc_name(rep.mode)) + "\n";
    for (unsigned mask : kIntersectionOrder) {
        const DoseSet J = DoseSet::from_mask(mask);
        const auto& r = rep.results[mask];
        std::string line = "H" + J.digits() + ":";
        while (line.size() < 6) line += ' ';
        if (r.status == HypothesisStatus::accepted_at_interim) {
            out += line + "accepted at interim\n";
            continue;
        }
        const auto& d = r.decision;
        bool first = true;
        double sum_tested = 0.0;
        for (int k : d.tested.members()) {
            sum_tested += rep.table.at(k, static_cast<int>(J.size()));
            const double p = rep.stage2[k]->value();
            if (!first) line += "  OR  ";
            line += "p" + std::to_string(k) + " <= " + fmt(d.threshold[k]);
            if (p <= d.threshold[k]) line += " [x]";
            first = false;
        }
        if (d.tested.size() > 1) {
            line += "  OR  " + fmt(sum_tested) + " >= 1";
            if (d.trivially_rejected) line += " [x]";
        }
        line += "  -> " + std::string(status_name(r.status));
        out += line + "\n";
    }
    out += "Rejected: " + rep.rejected.str() + "\n";
    return out;
}

}  // namespace adaptrial
