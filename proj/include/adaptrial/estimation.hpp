#pragma once

#include <adaptrial/datagen.hpp>
#include <adaptrial/error.hpp>
#include <adaptrial/rng.hpp>
#include <adaptrial/stat_kernel.hpp>
#include <adaptrial/trial_model.hpp>

#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace adaptrial {

enum class Estimator { unconditional, conditional, inverse_normal, pooled };

inline constexpr std::array<Estimator, 4> kAllEstimators = {
    Estimator::unconditional, Estimator::conditional, Estimator::inverse_normal,
    Estimator::pooled};

inline std::string_view estimator_name(Estimator e) {
    switch (e) {
        case Estimator::unconditional: return "unconditional";
        case Estimator::conditional: return "conditional";
        case Estimator::inverse_normal: return "inverse_normal";
        case Estimator::pooled: return "pooled";
    }
    return "?";
}

struct ConcordanceEstimate {
    DoseId dose = DoseId::low;
    Estimator method = Estimator::unconditional;
    double point = 0.5;
    // One-sided lower confidence bound.
    double ci_lower = 0.0;
    // Bit s-1 set when stage s contributed.
    unsigned stages_used = 0;
};

inline constexpr double kDefaultConfidence = 0.975;
inline constexpr double kRootTolerance = 1e-10;

namespace detail {

/*
 * Root of a decreasing function on [lo, hi] by bisection. Throws when the
 * endpoints do not bracket a sign change.
 */
inline double bisect_decreasing(const std::function<double(double)>& f, double lo, double hi,
                                const char* what) {
    if (hi <= lo) return lo;
    double flo = f(lo), fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if (!(flo > 0.0 && fhi < 0.0)) {
        throw EstimationError(std::string(what) + ": no sign change on [" + std::to_string(lo) +
                              ", " + std::to_string(hi) + "]");
    }
    while (hi - lo > kRootTolerance) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if (fm == 0.0) return mid;
        (fm > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

struct StageTerm {
    double theta;
    std::size_t m, n;
    double weight;
};

// sum_s weight_s * (theta_s - delta) / sd_s(delta), variances evaluated at delta.
inline double weighted_z(std::span<const StageTerm> terms, double delta) {
    double z = 0.0;
    for (const auto& t : terms) {
        z += t.weight * (t.theta - delta) / std::sqrt(concordance_variance(delta, t.m, t.n));
    }
    return z;
}

// Z of a weighted mean whose variance is sum_s weight_s^2 Var_s(delta).
inline double mean_z(std::span<const StageTerm> terms, double point, double delta) {
    double var = 0.0;
    for (const auto& t : terms) {
        var += t.weight * t.weight * concordance_variance(delta, t.m, t.n);
    }
    return (point - delta) / std::sqrt(var);
}

inline std::size_t subjects(const Concordance& c) { return c.n_treat + c.n_control; }

inline void require_counts(const Concordance& c) {
    if (c.n_treat == 0 || c.n_control == 0) {
        throw InputError("stage concordance needs positive group sizes");
    }
}

}  // namespace detail

/*
 * Weighted mean of the stage-wise concordances with subject-count weights
 * (treatment plus control of that stage). Lower bound solves
 * (point - delta) / sd(delta) = z_conf with the mean's variance at delta.
 */
inline ConcordanceEstimate estimate_unconditional(const std::optional<Concordance>& c1,
                                                  const std::optional<Concordance>& c2,
                                                  double confidence = kDefaultConfidence) {
    if (!c1 && !c2) throw InputError("no stage contributes a concordance");
    std::vector<detail::StageTerm> terms;
    ConcordanceEstimate e;
    e.method = Estimator::unconditional;
    double total = 0.0;
    for (int s = 0; s < 2; ++s) {
        const auto& c = s == 0 ? c1 : c2;
        if (!c) continue;
        detail::require_counts(*c);
        terms.push_back({c->value, c->n_treat, c->n_control,
                         static_cast<double>(detail::subjects(*c))});
        total += static_cast<double>(detail::subjects(*c));
        e.stages_used |= 1u << s;
    }
    e.point = 0.0;
    for (auto& t : terms) {
        t.weight /= total;
        e.point += t.weight * t.theta;
    }
    const double z = norm_quantile(confidence);
    e.ci_lower = detail::bisect_decreasing(
        [&](double d) { return detail::mean_z(terms, e.point, d) - z; }, 0.0, e.point,
        "unconditional lower bound");
    return e;
}

// As unconditional, but only for doses continued to stage 2.
inline std::optional<ConcordanceEstimate> estimate_conditional(
    const std::optional<Concordance>& c1, const std::optional<Concordance>& c2, bool selected,
    double confidence = kDefaultConfidence) {
    if (!selected) return std::nullopt;
    auto e = estimate_unconditional(c1, c2, confidence);
    e.method = Estimator::conditional;
    return e;
}

/*
 * Median-unbiased inverse-normal estimator. With
 *   P(delta) = 1 - Phi(w1 Z1(delta) + w2 Z2(delta)),
 *   Z_s(delta) = (theta_s - delta) / sd_s(delta),
 * the point solves P = 0.5 and the lower bound solves P = 1 - confidence.
 * A dose seen only in stage 2 uses that stage alone with weight 1.
 */
inline ConcordanceEstimate estimate_inverse_normal(const std::optional<Concordance>& c1,
                                                   const Concordance& c2, double w1,
                                                   double w2,
                                                   double confidence = kDefaultConfidence) {
    std::vector<detail::StageTerm> terms;
    ConcordanceEstimate e;
    e.method = Estimator::inverse_normal;
    detail::require_counts(c2);
    if (c1) {
        detail::require_counts(*c1);
        terms.push_back({c1->value, c1->n_treat, c1->n_control, w1});
        terms.push_back({c2.value, c2.n_treat, c2.n_control, w2});
        e.stages_used = 0b11;
    } else {
        terms.push_back({c2.value, c2.n_treat, c2.n_control, 1.0});
        e.stages_used = 0b10;
    }
    auto h = [&](double d) { return detail::weighted_z(terms, d); };
    e.point = detail::bisect_decreasing(h, 0.0, 1.0, "inverse-normal point estimate");
    const double z = norm_quantile(confidence);
    e.ci_lower = detail::bisect_decreasing([&](double d) { return h(d) - z; }, 0.0, e.point,
                                           "inverse-normal lower bound");
    return e;
}

/*
 * Concordance of all treatment subjects against all placebo subjects pooled
 * over the stages in which the dose was randomised, with a score-type lower
 * bound from the pooled group sizes.
 */
inline ConcordanceEstimate estimate_pooled(std::span<const double> treat,
                                           std::span<const double> control,
                                           unsigned stages_used,
                                           double confidence = kDefaultConfidence) {
    const auto c = concordance(treat, control);
    const std::array<detail::StageTerm, 1> terms = {
        detail::StageTerm{c.value, c.n_treat, c.n_control, 1.0}};
    ConcordanceEstimate e;
    e.method = Estimator::pooled;
    e.point = c.value;
    e.stages_used = stages_used;
    const double z = norm_quantile(confidence);
    e.ci_lower = detail::bisect_decreasing(
        [&](double d) { return detail::mean_z(terms, e.point, d) - z; }, 0.0, e.point,
        "pooled lower bound");
    return e;
}

/*
 * Large-sample concordance of `dose` against placebo at follow-up t: one
 * single-stage four-arm trial with 50 * n_scale subjects per arm. The
 * outcome matches the analysis method (change from baseline for wilcox_cc).
 */
inline double oracle_true_concordance(const ScenarioSpec& scn, DoseId dose, int t,
                                      double n_scale, RandomStream& rng,
                                      Method method = Method::wilcox_c) {
    if (!(n_scale >= 1.0)) throw DomainError("n_scale must be >= 1");
    if (t != 1 && t != 2) throw InputError("follow-up must be 1 or 2");
    const int n = static_cast<int>(std::lround(50.0 * n_scale));
    std::array<int, 4> sizes{};
    sizes[0] = n;
    sizes[index(dose)] = n;
    const CohortSampler sampler(scn);
    std::vector<SubjectRecord> records;
    sampler.sample(sizes, 1, rng, records);
    std::vector<double> treat, control;
    treat.reserve(n);
    control.reserve(n);
    for (const auto& r : records) {
        const double v = method == Method::wilcox_cc ? r.at(t) - r.x0 : r.at(t);
        (r.dose == DoseId::placebo ? control : treat).push_back(v);
    }
    if (dose == DoseId::placebo) return 0.5;
    return concordance(treat, control).value;
}

}  // namespace adaptrial
