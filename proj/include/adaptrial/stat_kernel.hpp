#pragma once

#include <adaptrial/error.hpp>

#include <Eigen/Dense>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/erf.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace adaptrial {

/*
 * One-sided p-value. Construction clamps nothing; out-of-range values are a
 * programming error and throw.
 */
class PValue {
   public:
    constexpr PValue() = default;
    explicit PValue(double v) : value_(v) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw DomainError("p-value outside [0,1]: " + std::to_string(v));
        }
    }
    constexpr double value() const noexcept { return value_; }
    constexpr operator double() const noexcept { return value_; }

   private:
    double value_ = 1.0;
};

/*
 * Concordance (probabilistic index) of a treatment sample against a control
 * sample: P(T < C) + P(T = C) / 2. Values above 0.5 favour treatment because a
 * smaller parasite load is the better outcome.
 */
struct Concordance {
    double value = 0.5;
    std::size_t n_treat = 0;
    std::size_t n_control = 0;
};

inline double norm_cdf(double z) {
    return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

// Upper tail 1 - Phi(z), accurate for large positive z.
inline double norm_sf(double z) { return norm_cdf(-z); }

inline double norm_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw DomainError("norm_quantile requires 0 < p < 1, got " +
                          std::to_string(p));
    }
    return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

// Phi^{-1}(1 - q) computed without forming 1 - q.
inline double norm_quantile_upper(double q) { return -norm_quantile(q); }

namespace detail {

inline void require_finite(std::span<const double> xs, const char* what) {
    for (double x : xs) {
        if (!std::isfinite(x)) {
            throw InputError(std::string(what) + " contains a non-finite value");
        }
    }
}

/*
 * Sufficient statistics of the pooled ranking used by both the rank-sum test
 * and the concordance: the treatment rank sum (midranks), the tie term
 * sum(t^3 - t) over tie groups, and the doubled midranks for enumeration.
 */
struct RankSummary {
    std::size_t n_treat = 0;
    std::size_t n_control = 0;
    double treat_rank_sum = 0.0;
    double tie_term = 0.0;
    std::size_t tie_groups = 0;
};

inline RankSummary rank_summary(std::span<const double> treat,
                                std::span<const double> control,
                                std::vector<int>* doubled_ranks = nullptr) {
    if (treat.empty() || control.empty()) {
        throw InputError("rank statistics need two nonempty samples");
    }
    require_finite(treat, "treatment sample");
    require_finite(control, "control sample");

    const std::size_t n = treat.size() + control.size();
    std::vector<std::pair<double, bool>> pooled;
    pooled.reserve(n);
    for (double t : treat) pooled.emplace_back(t, true);
    for (double c : control) pooled.emplace_back(c, false);
    std::sort(pooled.begin(), pooled.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    RankSummary s;
    s.n_treat = treat.size();
    s.n_control = control.size();
    if (doubled_ranks) doubled_ranks->clear();

    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i + 1;
        while (j < n && pooled[j].first == pooled[i].first) ++j;
        const std::size_t len = j - i;
        // ranks i+1..j, midrank (i+1+j)/2
        const int twice_mid = static_cast<int>(i + 1 + j);
        std::size_t treat_in_group = 0;
        for (std::size_t k = i; k < j; ++k) {
            if (pooled[k].second) ++treat_in_group;
            if (doubled_ranks) doubled_ranks->push_back(twice_mid);
        }
        s.treat_rank_sum += 0.5 * twice_mid * static_cast<double>(treat_in_group);
        const double t = static_cast<double>(len);
        s.tie_term += t * t * t - t;
        ++s.tie_groups;
        i = j;
    }
    return s;
}

inline double concordance_from(const RankSummary& s) {
    const double nt = static_cast<double>(s.n_treat);
    const double nc = static_cast<double>(s.n_control);
    // W - nt(nt+1)/2 counts pairs with treat above control (ties 1/2)
    const double above = s.treat_rank_sum - 0.5 * nt * (nt + 1.0);
    return std::clamp((nt * nc - above) / (nt * nc), 0.0, 1.0);
}

inline double rank_sum_normal_from(const RankSummary& s) {
    const double nt = static_cast<double>(s.n_treat);
    const double nc = static_cast<double>(s.n_control);
    const double n = nt + nc;
    const double var =
        nt * nc / 12.0 * ((n + 1.0) - s.tie_term / (n * (n - 1.0)));
    if (var <= 0.0) return 0.5;  // every observation tied
    double z = s.treat_rank_sum - 0.5 * nt * (n + 1.0);
    // continuity correction towards the null mean, never across it
    if (z > 0.0) {
        z = std::max(z - 0.5, 0.0);
    } else if (z < 0.0) {
        z = std::min(z + 0.5, 0.0);
    }
    return std::clamp(norm_cdf(z / std::sqrt(var)), 0.0, 1.0);
}

}  // namespace detail

enum class RankTestMode { automatic, exact, asymptotic };

// Pooled sample size at or below which the automatic mode enumerates.
inline constexpr std::size_t kExactRankSumLimit = 20;

/*
 * Exact lower-tail p-value P(W <= w_obs) of the midrank sum under the
 * permutation distribution, computed by dynamic programming over doubled
 * midranks. A fully tied pooled sample carries no ordering information and
 * returns 0.5.
 */
inline PValue rank_sum_pvalue_exact(std::span<const double> treat,
                                    std::span<const double> control) {
    std::vector<int> ranks2;
    const auto s = detail::rank_summary(treat, control, &ranks2);
    if (s.tie_groups == 1) return PValue(0.5);

    const std::size_t nt = s.n_treat;
    int max_sum = 0;
    for (int r : ranks2) max_sum += r;
    std::vector<std::vector<double>> ways(nt + 1,
                                          std::vector<double>(max_sum + 1));
    ways[0][0] = 1.0;
    std::size_t seen = 0;
    for (int r : ranks2) {
        ++seen;
        for (std::size_t k = std::min(seen, nt); k >= 1; --k) {
            auto& dst = ways[k];
            const auto& src = ways[k - 1];
            for (int v = max_sum; v >= r; --v) dst[v] += src[v - r];
        }
    }
    const int observed = static_cast<int>(std::lround(2.0 * s.treat_rank_sum));
    double below = 0.0, total = 0.0;
    for (int v = 0; v <= max_sum; ++v) {
        total += ways[nt][v];
        if (v <= observed) below += ways[nt][v];
    }
    return PValue(std::clamp(below / total, 0.0, 1.0));
}

// Normal approximation with tie-corrected variance and continuity correction.
inline PValue rank_sum_pvalue_normal(std::span<const double> treat,
                                     std::span<const double> control) {
    return PValue(
        detail::rank_sum_normal_from(detail::rank_summary(treat, control)));
}

/*
 * One-sided Wilcoxon rank-sum p-value for "treatment stochastically smaller
 * than control".
 */
inline PValue rank_sum_pvalue(std::span<const double> treat,
                              std::span<const double> control,
                              RankTestMode mode = RankTestMode::automatic) {
    switch (mode) {
        case RankTestMode::exact:
            return rank_sum_pvalue_exact(treat, control);
        case RankTestMode::asymptotic:
            return rank_sum_pvalue_normal(treat, control);
        case RankTestMode::automatic:
            break;
    }
    if (treat.size() + control.size() <= kExactRankSumLimit) {
        return rank_sum_pvalue_exact(treat, control);
    }
    return rank_sum_pvalue_normal(treat, control);
}

inline Concordance concordance(std::span<const double> treat,
                               std::span<const double> control) {
    const auto s = detail::rank_summary(treat, control);
    return {detail::concordance_from(s), s.n_treat, s.n_control};
}

// Rank-sum p-value and concordance from a single sort.
struct RankComparison {
    PValue p;
    Concordance c;
};

inline RankComparison rank_compare(std::span<const double> treat,
                                   std::span<const double> control) {
    if (treat.size() + control.size() <= kExactRankSumLimit) {
        return {rank_sum_pvalue_exact(treat, control),
                concordance(treat, control)};
    }
    const auto s = detail::rank_summary(treat, control);
    return {PValue(detail::rank_sum_normal_from(s)),
            {detail::concordance_from(s), s.n_treat, s.n_control}};
}

inline constexpr double kConcordanceVarianceFloor = 1e-12;

/*
 * Hanley-McNeil variance of the concordance with Newcombe's symmetrised
 * sample size n* = (m + n) / 2 replacing both group sizes in the
 * Q-terms. Floored so that theta in {0, 1} stays usable in a Z statistic.
 */
inline double concordance_variance_raw(double theta, std::size_t n_treat,
                                       std::size_t n_control) {
    const double m = static_cast<double>(n_treat);
    const double n = static_cast<double>(n_control);
    const double n_star = 0.5 * (m + n);
    const double q1 = theta / (2.0 - theta);
    const double q2 = 2.0 * theta * theta / (1.0 + theta);
    const double th2 = theta * theta;
    return (theta * (1.0 - theta) + (n_star - 1.0) * (q1 - th2) +
            (n_star - 1.0) * (q2 - th2)) /
           (m * n);
}

inline double concordance_variance(double theta, std::size_t n_treat,
                                   std::size_t n_control) {
    if (!(theta >= 0.0 && theta <= 1.0)) {
        throw DomainError("concordance outside [0,1]");
    }
    if (n_treat == 0 || n_control == 0) {
        throw DomainError("concordance variance needs positive counts");
    }
    return std::max(concordance_variance_raw(theta, n_treat, n_control),
                    kConcordanceVarianceFloor);
}

/*
 * Least-squares fit of y ~ 1 + indicators + baseline and the one-sided
 * p-values P(T_df <= t) for every indicator coefficient. A negative
 * coefficient (lower outcome than control) gives a small p-value.
 *
 * A baseline column with zero spread is absorbed by the intercept and
 * dropped. Any other rank deficiency is an error.
 */
inline std::vector<PValue> ols_one_sided_pvalues(
    std::span<const double> y, const std::vector<std::vector<double>>& indicators,
    std::span<const double> baseline) {
    const std::size_t n = y.size();
    for (const auto& col : indicators) {
        if (col.size() != n) throw InputError("indicator column length mismatch");
    }
    if (!baseline.empty() && baseline.size() != n) {
        throw InputError("baseline length mismatch");
    }
    detail::require_finite(y, "response");
    detail::require_finite(baseline, "baseline");

    bool use_baseline = false;
    if (!baseline.empty()) {
        auto [lo, hi] = std::minmax_element(baseline.begin(), baseline.end());
        use_baseline = *hi > *lo;
    }
    const std::size_t p = 1 + indicators.size() + (use_baseline ? 1 : 0);
    if (n < p + 1) {
        throw NumericalError("need at least " + std::to_string(p + 1) +
                             " observations for " + std::to_string(p) +
                             " parameters, got " + std::to_string(n));
    }

    Eigen::MatrixXd X(n, p);
    Eigen::VectorXd Y(n);
    for (std::size_t i = 0; i < n; ++i) {
        X(i, 0) = 1.0;
        for (std::size_t k = 0; k < indicators.size(); ++k) {
            X(i, 1 + k) = indicators[k][i];
        }
        if (use_baseline) X(i, p - 1) = baseline[i];
        Y(i) = y[i];
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    if (static_cast<std::size_t>(qr.rank()) < p) {
        throw NumericalError("design matrix is rank deficient (rank " +
                             std::to_string(qr.rank()) + " of " +
                             std::to_string(p) + ")");
    }
    const Eigen::VectorXd beta = qr.solve(Y);
    const Eigen::VectorXd resid = Y - X * beta;
    const double df = static_cast<double>(n - p);
    const double rss = resid.squaredNorm();
    const double tss = (Y.array() - Y.mean()).square().sum();
    if (rss <= 1e-24 * std::max(tss, 1.0)) {
        throw NumericalError("zero residual variance: perfect fit");
    }
    const double sigma2 = rss / df;

    // (X'X)^{-1} = P R^{-1} R^{-T} P'
    const Eigen::MatrixXd R =
        qr.matrixQR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
    const Eigen::MatrixXd Rinv =
        R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
    const Eigen::MatrixXd cov_perm = Rinv * Rinv.transpose();
    const Eigen::MatrixXd cov =
        qr.colsPermutation() * cov_perm * qr.colsPermutation().transpose();

    boost::math::students_t dist(df);
    std::vector<PValue> out;
    out.reserve(indicators.size());
    for (std::size_t k = 0; k < indicators.size(); ++k) {
        const std::size_t col = 1 + k;
        const double t = beta(col) / std::sqrt(sigma2 * cov(col, col));
        out.emplace_back(std::clamp(boost::math::cdf(dist, t), 0.0, 1.0));
    }
    return out;
}

inline PValue ols_one_sided_pvalue(std::span<const double> y,
                                   const std::vector<std::vector<double>>& indicators,
                                   std::span<const double> baseline,
                                   std::size_t dose) {
    if (dose >= indicators.size()) {
        throw InputError("requested dose column does not exist");
    }
    return ols_one_sided_pvalues(y, indicators, baseline)[dose];
}

}  // namespace adaptrial
