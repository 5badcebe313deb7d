#pragma once

#include <adaptrial/adaptive_engine.hpp>
#include <adaptrial/analysis.hpp>
#include <adaptrial/comparators.hpp>
#include <adaptrial/datagen.hpp>
#include <adaptrial/error.hpp>
#include <adaptrial/estimation.hpp>
#include <adaptrial/rng.hpp>
#include <adaptrial/stat_kernel.hpp>
#include <adaptrial/trial_model.hpp>

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

namespace adaptrial {

enum class SimId { S1, S2, S3, S4, S5 };

inline std::string_view sim_name(SimId s) {
    static constexpr std::array<std::string_view, 5> names = {"S1", "S2", "S3", "S4", "S5"};
    return names[static_cast<int>(s)];
}

inline SimId sim_from_name(std::string_view s) {
    for (int i = 0; i < 5; ++i) {
        if (sim_name(static_cast<SimId>(i)) == s) return static_cast<SimId>(i);
    }
    throw InputError("unknown simulation id '" + std::string(s) + "' (expected S1..S5)");
}

// Scenario assumptions varied by each simulation.
inline ScenarioVariant sim_variant(SimId s) {
    switch (s) {
        case SimId::S2: return ScenarioVariant::modified_rates;
        case SimId::S3: return ScenarioVariant::modified_baseline;
        default: return ScenarioVariant::standard;
    }
}

inline const std::vector<double> kAlpha1Grid = {0.1, 0.2, 0.3, 0.4, 0.5};
inline const std::vector<int> kN1Grid = {80, 100, 120};
inline const std::vector<double> kRhoGrid = {0.4, 0.5, 0.6};

struct SimulationSpec {
    Disease disease = Disease::mansonellosis;
    SimId sim = SimId::S1;
    std::vector<double> alpha1_grid;
    std::vector<int> n1_grid;
    std::vector<double> rho_grid;
    std::vector<Method> methods = {Method::lm, Method::wilcox_c, Method::wilcox_cc};
    // Scenario slugs to run; empty runs all five.
    std::vector<std::string> scenarios;
    int runs = 50000;
    std::uint64_t master_seed = 1;
    int N = 200;
    double alpha = 0.025;
    ReallocMode realloc_mode = ReallocMode::strict;
    RankTestMode rank_mode = RankTestMode::asymptotic;
    bool comparators = true;
    bool estimation = true;
    double oracle_scale = 5000.0;
    // 0 uses the hardware concurrency.
    int threads = 0;
};

// Table grid for a simulation: the varied axis takes its full range, the
// others sit at their defaults (alpha1 0.3, N1 120, rho 0.5).
inline SimulationSpec default_simulation(Disease disease, SimId sim) {
    SimulationSpec s;
    s.disease = disease;
    s.sim = sim;
    s.alpha1_grid = {0.3};
    s.n1_grid = {120};
    s.rho_grid = {0.5};
    switch (sim) {
        case SimId::S1:
        case SimId::S2:
        case SimId::S3: s.alpha1_grid = kAlpha1Grid; break;
        case SimId::S4: s.rho_grid = kRhoGrid; break;
        case SimId::S5: s.n1_grid = kN1Grid; break;
    }
    return s;
}

// ---------------------------------------------------------------------------
// Randomness

// Stream purposes within one replicate.
enum class StreamPurpose : std::uint64_t { stage1 = 1, stage2 = 2, ma1 = 3, ma2 = 4, oracle = 5 };

/*
 * Key of the data-generating cell. The design parameters alpha1 and the
 * analysis method are deliberately excluded so that cells differing only in
 * those share the same stage-1 data (common random numbers).
 */
struct DataKey {
    Disease disease = Disease::mansonellosis;
    ScenarioVariant variant = ScenarioVariant::standard;
    int scenario_index = 0;
    int n1 = 120;
    double rho = 0.5;

    std::uint64_t hash() const {
        std::uint64_t h = splitmix64(static_cast<std::uint64_t>(disease) + 1);
        h = splitmix64(h ^ (static_cast<std::uint64_t>(variant) + 11));
        h = splitmix64(h ^ (static_cast<std::uint64_t>(scenario_index) + 101));
        h = splitmix64(h ^ (static_cast<std::uint64_t>(n1) + 1001));
        h = splitmix64(h ^ static_cast<std::uint64_t>(std::llround(rho * 1e6)));
        return h;
    }
};

inline RandomStream replicate_stream(std::uint64_t master, const DataKey& key,
                                     std::uint64_t replicate, StreamPurpose purpose) {
    return RandomStream::derive(
        master, {key.hash(), replicate, static_cast<std::uint64_t>(purpose)});
}

// ---------------------------------------------------------------------------
// One replicate

struct EstimateSlot {
    bool present = false;
    double point = 0.0;
    double ci_lower = 0.0;
};

struct ReplicateRecord {
    bool failed = false;
    std::string error;
    DoseSet K;
    SelectionCase selection_case = SelectionCase::iv;
    DoseSet rejected;
    // [estimator][dose]
    std::array<std::array<EstimateSlot, 4>, 4> estimates{};
    int estimation_failures = 0;
};

namespace detail {

inline std::array<std::vector<double>, 4> arm_outcomes(std::span<const SubjectRecord> records,
                                                       Method method, int t) {
    std::array<std::vector<double>, 4> arm;
    for (const auto& r : records) arm[index(r.dose)].push_back(rank_outcome(r, method, t));
    return arm;
}

inline void store(EstimateSlot& slot, const ConcordanceEstimate& e) {
    slot.present = true;
    slot.point = e.point;
    slot.ci_lower = e.ci_lower;
}

}  // namespace detail

/*
 * Concordance estimates of every active dose from the two stage cohorts and
 * the stage-wise Month-12 analyses. Estimation failures leave the slot empty
 * and are counted.
 */
inline void estimate_all(ReplicateRecord& rec, const DesignConfig& cfg,
                         std::span<const SubjectRecord> stage1,
                         std::span<const SubjectRecord> stage2, const StagePValues& m12_s1,
                         const StagePValues& m12_s2) {
    const auto arm1 = detail::arm_outcomes(stage1, cfg.method, 2);
    const auto arm2 = detail::arm_outcomes(stage2, cfg.method, 2);
    for (int d = 1; d <= 3; ++d) {
        const auto& c1 = m12_s1.c[d];
        const auto& c2 = m12_s2.c[d];
        if (!c1 && !c2) continue;
        const bool selected = rec.K.contains(d);
        auto guarded = [&](Estimator e, auto&& fn) {
            try {
                detail::store(rec.estimates[static_cast<int>(e)][d], fn());
            } catch (const EstimationError&) {
                ++rec.estimation_failures;
            }
        };
        guarded(Estimator::unconditional, [&] { return estimate_unconditional(c1, c2); });
        if (!selected || !c2) continue;
        guarded(Estimator::conditional, [&] { return *estimate_conditional(c1, c2, true); });
        guarded(Estimator::inverse_normal,
                [&] { return estimate_inverse_normal(c1, *c2, cfg.w1, cfg.w2); });
        guarded(Estimator::pooled, [&] {
            std::vector<double> treat(arm2[d]), control(arm2[0]);
            unsigned used = 0b10;
            if (c1) {
                treat.insert(treat.end(), arm1[d].begin(), arm1[d].end());
                control.insert(control.end(), arm1[0].begin(), arm1[0].end());
                used |= 0b01;
            }
            return estimate_pooled(treat, control, used);
        });
    }
}

struct ReplicateScratch {
    std::vector<SubjectRecord> stage1;
    std::vector<SubjectRecord> stage2;
};

/*
 * Full two-stage pipeline: stage-1 cohort, Month-6 selection, stage-2
 * cohort, Month-12 closed test and concordance estimates.
 */
inline ReplicateRecord run_replicate(const DesignConfig& cfg, const CohortSampler& sampler,
                                     RandomStream& stage1_rng, RandomStream& stage2_rng,
                                     ReplicateScratch& scratch, bool with_estimates = true,
                                     RankTestMode mode = RankTestMode::asymptotic) {
    ReplicateRecord rec;
    sampler.sample(allocate_stage1(cfg.N1), 1, stage1_rng, scratch.stage1);
    const auto m6 = stage_pvalues(scratch.stage1, cfg.method, 1, mode);
    const auto sel = select_and_allocate(*m6.p[1], *m6.p[2], cfg);
    rec.K = sel.K;
    rec.selection_case = sel.selection_case;

    const auto m12_s1 = stage_pvalues(scratch.stage1, cfg.method, 2, mode);
    sampler.sample(sel.n2_per_arm, 2, stage2_rng, scratch.stage2);
    const auto m12_s2 = stage_pvalues(scratch.stage2, cfg.method, 2, mode);

    PerDose<PValue> p1;
    p1[1] = m12_s1.p[1];
    p1[2] = m12_s1.p[2];
    const auto report = run_closed_test(p1, m12_s2.p, sel.K, cfg);
    rec.rejected = report.rejected;

    if (with_estimates) estimate_all(rec, cfg, scratch.stage1, scratch.stage2, m12_s1, m12_s2);
    return rec;
}

inline ReplicateRecord run_replicate(const DesignConfig& cfg, const ScenarioSpec& scn,
                                     std::uint64_t master_seed, std::uint64_t replicate,
                                     const DataKey& key = {}) {
    const CohortSampler sampler(scn);
    auto s1 = replicate_stream(master_seed, key, replicate, StreamPurpose::stage1);
    auto s2 = replicate_stream(master_seed, key, replicate, StreamPurpose::stage2);
    ReplicateScratch scratch;
    return run_replicate(cfg, sampler, s1, s2, scratch);
}

// ---------------------------------------------------------------------------
// Aggregation

struct Proportion {
    double value = std::numeric_limits<double>::quiet_NaN();
    double mc_se = std::numeric_limits<double>::quiet_NaN();
    std::size_t n = 0;

    static Proportion of(std::size_t hits, std::size_t n) {
        Proportion p;
        p.n = n;
        if (n == 0) return p;
        p.value = static_cast<double>(hits) / static_cast<double>(n);
        p.mc_se = std::sqrt(p.value * (1.0 - p.value) / static_cast<double>(n));
        return p;
    }
};

struct MeanStat {
    double value = std::numeric_limits<double>::quiet_NaN();
    double mc_se = std::numeric_limits<double>::quiet_NaN();
    std::size_t n = 0;
};

struct EstimatorSummary {
    MeanStat point;
    MeanStat ci_lower;
    // Mean point minus the oracle value.
    MeanStat bias;
    // Over all completed replicates; one without an estimate has no bound above the oracle.
    Proportion coverage;
    // Over replicates that produced an estimate.
    Proportion coverage_estimated;
};

struct OperatingCharacteristics {
    std::size_t runs = 0;
    std::size_t failed = 0;
    std::size_t estimation_failures = 0;
    Proportion reject_any;
    // Rejecting at least one true null.
    Proportion fwer;
    // Rejecting at least one false null; empty when every null is true.
    Proportion disjunctive_power;
    std::array<Proportion, 4> case_prob;
    std::array<Proportion, 4> marginal_power;
    std::array<Proportion, 4> conditional_power;
    std::array<Proportion, 4> selection_prob;
    std::array<double, 4> true_concordance{};
    // [estimator][dose]
    std::array<std::array<EstimatorSummary, 4>, 4> estimators{};
};

namespace detail {

struct Moments {
    double sum = 0.0, sum2 = 0.0;
    std::size_t n = 0;
    void add(double v) {
        sum += v;
        sum2 += v * v;
        ++n;
    }
    MeanStat stat(double shift = 0.0) const {
        MeanStat m;
        m.n = n;
        if (n == 0) return m;
        const double mean = sum / static_cast<double>(n);
        m.value = mean - shift;
        const double var =
            n > 1 ? std::max(0.0, (sum2 - sum * mean) / static_cast<double>(n - 1)) : 0.0;
        m.mc_se = std::sqrt(var / static_cast<double>(n));
        return m;
    }
};

}  // namespace detail

/*
 * Reduces replicate records in index order. `oracle` holds the true
 * concordance per dose (NaN when unknown); `scn` decides which nulls are
 * true.
 */
inline OperatingCharacteristics aggregate(std::span<const ReplicateRecord> reps,
                                          const ScenarioSpec& scn,
                                          const std::array<double, 4>& oracle = {
                                              0.5, std::numeric_limits<double>::quiet_NaN(),
                                              std::numeric_limits<double>::quiet_NaN(),
                                              std::numeric_limits<double>::quiet_NaN()}) {
    if (reps.empty()) throw InputError("aggregate needs at least one replicate");
    OperatingCharacteristics oc;
    oc.runs = reps.size();
    oc.true_concordance = oracle;

    DoseSet true_nulls, false_nulls;
    for (int d = 1; d <= 3; ++d) {
        (scn.is_null(static_cast<DoseId>(d)) ? true_nulls : false_nulls).insert(d);
    }

    std::size_t ok = 0, any = 0, fw = 0, disj = 0;
    std::array<std::size_t, 4> cases{}, rej{}, sel{}, rej_sel{};
    std::array<std::array<detail::Moments, 4>, 4> pt{}, ci{};
    std::array<std::array<std::size_t, 4>, 4> cover{};
    for (const auto& r : reps) {
        if (r.failed) {
            ++oc.failed;
            continue;
        }
        ++ok;
        oc.estimation_failures += static_cast<std::size_t>(r.estimation_failures);
        any += !r.rejected.empty();
        fw += !(r.rejected & true_nulls).empty();
        disj += !(r.rejected & false_nulls).empty();
        ++cases[static_cast<int>(r.selection_case)];
        for (int d = 1; d <= 3; ++d) {
            const bool s = r.K.contains(d);
            const bool x = r.rejected.contains(d);
            sel[d] += s;
            rej[d] += x;
            rej_sel[d] += s && x;
        }
        for (int e = 0; e < 4; ++e) {
            for (int d = 1; d <= 3; ++d) {
                const auto& slot = r.estimates[e][d];
                if (!slot.present) continue;
                pt[e][d].add(slot.point);
                ci[e][d].add(slot.ci_lower);
                if (!std::isnan(oracle[d]) && slot.ci_lower <= oracle[d]) ++cover[e][d];
            }
        }
    }
    if (ok == 0) return oc;

    oc.reject_any = Proportion::of(any, ok);
    oc.fwer = Proportion::of(fw, ok);
    if (!false_nulls.empty()) oc.disjunctive_power = Proportion::of(disj, ok);
    for (int c = 0; c < 4; ++c) oc.case_prob[c] = Proportion::of(cases[c], ok);
    for (int d = 1; d <= 3; ++d) {
        oc.marginal_power[d] = Proportion::of(rej[d], ok);
        oc.selection_prob[d] = Proportion::of(sel[d], ok);
        oc.conditional_power[d] = Proportion::of(rej_sel[d], sel[d]);
    }
    for (int e = 0; e < 4; ++e) {
        for (int d = 1; d <= 3; ++d) {
            auto& s = oc.estimators[e][d];
            s.point = pt[e][d].stat();
            s.ci_lower = ci[e][d].stat();
            if (!std::isnan(oracle[d])) {
                s.bias = pt[e][d].stat(oracle[d]);
                const std::size_t exceed = pt[e][d].n - cover[e][d];
                s.coverage = Proportion::of(ok - exceed, ok);
                s.coverage_estimated = Proportion::of(cover[e][d], pt[e][d].n);
            }
        }
    }
    return oc;
}

// ---------------------------------------------------------------------------
// Comparators

struct ComparatorSummary {
    std::size_t runs = 0;
    std::array<Proportion, 2> reject_any;  // [MA1, MA2]
    std::array<Proportion, 2> fwer;
    std::array<std::array<Proportion, 4>, 2> marginal_power;
    // Replicates in which MA1 ran the high-dose study after a study-1 rejection.
    std::size_t ma1_gating_violations = 0;
};

// ---------------------------------------------------------------------------
// Parallel loop

namespace detail {

inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

/*
 * Calls body(worker, i) for i in [0, n) on up to `threads` workers. Results
 * must be written to index-addressed storage so the outcome does not depend
 * on scheduling. The first exception is rethrown after all workers join.
 */
template <class Body>
void parallel_for(std::size_t n, int threads, Body&& body) {
    const int workers = std::max(1, std::min<int>(threads, static_cast<int>(n)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(0, i);
        return;
    }
    constexpr std::size_t kChunk = 256;
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (;;) {
                    const std::size_t start = next.fetch_add(kChunk);
                    if (start >= n) break;
                    const std::size_t stop = std::min(n, start + kChunk);
                    for (std::size_t i = start; i < stop; ++i) body(w, i);
                }
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                next.store(n);
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace detail

inline ComparatorSummary run_comparators(const ScenarioSpec& scn, int N, double alpha,
                                         Method method, int runs, std::uint64_t master,
                                         const DataKey& key, int threads = 1,
                                         RankTestMode mode = RankTestMode::asymptotic) {
    const CohortSampler sampler(scn);
    struct Rec {
        DoseSet ma1, ma2;
        bool gating_violation = false;
    };
    std::vector<Rec> recs(static_cast<std::size_t>(runs));
    detail::parallel_for(recs.size(), detail::resolve_threads(threads),
                         [&](int, std::size_t i) {
                             auto r1 = replicate_stream(master, key, i, StreamPurpose::ma1);
                             auto r2 = replicate_stream(master, key, i, StreamPurpose::ma2);
                             const auto a = run_ma1(sampler, N, alpha, method, r1, mode);
                             const auto b = run_ma2(sampler, N, alpha, method, r2, mode);
                             recs[i].ma1 = a.rejected;
                             recs[i].ma2 = b.rejected;
                             const bool s1_rejected = a.rejected.contains(1) ||
                                                      a.rejected.contains(2);
                             recs[i].gating_violation = s1_rejected && a.study2_run;
                         });
    DoseSet true_nulls;
    for (int d = 1; d <= 3; ++d)
        if (scn.is_null(static_cast<DoseId>(d))) true_nulls.insert(d);
    ComparatorSummary out;
    out.runs = recs.size();
    std::array<std::size_t, 2> any{}, fw{};
    std::array<std::array<std::size_t, 4>, 2> rej{};
    for (const auto& r : recs) {
        const std::array<DoseSet, 2> sets = {r.ma1, r.ma2};
        for (int k = 0; k < 2; ++k) {
            any[k] += !sets[k].empty();
            fw[k] += !(sets[k] & true_nulls).empty();
            for (int d = 1; d <= 3; ++d) rej[k][d] += sets[k].contains(d);
        }
        out.ma1_gating_violations += r.gating_violation;
    }
    for (int k = 0; k < 2; ++k) {
        out.reject_any[k] = Proportion::of(any[k], recs.size());
        out.fwer[k] = Proportion::of(fw[k], recs.size());
        for (int d = 1; d <= 3; ++d) out.marginal_power[k][d] = Proportion::of(rej[k][d], recs.size());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Campaign

struct CellResult {
    Disease disease = Disease::mansonellosis;
    SimId sim = SimId::S1;
    std::string scenario;  // slug
    int scenario_index = 0;
    Method method = Method::wilcox_c;
    double alpha1 = 0.3;
    int n1 = 120;
    double rho = 0.5;
    std::optional<OperatingCharacteristics> oc;
    std::optional<ComparatorSummary> comparators;
    std::string error;
};

struct CampaignResult {
    SimulationSpec spec;
    std::vector<CellResult> cells;
};

using ProgressFn = std::function<void(const CellResult&, std::size_t done, std::size_t total)>;

/*
 * Large-sample concordance of each active dose against placebo, exactly 0.5
 * for doses whose data distribution equals placebo.
 */
inline std::array<double, 4> oracle_concordances(const ScenarioSpec& scn, Method method,
                                                 double n_scale, std::uint64_t master,
                                                 const DataKey& key) {
    std::array<double, 4> out{0.5, 0.5, 0.5, 0.5};
    for (int d = 1; d <= 3; ++d) {
        if (scn.is_null(static_cast<DoseId>(d))) continue;
        auto rng = RandomStream::derive(
            master, {key.hash(), static_cast<std::uint64_t>(StreamPurpose::oracle),
                     static_cast<std::uint64_t>(d),
                     static_cast<std::uint64_t>(method == Method::wilcox_cc)});
        out[d] = oracle_true_concordance(scn, static_cast<DoseId>(d), 2, n_scale, rng, method);
    }
    return out;
}

inline void validate_simulation(const SimulationSpec& s) {
    if (s.runs < 1) throw ValidationError("runs", "must be >= 1");
    if (s.methods.empty()) throw ValidationError("method", "at least one method is required");
    if (s.alpha1_grid.empty() || s.n1_grid.empty() || s.rho_grid.empty()) {
        throw ValidationError("grid", "every grid axis needs at least one value");
    }
}

inline CampaignResult run_campaign(const SimulationSpec& spec, const ProgressFn& progress = {}) {
    validate_simulation(spec);
    const ScenarioVariant variant = sim_variant(spec.sim);
    const auto all = builtin_scenarios(spec.disease, variant);
    std::vector<int> chosen;
    if (spec.scenarios.empty()) {
        for (std::size_t i = 0; i < all.size(); ++i) chosen.push_back(static_cast<int>(i));
    } else {
        for (const auto& name : spec.scenarios) {
            const auto& s = find_scenario(all, name);
            chosen.push_back(static_cast<int>(&s - all.data()));
        }
    }

    CampaignResult out;
    out.spec = spec;
    const int threads = detail::resolve_threads(spec.threads);
    const std::size_t total = spec.n1_grid.size() * spec.rho_grid.size() *
                              spec.alpha1_grid.size() * chosen.size() * spec.methods.size();

    std::map<std::tuple<int, int, double>, ComparatorSummary> comparator_cache;
    std::map<std::tuple<int, int, double>, std::array<double, 4>> oracle_cache;

    for (int n1 : spec.n1_grid) {
        for (double rho : spec.rho_grid) {
            for (double alpha1 : spec.alpha1_grid) {
                for (int si : chosen) {
                    ScenarioSpec scn = all[si];
                    scn.rho = rho;
                    const DataKey key{spec.disease, variant, si, n1, rho};
                    for (Method method : spec.methods) {
                        CellResult cell;
                        cell.disease = spec.disease;
                        cell.sim = spec.sim;
                        cell.scenario = scenario_slug(scn.label);
                        cell.scenario_index = si;
                        cell.method = method;
                        cell.alpha1 = alpha1;
                        cell.n1 = n1;
                        cell.rho = rho;
                        try {
                            DesignConfig cfg;
                            cfg.N = spec.N;
                            cfg.N1 = n1;
                            cfg.alpha = spec.alpha;
                            cfg.alpha1 = alpha1;
                            cfg.method = method;
                            cfg.realloc_mode = spec.realloc_mode;
                            cfg = validate_config(cfg);
                            validate_scenario(scn);
                            const CohortSampler sampler(scn);

                            std::vector<ReplicateRecord> recs(static_cast<std::size_t>(spec.runs));
                            std::vector<ReplicateScratch> scratch(static_cast<std::size_t>(threads));
                            detail::parallel_for(
                                recs.size(), threads, [&](int w, std::size_t i) {
                                    auto r1 = replicate_stream(spec.master_seed, key, i,
                                                               StreamPurpose::stage1);
                                    auto r2 = replicate_stream(spec.master_seed, key, i,
                                                               StreamPurpose::stage2);
                                    try {
                                        recs[i] = run_replicate(cfg, sampler, r1, r2,
                                                                scratch[w], spec.estimation,
                                                                spec.rank_mode);
                                    } catch (const Error& e) {
                                        recs[i] = ReplicateRecord{};
                                        recs[i].failed = true;
                                        recs[i].error = "replicate " + std::to_string(i) +
                                                        ": " + e.what();
                                    }
                                });

                            std::array<double, 4> oracle{};
                            oracle.fill(std::numeric_limits<double>::quiet_NaN());
                            oracle[0] = 0.5;
                            if (spec.estimation) {
                                const auto okey = std::make_tuple(
                                    si, method == Method::wilcox_cc ? 1 : 0, rho);
                                auto it = oracle_cache.find(okey);
                                if (it == oracle_cache.end()) {
                                    it = oracle_cache
                                             .emplace(okey, oracle_concordances(
                                                                scn, method, spec.oracle_scale,
                                                                spec.master_seed,
                                                                {spec.disease, variant, si, 0, rho}))
                                             .first;
                                }
                                oracle = it->second;
                            }
                            cell.oc = aggregate(recs, scn, oracle);
                            for (const auto& r : recs) {
                                if (r.failed) {
                                    cell.error = r.error;
                                    break;
                                }
                            }

                            if (spec.comparators) {
                                const auto ckey =
                                    std::make_tuple(si, static_cast<int>(method), rho);
                                auto it = comparator_cache.find(ckey);
                                if (it == comparator_cache.end()) {
                                    const DataKey ck{spec.disease, variant, si, 0, rho};
                                    it = comparator_cache
                                             .emplace(ckey, run_comparators(
                                                                scn, spec.N, spec.alpha, method,
                                                                spec.runs, spec.master_seed, ck,
                                                                threads, spec.rank_mode))
                                             .first;
                                }
                                cell.comparators = it->second;
                            }
                        } catch (const Error& e) {
                            cell.error = e.what();
                        }
                        out.cells.push_back(std::move(cell));
                        if (progress) progress(out.cells.back(), out.cells.size(), total);
                    }
                }
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSV

inline constexpr std::string_view kCampaignCsvHeader =
    "disease,sim_id,scenario,method,alpha1,n1,rho,dose,metric,value,mc_se";

namespace detail {

inline std::string fmt_num(double v) {
    if (std::isnan(v)) return "NA";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline std::string fmt_grid(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

class CsvRows {
   public:
    CsvRows(std::ostream& os, const CellResult& c) : os_(os) {
        prefix_ = std::string(disease_code(c.disease)) + "," + std::string(sim_name(c.sim)) +
                  "," + c.scenario + "," + std::string(method_name(c.method)) + "," +
                  fmt_grid(c.alpha1) + "," + std::to_string(c.n1) + "," + fmt_grid(c.rho) + ",";
    }
    void row(std::string_view dose, std::string_view metric, double value, double se) {
        os_ << prefix_ << dose << ',' << metric << ',' << fmt_num(value) << ',' << fmt_num(se)
            << '\n';
    }
    void prop(std::string_view dose, std::string_view metric, const Proportion& p) {
        if (p.n == 0) return;
        row(dose, metric, p.value, p.mc_se);
    }
    void mean(std::string_view dose, std::string_view metric, const MeanStat& m) {
        if (m.n == 0) return;
        row(dose, metric, m.value, m.mc_se);
    }

   private:
    std::ostream& os_;
    std::string prefix_;
};

}  // namespace detail

/*
 * Long-format campaign CSV. Cell-level metrics carry dose "all". Comparator
 * metrics are prefixed with ma1_ / ma2_. A cell that failed to run emits a
 * single "error" row.
 */
inline void write_campaign_csv(std::ostream& os, const CampaignResult& res) {
    os << kCampaignCsvHeader << '\n';
    for (const auto& c : res.cells) {
        detail::CsvRows out(os, c);
        if (!c.oc) {
            out.row("all", "error", 1.0, std::numeric_limits<double>::quiet_NaN());
            continue;
        }
        const auto& oc = *c.oc;
        out.row("all", "runs", static_cast<double>(oc.runs),
                std::numeric_limits<double>::quiet_NaN());
        out.row("all", "failed_replicates", static_cast<double>(oc.failed),
                std::numeric_limits<double>::quiet_NaN());
        out.prop("all", "reject_any", oc.reject_any);
        out.prop("all", "fwer", oc.fwer);
        out.prop("all", "disjunctive_power", oc.disjunctive_power);
        static constexpr std::array<std::string_view, 4> case_names = {"case_i", "case_ii",
                                                                       "case_iii", "case_iv"};
        for (int k = 0; k < 4; ++k) out.prop("all", case_names[k], oc.case_prob[k]);
        if (c.comparators) {
            for (int k = 0; k < 2; ++k) {
                const std::string pre = k == 0 ? "ma1_" : "ma2_";
                out.prop("all", pre + "reject_any", c.comparators->reject_any[k]);
                out.prop("all", pre + "fwer", c.comparators->fwer[k]);
            }
        }
        for (int d = 1; d <= 3; ++d) {
            const std::string dose = std::to_string(d);
            out.prop(dose, "marginal_power", oc.marginal_power[d]);
            out.prop(dose, "conditional_power", oc.conditional_power[d]);
            out.prop(dose, "selection_prob", oc.selection_prob[d]);
            if (c.comparators) {
                out.prop(dose, "ma1_marginal_power", c.comparators->marginal_power[0][d]);
                out.prop(dose, "ma2_marginal_power", c.comparators->marginal_power[1][d]);
            }
            if (!std::isnan(oc.true_concordance[d])) {
                out.row(dose, "true_concordance", oc.true_concordance[d],
                        std::numeric_limits<double>::quiet_NaN());
            }
            for (Estimator e : kAllEstimators) {
                const auto& s = oc.estimators[static_cast<int>(e)][d];
                const std::string name(estimator_name(e));
                out.mean(dose, "estimate_" + name, s.point);
                out.mean(dose, "bias_" + name, s.bias);
                out.mean(dose, "ci_lower_" + name, s.ci_lower);
                out.prop(dose, "coverage_" + name, s.coverage);
                out.prop(dose, "coverage_estimated_" + name, s.coverage_estimated);
            }
        }
    }
}

/*
 * Tidy data for the power figures: one row per (x value, scenario, method,
 * series). The x axis is whichever grid axis the simulation varies.
 */
inline void write_plot_csv(std::ostream& os, const CampaignResult& res) {
    std::string axis = "alpha1";
    if (res.spec.sim == SimId::S4) axis = "rho";
    if (res.spec.sim == SimId::S5) axis = "n1";
    os << "disease,sim_id,x_name,x,scenario,method,series,value,mc_se\n";
    for (const auto& c : res.cells) {
        if (!c.oc) continue;
        const double x = axis == "rho" ? c.rho : (axis == "n1" ? c.n1 : c.alpha1);
        const std::string pre = std::string(disease_code(c.disease)) + "," +
                                std::string(sim_name(c.sim)) + "," + axis + "," +
                                detail::fmt_grid(x) + "," + c.scenario + "," +
                                std::string(method_name(c.method)) + ",";
        auto emit = [&](const std::string& series, const Proportion& p) {
            if (p.n == 0) return;
            os << pre << series << ',' << detail::fmt_num(p.value) << ','
               << detail::fmt_num(p.mc_se) << '\n';
        };
        emit("disjunctive_power", c.oc->disjunctive_power);
        emit("fwer", c.oc->fwer);
        for (int d = 1; d <= 3; ++d) {
            const std::string dn(dose_name(static_cast<DoseId>(d)));
            emit("marginal_power_" + dn, c.oc->marginal_power[d]);
            if (c.comparators) {
                emit("ma1_marginal_power_" + dn, c.comparators->marginal_power[0][d]);
                emit("ma2_marginal_power_" + dn, c.comparators->marginal_power[1][d]);
            }
        }
    }
}

}  // namespace adaptrial
