#pragma once

#include <adaptrial/adaptrial.hpp>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace adaptrial::cli {

enum ExitCode { kOk = 0, kValidation = 1, kRuntime = 2 };

using nlohmann::json;

namespace detail {

inline std::string fixed(double v, int digits = 3) {
    if (std::isnan(v)) return "NA";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

inline std::string pad(std::string s, std::size_t w) {
    while (s.size() < w) s += ' ';
    return s;
}

inline json nan_safe(double v) { return std::isnan(v) ? json(nullptr) : json(v); }

inline DesignConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw InputError("config '" + path + "' is not valid JSON: " + e.what());
    }
    try {
        return validate_config(j.get<DesignConfig>());
    } catch (const json::exception& e) {
        throw InputError("config '" + path + "': " + e.what());
    }
}

inline std::vector<SubjectRecord> load_cohort(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open data file '" + path + "'");
    return read_cohort_csv(in);
}

inline std::vector<SubjectRecord> stage_subset(const std::vector<SubjectRecord>& all, int stage) {
    std::vector<SubjectRecord> out;
    for (const auto& r : all)
        if (r.stage == stage) out.push_back(r);
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// simulate

struct SimulateOptions {
    std::string disease = "mans";
    std::string sim = "S1";
    int runs = 50000;
    std::uint64_t seed = 42;
    std::string out;
    std::vector<std::string> methods;
    std::vector<double> alpha1;
    std::vector<int> n1;
    std::vector<double> rho;
    std::vector<std::string> scenarios;
    std::string realloc = "strict";
    bool plotdata = false;
    bool allow_offgrid = false;
    bool no_comparators = false;
    bool no_estimation = false;
    double oracle_scale = 5000.0;
    int threads = 0;
    std::string format = "text";
};

template <class T>
void check_grid(const std::vector<T>& values, const std::vector<T>& grid, const char* flag,
                bool allow_offgrid) {
    for (const T& v : values) {
        bool on = false;
        for (const T& g : grid) on = on || std::abs(static_cast<double>(v - g)) < 1e-9;
        if (!on && !allow_offgrid) {
            std::ostringstream os;
            os << "value " << v << " is outside the design grid (use --allow-offgrid)";
            throw ValidationError(flag, os.str());
        }
    }
}

inline SimulationSpec build_simulation(const SimulateOptions& o) {
    auto spec = default_simulation(disease_from_name(o.disease), sim_from_name(o.sim));
    if (o.runs < 1) throw ValidationError("--runs", "must be >= 1");
    spec.runs = o.runs;
    spec.master_seed = o.seed;
    if (!o.methods.empty()) {
        spec.methods.clear();
        for (const auto& m : o.methods) spec.methods.push_back(method_from_name(m));
    }
    check_grid(o.alpha1, kAlpha1Grid, "--alpha1", o.allow_offgrid);
    check_grid(o.n1, kN1Grid, "--n1", o.allow_offgrid);
    check_grid(o.rho, kRhoGrid, "--rho", o.allow_offgrid);
    for (double a : o.alpha1) {
        if (!(a > 0.0 && a < 1.0)) throw ValidationError("--alpha1", "need 0 < alpha1 < 1");
    }
    for (int n : o.n1) {
        if (n <= 0 || n >= spec.N) throw ValidationError("--n1", "need 0 < N1 < N");
    }
    for (double r : o.rho) {
        if (!(r >= 0.0 && r < 1.0)) throw ValidationError("--rho", "need 0 <= rho < 1");
    }
    if (!o.alpha1.empty()) spec.alpha1_grid = o.alpha1;
    if (!o.n1.empty()) spec.n1_grid = o.n1;
    if (!o.rho.empty()) spec.rho_grid = o.rho;
    spec.scenarios = o.scenarios;
    {
        const auto all = builtin_scenarios(spec.disease, sim_variant(spec.sim));
        for (const auto& s : spec.scenarios) {
            try {
                find_scenario(all, s);
            } catch (const InputError& e) {
                throw ValidationError("--scenario", e.what());
            }
        }
    }
    spec.realloc_mode = realloc_from_name(o.realloc);
    spec.comparators = !o.no_comparators;
    spec.estimation = !o.no_estimation;
    if (!(o.oracle_scale >= 1.0)) throw ValidationError("--oracle-scale", "must be >= 1");
    spec.oracle_scale = o.oracle_scale;
    spec.threads = o.threads;
    return spec;
}

inline std::string plot_path(const std::string& out) {
    const auto dot = out.rfind('.');
    const auto slash = out.find_last_of('/');
    const bool has_ext = dot != std::string::npos && (slash == std::string::npos || dot > slash);
    return (has_ext ? out.substr(0, dot) : out) + "_plot.csv";
}

inline int cmd_simulate(const SimulateOptions& o, std::ostream& out, std::ostream& err) {
    const auto spec = build_simulation(o);
    const auto res = run_campaign(spec, [&](const CellResult& c, std::size_t done,
                                            std::size_t total) {
        err << "[" << done << "/" << total << "] " << c.scenario << " "
            << method_name(c.method) << " alpha1=" << c.alpha1 << " n1=" << c.n1
            << " rho=" << c.rho << (c.error.empty() ? "" : " ERROR: " + c.error) << "\n";
    });
    {
        std::ofstream f(o.out, std::ios::binary);
        if (!f) throw InputError("cannot write '" + o.out + "'");
        write_campaign_csv(f, res);
    }
    if (o.plotdata) {
        std::ofstream f(plot_path(o.out), std::ios::binary);
        if (!f) throw InputError("cannot write '" + plot_path(o.out) + "'");
        write_plot_csv(f, res);
    }

    if (o.format == "json") {
        json cells = json::array();
        for (const auto& c : res.cells) {
            json j{{"scenario", c.scenario}, {"method", method_name(c.method)},
                   {"alpha1", c.alpha1},     {"n1", c.n1},
                   {"rho", c.rho},           {"error", c.error}};
            if (c.oc) {
                j["reject_any"] = detail::nan_safe(c.oc->reject_any.value);
                j["disjunctive_power"] = detail::nan_safe(c.oc->disjunctive_power.value);
                j["marginal_power"] = {detail::nan_safe(c.oc->marginal_power[1].value),
                                       detail::nan_safe(c.oc->marginal_power[2].value),
                                       detail::nan_safe(c.oc->marginal_power[3].value)};
            }
            cells.push_back(std::move(j));
        }
        out << json{{"out", o.out}, {"cells", cells}}.dump(2) << "\n";
        return kOk;
    }

    out << detail::pad("scenario", 15) << detail::pad("method", 11) << detail::pad("alpha1", 8)
        << detail::pad("n1", 5) << detail::pad("rho", 5) << detail::pad("any", 7)
        << detail::pad("disj", 7) << detail::pad("low", 7) << detail::pad("med", 7) << "high\n";
    for (const auto& c : res.cells) {
        out << detail::pad(c.scenario, 15) << detail::pad(std::string(method_name(c.method)), 11)
            << detail::pad(detail::fixed(c.alpha1, 1), 8) << detail::pad(std::to_string(c.n1), 5)
            << detail::pad(detail::fixed(c.rho, 1), 5);
        if (!c.oc) {
            out << "error: " << c.error << "\n";
            continue;
        }
        out << detail::pad(detail::fixed(c.oc->reject_any.value), 7)
            << detail::pad(detail::fixed(c.oc->disjunctive_power.value), 7)
            << detail::pad(detail::fixed(c.oc->marginal_power[1].value), 7)
            << detail::pad(detail::fixed(c.oc->marginal_power[2].value), 7)
            << detail::fixed(c.oc->marginal_power[3].value) << "\n";
    }
    out << "wrote " << o.out << (o.plotdata ? " and " + plot_path(o.out) : "") << "\n";
    return kOk;
}

// ---------------------------------------------------------------------------
// analyze

struct AnalyzeOptions {
    std::string stage;
    std::string data;
    std::string config;
    std::string format = "text";
};

struct FinalAnalysis {
    DesignConfig cfg;
    StagePValues m6;
    StagePValues m12_s1;
    StagePValues m12_s2;
    SelectionOutcome rule;
    DoseSet K;
    ClosedTestReport report;
    // [dose] -> estimates in kAllEstimators order (missing when not computable)
    std::array<std::array<std::optional<ConcordanceEstimate>, 4>, 4> estimates{};
};

/*
 * Final analysis of an ingested two-stage data set. K is read off the
 * stage-2 arms; the interim rule is recomputed for reference.
 */
inline FinalAnalysis final_analysis(const std::vector<SubjectRecord>& records,
                                    const DesignConfig& cfg) {
    FinalAnalysis fa;
    fa.cfg = cfg;
    const auto s1 = detail::stage_subset(records, 1);
    const auto s2 = detail::stage_subset(records, 2);
    if (s1.empty()) throw InputError("data has no stage-1 subjects");
    if (s2.empty()) throw InputError("data has no stage-2 subjects");
    fa.m6 = stage_pvalues(s1, cfg.method, 1);
    if (!fa.m6.p.has(1) || !fa.m6.p.has(2) || fa.m6.p.has(3)) {
        throw InputError("stage 1 must contain placebo, low and medium dose arms only");
    }
    fa.rule = select_and_allocate(*fa.m6.p[1], *fa.m6.p[2], cfg);
    fa.m12_s1 = stage_pvalues(s1, cfg.method, 2);
    fa.m12_s2 = stage_pvalues(s2, cfg.method, 2);
    fa.K = fa.m12_s2.doses();
    PerDose<PValue> p1;
    p1[1] = fa.m12_s1.p[1];
    p1[2] = fa.m12_s1.p[2];
    try {
        fa.report = run_closed_test(p1, fa.m12_s2.p, fa.K, cfg);
    } catch (const ContractViolation& e) {
        throw InputError(std::string("stage-2 arms do not form a valid selection: ") + e.what());
    }

    const auto arm1 = adaptrial::detail::arm_outcomes(s1, cfg.method, 2);
    const auto arm2 = adaptrial::detail::arm_outcomes(s2, cfg.method, 2);
    for (int d : fa.K.members()) {
        const auto& c1 = fa.m12_s1.c[d];
        const auto& c2 = *fa.m12_s2.c[d];
        std::vector<double> treat(arm2[d]), control(arm2[0]);
        unsigned used = 0b10;
        if (c1) {
            treat.insert(treat.end(), arm1[d].begin(), arm1[d].end());
            control.insert(control.end(), arm1[0].begin(), arm1[0].end());
            used |= 0b01;
        }
        fa.estimates[d][static_cast<int>(Estimator::pooled)] = estimate_pooled(treat, control, used);
        fa.estimates[d][static_cast<int>(Estimator::inverse_normal)] =
            estimate_inverse_normal(c1, c2, cfg.w1, cfg.w2);
        fa.estimates[d][static_cast<int>(Estimator::conditional)] =
            estimate_conditional(c1, c2, true);
        fa.estimates[d][static_cast<int>(Estimator::unconditional)] =
            estimate_unconditional(c1, c2);
    }
    return fa;
}

inline json pmap_json(const PerDose<PValue>& p) {
    json j = json::object();
    for (int d = 1; d <= 3; ++d)
        if (p.has(d)) j[std::to_string(d)] = p[d]->value();
    return j;
}

inline json report_json(const ClosedTestReport& rep) {
    json hyps = json::array();
    for (unsigned mask : kIntersectionOrder) {
        const DoseSet J = DoseSet::from_mask(mask);
        const auto& r = rep.results[mask];
        json h{{"J", J.members()}, {"status", status_name(r.status)}};
        if (r.status != HypothesisStatus::accepted_at_interim) {
            json th = json::object();
            for (int k : r.decision.tested.members()) th[std::to_string(k)] = r.decision.threshold[k];
            h["thresholds"] = th;
            h["budget"] = r.decision.budget;
        }
        hyps.push_back(std::move(h));
    }
    json table = json::object();
    for (int j = 1; j <= 3; ++j) {
        table[std::to_string(j)] = {rep.table.at(j, 1), rep.table.at(j, 2), rep.table.at(j, 3)};
    }
    return json{{"K", rep.K.members()},
                {"realloc_mode", realloc_name(rep.mode)},
                {"conditional_errors", table},
                {"hypotheses", hyps},
                {"rejected", rep.rejected.members()}};
}

inline int cmd_analyze(const AnalyzeOptions& o, std::ostream& out) {
    const auto cfg = detail::load_config(o.config);
    const auto records = detail::load_cohort(o.data);

    if (o.stage == "interim") {
        const auto s1 = detail::stage_subset(records, 1);
        if (s1.empty()) throw InputError("data has no stage-1 subjects");
        const auto m6 = stage_pvalues(s1, cfg.method, 1);
        if (!m6.p.has(1) || !m6.p.has(2)) {
            throw InputError("stage 1 must contain low and medium dose arms");
        }
        const auto sel = select_and_allocate(*m6.p[1], *m6.p[2], cfg);
        if (o.format == "json") {
            json alloc = json::object();
            for (int d = 0; d <= 3; ++d)
                if (sel.n2_per_arm[d] > 0) alloc[std::string(dose_name(static_cast<DoseId>(d)))] = sel.n2_per_arm[d];
            out << json{{"method", method_name(cfg.method)},
                        {"p_month6", pmap_json(m6.p)},
                        {"case", case_name(sel.selection_case)},
                        {"K", sel.K.members()},
                        {"n2_per_arm", alloc}}
                       .dump(2)
                << "\n";
            return kOk;
        }
        out << "Interim analysis (" << method_name(cfg.method) << ", alpha1 = " << cfg.alpha1
            << ")\n";
        out << "  p_low  (Month 6, stage 1) = " << detail::fixed(*m6.p[1]) << "\n";
        out << "  p_med  (Month 6, stage 1) = " << detail::fixed(*m6.p[2]) << "\n";
        out << "Selection: case " << case_name(sel.selection_case) << ", K = " << sel.K.str()
            << "\n";
        out << "Stage-2 allocation:";
        for (int d = 0; d <= 3; ++d) {
            if (sel.n2_per_arm[d] > 0) {
                out << " " << dose_name(static_cast<DoseId>(d)) << "=" << sel.n2_per_arm[d];
            }
        }
        out << "\n";
        return kOk;
    }

    const auto fa = final_analysis(records, cfg);
    if (o.format == "json") {
        json est = json::object();
        for (int d : fa.K.members()) {
            json e = json::object();
            for (Estimator k : kAllEstimators) {
                const auto& x = fa.estimates[d][static_cast<int>(k)];
                if (x) e[std::string(estimator_name(k))] = {{"point", x->point}, {"ci_lower", x->ci_lower}};
            }
            est[std::to_string(d)] = e;
        }
        out << json{{"method", method_name(cfg.method)},
                    {"p_month6_stage1", pmap_json(fa.m6.p)},
                    {"p_month12_stage1", pmap_json(fa.m12_s1.p)},
                    {"p_month12_stage2", pmap_json(fa.m12_s2.p)},
                    {"rule_case", case_name(fa.rule.selection_case)},
                    {"rule_K", fa.rule.K.members()},
                    {"closed_test", report_json(fa.report)},
                    {"estimates", est}}
                   .dump(2)
            << "\n";
        return kOk;
    }

    out << "Final analysis (" << method_name(cfg.method) << ")\n";
    out << "  dose    p M6 s1  p M12 s1  p M12 s2\n";
    for (int d = 1; d <= 3; ++d) {
        auto cell = [&](const StagePValues& s) {
            return s.p.has(d) ? detail::fixed(*s.p[d]) : std::string("-");
        };
        out << "  " << detail::pad(std::string(dose_name(static_cast<DoseId>(d))), 8)
            << detail::pad(cell(fa.m6), 9) << detail::pad(cell(fa.m12_s1), 10) << cell(fa.m12_s2)
            << "\n";
    }
    out << "Interim rule: case " << case_name(fa.rule.selection_case) << ", K = "
        << fa.rule.K.str() << "\n";
    if (!(fa.rule.K == fa.K)) {
        out << "note: stage-2 data contain arms " << fa.K.str()
            << ", which differs from the interim rule\n";
    }
    out << explain(fa.report);
    out << "Concordance at Month 12, estimate (one-sided 97.5% lower bound)\n";
    out << "  dose    observed      inverse_normal  conditional   unconditional\n";
    for (int d : fa.K.members()) {
        out << "  " << detail::pad(std::string(dose_name(static_cast<DoseId>(d))), 8);
        for (Estimator k : {Estimator::pooled, Estimator::inverse_normal, Estimator::conditional,
                            Estimator::unconditional}) {
            const auto& x = fa.estimates[d][static_cast<int>(k)];
            const std::string s =
                x ? detail::fixed(x->point, 2) + " (" + detail::fixed(x->ci_lower, 2) + ")" : "-";
            out << detail::pad(s, k == Estimator::inverse_normal ? 16 : 14);
        }
        out << "\n";
    }
    return kOk;
}

// ---------------------------------------------------------------------------
// example

struct ExampleOptions {
    std::string scenario;
    std::string realloc = "strict";
    std::string format = "text";
};

struct WorkedExample {
    PValue m6_low, m6_med;
    PerDose<PValue> stage1;
    PerDose<PValue> stage2;
};

// Published stage-wise p-values of the two worked examples.
inline WorkedExample worked_example(std::string_view name) {
    WorkedExample w;
    if (name == "trend") {
        w.m6_low = PValue(0.391);
        w.m6_med = PValue(0.047);
        w.stage1[1] = PValue(0.692);
        w.stage1[2] = PValue(0.057);
        w.stage2[2] = PValue(0.015);
        w.stage2[3] = PValue(0.000);
    } else if (name == "all-effective") {
        w.m6_low = PValue(0.002);
        w.m6_med = PValue(0.005);
        w.stage1[1] = PValue(0.009);
        w.stage1[2] = PValue(0.001);
        w.stage2[1] = PValue(0.045);
        w.stage2[2] = PValue(0.014);
    } else {
        throw ValidationError("--scenario", "expected 'trend' or 'all-effective'");
    }
    return w;
}

inline int cmd_example(const ExampleOptions& o, std::ostream& out) {
    const auto w = worked_example(o.scenario);
    DesignConfig cfg;
    cfg.realloc_mode = realloc_from_name(o.realloc);
    cfg = validate_config(cfg);
    const auto sel = select_and_allocate(w.m6_low, w.m6_med, cfg);
    const auto rep = run_closed_test(w.stage1, w.stage2, sel.K, cfg);
    if (o.format == "json") {
        out << json{{"scenario", o.scenario},
                    {"case", case_name(sel.selection_case)},
                    {"closed_test", report_json(rep)}}
                   .dump(2)
            << "\n";
        return kOk;
    }
    out << "Scenario " << o.scenario << ": p_low,M6 = " << detail::fixed(w.m6_low)
        << ", p_med,M6 = " << detail::fixed(w.m6_med) << " -> case "
        << case_name(sel.selection_case) << "\n";
    out << explain(rep);
    return kOk;
}

// ---------------------------------------------------------------------------
// scenarios

struct ScenariosOptions {
    std::string disease = "mans";
    std::string variant = "standard";
    std::string format = "text";
};

inline int cmd_scenarios(const ScenariosOptions& o, std::ostream& out) {
    const auto all = builtin_scenarios(disease_from_name(o.disease), variant_from_name(o.variant));
    if (o.format == "json") {
        json arr = json::array();
        for (const auto& s : all) {
            json j = s;
            j["slug"] = scenario_slug(s.label);
            arr.push_back(std::move(j));
        }
        out << arr.dump(2) << "\n";
        return kOk;
    }
    out << "baseline mean " << all.front().baseline_mean << ", SD " << all.front().baseline_sd
        << ", rho " << all.front().rho << "\n";
    for (const auto& s : all) {
        out << detail::pad(scenario_slug(s.label), 15) << "r6 =";
        for (int d = 1; d <= 3; ++d) out << " " << detail::fixed(s.reduction[d][0], 2);
        out << "  r12 =";
        for (int d = 1; d <= 3; ++d) out << " " << detail::fixed(s.reduction[d][1], 2);
        out << "  pi =";
        for (int d = 0; d <= 3; ++d) out << " " << detail::fixed(s.responder[d], 2);
        out << "\n";
    }
    return kOk;
}

// ---------------------------------------------------------------------------

inline int threads_from_env() {
    if (const char* v = std::getenv("ADAPTRIAL_THREADS")) {
        try {
            return std::stoi(v);
        } catch (const std::exception&) {
            throw ValidationError("ADAPTRIAL_THREADS", "not an integer: '" + std::string(v) + "'");
        }
    }
    return 0;
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
    CLI::App app{"Adaptive two-stage dose-selection trial: simulation and analysis"};
    app.require_subcommand(1);
    app.allow_extras(false);

    SimulateOptions sim;
    int threads = -1;
    auto* s = app.add_subcommand("simulate", "Run a simulation campaign and write the CSV");
    s->add_option("--disease", sim.disease, "mans | oncho | loa")->required();
    s->add_option("--sim", sim.sim, "S1 .. S5")->required();
    s->add_option("--runs", sim.runs, "Replicates per cell")->capture_default_str();
    s->add_option("--seed", sim.seed, "Master seed")->capture_default_str();
    s->add_option("--out", sim.out, "Output CSV path")->required();
    s->add_option("--method", sim.methods, "lm | wilcox_c | wilcox_cc (repeatable)");
    s->add_option("--alpha1", sim.alpha1, "Selection thresholds (repeatable)");
    s->add_option("--n1", sim.n1, "Stage-1 sizes (repeatable)");
    s->add_option("--rho", sim.rho, "AR(1) correlations (repeatable)");
    s->add_option("--scenario", sim.scenarios, "Scenario slugs (repeatable)");
    s->add_option("--realloc", sim.realloc, "strict | pooled")->capture_default_str();
    s->add_flag("--plotdata", sim.plotdata, "Also write tidy figure data");
    s->add_flag("--allow-offgrid", sim.allow_offgrid, "Accept grid values outside the design");
    s->add_flag("--no-comparators", sim.no_comparators, "Skip MA1/MA2");
    s->add_flag("--no-estimation", sim.no_estimation, "Skip concordance estimation");
    s->add_option("--oracle-scale", sim.oracle_scale, "Sample-size factor of the bias oracle")
        ->capture_default_str();
    s->add_option("--threads", threads, "Worker threads (default: ADAPTRIAL_THREADS or all cores)");
    s->add_option("--format", sim.format, "text | json")->capture_default_str();

    AnalyzeOptions an;
    auto* a = app.add_subcommand("analyze", "Interim or final analysis of a cohort CSV");
    a->add_option("--stage", an.stage, "interim | final")->required();
    a->add_option("--data", an.data, "Cohort CSV")->required();
    a->add_option("--config", an.config, "Design config JSON")->required();
    a->add_option("--format", an.format, "text | json")->capture_default_str();

    ExampleOptions ex;
    auto* e = app.add_subcommand("example", "Closed test of a worked example");
    e->add_option("--scenario", ex.scenario, "trend | all-effective")->required();
    e->add_option("--realloc", ex.realloc, "strict | pooled")->capture_default_str();
    e->add_option("--format", ex.format, "text | json")->capture_default_str();

    ScenariosOptions sc;
    auto* c = app.add_subcommand("scenarios", "List built-in scenarios");
    c->add_option("--disease", sc.disease, "mans | oncho | loa")->capture_default_str();
    c->add_option("--variant", sc.variant, "standard | modified_rates | modified_baseline")
        ->capture_default_str();
    c->add_option("--format", sc.format, "text | json")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& pe) {
        err << "error: " << pe.what() << "\n";
        return kValidation;
    }

    auto check_format = [](const std::string& f) {
        if (f != "text" && f != "json") throw ValidationError("--format", "expected text or json");
    };
    try {
        if (s->parsed()) {
            check_format(sim.format);
            sim.threads = threads >= 0 ? threads : threads_from_env();
            return cmd_simulate(sim, out, err);
        }
        if (a->parsed()) {
            check_format(an.format);
            if (an.stage != "interim" && an.stage != "final") {
                throw ValidationError("--stage", "expected interim or final");
            }
            return cmd_analyze(an, out);
        }
        if (e->parsed()) {
            check_format(ex.format);
            return cmd_example(ex, out);
        }
        if (c->parsed()) {
            check_format(sc.format);
            return cmd_scenarios(sc, out);
        }
    } catch (const ValidationError& ve) {
        err << "error: " << ve.what() << "\n";
        return kValidation;
    } catch (const InputError& ie) {
        err << "error: " << ie.what() << "\n";
        return kValidation;
    } catch (const std::exception& ex2) {
        err << "error: " << ex2.what() << "\n";
        return kRuntime;
    }
    return kRuntime;
}

}  // namespace adaptrial::cli
