#pragma once

#include <adaptrial/error.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace adaptrial {

enum class DoseId : int { placebo = 0, low = 1, medium = 2, high = 3 };

inline constexpr std::array<DoseId, 4> kAllDoses = {
    DoseId::placebo, DoseId::low, DoseId::medium, DoseId::high};
inline constexpr std::array<DoseId, 3> kActiveDoses = {DoseId::low, DoseId::medium,
                                                       DoseId::high};

constexpr int index(DoseId d) noexcept { return static_cast<int>(d); }

inline std::string_view dose_name(DoseId d) {
    switch (d) {
        case DoseId::placebo: return "placebo";
        case DoseId::low: return "low";
        case DoseId::medium: return "medium";
        case DoseId::high: return "high";
    }
    return "?";
}

inline DoseId dose_from_int(int v) {
    if (v < 0 || v > 3) throw InputError("dose must be 0..3, got " + std::to_string(v));
    return static_cast<DoseId>(v);
}

/*
 * Set of active doses {1,2,3}, used both for the selected set K and for
 * intersection hypotheses J.
 */
class DoseSet {
   public:
    constexpr DoseSet() = default;
    constexpr DoseSet(std::initializer_list<int> doses) {
        for (int d : doses) insert(d);
    }
    static constexpr DoseSet from_mask(unsigned mask) {
        DoseSet s;
        s.bits_ = mask & 0b111u;
        return s;
    }

    constexpr void insert(int dose) { bits_ |= bit(dose); }
    constexpr void insert(DoseId d) { insert(index(d)); }
    constexpr void erase(int dose) { bits_ &= ~bit(dose); }
    constexpr bool contains(int dose) const {
        return dose >= 1 && dose <= 3 && (bits_ & bit(dose)) != 0;
    }
    constexpr bool contains(DoseId d) const { return contains(index(d)); }
    constexpr std::size_t size() const {
        return ((bits_ >> 0) & 1u) + ((bits_ >> 1) & 1u) + ((bits_ >> 2) & 1u);
    }
    constexpr bool empty() const { return bits_ == 0; }
    constexpr unsigned mask() const { return bits_; }

    constexpr DoseSet operator&(DoseSet o) const { return from_mask(bits_ & o.bits_); }
    constexpr DoseSet operator|(DoseSet o) const { return from_mask(bits_ | o.bits_); }
    constexpr bool operator==(const DoseSet&) const = default;
    constexpr bool subset_of(DoseSet o) const { return (bits_ & ~o.bits_) == 0; }

    std::vector<int> members() const {
        std::vector<int> out;
        for (int d = 1; d <= 3; ++d)
            if (contains(d)) out.push_back(d);
        return out;
    }

    // "{1,2}" or "{}".
    std::string str() const {
        std::string s = "{";
        bool first = true;
        for (int d : members()) {
            if (!first) s += ",";
            s += std::to_string(d);
            first = false;
        }
        return s + "}";
    }

    // "123", "13", ... as used in hypothesis labels.
    std::string digits() const {
        std::string s;
        for (int d : members()) s += std::to_string(d);
        return s;
    }

   private:
    static constexpr unsigned bit(int dose) {
        return (dose >= 1 && dose <= 3) ? (1u << (dose - 1)) : 0u;
    }
    unsigned bits_ = 0;
};

// Optional value per dose arm, indexed by DoseId.
template <class T>
struct PerDose {
    std::array<std::optional<T>, 4> slots{};

    std::optional<T>& operator[](DoseId d) { return slots[index(d)]; }
    const std::optional<T>& operator[](DoseId d) const { return slots[index(d)]; }
    std::optional<T>& operator[](int d) { return slots.at(d); }
    const std::optional<T>& operator[](int d) const { return slots.at(d); }
    bool has(int d) const { return slots.at(d).has_value(); }
};

enum class Method { lm, wilcox_c, wilcox_cc };
enum class ReallocMode { strict, pooled };

inline std::string_view method_name(Method m) {
    switch (m) {
        case Method::lm: return "lm";
        case Method::wilcox_c: return "wilcox_c";
        case Method::wilcox_cc: return "wilcox_cc";
    }
    return "?";
}

inline Method method_from_name(std::string_view s) {
    if (s == "lm") return Method::lm;
    if (s == "wilcox_c" || s == "WilcoxC" || s == "c") return Method::wilcox_c;
    if (s == "wilcox_cc" || s == "WilcoxCC" || s == "cc") return Method::wilcox_cc;
    throw InputError("unknown analysis method '" + std::string(s) + "'");
}

inline std::string_view realloc_name(ReallocMode m) {
    return m == ReallocMode::strict ? "strict" : "pooled";
}

inline ReallocMode realloc_from_name(std::string_view s) {
    if (s == "strict") return ReallocMode::strict;
    if (s == "pooled") return ReallocMode::pooled;
    throw InputError("unknown reallocation mode '" + std::string(s) + "'");
}

struct DesignConfig {
    int N = 200;
    int N1 = 120;
    double alpha = 0.025;
    double alpha1 = 0.3;
    Method method = Method::wilcox_c;
    ReallocMode realloc_mode = ReallocMode::strict;
    // Combination weights, filled in by validate_config.
    double w1 = 0.0;
    double w2 = 0.0;

    int N2() const { return N - N1; }
};

inline DesignConfig validate_config(DesignConfig cfg) {
    if (cfg.N <= 0) throw ValidationError("N", "total sample size must be positive");
    if (cfg.N1 <= 0 || cfg.N1 >= cfg.N) {
        throw ValidationError("N1", "need 0 < N1 < N (got N1=" + std::to_string(cfg.N1) +
                                        ", N=" + std::to_string(cfg.N) + ")");
    }
    if (!(cfg.alpha > 0.0 && cfg.alpha < 0.5)) {
        throw ValidationError("alpha", "need 0 < alpha < 0.5");
    }
    if (!(cfg.alpha1 > 0.0 && cfg.alpha1 < 1.0)) {
        throw ValidationError("alpha1", "need 0 < alpha1 < 1");
    }
    cfg.w1 = std::sqrt(static_cast<double>(cfg.N1) / cfg.N);
    cfg.w2 = std::sqrt(static_cast<double>(cfg.N - cfg.N1) / cfg.N);
    return cfg;
}

struct ScenarioSpec {
    std::string label;
    double baseline_mean = 1.0;
    double baseline_sd = 0.0;
    double rho = 0.5;
    // reduction[j][t-1] for dose j and follow-up t in {1,2}
    std::array<std::array<double, 2>, 4> reduction{};
    std::array<double, 4> responder{};

    double r(DoseId d, int t) const { return reduction[index(d)][t - 1]; }
    double pi(DoseId d) const { return responder[index(d)]; }

    // True when the dose arm has the same data distribution as placebo.
    bool is_null(DoseId d) const {
        return reduction[index(d)] == reduction[0] && responder[index(d)] == responder[0];
    }
};

inline void validate_scenario(const ScenarioSpec& s) {
    if (!(s.baseline_mean > 0.0)) throw ValidationError("baseline_mean", "must be > 0");
    if (!(s.baseline_sd >= 0.0)) throw ValidationError("baseline_sd", "must be >= 0");
    if (!(s.rho >= 0.0 && s.rho < 1.0)) throw ValidationError("rho", "need 0 <= rho < 1");
    for (int j = 0; j < 4; ++j) {
        if (!(s.responder[j] >= 0.0 && s.responder[j] <= 1.0)) {
            throw ValidationError("pi", "responder rates must lie in [0,1]");
        }
        for (int t = 0; t < 2; ++t) {
            if (!(s.reduction[j][t] >= 0.0 && s.reduction[j][t] < 1.0)) {
                throw ValidationError("r", "reduction rates must lie in [0,1)");
            }
        }
    }
}

struct SubjectRecord {
    DoseId dose = DoseId::placebo;
    int stage = 1;
    double x0 = 0.0;
    double x1 = 0.0;
    double x2 = 0.0;
    bool responder = false;

    double at(int t) const { return t == 0 ? x0 : (t == 1 ? x1 : x2); }
};

enum class SelectionCase { i, ii, iii, iv };

inline std::string_view case_name(SelectionCase c) {
    switch (c) {
        case SelectionCase::i: return "i";
        case SelectionCase::ii: return "ii";
        case SelectionCase::iii: return "iii";
        case SelectionCase::iv: return "iv";
    }
    return "?";
}

struct SelectionOutcome {
    DoseSet K;
    SelectionCase selection_case = SelectionCase::i;
    std::array<int, 4> n2_per_arm{};
};

// ---------------------------------------------------------------------------
// Built-in scenarios

enum class Disease { mansonellosis, onchocerciasis, loiasis };
enum class ScenarioVariant { standard, modified_rates, modified_baseline };

inline std::string_view disease_code(Disease d) {
    switch (d) {
        case Disease::mansonellosis: return "mans";
        case Disease::onchocerciasis: return "oncho";
        case Disease::loiasis: return "loa";
    }
    return "?";
}

inline Disease disease_from_name(std::string_view s) {
    if (s == "mans" || s == "mansonellosis") return Disease::mansonellosis;
    if (s == "oncho" || s == "onchocerciasis") return Disease::onchocerciasis;
    if (s == "loa" || s == "loiasis") return Disease::loiasis;
    throw InputError("unknown disease '" + std::string(s) + "'");
}

inline ScenarioVariant variant_from_name(std::string_view s) {
    if (s == "standard") return ScenarioVariant::standard;
    if (s == "modified_rates") return ScenarioVariant::modified_rates;
    if (s == "modified_baseline") return ScenarioVariant::modified_baseline;
    throw InputError("unknown scenario variant '" + std::string(s) + "'");
}

inline constexpr double kControlResponderRate = 0.10;
inline constexpr double kResponderGap = 0.20;

// Short machine-friendly name for a built-in scenario label.
inline std::string scenario_slug(std::string_view label) {
    if (label == "No effect") return "no_effect";
    if (label == "Efficacy only in high dose") return "high_only";
    if (label == "Trend (a)") return "trend_a";
    if (label == "Trend (b)") return "trend_b";
    if (label == "All doses effective") return "all_effective";
    std::string s;
    for (char c : label) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            s += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        } else if (!s.empty() && s.back() != '_') {
            s += '_';
        }
    }
    while (!s.empty() && s.back() == '_') s.pop_back();
    return s;
}

/*
 * The five reduction-rate scenarios for one disease. Responder rates follow
 * "Month-12 reduction minus 20 points", floored at the placebo rate of 10% so
 * that an ineffective dose is exchangeable with placebo.
 */
inline std::vector<ScenarioSpec> builtin_scenarios(Disease disease,
                                                   ScenarioVariant variant) {
    struct Baseline {
        double mean, sd, mean_mod, sd_mod;
    };
    Baseline b{};
    switch (disease) {
        case Disease::mansonellosis: b = {1838, 2565, 1000, 3500}; break;
        case Disease::onchocerciasis: b = {19, 30, 15, 40}; break;
        case Disease::loiasis: b = {5000, 4000, 4000, 5000}; break;
        default: throw InputError("unknown disease");
    }

    // {label, month-6 low/med/high, month-12 low/med/high, modified month-6}
    struct Row {
        const char* label;
        std::array<double, 3> m6, m12, m6_mod;
    };
    static constexpr std::array<Row, 5> rows = {{
        {"No effect", {0, 0, 0}, {0, 0, 0}, {0, 0, 0}},
        {"Efficacy only in high dose", {0, 0, 50}, {0, 0, 60}, {0, 0, 40}},
        {"Trend (a)", {0, 30, 50}, {0, 40, 60}, {0, 20, 40}},
        {"Trend (b)", {0, 40, 50}, {0, 50, 60}, {0, 30, 40}},
        {"All doses effective", {40, 40, 40}, {50, 50, 50}, {30, 30, 30}},
    }};

    std::vector<ScenarioSpec> out;
    out.reserve(rows.size());
    for (const auto& row : rows) {
        ScenarioSpec s;
        s.label = row.label;
        const bool mod_base = variant == ScenarioVariant::modified_baseline;
        s.baseline_mean = mod_base ? b.mean_mod : b.mean;
        s.baseline_sd = mod_base ? b.sd_mod : b.sd;
        s.rho = 0.5;
        s.reduction[0] = {0.0, 0.0};
        s.responder[0] = kControlResponderRate;
        for (int j = 1; j <= 3; ++j) {
            const double m6 = variant == ScenarioVariant::modified_rates ? row.m6_mod[j - 1]
                                                                         : row.m6[j - 1];
            const double m12 = row.m12[j - 1];
            s.reduction[j] = {m6 / 100.0, m12 / 100.0};
            s.responder[j] = std::max(m12 / 100.0 - kResponderGap, kControlResponderRate);
        }
        out.push_back(std::move(s));
    }
    return out;
}

inline const ScenarioSpec& find_scenario(const std::vector<ScenarioSpec>& all,
                                         std::string_view name) {
    for (const auto& s : all) {
        if (s.label == name || scenario_slug(s.label) == name) return s;
    }
    throw InputError("unknown scenario '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// JSON

inline void to_json(nlohmann::json& j, const DesignConfig& c) {
    j = nlohmann::json{{"N", c.N},
                       {"N1", c.N1},
                       {"alpha", c.alpha},
                       {"alpha1", c.alpha1},
                       {"method", std::string(method_name(c.method))},
                       {"realloc_mode", std::string(realloc_name(c.realloc_mode))},
                       {"w1", c.w1},
                       {"w2", c.w2}};
}

inline void from_json(const nlohmann::json& j, DesignConfig& c) {
    static const std::array<std::string, 8> known = {
        "N", "N1", "alpha", "alpha1", "method", "realloc_mode", "w1", "w2"};
    for (const auto& [key, _] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw InputError("unknown design config key '" + key + "'");
        }
    }
    DesignConfig d;
    d.N = j.value("N", d.N);
    d.N1 = j.value("N1", d.N1);
    d.alpha = j.value("alpha", d.alpha);
    d.alpha1 = j.value("alpha1", d.alpha1);
    if (j.contains("method")) d.method = method_from_name(j.at("method").get<std::string>());
    if (j.contains("realloc_mode")) {
        d.realloc_mode = realloc_from_name(j.at("realloc_mode").get<std::string>());
    }
    c = d;
}

inline void to_json(nlohmann::json& j, const ScenarioSpec& s) {
    j = nlohmann::json{{"label", s.label},
                       {"baseline_mean", s.baseline_mean},
                       {"baseline_sd", s.baseline_sd},
                       {"rho", s.rho},
                       {"r", s.reduction},
                       {"pi", s.responder}};
}

inline void from_json(const nlohmann::json& j, ScenarioSpec& s) {
    ScenarioSpec out;
    out.label = j.value("label", std::string{});
    out.baseline_mean = j.at("baseline_mean").get<double>();
    out.baseline_sd = j.at("baseline_sd").get<double>();
    out.rho = j.value("rho", 0.5);
    out.reduction = j.at("r").get<std::array<std::array<double, 2>, 4>>();
    out.responder = j.at("pi").get<std::array<double, 4>>();
    s = std::move(out);
}

}  // namespace adaptrial
