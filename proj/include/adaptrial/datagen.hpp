#pragma once

#include <adaptrial/error.hpp>
#include <adaptrial/rng.hpp>
#include <adaptrial/trial_model.hpp>

#include <array>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace adaptrial {

struct LogScaleParams {
    double mu0 = 0.0;
    double sigma = 0.0;
    // mu[j][t], t = 0 (baseline), 1 (Month 6), 2 (Month 12)
    std::array<std::array<double, 3>, 4> mu{};
};

struct Ar1Covariance {
    double sigma2 = 0.0;
    double rho = 0.0;
    std::array<std::array<double, 3>, 3> matrix{};
    // Lower Cholesky factor of the matrix.
    std::array<std::array<double, 3>, 3> chol{};
};

/*
 * Log-scale mean and SD of a lognormal variable with the given mean and SD
 * on the original scale.
 */
inline std::pair<double, double> lognormal_params(double mean_raw, double sd_raw) {
    if (!(mean_raw > 0.0)) throw DomainError("lognormal_params needs mean > 0");
    if (!(sd_raw >= 0.0)) throw DomainError("lognormal_params needs sd >= 0");
    const double m2 = mean_raw * mean_raw;
    const double mu = std::log(m2 / std::sqrt(m2 + sd_raw * sd_raw));
    const double sigma = std::sqrt(std::log1p(sd_raw * sd_raw / m2));
    return {mu, sigma};
}

// Reduction rate r shifts the log-scale mean by ln(1 - r); SD stays constant.
inline LogScaleParams build_log_params(const ScenarioSpec& scn) {
    const auto [mu0, sigma] = lognormal_params(scn.baseline_mean, scn.baseline_sd);
    LogScaleParams p;
    p.mu0 = mu0;
    p.sigma = sigma;
    for (int j = 0; j < 4; ++j) {
        p.mu[j][0] = mu0;
        for (int t = 1; t <= 2; ++t) {
            const double r = scn.reduction[j][t - 1];
            if (!(r >= 0.0 && r < 1.0)) {
                throw DomainError("reduction rate must lie in [0,1): total eradication "
                                  "is modelled through the responder rate");
            }
            p.mu[j][t] = mu0 + std::log1p(-r);
        }
    }
    return p;
}

inline Ar1Covariance build_covariance(double sigma, double rho) {
    if (!(rho >= 0.0 && rho < 1.0)) throw DomainError("AR(1) correlation needs 0 <= rho < 1");
    if (!(sigma >= 0.0)) throw DomainError("sigma must be >= 0");
    Ar1Covariance c;
    c.sigma2 = sigma * sigma;
    c.rho = rho;
    for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
            c.matrix[a][b] = c.sigma2 * std::pow(rho, std::abs(a - b));
        }
    }
    // Factor the correlation matrix (PD for rho < 1) and scale by sigma, so a
    // degenerate sigma = 0 still yields a valid factor.
    const double s = std::sqrt(1.0 - rho * rho);
    const std::array<std::array<double, 3>, 3> corr_chol = {{
        {1.0, 0.0, 0.0},
        {rho, s, 0.0},
        {rho * rho, rho * s, s},
    }};
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) c.chol[a][b] = sigma * corr_chol[a][b];
    return c;
}

/*
 * Draws subject trajectories for one scenario. Log-scale params and the
 * Cholesky factor are computed once; sample() is reentrant given distinct
 * streams.
 */
class CohortSampler {
   public:
    explicit CohortSampler(const ScenarioSpec& scn)
        : scn_(scn),
          params_(build_log_params(scn)),
          cov_(build_covariance(params_.sigma, scn.rho)) {}

    const LogScaleParams& params() const { return params_; }
    const Ar1Covariance& covariance() const { return cov_; }

    void sample(const std::array<int, 4>& n_per_arm, int stage, RandomStream& rng,
                std::vector<SubjectRecord>& out) const {
        out.clear();
        int total = 0;
        for (int n : n_per_arm) {
            if (n < 0) throw InputError("arm size must be >= 0");
            total += n;
        }
        out.reserve(total);
        const auto& L = cov_.chol;
        for (int j = 0; j < 4; ++j) {
            const auto& mu = params_.mu[j];
            const double pi = scn_.responder[j];
            for (int i = 0; i < n_per_arm[j]; ++i) {
                const double z0 = rng.normal();
                const double z1 = rng.normal();
                const double z2 = rng.normal();
                SubjectRecord r;
                r.dose = static_cast<DoseId>(j);
                r.stage = stage;
                r.x0 = std::exp(mu[0] + L[0][0] * z0);
                r.x1 = std::exp(mu[1] + L[1][0] * z0 + L[1][1] * z1);
                r.x2 = std::exp(mu[2] + L[2][0] * z0 + L[2][1] * z1 + L[2][2] * z2);
                r.responder = rng.bernoulli(pi);
                if (r.responder) {
                    r.x1 = 0.0;
                    r.x2 = 0.0;
                }
                out.push_back(r);
            }
        }
    }

   private:
    ScenarioSpec scn_;
    LogScaleParams params_;
    Ar1Covariance cov_;
};

inline std::vector<SubjectRecord> sample_cohort(const std::array<int, 4>& n_per_arm,
                                                const ScenarioSpec& scn, int stage,
                                                RandomStream& rng) {
    std::vector<SubjectRecord> out;
    CohortSampler(scn).sample(n_per_arm, stage, rng, out);
    return out;
}

// ---------------------------------------------------------------------------
// Cohort CSV: subject_id,stage,dose,x0,x1,x2,responder

inline constexpr std::array<std::string_view, 7> kCohortColumns = {
    "subject_id", "stage", "dose", "x0", "x1", "x2", "responder"};

namespace detail {

inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    for (auto& f : out) {
        while (!f.empty() && f.front() == ' ') f.erase(f.begin());
        while (!f.empty() && f.back() == ' ') f.pop_back();
    }
    return out;
}

inline double parse_double(const std::string& s, std::size_t line, std::string_view col) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw InputError("line " + std::to_string(line) + ": column " + std::string(col) +
                         " is not a number: '" + s + "'");
    }
    return v;
}

}  // namespace detail

inline void write_cohort_csv(std::ostream& os, const std::vector<SubjectRecord>& records) {
    for (std::size_t i = 0; i < kCohortColumns.size(); ++i) {
        os << (i ? "," : "") << kCohortColumns[i];
    }
    os << '\n';
    std::size_t id = 1;
    for (const auto& r : records) {
        os << id++ << ',' << r.stage << ',' << index(r.dose) << ','
           << detail::format_double(r.x0) << ',' << detail::format_double(r.x1) << ','
           << detail::format_double(r.x2) << ',' << (r.responder ? 1 : 0) << '\n';
    }
}

/*
 * Reads the cohort schema. Columns may come in any order; missing or
 * unexpected columns are reported together.
 */
inline std::vector<SubjectRecord> read_cohort_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line.find_first_not_of(" \r\t") == std::string::npos) {
        throw InputError("cohort CSV is empty");
    }
    const auto header = detail::split_csv_line(line);
    std::array<int, 7> pos;
    pos.fill(-1);
    std::vector<std::string> unknown;
    for (std::size_t i = 0; i < header.size(); ++i) {
        bool found = false;
        for (std::size_t k = 0; k < kCohortColumns.size(); ++k) {
            if (header[i] == kCohortColumns[k]) {
                pos[k] = static_cast<int>(i);
                found = true;
            }
        }
        if (!found) unknown.push_back(header[i]);
    }
    std::vector<std::string> missing;
    for (std::size_t k = 0; k < kCohortColumns.size(); ++k) {
        if (pos[k] < 0) missing.emplace_back(kCohortColumns[k]);
    }
    if (!missing.empty() || !unknown.empty()) {
        std::string msg = "cohort CSV schema mismatch;";
        if (!missing.empty()) {
            msg += " missing columns:";
            for (const auto& m : missing) msg += " " + m;
            msg += ";";
        }
        if (!unknown.empty()) {
            msg += " unexpected columns:";
            for (const auto& u : unknown) msg += " " + u;
            msg += ";";
        }
        throw InputError(msg);
    }

    std::vector<SubjectRecord> out;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.find_first_not_of(" \r\t") == std::string::npos) continue;
        const auto f = detail::split_csv_line(line);
        if (f.size() != header.size()) {
            throw InputError("line " + std::to_string(lineno) + ": expected " +
                             std::to_string(header.size()) + " fields, got " +
                             std::to_string(f.size()));
        }
        auto num = [&](int k) {
            return detail::parse_double(f[pos[k]], lineno, kCohortColumns[k]);
        };
        SubjectRecord r;
        const double stage = num(1);
        if (stage != 1.0 && stage != 2.0) {
            throw InputError("line " + std::to_string(lineno) + ": stage must be 1 or 2");
        }
        r.stage = static_cast<int>(stage);
        r.dose = dose_from_int(static_cast<int>(num(2)));
        r.x0 = num(3);
        r.x1 = num(4);
        r.x2 = num(5);
        r.responder = num(6) != 0.0;
        if (!(r.x0 > 0.0) || !(r.x1 >= 0.0) || !(r.x2 >= 0.0)) {
            throw InputError("line " + std::to_string(lineno) +
                             ": parasite loads must satisfy x0 > 0, x1 >= 0, x2 >= 0");
        }
        if (r.responder && (r.x1 != 0.0 || r.x2 != 0.0)) {
            throw InputError("line " + std::to_string(lineno) +
                             ": responder must have zero follow-up loads");
        }
        out.push_back(r);
    }
    if (out.empty()) throw InputError("cohort CSV has no subject rows");
    return out;
}

}  // namespace adaptrial
