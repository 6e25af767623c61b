#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "memcomp/coders.hpp"
#include "memcomp/core.hpp"
#include "memcomp/experiment.hpp"
#include "memcomp/jeffreys.hpp"
#include "memcomp/parallel.hpp"
#include "memcomp/rng.hpp"
#include "memcomp/source_models.hpp"

namespace memcomp {

// Two-source relay: S1 sends y^m to client C1 through relay M, which keeps
// y^m. S2 then sends x^n to client C2 through M. Clients hold no memory, so
// only the S2 -> M hop can exploit the relay's memory.

enum class RelayStrategy { ucomp, ducompme_identical, ducompme_quadrature };

inline std::string to_string(RelayStrategy s) {
    switch (s) {
        case RelayStrategy::ucomp: return "ucomp";
        case RelayStrategy::ducompme_identical: return "ducompme-identical";
        case RelayStrategy::ducompme_quadrature: return "ducompme-quadrature";
    }
    return "?";
}

inline std::optional<RelayStrategy> parse_relay_strategy(const std::string& s) {
    if (s == "ucomp") return RelayStrategy::ucomp;
    if (s == "ducompme-identical") return RelayStrategy::ducompme_identical;
    if (s == "ducompme-quadrature") return RelayStrategy::ducompme_quadrature;
    return std::nullopt;
}

enum class Link { s1_m, m_c1, s2_m, m_c2 };

inline constexpr Link kLinks[] = {Link::s1_m, Link::m_c1, Link::s2_m, Link::m_c2};

inline std::string to_string(Link l) {
    switch (l) {
        case Link::s1_m: return "S1->M";
        case Link::m_c1: return "M->C1";
        case Link::s2_m: return "S2->M";
        case Link::m_c2: return "M->C2";
    }
    return "?";
}

struct ScenarioConfig {
    SourceFamily family = SourceFamily::bernoulli();
    CorrelationSpec::Kind corr_kind = CorrelationSpec::Kind::zero;
    std::optional<double> alpha;
    std::optional<Matrix> gamma;
    std::uint64_t n = 1000;
    std::uint64_t m = 1000;
    std::vector<RelayStrategy> strategies{RelayStrategy::ucomp, RelayStrategy::ducompme_identical};
    std::size_t trials = 1000;
    std::uint64_t seed = 1;
    PhiPolicy policy = PhiPolicy::jeffreys;
    std::optional<ParamVector> theta;
    int quadrature_nodes = kDefaultQuadratureNodes;

    CorrelationSpec corr() const {
        switch (corr_kind) {
            case CorrelationSpec::Kind::zero: return CorrelationSpec::zero();
            case CorrelationSpec::Kind::scaled_inverse_fisher: return CorrelationSpec::scaled_inverse_fisher(*alpha);
            case CorrelationSpec::Kind::explicit_matrix: return CorrelationSpec::constant(*gamma);
        }
        return CorrelationSpec::zero();
    }

    /// Text form of every field that affects the result; used to derive seeds.
    std::string canonical() const {
        std::string s = family.name() + "|eps=" + format_number(family.clearance()) + "|" +
                        CorrelationSpec::kind_name(corr_kind) + "|n=" + std::to_string(n) + "|m=" + std::to_string(m) +
                        "|trials=" + std::to_string(trials) + "|seed=" + std::to_string(seed) + "|policy=" +
                        to_string(policy) + "|nodes=" + std::to_string(quadrature_nodes);
        if (alpha) s += "|alpha=" + format_number(*alpha);
        if (gamma)
            for (Eigen::Index i = 0; i < gamma->size(); ++i) s += "|g=" + format_number(gamma->data()[i]);
        if (theta) s += "|theta=" + theta->to_string();
        for (auto st : strategies) s += "|" + to_string(st);
        return s;
    }

    std::vector<std::string> problems() const {
        std::vector<std::string> out;
        const std::string cell = "scenario " + family.name() + " n=" + std::to_string(n) + " m=" + std::to_string(m);
        if (strategies.empty()) out.push_back(cell + ": strategies list is empty");
        if (trials < 1) out.push_back(cell + ": trials must be >= 1 (got 0)");
        if (corr_kind == CorrelationSpec::Kind::scaled_inverse_fisher && !(alpha && *alpha > 0.0 && std::isfinite(*alpha)))
            out.push_back(cell + ": scaled-inverse-fisher correlation needs alpha > 0");
        const int d = family.dimension();
        if (corr_kind == CorrelationSpec::Kind::explicit_matrix &&
            !(gamma && gamma->rows() == d && gamma->cols() == d && is_symmetric(*gamma) && is_psd(*gamma)))
            out.push_back(cell + ": explicit correlation needs a symmetric PSD " + std::to_string(d) + "x" +
                          std::to_string(d) + " gamma");
        for (auto st : strategies)
            if (st == RelayStrategy::ducompme_quadrature && d != 1)
                out.push_back(cell + ": ducompme-quadrature requires d=1 (" + family.name() + " has d=" +
                              std::to_string(d) + ")");
        if (quadrature_nodes < 2) out.push_back(cell + ": quadrature_nodes must be >= 2");
        if (theta && !family.contains(*theta)) out.push_back(cell + ": theta outside the cleared domain");
        return out;
    }
};

/// Mean bits on one link under one strategy. The gain fields are set on S2->M
/// rows only and are absent when the UComp payload is zero (n = 0).
struct LinkRow {
    Link link = Link::s1_m;
    RelayStrategy strategy = RelayStrategy::ucomp;
    double mean_bits = 0.0;
    std::optional<double> stderr_bits;
    std::optional<double> gain_total;
    std::optional<double> gain_redundancy;
    std::optional<double> gain_stderr;
};

struct TrafficReport {
    ScenarioConfig config;
    std::vector<LinkRow> rows;
    std::optional<std::string> error;

    const LinkRow& row(Link l, RelayStrategy s) const {
        for (const auto& r : rows)
            if (r.link == l && r.strategy == s) return r;
        throw ArgumentError("no row for " + to_string(l) + " / " + to_string(s));
    }
};

namespace detail {

struct MeanStderr {
    double mean = 0.0;
    std::optional<double> stderr_value;
};

inline MeanStderr mean_stderr(const std::vector<double>& v) {
    MeanStderr r;
    if (v.empty()) return r;
    const double t = static_cast<double>(v.size());
    for (double x : v) r.mean += x;
    r.mean /= t;
    if (v.size() >= 2) {
        double ss = 0.0;
        for (double x : v) ss += (x - r.mean) * (x - r.mean);
        r.stderr_value = std::sqrt(ss / (t - 1.0) / t);
    }
    return r;
}

/// 1 - mean(mem) / mean(base) with a paired delta-method standard error.
inline std::pair<std::optional<double>, std::optional<double>> paired_gain(const std::vector<double>& base,
                                                                           const std::vector<double>& mem) {
    const auto b = mean_stderr(base), a = mean_stderr(mem);
    if (!(b.mean > 0.0)) return {std::nullopt, std::nullopt};
    const double g = 1.0 - a.mean / b.mean;
    if (base.size() < 2) return {g, std::nullopt};
    std::vector<double> lin(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) lin[i] = (mem[i] - (1.0 - g) * base[i]) / b.mean;
    return {g, mean_stderr(lin).stderr_value};
}

}  // namespace detail

/// Simulates `cfg.trials` independent uses of the relay. Trial t draws from
/// the stream derived from (seed, t).
inline TrafficReport run_scenario(const ScenarioConfig& cfg, int jobs = 1) {
    const auto problems = cfg.problems();
    if (!problems.empty()) {
        std::string msg = "invalid scenario config:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw ArgumentError(msg);
    }
    const PriorSpec prior = PriorSpec::jeffreys(cfg.family);
    const CorrelationSpec corr = cfg.corr();
    std::optional<ParamVector> fixed;
    if (cfg.policy == PhiPolicy::fixed) fixed = cfg.theta ? *cfg.theta : cfg.family.center();
    const CorrelatedPairSource source(prior, corr, fixed);
    std::unique_ptr<JointMixtureCoder> joint;
    for (auto st : cfg.strategies)
        if (st == RelayStrategy::ducompme_quadrature && !joint)
            joint = std::make_unique<JointMixtureCoder>(prior, corr, cfg.quadrature_nodes);

    const std::size_t T = cfg.trials, S = cfg.strategies.size();
    std::vector<double> s1(T), kt_x(T), lp_x(T);
    std::vector<std::vector<double>> s2(S, std::vector<double>(T));
    parallel_for(T, jobs, [&](std::size_t t) {
        RngStream rng = RngStream::derive(cfg.seed, t);
        auto [theta, phi] = source.draw(rng);
        const SourceModel src1(cfg.family, theta), src2(cfg.family, phi);
        const Sequence y = sample_sequence(src1, cfg.m, rng);
        const Sequence x = sample_sequence(src2, cfg.n, rng);
        s1[t] = kt_codelength(y, cfg.family).bits;
        kt_x[t] = kt_codelength(x, cfg.family).bits;
        lp_x[t] = src2.log2_prob(x);
        for (std::size_t si = 0; si < S; ++si) {
            // An empty relay memory leaves nothing to exploit; every strategy
            // then sends the plain UComp code.
            if (y.empty()) {
                s2[si][t] = kt_x[t];
                continue;
            }
            switch (cfg.strategies[si]) {
                case RelayStrategy::ucomp: s2[si][t] = kt_x[t]; break;
                case RelayStrategy::ducompme_identical:
                    s2[si][t] = memory_kt_codelength(x, y, cfg.family).bits;
                    break;
                case RelayStrategy::ducompme_quadrature: s2[si][t] = joint->codelength(x, y).bits; break;
            }
        }
    });

    TrafficReport rep;
    rep.config = cfg;
    std::vector<double> red_base(T);
    for (std::size_t t = 0; t < T; ++t) red_base[t] = kt_x[t] + lp_x[t];
    for (std::size_t si = 0; si < S; ++si) {
        const RelayStrategy st = cfg.strategies[si];
        const auto up = detail::mean_stderr(s1), down = detail::mean_stderr(kt_x), mid = detail::mean_stderr(s2[si]);
        rep.rows.push_back({Link::s1_m, st, up.mean, up.stderr_value, {}, {}, {}});
        rep.rows.push_back({Link::m_c1, st, up.mean, up.stderr_value, {}, {}, {}});
        LinkRow row{Link::s2_m, st, mid.mean, mid.stderr_value, {}, {}, {}};
        auto [g, gs] = detail::paired_gain(kt_x, s2[si]);
        row.gain_total = g;
        row.gain_stderr = gs;
        if (g) {
            std::vector<double> red(T);
            for (std::size_t t = 0; t < T; ++t) red[t] = s2[si][t] + lp_x[t];
            const double base = detail::mean_stderr(red_base).mean;
            if (base > 0.0) row.gain_redundancy = 1.0 - detail::mean_stderr(red).mean / base;
        }
        rep.rows.push_back(row);
        rep.rows.push_back({Link::m_c2, st, down.mean, down.stderr_value, {}, {}, {}});
    }
    return rep;
}

/// Runs each config with a seed derived from its own seed and content, so
/// duplicate configs give identical reports. Failures are attached to the
/// report of the config that raised them.
inline std::vector<TrafficReport> sweep_scenario(const std::vector<ScenarioConfig>& configs, int jobs = 1) {
    if (configs.empty()) throw ArgumentError("scenario sweep needs at least one config");
    std::vector<std::string> problems;
    for (const auto& c : configs)
        for (auto& p : c.problems()) problems.push_back(std::move(p));
    if (!problems.empty()) {
        std::string msg = "invalid scenario config:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw ArgumentError(msg);
    }
    std::vector<TrafficReport> out;
    for (const auto& c : configs) {
        ScenarioConfig run = c;
        run.seed = mix64(c.seed ^ fnv1a(c.canonical()));
        try {
            TrafficReport r = run_scenario(run, jobs);
            r.config = c;
            out.push_back(std::move(r));
        } catch (const Error& e) {
            TrafficReport r;
            r.config = c;
            r.error = e.what();
            out.push_back(std::move(r));
        }
    }
    return out;
}

}  // namespace memcomp
