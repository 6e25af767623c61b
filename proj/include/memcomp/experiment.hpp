#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "memcomp/bounds.hpp"
#include "memcomp/coders.hpp"
#include "memcomp/core.hpp"
#include "memcomp/jeffreys.hpp"
#include "memcomp/parallel.hpp"
#include "memcomp/rng.hpp"
#include "memcomp/source_models.hpp"

namespace memcomp {

enum class PhiPolicy { fixed, jeffreys };

inline std::string to_string(PhiPolicy p) { return p == PhiPolicy::fixed ? "fixed" : "jeffreys"; }

inline constexpr std::size_t kMinCheckedTrials = 100;
inline constexpr double kToleranceFloorBits = 0.1;

struct ExperimentConfig {
    SourceFamily family = SourceFamily::bernoulli();
    CorrelationSpec::Kind corr_kind = CorrelationSpec::Kind::zero;
    std::vector<double> alphas;          // scaled-inverse-Fisher sweep
    std::optional<Matrix> gamma;         // constant explicit covariance
    std::vector<std::uint64_t> ns{1000};
    std::vector<std::uint64_t> ms{1000};
    std::vector<double> pes{0.0};
    std::vector<Strategy> strategies{Strategy::ucomp, Strategy::ducompmd, Strategy::ducompme};
    std::size_t trials = 1000;
    std::uint64_t seed = 1;
    PhiPolicy policy = PhiPolicy::fixed;
    std::optional<ParamVector> theta;    // fixed policy; defaults to the domain center
    int quadrature_nodes = kDefaultQuadratureNodes;
    bool check = true;                   // tag cells with the tolerance rule

    /// Correlation settings swept by the config: one per alpha for the
    /// scaled-inverse-Fisher kind, a single entry otherwise.
    std::size_t corr_count() const {
        return corr_kind == CorrelationSpec::Kind::scaled_inverse_fisher ? alphas.size() : 1;
    }

    CorrelationSpec corr_at(std::size_t i) const {
        switch (corr_kind) {
            case CorrelationSpec::Kind::zero: return CorrelationSpec::zero();
            case CorrelationSpec::Kind::scaled_inverse_fisher: return CorrelationSpec::scaled_inverse_fisher(alphas.at(i));
            case CorrelationSpec::Kind::explicit_matrix: return CorrelationSpec::constant(*gamma);
        }
        return CorrelationSpec::zero();
    }

    std::optional<double> alpha_at(std::size_t i) const {
        if (corr_kind == CorrelationSpec::Kind::scaled_inverse_fisher) return alphas.at(i);
        return std::nullopt;
    }

    ParamVector fixed_theta() const { return theta ? *theta : family.center(); }

    /// Every problem with the config, one message each. Empty means valid.
    std::vector<std::string> problems() const {
        std::vector<std::string> out;
        const int d = family.dimension();
        if (ns.empty()) out.push_back("n: sweep list is empty");
        if (ms.empty()) out.push_back("m: sweep list is empty");
        if (pes.empty()) out.push_back("p_e: sweep list is empty");
        if (strategies.empty()) out.push_back("strategies: list is empty");
        for (auto n : ns)
            if (n < 1) out.push_back("n: every entry must be >= 1 (got 0)");
        for (double p : pes)
            if (!(p >= 0.0 && p <= 1.0)) out.push_back("p_e: entry " + format_number(p) + " outside [0, 1]");
        if (corr_kind == CorrelationSpec::Kind::scaled_inverse_fisher) {
            if (alphas.empty()) out.push_back("alpha: scaled-inverse-fisher correlation needs a nonempty alpha list");
            for (double a : alphas)
                if (!(a > 0.0) || !std::isfinite(a)) out.push_back("alpha: entry " + format_number(a) + " must be > 0");
        }
        if (corr_kind == CorrelationSpec::Kind::explicit_matrix) {
            if (!gamma) {
                out.push_back("gamma: explicit correlation needs a gamma matrix");
            } else if (gamma->rows() != d || gamma->cols() != d) {
                out.push_back("gamma: expected " + std::to_string(d * d) + " entries for d=" + std::to_string(d));
            } else if (!is_symmetric(*gamma) || !is_psd(*gamma)) {
                out.push_back("gamma: matrix must be symmetric positive semidefinite");
            }
        }
        if (quadrature_nodes < 2) out.push_back("quadrature_nodes: must be >= 2");
        if (policy == PhiPolicy::fixed && theta) {
            if (static_cast<int>(theta->size()) != d)
                out.push_back("theta: expected " + std::to_string(d) + " components");
            else if (!family.contains(*theta))
                out.push_back("theta: " + theta->to_string() + " outside the cleared domain of " + family.name());
        }
        const bool correlated = corr_kind != CorrelationSpec::Kind::zero;
        if (correlated && d != 1 && std::count(strategies.begin(), strategies.end(), Strategy::ducompme))
            out.push_back("strategies: ducompme with nonzero correlation uses the quadrature coder, which requires d=1 (" +
                          family.name() + " has d=" + std::to_string(d) + ")");
        if (!ns.empty() && !ms.empty() && !strategies.empty()) {
            const std::string cell = "cell family=" + family.name() + " n=" + std::to_string(ns.front()) +
                                     " m=" + std::to_string(ms.front()) + " strategy=" + to_string(strategies.front());
            if (trials < 1)
                out.push_back(cell + ": trials must be >= 1 (got 0)");
            else if (check && trials < kMinCheckedTrials)
                out.push_back(cell + ": tolerance-checked cells need trials >= " + std::to_string(kMinCheckedTrials) +
                              " (got " + std::to_string(trials) + "; set check = false to run unchecked)");
        }
        return out;
    }

    void validate() const {
        const auto p = problems();
        if (p.empty()) return;
        std::string msg = "invalid experiment config:";
        for (const auto& s : p) msg += "\n  " + s;
        throw ArgumentError(msg);
    }
};

/// One sweep cell: empirical redundancy next to the matching bound values.
struct CodeLengthReport {
    std::string family;
    int d = 1;
    std::string corr_kind;
    std::optional<double> alpha;
    std::uint64_t n = 0;
    std::uint64_t m = 0;
    double p_e = 0.0;
    Strategy strategy = Strategy::ucomp;
    std::size_t trials = 0;
    double emp_redundancy_bits = 0.0;
    std::optional<double> stderr_bits;
    double bound_main_bits = 0.0;
    std::optional<double> bound_lb_bits;
    std::optional<double> bound_ub_bits;
    std::optional<bool> pass;  // absent for unchecked cells
};

/// Allowed gap between empirical redundancy and a main term.
inline double tolerance_bits(std::optional<double> stderr_bits, int d, std::uint64_t n, std::uint64_t m) {
    const double sigma = stderr_bits.value_or(0.0);
    const std::uint64_t scale = m == 0 ? n : std::min(n, m);
    return std::max(kToleranceFloorBits, 3.0 * sigma) + static_cast<double>(d) / static_cast<double>(scale);
}

namespace detail {

/// Main term, lower bound and upper bound for one strategy at one cell.
struct CellBounds {
    double main = 0.0;
    std::optional<double> lb, ub;
};

inline CellBounds cell_bounds(Strategy s, std::uint64_t n, std::uint64_t m, double p_e, const CorrelationSpec& corr,
                              const SourceFamily& family, const ParamVector& eval_phi) {
    CellBounds b;
    RedundancyQuery q;
    q.n = n;
    q.m = m;
    q.p_e = p_e;
    q.family = family;
    q.corr = corr;
    q.eval_phi = eval_phi;
    switch (s) {
        case Strategy::ucomp:
            b.main = ucomp_lossless(n, family).value_bits;
            if (p_e > 0.0) b.lb = ucomp_almost_lossless_lb(q).value_bits;
            break;
        case Strategy::ducompmd:
            b.main = ducompmd_lossless(n, m, corr, family).value_bits;
            if (p_e > 0.0 && m >= 1) b.ub = ducompmd_almost_lossless_ub(q).value_bits;
            break;
        case Strategy::ducompme:
            // No memory means no shared side information: the UComp main term applies.
            if (m == 0) {
                b.main = ucomp_lossless(n, family).value_bits;
                if (p_e > 0.0) b.lb = ucomp_almost_lossless_lb(q).value_bits;
            } else {
                b.main = ducompme_lossless(n, m, corr, family).value_bits;
                if (p_e > 0.0) b.lb = ducompme_almost_lossless_lb(q).value_bits;
            }
            break;
    }
    return b;
}

}  // namespace detail

/// Runs every (alpha, n, m) cell of the config. Strategies and p_e values of a
/// cell share the same sampled pairs; trials are spread over `jobs` workers.
inline std::vector<CodeLengthReport> run_redundancy_experiment(const ExperimentConfig& cfg, int jobs = 1) {
    cfg.validate();
    const PriorSpec prior = PriorSpec::jeffreys(cfg.family);
    const int d = cfg.family.dimension();
    std::vector<CodeLengthReport> reports;
    // Per-state KT is not the Jeffreys mixture for the Markov family, so
    // Markov cells use the exact (quadrature) mixture instead.
    std::unique_ptr<MarkovMixtureCoder> markov;
    if (cfg.family.kind() == FamilyKind::binary_markov) markov = std::make_unique<MarkovMixtureCoder>(cfg.family);
    const Sequence no_memory;

    std::uint64_t group = 0;
    for (std::size_t ci = 0; ci < cfg.corr_count(); ++ci) {
        const CorrelationSpec corr = cfg.corr_at(ci);
        const bool quadrature = corr.kind() != CorrelationSpec::Kind::zero &&
                                std::count(cfg.strategies.begin(), cfg.strategies.end(), Strategy::ducompme);
        std::unique_ptr<JointMixtureCoder> joint;
        if (quadrature) joint = std::make_unique<JointMixtureCoder>(prior, corr, cfg.quadrature_nodes);

        std::optional<ParamVector> fixed;
        if (cfg.policy == PhiPolicy::fixed) fixed = cfg.fixed_theta();
        const CorrelatedPairSource source(prior, corr, fixed);
        // H_n(phi) in the almost-lossless bounds: the probed parameter, or the
        // entropy maximizer (the most conservative choice) when averaging.
        const ParamVector eval_phi = fixed ? *fixed : cfg.family.center();

        for (std::uint64_t n : cfg.ns) {
            for (std::uint64_t m : cfg.ms) {
                const std::uint64_t cell_id = group++;
                const std::size_t ns = cfg.strategies.size();
                std::vector<std::vector<TrialOutcome>> outcomes(ns, std::vector<TrialOutcome>(cfg.trials));
                try {
                    parallel_for(cfg.trials, jobs, [&](std::size_t t) {
                        RngStream rng = RngStream::derive(cfg.seed, cell_id, t);
                        auto [theta, phi] = source.draw(rng);
                        const SourceModel s1(cfg.family, theta), s2(cfg.family, phi);
                        const Sequence y = sample_sequence(s1, m, rng);
                        const Sequence x = sample_sequence(s2, n, rng);
                        const double lp = s2.log2_prob(x);
                        const double h = entropy(s2, n);
                        std::optional<double> kt;
                        for (std::size_t si = 0; si < ns; ++si) {
                            double bits;
                            if (cfg.strategies[si] != Strategy::ducompme) {
                                if (!kt) kt = markov ? markov->codelength(x, no_memory).bits
                                                     : kt_codelength(x, cfg.family).bits;
                                bits = *kt;
                            } else if (joint) {
                                bits = joint->codelength(x, y).bits;
                            } else if (markov) {
                                bits = markov->codelength(x, y).bits;
                            } else {
                                bits = memory_kt_codelength(x, y, cfg.family).bits;
                            }
                            outcomes[si][t] = {bits, lp, h};
                        }
                    });
                } catch (const SamplingFailure& e) {
                    throw SamplingFailure("cell " + corr.kind_name() + " n=" + std::to_string(n) +
                                          " m=" + std::to_string(m) + ": " + e.what());
                }

                std::vector<CodeLengthStats> stats;
                for (const auto& o : outcomes) stats.push_back(summarize(o));
                for (double p_e : cfg.pes) {
                    for (std::size_t si = 0; si < ns; ++si) {
                        const Strategy s = cfg.strategies[si];
                        const auto b = detail::cell_bounds(s, n, m, p_e, corr, cfg.family, eval_phi);
                        CodeLengthReport r;
                        r.family = cfg.family.name();
                        r.d = d;
                        r.corr_kind = corr.kind_name();
                        r.alpha = cfg.alpha_at(ci);
                        r.n = n;
                        r.m = m;
                        r.p_e = p_e;
                        r.strategy = s;
                        r.trials = cfg.trials;
                        r.emp_redundancy_bits = stats[si].mean_redundancy;
                        r.stderr_bits = stats[si].stderr_redundancy;
                        r.bound_main_bits = b.main;
                        r.bound_lb_bits = b.lb;
                        r.bound_ub_bits = b.ub;
                        if (cfg.check) {
                            const std::uint64_t mm = s == Strategy::ducompme ? m : 0;
                            r.pass = std::abs(r.emp_redundancy_bits - b.main) <= tolerance_bits(r.stderr_bits, d, n, mm);
                        }
                        reports.push_back(std::move(r));
                    }
                }
            }
        }
    }
    return reports;
}

inline bool all_pass(const std::vector<CodeLengthReport>& reports) {
    return std::all_of(reports.begin(), reports.end(), [](const auto& r) { return r.pass.value_or(true); });
}

}  // namespace memcomp
