#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "memcomp/core.hpp"
#include "memcomp/jeffreys.hpp"
#include "memcomp/linalg.hpp"
#include "memcomp/source_models.hpp"

namespace memcomp {

enum class Strategy { ucomp, ducompmd, ducompme };
enum class Regime { strictly_lossless, almost_lossless };
enum class Direction { main_term, lower_bound, upper_bound, exact_equality };

inline std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::ucomp: return "ucomp";
        case Strategy::ducompmd: return "ducompmd";
        case Strategy::ducompme: return "ducompme";
    }
    return "?";
}
inline std::string to_string(Regime r) {
    return r == Regime::strictly_lossless ? "strictly-lossless" : "almost-lossless";
}
inline std::string to_string(Direction d) {
    switch (d) {
        case Direction::main_term: return "main-term";
        case Direction::lower_bound: return "lower-bound";
        case Direction::upper_bound: return "upper-bound";
        case Direction::exact_equality: return "exact-equality";
    }
    return "?";
}

/// One bound evaluation request.
struct RedundancyQuery {
    std::uint64_t n = 1;
    std::uint64_t m = 0;
    double p_e = 0.0;
    SourceFamily family = SourceFamily::bernoulli();
    CorrelationSpec corr = CorrelationSpec::zero();
    std::optional<ParamVector> eval_phi;

    void validate() const {
        if (n < 1) throw ArgumentError("query requires n >= 1");
        if (!(p_e >= 0.0 && p_e <= 1.0)) throw ArgumentError("query requires 0 <= p_e <= 1");
    }
};

struct BoundResult {
    Strategy strategy = Strategy::ucomp;
    Regime regime = Regime::strictly_lossless;
    Direction direction = Direction::main_term;
    std::uint64_t n = 0;
    std::uint64_t m = 0;
    double p_e = 0.0;
    double value_bits = 0.0;
    std::string residual_note;
    bool small_n_warning = false;
};

inline constexpr std::uint64_t kAsymptoticMinN = 100;

/// h(p) = -p log2 p - (1 - p) log2 (1 - p), with h(0) = h(1) = 0.
inline double binary_entropy(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw ArgumentError("binary entropy needs p in [0, 1]");
    return plogp(p) + plogp(1.0 - p);
}

/// Strictly lossless UComp: (d/2) log2(n / 2 pi e) + log2 of the Jeffreys integral.
inline BoundResult ucomp_lossless(std::uint64_t n, const SourceFamily& family) {
    if (n < 1) throw ArgumentError("ucomp_lossless requires n >= 1");
    BoundResult r;
    r.strategy = Strategy::ucomp;
    r.regime = Regime::strictly_lossless;
    r.direction = Direction::main_term;
    r.n = n;
    const double d = family.dimension();
    r.value_bits = 0.5 * d * std::log2(static_cast<double>(n) / (2.0 * kPi * kE)) + std::log2(jeffreys_integral(family));
    r.residual_note = "O(1/n) dropped";
    r.small_n_warning = n < kAsymptoticMinN;
    return r;
}

/// Strictly lossless DUCompMD equals strictly lossless UComp for every m and Gamma.
inline BoundResult ducompmd_lossless(std::uint64_t n, std::uint64_t m, const CorrelationSpec& /*corr*/,
                                     const SourceFamily& family) {
    BoundResult r = ucomp_lossless(n, family);
    r.strategy = Strategy::ducompmd;
    r.direction = Direction::exact_equality;
    r.m = m;
    r.residual_note = "equal to strictly lossless UComp; O(1/n) dropped";
    return r;
}

struct RHatOptions {
    /// Grid points per dimension for d = 1.
    int grid_points = 1001;
    /// Total grid budget for d >= 2 (points per dimension = budget^(1/d)).
    std::size_t grid_budget = 250000;
    /// Golden-section refinement of the d = 1 grid maximizer.
    bool refine = true;
    /// Skip the zero / scaled-inverse-Fisher closed forms.
    bool force_grid = false;
};

struct RHatResult {
    double value_bits = 0.0;
    ParamVector argmax;
    bool closed_form = false;
};

namespace detail {

/// sup over the cleared-domain grid of 0.5 log2 |c I_d + n J(phi)|.
inline RHatResult log_det_sup(double c, double n, const CorrelationSpec& corr, const SourceFamily& family,
                              const RHatOptions& opt) {
    const int d = family.dimension();
    if (d > kMaxDimension) throw ArgumentError("d <= 16 required");
    auto objective = [&](const ParamVector& phi) {
        const Matrix s = j_symmetric(phi, corr, family);
        if (min_eigenvalue(s) < -1e-10 * std::max(1.0, s.cwiseAbs().maxCoeff()))
            throw ModelAssumptionError("J(phi) is not PSD at " + phi.to_string());
        const Matrix a = c * Matrix::Identity(d, d) + n * s;
        return 0.5 * log2_det_spd(a);
    };

    const double lo = family.clearance(), hi = 1.0 - family.clearance();
    if (hi <= lo) throw NumericalError("empty cleared domain");
    int per_dim = opt.grid_points;
    if (d > 1)
        per_dim = std::max(3, static_cast<int>(std::floor(std::pow(static_cast<double>(opt.grid_budget), 1.0 / d))));
    const double step = (hi - lo) / (per_dim - 1);

    RHatResult best;
    best.value_bits = -std::numeric_limits<double>::infinity();
    std::vector<int> idx(d, 0);
    std::vector<double> coords(d);
    for (;;) {
        for (int i = 0; i < d; ++i) coords[i] = lo + step * idx[i];
        ParamVector phi(coords);
        if (family.contains(phi)) {
            const double v = objective(phi);
            if (v > best.value_bits) {
                best.value_bits = v;
                best.argmax = phi;
            }
        }
        int k = 0;
        while (k < d && ++idx[k] == per_dim) idx[k++] = 0;
        if (k == d) break;
    }
    if (!std::isfinite(best.value_bits)) throw NumericalError("r_hat grid contains no domain point");

    if (d == 1 && opt.refine) {
        // Golden-section search on the bracket around the grid maximizer.
        double a = std::max(lo, best.argmax[0] - step), b = std::min(hi, best.argmax[0] + step);
        const double g = 0.5 * (std::sqrt(5.0) - 1.0);
        double x1 = b - g * (b - a), x2 = a + g * (b - a);
        double f1 = objective(ParamVector{x1}), f2 = objective(ParamVector{x2});
        for (int it = 0; it < 80 && b - a > 1e-12; ++it) {
            if (f1 < f2) {
                a = x1; x1 = x2; f1 = f2;
                x2 = a + g * (b - a); f2 = objective(ParamVector{x2});
            } else {
                b = x2; x2 = x1; f2 = f1;
                x1 = b - g * (b - a); f1 = objective(ParamVector{x1});
            }
        }
        const double xm = 0.5 * (a + b);
        const double fm = objective(ParamVector{xm});
        if (fm > best.value_bits) {
            best.value_bits = fm;
            best.argmax = ParamVector{xm};
        }
    }
    return best;
}

}  // namespace detail

/// Main redundancy term sup_phi 0.5 log2 |(1 + n/m) I_d + n J(phi)| with the
/// closed forms for zero and scaled-inverse-Fisher correlation.
inline RHatResult r_hat_detail(std::uint64_t n, std::uint64_t m, const CorrelationSpec& corr,
                               const SourceFamily& family, const RHatOptions& opt = {}) {
    if (m < 1) throw ArgumentError("r_hat requires m >= 1 (use r_hat_infinite_memory for m = infinity)");
    const double nn = static_cast<double>(n), mm = static_cast<double>(m);
    const double d = family.dimension();
    if (!opt.force_grid) {
        if (corr.kind() == CorrelationSpec::Kind::zero)
            return {0.5 * d * std::log2(1.0 + nn / mm), family.center(), true};
        if (corr.kind() == CorrelationSpec::Kind::scaled_inverse_fisher)
            return {0.5 * d * std::log2(1.0 + nn / mm + nn / corr.alpha()), family.center(), true};
    }
    return detail::log_det_sup(1.0 + nn / mm, nn, corr, family, opt);
}

inline double r_hat(std::uint64_t n, std::uint64_t m, const CorrelationSpec& corr, const SourceFamily& family,
                    const RHatOptions& opt = {}) {
    return r_hat_detail(n, m, corr, family, opt).value_bits;
}

/// sup_lambda 0.5 log2 |I_d + n J(lambda)|: the main term with unlimited memory.
inline RHatResult r_hat_infinite_memory_detail(std::uint64_t n, const CorrelationSpec& corr,
                                               const SourceFamily& family, const RHatOptions& opt = {}) {
    const double nn = static_cast<double>(n);
    const double d = family.dimension();
    if (!opt.force_grid) {
        if (corr.kind() == CorrelationSpec::Kind::zero) return {0.0, family.center(), true};
        if (corr.kind() == CorrelationSpec::Kind::scaled_inverse_fisher)
            return {0.5 * d * std::log2(1.0 + nn / corr.alpha()), family.center(), true};
    }
    return detail::log_det_sup(1.0, nn, corr, family, opt);
}

inline double r_hat_infinite_memory(std::uint64_t n, const CorrelationSpec& corr, const SourceFamily& family,
                                    const RHatOptions& opt = {}) {
    return r_hat_infinite_memory_detail(n, corr, family, opt).value_bits;
}

/// Strictly lossless DUCompME main term.
inline BoundResult ducompme_lossless(std::uint64_t n, std::uint64_t m, const CorrelationSpec& corr,
                                     const SourceFamily& family, const RHatOptions& opt = {}) {
    BoundResult r;
    r.strategy = Strategy::ducompme;
    r.regime = Regime::strictly_lossless;
    r.direction = Direction::main_term;
    r.n = n;
    r.m = m;
    r.value_bits = r_hat(n, m, corr, family, opt);
    r.residual_note = "O(1/n + 1/m) dropped";
    r.small_n_warning = n < kAsymptoticMinN;
    return r;
}

/// Penalty for non-communicating encoders:
/// (d/2) log2(1 + (2 / (d log2 e)) log2(1 / p_e)).
inline double penalty_f(int d, double p_e) {
    if (d < 1) throw ArgumentError("penalty_f needs d >= 1");
    if (!(p_e >= 0.0 && p_e <= 1.0)) throw ArgumentError("penalty_f needs p_e in [0, 1]");
    if (p_e == 0.0) throw InfinitePenalty("p_e=0 requires strictly lossless bounds (penalty is infinite)");
    const double dd = d;
    return 0.5 * dd * std::log2(1.0 + (2.0 / (dd * kLog2E)) * std::log2(1.0 / p_e));
}

/// Almost lossless DUCompMD upper bound: r_hat + F(d, p_e).
inline BoundResult ducompmd_almost_lossless_ub(const RedundancyQuery& q, const RHatOptions& opt = {}) {
    q.validate();
    BoundResult r;
    r.strategy = Strategy::ducompmd;
    r.regime = Regime::almost_lossless;
    r.direction = Direction::upper_bound;
    r.n = q.n;
    r.m = q.m;
    r.p_e = q.p_e;
    const double penalty = penalty_f(q.family.dimension(), q.p_e);
    r.value_bits = r_hat(q.n, q.m, q.corr, q.family, opt) + penalty;
    r.residual_note = "O(1/n + 1/m) dropped";
    r.small_n_warning = q.n < kAsymptoticMinN;
    return r;
}

namespace detail {

inline const ParamVector& require_eval_phi(const RedundancyQuery& q) {
    if (!q.eval_phi) throw ArgumentError("this bound needs eval_phi for the H_n(phi) term");
    q.family.require_in_domain(*q.eval_phi);
    return *q.eval_phi;
}

}  // namespace detail

/// Almost lossless UComp lower bound:
/// (1 - p_e) R_UComp(n) - h(p_e) - p_e H_n(phi). May be negative.
inline BoundResult ucomp_almost_lossless_lb(const RedundancyQuery& q) {
    q.validate();
    const ParamVector& phi = detail::require_eval_phi(q);
    const BoundResult base = ucomp_lossless(q.n, q.family);
    BoundResult r = base;
    r.regime = Regime::almost_lossless;
    r.direction = Direction::lower_bound;
    r.m = q.m;
    r.p_e = q.p_e;
    const double hn = entropy(SourceModel(q.family, phi), q.n);
    r.value_bits = (1.0 - q.p_e) * base.value_bits - binary_entropy(q.p_e) - q.p_e * hn;
    r.residual_note = "O(1/n) dropped; H_n evaluated at phi=" + phi.to_string();
    return r;
}

/// Almost lossless DUCompME lower bound with r_hat in place of the UComp term.
inline BoundResult ducompme_almost_lossless_lb(const RedundancyQuery& q, const RHatOptions& opt = {}) {
    q.validate();
    const ParamVector& phi = detail::require_eval_phi(q);
    BoundResult r = ducompme_lossless(q.n, q.m, q.corr, q.family, opt);
    const double base = r.value_bits;
    r.regime = Regime::almost_lossless;
    r.direction = Direction::lower_bound;
    r.p_e = q.p_e;
    const double hn = entropy(SourceModel(q.family, phi), q.n);
    r.value_bits = (1.0 - q.p_e) * base - binary_entropy(q.p_e) - q.p_e * hn;
    r.residual_note = "O(1/n + 1/m) dropped; H_n evaluated at phi=" + phi.to_string();
    return r;
}

struct IdentityResult {
    double value_bits = 0.0;
    bool small_n_warning = false;
};

/// H(X^n) = H_n(theta) + R_UComp(n): the mixture-marginal entropy reference.
/// n = 0 is outside the asymptotic formula; it reports 0 bits with a warning.
inline IdentityResult redundancy_capacity_identity(const SourceFamily& family, const ParamVector& theta,
                                                   std::uint64_t n) {
    const SourceModel model(family, theta);
    if (n == 0) return {0.0, true};
    const BoundResult u = ucomp_lossless(n, family);
    return {entropy(model, n) + u.value_bits, u.small_n_warning};
}

}  // namespace memcomp
