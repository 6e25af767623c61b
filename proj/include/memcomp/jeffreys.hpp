#pragma once

#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "memcomp/core.hpp"
#include "memcomp/rng.hpp"
#include "memcomp/source_models.hpp"

namespace memcomp {

/// |I(lambda)|^{1/2}, the unnormalized Jeffreys density.
inline double jeffreys_density_unnormalized(const SourceFamily& family, const ParamVector& lambda) {
    switch (family.kind()) {
        case FamilyKind::bernoulli: return 1.0 / std::sqrt(lambda[0] * (1.0 - lambda[0]));
        case FamilyKind::categorical: {
            double prod = 1.0 - std::accumulate(lambda.begin(), lambda.end(), 0.0);
            for (double p : lambda) prod *= p;
            return 1.0 / std::sqrt(prod);
        }
        case FamilyKind::binary_markov: {
            const double a = lambda[0], b = lambda[1];
            auto [pi0, pi1] = markov_stationary(a, b);
            return std::sqrt(pi0 * pi1 / (a * (1.0 - a) * b * (1.0 - b)));
        }
    }
    return 0.0;
}

inline constexpr double kJeffreysRelTol = 1e-6;
inline constexpr int kMaxQuadratureDimension = 3;

/// Integral of |I(phi)|^{1/2} over the cleared domain by nested tanh-sinh
/// quadrature (relative tolerance 1e-6). Supports d <= 3.
inline double jeffreys_integral(const SourceFamily& family) {
    const int d = family.dimension();
    const double eps = family.clearance();
    if (family.domain_width() <= 0.0) throw NumericalError(family.name() + ": cleared domain is empty");
    if (d > kMaxQuadratureDimension)
        throw NumericalError(family.name() + ": nested quadrature supports d <= 3, got d=" + std::to_string(d));

    boost::math::quadrature::tanh_sinh<double> integrator;
    const double inner_tol = 1e-10;
    // Inner integrals are requested at 1e-10; convergence is judged on the outer one.
    double worst_rel_err = 0.0;

    std::vector<double> point(d);
    // Integrates coordinate `level` given the coordinates before it.
    std::function<double(int)> integrate_level = [&](int level) -> double {
        double lo = eps, hi = 1.0 - eps;
        if (family.kind() == FamilyKind::categorical) {
            double used = 0.0;
            for (int i = 0; i < level; ++i) used += point[i];
            // Every later coordinate and the implicit last probability need >= eps.
            hi = 1.0 - used - eps * (d - level);
        }
        if (hi <= lo) return 0.0;
        auto f = [&](double v) {
            point[level] = v;
            if (level + 1 == d) return jeffreys_density_unnormalized(family, ParamVector(point));
            return integrate_level(level + 1);
        };
        double err = 0.0, l1 = 0.0;
        const double value = integrator.integrate(f, lo, hi, inner_tol, &err, &l1);
        if (!std::isfinite(value)) throw NumericalError(family.name() + ": Jeffreys quadrature diverged");
        if (level == 0 && value > 0.0) worst_rel_err = err / value;
        return value;
    };

    const double total = integrate_level(0);
    if (!(total > 0.0) || worst_rel_err > kJeffreysRelTol)
        throw NumericalError(family.name() + ": Jeffreys quadrature did not converge (rel err " +
                             std::to_string(worst_rel_err) + ")");
    return total;
}

/// The Jeffreys prior on the cleared domain: density |I(lambda)|^{1/2} / Z.
class PriorSpec {
  public:
    static PriorSpec jeffreys(const SourceFamily& family) { return PriorSpec(family, jeffreys_integral(family)); }

    const SourceFamily& family() const { return family_; }
    double normalization() const { return normalization_; }

    double density(const ParamVector& lambda) const {
        if (!family_.contains(lambda)) return 0.0;
        return jeffreys_density_unnormalized(family_, lambda) / normalization_;
    }

  private:
    PriorSpec(SourceFamily family, double z) : family_(family), normalization_(z) {}

    SourceFamily family_;
    double normalization_;
};

namespace detail {

/// Truncated arcsine draw on [eps, 1 - eps]; exact inverse CDF.
inline double truncated_arcsine(double eps, RngStream& rng) {
    const double lo = std::asin(std::sqrt(eps));
    const double hi = std::asin(std::sqrt(1.0 - eps));
    const double s = std::sin(rng.uniform(lo, hi));
    return s * s;
}

}  // namespace detail

/// theta ~ Jeffreys prior: inverse CDF for Bernoulli, rejection otherwise.
inline ParamVector sample_theta(const PriorSpec& prior, RngStream& rng) {
    const SourceFamily& family = prior.family();
    const double eps = family.clearance();
    if (family.domain_width() <= 1e-12) throw SamplingFailure(family.name() + ": degenerate cleared domain");

    switch (family.kind()) {
        case FamilyKind::bernoulli: return ParamVector{detail::truncated_arcsine(eps, rng)};
        case FamilyKind::categorical: {
            // Dirichlet(1/2, ..., 1/2) via squared normals, truncated to the domain.
            const int k = family.alphabet_size();
            std::vector<double> g(k);
            for (int attempt = 0; attempt < kMaxRejectionAttempts; ++attempt) {
                double total = 0.0;
                for (auto& v : g) {
                    const double z = rng.normal();
                    v = z * z;
                    total += v;
                }
                ParamVector p(std::vector<double>(k - 1));
                bool ok = true;
                for (int i = 0; i < k; ++i) {
                    const double pi = g[i] / total;
                    if (pi < eps) ok = false;
                    if (i + 1 < k) p[i] = pi;
                }
                if (ok && family.contains(p)) return p;
            }
            break;
        }
        case FamilyKind::binary_markov: {
            // Proposal: independent truncated arcsines; the target ratio is
            // sqrt(pi0 pi1) <= 1/2.
            for (int attempt = 0; attempt < kMaxRejectionAttempts; ++attempt) {
                const double a = detail::truncated_arcsine(eps, rng);
                const double b = detail::truncated_arcsine(eps, rng);
                auto [pi0, pi1] = markov_stationary(a, b);
                if (rng.uniform() < 2.0 * std::sqrt(pi0 * pi1)) return ParamVector{a, b};
            }
            break;
        }
    }
    throw SamplingFailure(family.name() + ": Jeffreys rejection sampler acceptance rate too low");
}

}  // namespace memcomp
