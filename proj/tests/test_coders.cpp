#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <vector>

#include "memcomp/coders.hpp"

using namespace memcomp;

namespace {

// -log2 of the Beta(1/2, 1/2) mixture probability of a binary sequence with
// k ones among n, from the Gamma-function closed form.
double kt_closed_form(int k, int n) {
    const double ln = std::lgamma(k + 0.5) + std::lgamma(n - k + 0.5) - std::log(std::numbers::pi) - std::lgamma(n + 1.0);
    return -ln / std::log(2.0);
}

Sequence bits_of(std::uint64_t v, std::size_t len) { return Sequence::from_bits(v, len); }

// Continuous m(x) for a Bernoulli family with no memory: theta ~ truncated
// arcsine, phi | theta ~ N(theta, Gamma(theta)) truncated to the domain.
double continuous_marginal_bits(int k, int n, double eps, double alpha) {
    using boost::math::quadrature::gauss_kronrod;
    const double lo = std::asin(std::sqrt(eps)), hi = std::asin(std::sqrt(1.0 - eps));
    auto outer = [&](double u) {
        const double theta = std::sin(u) * std::sin(u);
        const double var = theta * (1.0 - theta) / alpha;
        auto gauss = [&](double phi) { return std::exp(-(phi - theta) * (phi - theta) / (2.0 * var)); };
        auto lik = [&](double phi) { return gauss(phi) * std::pow(phi, k) * std::pow(1.0 - phi, n - k); };
        const double z = gauss_kronrod<double, 61>::integrate(gauss, eps, 1.0 - eps, 12, 1e-12);
        return gauss_kronrod<double, 61>::integrate(lik, eps, 1.0 - eps, 12, 1e-12) / z;
    };
    const double v = gauss_kronrod<double, 61>::integrate(outer, lo, hi, 12, 1e-12) / (hi - lo);
    return -std::log2(v);
}

// -log2 of the Markov Jeffreys mixture of x given y, by nested adaptive
// Gauss-Kronrod directly in (a, b) = (P(1|0), P(1|1)).
double markov_mixture_bits(const Sequence& x, const Sequence& y, double eps) {
    using boost::math::quadrature::gauss_kronrod;
    auto lik = [](const Sequence& s, double a, double b) {
        if (s.empty()) return 1.0;
        const double pi1 = a / (a + 1.0 - b);
        double v = s.symbols[0] ? pi1 : 1.0 - pi1;
        for (std::size_t t = 1; t < s.size(); ++t) {
            const double p1 = s.symbols[t - 1] ? b : a;
            v *= s.symbols[t] ? p1 : 1.0 - p1;
        }
        return v;
    };
    auto integrate = [&](auto&& f) {
        auto outer = [&](double a) {
            auto inner = [&](double b) {
                const double d = a + 1.0 - b;
                const double prior = std::sqrt((1.0 - b) * a / (d * d) / (a * (1.0 - a) * b * (1.0 - b)));
                return prior * f(a, b);
            };
            return gauss_kronrod<double, 61>::integrate(inner, eps, 1.0 - eps, 10, 1e-10);
        };
        return gauss_kronrod<double, 61>::integrate(outer, eps, 1.0 - eps, 10, 1e-10);
    };
    const double num = integrate([&](double a, double b) { return lik(x, a, b) * lik(y, a, b); });
    const double den = integrate([&](double a, double b) { return lik(y, a, b); });
    return -std::log2(num / den);
}

}  // namespace

TEST(KtCoder, Examples) {
    const auto fam = SourceFamily::bernoulli();
    EXPECT_NEAR(kt_codelength(Sequence::from_string("0"), fam).bits, 1.0, 1e-15);
    EXPECT_NEAR(kt_codelength(Sequence::from_string("00"), fam).bits, std::log2(8.0 / 3.0), 1e-15);
    EXPECT_NEAR(memory_kt_codelength(Sequence::from_string("0"), Sequence::from_string("01"), fam).bits, 1.0, 1e-15);
    EXPECT_EQ(kt_codelength(Sequence{}, fam).bits, 0.0);
}

TEST(KtCoder, MatchesGammaClosedForm) {
    const auto fam = SourceFamily::bernoulli();
    RngStream rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 1 + static_cast<int>(rng.next_u64() % 400);
        const double p = rng.uniform();
        Sequence x;
        int k = 0;
        for (int i = 0; i < n; ++i) {
            x.symbols.push_back(rng.uniform() < p);
            k += x.symbols.back();
        }
        EXPECT_NEAR(kt_codelength(x, fam).bits, kt_closed_form(k, n), 1e-9 * n);
    }
}

TEST(KtCoder, ChainIdentity) {
    const auto fam = SourceFamily::categorical(3);
    RngStream rng(11);
    for (int trial = 0; trial < 40; ++trial) {
        Sequence x, y;
        for (int i = 0; i < 30; ++i) x.symbols.push_back(static_cast<std::uint8_t>(rng.next_u64() % 3));
        for (int i = 0; i < 17; ++i) y.symbols.push_back(static_cast<std::uint8_t>(rng.next_u64() % 3));
        const double joint = kt_codelength(concat(y, x), fam).bits;
        EXPECT_NEAR(memory_kt_codelength(x, y, fam).bits, joint - kt_codelength(y, fam).bits, 1e-12);
    }
}

TEST(KtCoder, KraftEqualityByEnumeration) {
    const Sequence y = Sequence::from_string("0110100");
    for (const auto& fam : {SourceFamily::bernoulli(), SourceFamily::binary_markov()}) {
        for (std::size_t n = 1; n <= 12; ++n) {
            double total = 0.0, total_primed = 0.0;
            for (std::uint64_t v = 0; v < (1ULL << n); ++v) {
                total += std::exp2(-kt_codelength(bits_of(v, n), fam).bits);
                total_primed += std::exp2(-memory_kt_codelength(bits_of(v, n), y, fam).bits);
            }
            EXPECT_NEAR(total, 1.0, 1e-12) << fam.name() << " n=" << n;
            EXPECT_NEAR(total_primed, 1.0, 1e-12) << fam.name() << " n=" << n;
        }
    }
    const auto cat = SourceFamily::categorical(3);
    for (std::size_t n = 1; n <= 7; ++n) {
        double total = 0.0;
        std::size_t count = 1;
        for (std::size_t i = 0; i < n; ++i) count *= 3;
        for (std::size_t v = 0; v < count; ++v) {
            Sequence x;
            for (std::size_t i = 0, r = v; i < n; ++i, r /= 3) x.symbols.push_back(static_cast<std::uint8_t>(r % 3));
            total += std::exp2(-memory_kt_codelength(x, Sequence::from_string("2201"), cat).bits);
        }
        EXPECT_NEAR(total, 1.0, 1e-12);
    }
}

TEST(KtCoder, MarkovContextsSeparate) {
    const auto fam = SourceFamily::binary_markov();
    KtCoder coder(fam);
    coder.prime(Sequence::from_string("0001"));
    // Context 0 saw every symbol; context "after 0" saw 0, 0, 1.
    EXPECT_DOUBLE_EQ(coder.count(0, 0), 3.5);
    EXPECT_DOUBLE_EQ(coder.count(0, 1), 1.5);
    EXPECT_DOUBLE_EQ(coder.count(1, 0), 2.5);
    EXPECT_DOUBLE_EQ(coder.count(1, 1), 1.5);
    EXPECT_DOUBLE_EQ(coder.probability(2, 0), 0.5);
}

TEST(KtCoder, RejectsForeignSymbols) {
    EXPECT_THROW(kt_codelength(Sequence::from_string("012"), SourceFamily::bernoulli()), ArgumentError);
}

TEST(JointMixtureCoder, KraftEqualityByEnumeration) {
    const auto prior = PriorSpec::jeffreys(SourceFamily::bernoulli());
    const Sequence y = Sequence::from_string("1101000111");
    for (const auto& corr : {CorrelationSpec::zero(), CorrelationSpec::scaled_inverse_fisher(20.0)}) {
        const JointMixtureCoder coder(prior, corr, 64);
        for (std::size_t n = 1; n <= 6; ++n) {
            double total = 0.0;
            for (std::uint64_t v = 0; v < (1ULL << n); ++v) total += std::exp2(-coder.codelength(bits_of(v, n), y).bits);
            EXPECT_NEAR(total, 1.0, 1e-12) << corr.kind_name() << " n=" << n;
        }
    }
}

TEST(JointMixtureCoder, ZeroCorrelationMatchesMemoryKt) {
    const auto fam = SourceFamily::bernoulli(1e-9);
    const JointMixtureCoder coder(PriorSpec::jeffreys(fam), CorrelationSpec::zero());
    RngStream rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const double theta = rng.uniform(0.05, 0.95);
        const SourceModel src(fam, {theta});
        const Sequence y = sample_sequence(src, 500, rng), x = sample_sequence(src, 500, rng);
        EXPECT_NEAR(coder.codelength(x, y).bits, memory_kt_codelength(x, y, fam).bits, 1e-3) << theta;
    }
}

TEST(JointMixtureCoder, EmptyMemoryMatchesContinuousMarginal) {
    const double eps = 1e-3, alpha = 50.0;
    const auto fam = SourceFamily::bernoulli(eps);
    const JointMixtureCoder coder(PriorSpec::jeffreys(fam), CorrelationSpec::scaled_inverse_fisher(alpha));
    for (auto [k, n] : {std::pair{0, 0}, {3, 10}, {40, 100}, {7, 60}, {150, 200}}) {
        const double coded = coder.codelength_counts(k, n, 0, 0).bits;
        if (n == 0) {
            EXPECT_EQ(coded, 0.0);
            continue;
        }
        EXPECT_NEAR(coded, continuous_marginal_bits(k, n, eps, alpha), 1e-3) << k << "/" << n;
    }
}

TEST(JointMixtureCoder, CountsAndSequencesAgree) {
    const auto fam = SourceFamily::bernoulli();
    const JointMixtureCoder coder(PriorSpec::jeffreys(fam), CorrelationSpec::scaled_inverse_fisher(100.0), 128);
    const Sequence x = Sequence::from_string("0010110"), y = Sequence::from_string("111010");
    EXPECT_DOUBLE_EQ(coder.codelength(x, y).bits, coder.codelength_counts(3, 7, 4, 6).bits);
}

TEST(JointMixtureCoder, CategoricalTwoUsesSymbolZeroAsParameter) {
    const JointMixtureCoder bern(PriorSpec::jeffreys(SourceFamily::bernoulli()), CorrelationSpec::scaled_inverse_fisher(30.0), 64);
    const JointMixtureCoder cat(PriorSpec::jeffreys(SourceFamily::categorical(2)),
                                CorrelationSpec::scaled_inverse_fisher(30.0), 64);
    // The families are mirror images, so flipping every symbol preserves codelengths.
    const Sequence x = Sequence::from_string("0001011"), y = Sequence::from_string("1100000");
    const Sequence xf = Sequence::from_string("1110100"), yf = Sequence::from_string("0011111");
    EXPECT_NEAR(bern.codelength(x, y).bits, cat.codelength(xf, yf).bits, 1e-12);
}

TEST(JointMixtureCoder, ContinuousInAlphaAndApproachesZeroCorrelation) {
    const auto prior = PriorSpec::jeffreys(SourceFamily::bernoulli());
    const JointMixtureCoder zero(prior, CorrelationSpec::zero());
    const JointMixtureCoder tight(prior, CorrelationSpec::scaled_inverse_fisher(1e12));
    EXPECT_NEAR(tight.codelength_counts(120, 400, 90, 300).bits, zero.codelength_counts(120, 400, 90, 300).bits, 1e-6);
    double prev = JointMixtureCoder(prior, CorrelationSpec::scaled_inverse_fisher(10.0)).codelength_counts(120, 400, 90, 300).bits;
    for (double alpha = 10.0 * 1.01; alpha < 2000.0; alpha *= 1.01) {
        const double v = JointMixtureCoder(prior, CorrelationSpec::scaled_inverse_fisher(alpha)).codelength_counts(120, 400, 90, 300).bits;
        EXPECT_NEAR(v, prev, 0.05) << alpha;
        prev = v;
    }
}

TEST(JointMixtureCoder, LongSequencesStayFinite) {
    const JointMixtureCoder coder(PriorSpec::jeffreys(SourceFamily::bernoulli()), CorrelationSpec::scaled_inverse_fisher(1e4));
    for (auto [kx, ky] : {std::pair{0, 100000}, {100000, 0}, {50000, 50000}, {1, 99999}}) {
        const double v = coder.codelength_counts(kx, 100000, ky, 100000).bits;
        EXPECT_TRUE(std::isfinite(v));
        EXPECT_GE(v, 0.0);
    }
}

TEST(JointMixtureCoder, RejectsMultiParameterFamilies) {
    EXPECT_THROW(JointMixtureCoder(PriorSpec::jeffreys(SourceFamily::binary_markov()), CorrelationSpec::zero()),
                 ArgumentError);
}

TEST(ExpectedCodelength, DeterministicAcrossJobCounts) {
    const auto prior = PriorSpec::jeffreys(SourceFamily::bernoulli());
    const CorrelatedPairSource src(prior, CorrelationSpec::scaled_inverse_fisher(200.0));
    auto coder = [&](const Sequence& x, const Sequence& y) { return memory_kt_codelength(x, y, prior.family()).bits; };
    const auto a = expected_codelength(coder, src, 200, 100, 64, 42, 1);
    const auto b = expected_codelength(coder, src, 200, 100, 64, 42, 4);
    EXPECT_EQ(a.mean_codelength, b.mean_codelength);
    EXPECT_EQ(a.mean_redundancy, b.mean_redundancy);
    ASSERT_TRUE(a.stderr_redundancy.has_value());
    EXPECT_EQ(*a.stderr_redundancy, *b.stderr_redundancy);
    const auto c = expected_codelength(coder, src, 200, 100, 64, 43, 1);
    EXPECT_NE(a.mean_codelength, c.mean_codelength);
}

TEST(ExpectedCodelength, SingleTrialHasNoStderr) {
    const auto prior = PriorSpec::jeffreys(SourceFamily::bernoulli());
    const CorrelatedPairSource src(prior, CorrelationSpec::zero());
    auto coder = [&](const Sequence& x, const Sequence&) { return kt_codelength(x, prior.family()).bits; };
    const auto st = expected_codelength(coder, src, 10, 0, 1, 1);
    EXPECT_EQ(st.trials, 1u);
    EXPECT_FALSE(st.stderr_redundancy.has_value());
    EXPECT_THROW(expected_codelength(coder, src, 10, 0, 0, 1), ArgumentError);
}

TEST(ExpectedCodelength, PointwiseRedundancyIsUnbiased) {
    // Exact E[L_KT(X)] - H_n(theta) for fixed theta by enumerating counts.
    const auto fam = SourceFamily::bernoulli();
    const double theta = 0.2;
    const int n = 12;
    double exact = 0.0;
    for (int k = 0; k <= n; ++k) {
        const double logp = k * std::log2(theta) + (n - k) * std::log2(1.0 - theta);
        const double prob_class = std::exp2(logp + (std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0)) / std::log(2.0));
        exact += prob_class * (kt_closed_form(k, n) + logp);
    }
    const CorrelatedPairSource src(PriorSpec::jeffreys(fam), CorrelationSpec::zero(), ParamVector{theta});
    auto coder = [&](const Sequence& x, const Sequence&) { return kt_codelength(x, fam).bits; };
    const auto st = expected_codelength(coder, src, n, 0, 20000, 9);
    EXPECT_NEAR(st.mean_redundancy, exact, 4.0 * *st.stderr_redundancy);
    EXPECT_NEAR(st.mean_redundancy, st.mean_codelength - st.mean_entropy, 6.0 * *st.stderr_redundancy + 0.1);
}

TEST(MarkovMixtureCoder, KraftEqualityByEnumeration) {
    const MarkovMixtureCoder coder(SourceFamily::binary_markov(), 24);
    for (const auto& y : {Sequence{}, Sequence::from_string("0010111011")}) {
        for (std::size_t n = 1; n <= 10; ++n) {
            double total = 0.0;
            for (std::uint64_t v = 0; v < (1ULL << n); ++v) total += std::exp2(-coder.codelength(bits_of(v, n), y).bits);
            EXPECT_NEAR(total, 1.0, 1e-12) << "memory " << y.size() << " n=" << n;
        }
    }
}

TEST(MarkovMixtureCoder, MatchesNestedAdaptiveQuadrature) {
    const auto fam = SourceFamily::binary_markov();
    const MarkovMixtureCoder coder(fam);
    const Sequence x = Sequence::from_string("01101110");
    for (const auto& y : {Sequence{}, Sequence::from_string("000100110111"), Sequence::from_string("1")}) {
        EXPECT_NEAR(coder.codelength(x, y).bits, markov_mixture_bits(x, y, fam.clearance()), 1e-6) << y.size();
    }
}

TEST(MarkovMixtureCoder, ConvergedAtLongBlocks) {
    const auto fam = SourceFamily::binary_markov();
    const MarkovMixtureCoder coarse(fam), fine(fam, 2 * kDefaultMarkovNodes);
    RngStream rng(5);
    const SourceModel src(fam, ParamVector{0.2, 0.7});
    const Sequence y = sample_sequence(src, 8000, rng), x = sample_sequence(src, 2000, rng);
    // The posterior narrows with 10^4 symbols; the default grid stays well
    // inside the harness tolerances.
    EXPECT_NEAR(coarse.codelength(x, y).bits, fine.codelength(x, y).bits, 5e-3);
    EXPECT_NEAR(coarse.codelength(x, Sequence{}).bits, fine.codelength(x, Sequence{}).bits, 5e-3);
}

TEST(MarkovMixtureCoder, EmptyBlockIsFree) {
    const MarkovMixtureCoder coder(SourceFamily::binary_markov(), 8);
    EXPECT_EQ(coder.codelength(Sequence{}, Sequence::from_string("0101")).bits, 0.0);
    EXPECT_THROW(MarkovMixtureCoder(SourceFamily::bernoulli()), ArgumentError);
}
