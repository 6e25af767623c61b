#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "memcomp/jeffreys.hpp"
#include "memcomp/source_models.hpp"

using namespace memcomp;

namespace {

// Expected per-symbol log-loss (nats) of predicting with `probe` while the data
// follow `truth`. Its Hessian in `probe` at probe == truth is the Fisher matrix.
double expected_log_loss(const SourceFamily& fam, const ParamVector& truth, const ParamVector& probe) {
    const SourceModel t(fam, truth), p(fam, probe);
    if (fam.memoryless()) {
        const auto pt = t.marginal(), pp = p.marginal();
        double acc = 0.0;
        for (std::size_t a = 0; a < pt.size(); ++a) acc -= pt[a] * std::log(pp[a]);
        return acc;
    }
    const auto pi = t.marginal();
    double acc = 0.0;
    for (std::uint8_t s = 0; s < 2; ++s) {
        const auto tt = t.transition(s), tp = p.transition(s);
        for (int x = 0; x < 2; ++x) acc -= pi[s] * tt[x] * std::log(tp[x]);
    }
    return acc;
}

Matrix finite_difference_fisher(const SourceFamily& fam, const ParamVector& lambda) {
    const int d = fam.dimension();
    const double h = 1e-4;
    Matrix out(d, d);
    auto f = [&](int i, double di, int j, double dj) {
        ParamVector q = lambda;
        q[i] += di;
        q[j] += dj;
        return expected_log_loss(fam, lambda, q);
    };
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            out(i, j) = (f(i, h, j, h) - f(i, h, j, -h) - f(i, -h, j, h) + f(i, -h, j, -h)) / (4 * h * h);
    return out;
}

std::vector<ParamVector> grid_points(const SourceFamily& fam, int count) {
    std::vector<ParamVector> pts;
    RngStream rng(99);
    while (static_cast<int>(pts.size()) < count) {
        std::vector<double> v(fam.dimension());
        for (auto& x : v) x = rng.uniform(0.05, 0.95);
        if (fam.kind() == FamilyKind::categorical) {
            double s = 0.0;
            for (double x : v) s += x;
            for (auto& x : v) x *= 0.9 / (s + 0.1 * fam.alphabet_size());
        }
        ParamVector p(v);
        if (fam.contains(p)) pts.push_back(p);
    }
    return pts;
}

}  // namespace

TEST(FisherInformation, BernoulliClosedForm) {
    const auto fam = SourceFamily::bernoulli();
    EXPECT_NEAR(fisher_information(fam, {0.5})(0, 0), 4.0, 1e-12);
    EXPECT_NEAR(fisher_information(fam, {0.3})(0, 0), 1.0 / 0.21, 1e-12);
    EXPECT_NEAR(fisher_information(fam, {0.3})(0, 0), 4.7619047619, 1e-9);
}

TEST(FisherInformation, MatchesFiniteDifferenceHessianOnGrid) {
    for (const auto& fam : {SourceFamily::bernoulli(), SourceFamily::categorical(3), SourceFamily::categorical(4),
                            SourceFamily::binary_markov()}) {
        for (const auto& p : grid_points(fam, 25)) {
            const Matrix closed = fisher_information(fam, p);
            const Matrix fd = finite_difference_fisher(fam, p);
            const double rel = (closed - fd).cwiseAbs().maxCoeff() / closed.cwiseAbs().maxCoeff();
            EXPECT_LT(rel, 1e-4) << fam.name() << " at " << p.to_string();
            EXPECT_TRUE(is_symmetric(closed));
            EXPECT_GT(min_eigenvalue(closed), 0.0);
        }
    }
}

TEST(FisherInformation, CategoricalTwoReducesToBernoulli) {
    const auto cat = SourceFamily::categorical(2);
    const auto ber = SourceFamily::bernoulli();
    for (double p0 : {0.1, 0.3, 0.5, 0.77}) {
        // categorical parameter is P(0); Bernoulli parameter is P(1)
        EXPECT_NEAR(fisher_information(cat, {p0})(0, 0), fisher_information(ber, {1.0 - p0})(0, 0), 1e-12);
    }
}

TEST(FisherInformation, RejectsOutOfDomain) {
    const auto fam = SourceFamily::bernoulli();
    EXPECT_THROW(fisher_information(fam, {0.0}), ParameterOutOfRange);
    EXPECT_THROW(fisher_information(fam, {0.9999}), ParameterOutOfRange);
    EXPECT_THROW(fisher_information(fam, {0.2, 0.3}), ParameterOutOfRange);
    EXPECT_THROW(fisher_information(SourceFamily::categorical(3), {0.6, 0.4}), ParameterOutOfRange);
}

TEST(Entropy, TrivialValues) {
    const auto fam = SourceFamily::bernoulli();
    EXPECT_DOUBLE_EQ(entropy(SourceModel(fam, {0.5}), 10), 10.0);
    EXPECT_DOUBLE_EQ(entropy(SourceModel(fam, {0.3}), 0), 0.0);
    EXPECT_DOUBLE_EQ(entropy(SourceModel(SourceFamily::binary_markov(), {0.2, 0.6}), 0), 0.0);
}

TEST(Entropy, BernoulliMatchesBruteForce) {
    const std::vector<double> p = {0.7, 0.3};
    double h = 0.0;
    for (double q : p) h -= q * std::log(q) / std::log(2.0);
    EXPECT_NEAR(entropy(SourceModel(SourceFamily::bernoulli(), {0.3}), 100), 100.0 * h, 1e-10);
    EXPECT_NEAR(100.0 * h, 88.129089923069, 1e-9);
}

TEST(Entropy, MarkovBlockEntropyMatchesEnumeration) {
    const auto fam = SourceFamily::binary_markov();
    const SourceModel model(fam, {0.2, 0.65});
    for (std::size_t n : {1u, 2u, 5u, 10u}) {
        double h = 0.0;
        for (std::uint64_t bits = 0; bits < (1ULL << n); ++bits) {
            const double p = std::exp2(model.log2_prob(Sequence::from_bits(bits, n)));
            h -= p * std::log2(p);
        }
        EXPECT_NEAR(entropy(model, n), h, 1e-10) << "n=" << n;
    }
}

TEST(Entropy, NonnegativeAdditiveAndMaximalAtUniform) {
    for (const auto& fam : {SourceFamily::bernoulli(), SourceFamily::categorical(3), SourceFamily::binary_markov()}) {
        const double hmax = entropy(SourceModel(fam, fam.center()), 50);
        EXPECT_NEAR(hmax, 50.0 * std::log2(fam.alphabet_size()), 1e-10);
        for (const auto& p : grid_points(fam, 20)) {
            const SourceModel m(fam, p);
            EXPECT_GE(entropy(m, 7), 0.0);
            EXPECT_LE(entropy(m, 50), hmax + 1e-12);
            if (fam.memoryless()) EXPECT_NEAR(entropy(m, 30) + entropy(m, 20), entropy(m, 50), 1e-10);
        }
    }
}

TEST(SampleSequence, NearBoundaryConcentration) {
    const auto fam = SourceFamily::bernoulli();
    const double theta = 1.0 - fam.clearance();
    RngStream rng(7);
    const auto x = sample_sequence(SourceModel(fam, {theta}), 10000, rng);
    double ones = 0.0;
    for (auto s : x.symbols) ones += s;
    const double sigma = std::sqrt(theta * (1.0 - theta) / 10000.0);
    EXPECT_LT(std::abs(ones / 10000.0 - theta), 5.0 * sigma);
}

TEST(SampleSequence, EmptyAndDeterministic) {
    const SourceModel m(SourceFamily::categorical(4), {0.1, 0.2, 0.3});
    RngStream a(123), b(123);
    EXPECT_TRUE(sample_sequence(m, 0, a).empty());
    RngStream c(5), d(5);
    EXPECT_EQ(sample_sequence(m, 500, c).symbols, sample_sequence(m, 500, d).symbols);
    RngStream e = RngStream::derive(42, 3), f = RngStream::derive(42, 3), g = RngStream::derive(42, 4);
    const auto se = sample_sequence(m, 200, e), sf = sample_sequence(m, 200, f), sg = sample_sequence(m, 200, g);
    EXPECT_EQ(se.symbols, sf.symbols);
    EXPECT_NE(se.symbols, sg.symbols);
}

TEST(SampleSequence, MarkovStationaryFrequency) {
    const SourceModel m(SourceFamily::binary_markov(), {0.1, 0.7});
    RngStream rng(11);
    const auto x = sample_sequence(m, 200000, rng);
    double ones = 0.0;
    for (auto s : x.symbols) ones += s;
    EXPECT_NEAR(ones / x.size(), m.marginal()[1], 0.01);
}

TEST(SampleTheta, BernoulliMatchesArcsineCdf) {
    const auto fam = SourceFamily::bernoulli();
    const auto prior = PriorSpec::jeffreys(fam);
    RngStream rng(2024);
    std::vector<double> draws(100000);
    for (auto& v : draws) v = sample_theta(prior, rng)[0];
    std::sort(draws.begin(), draws.end());

    // Oracle: numerical integration of the normalized Jeffreys density.
    auto dens = [](double t) { return 1.0 / std::sqrt(t * (1.0 - t)); };
    const double eps = fam.clearance();
    const double total = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(dens, eps, 1.0 - eps, 30, 1e-12);
    double ks = 0.0;
    for (double q = 0.01; q < 1.0; q += 0.01) {
        const double t = eps + q * (1.0 - 2.0 * eps);
        const double cdf = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(dens, eps, t, 30, 1e-12) / total;
        const double emp = static_cast<double>(std::upper_bound(draws.begin(), draws.end(), t) - draws.begin()) / draws.size();
        ks = std::max(ks, std::abs(cdf - emp));
    }
    EXPECT_LT(ks, 0.01);
    EXPECT_NEAR(draws[draws.size() / 2], 0.5, 0.02);
}

TEST(SampleTheta, DegenerateDomainFails) {
    const auto fam = SourceFamily::bernoulli(0.5);
    EXPECT_THROW(
        {
            const auto prior = PriorSpec::jeffreys(fam);
            RngStream rng(1);
            sample_theta(prior, rng);
        },
        Error);
}

TEST(SampleTheta, MarkovMomentsMatchQuadrature) {
    const auto fam = SourceFamily::binary_markov();
    const auto prior = PriorSpec::jeffreys(fam);
    RngStream rng(77);
    const int draws = 40000;
    double s = 0.0, ss = 0.0;
    for (int i = 0; i < draws; ++i) {
        const auto p = sample_theta(prior, rng);
        ASSERT_TRUE(fam.contains(p));
        s += p[0];
        ss += p[0] * p[0];
    }
    const double mean = s / draws;
    const double sd = std::sqrt(ss / draws - mean * mean);

    // Quadrature mean of the first coordinate under the normalized density.
    const double eps = fam.clearance();
    auto inner = [&](double a) {
        auto f = [&](double b) { return a * jeffreys_density_unnormalized(fam, {a, b}); };
        return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, eps, 1.0 - eps, 25, 1e-10);
    };
    const double first_moment =
        boost::math::quadrature::gauss_kronrod<double, 61>::integrate(inner, eps, 1.0 - eps, 25, 1e-10) /
        prior.normalization();
    EXPECT_LT(std::abs(mean - first_moment), 3.0 * sd / std::sqrt(draws));
}

TEST(SampleTheta, CategoricalDrawsStayInDomain) {
    const auto fam = SourceFamily::categorical(3);
    const auto prior = PriorSpec::jeffreys(fam);
    RngStream rng(3);
    double s0 = 0.0;
    const int draws = 20000;
    for (int i = 0; i < draws; ++i) {
        const auto p = sample_theta(prior, rng);
        ASSERT_TRUE(fam.contains(p));
        s0 += p[0];
    }
    // Symmetric Dirichlet(1/2): every coordinate has mean 1/3.
    EXPECT_NEAR(s0 / draws, 1.0 / 3.0, 0.01);
}

TEST(SamplePhi, ZeroCorrelationReturnsTheta) {
    const auto fam = SourceFamily::bernoulli();
    RngStream rng(1);
    EXPECT_EQ(sample_phi_given_theta(fam, {0.37}, CorrelationSpec::zero(), rng), (ParamVector{0.37}));
}

TEST(SamplePhi, VarianceShrinksWithAlphaAndMeanIsCentered) {
    const auto fam = SourceFamily::bernoulli();
    const ParamVector theta{0.5};
    for (double alpha : {1e3, 1e5}) {
        const auto corr = CorrelationSpec::scaled_inverse_fisher(alpha);
        RngStream rng(static_cast<std::uint64_t>(alpha));
        const int draws = 100000;
        double s = 0.0, ss = 0.0;
        for (int i = 0; i < draws; ++i) {
            const double v = sample_phi_given_theta(fam, theta, corr, rng)[0];
            s += v;
            ss += v * v;
        }
        const double mean = s / draws;
        const double var = ss / draws - mean * mean;
        const double model_var = 0.25 / alpha;
        EXPECT_LE(var, 2.0 * model_var);
        EXPECT_LT(std::abs(mean - 0.5), 5.0 * std::sqrt(model_var / draws));
    }
}

TEST(SamplePhi, MassOutsideDomainIsASamplingFailure) {
    const auto fam = SourceFamily::bernoulli(0.4);
    Matrix huge(1, 1);
    huge(0, 0) = 1e14;
    RngStream rng(1);
    EXPECT_THROW(sample_phi_given_theta(fam, {0.5}, CorrelationSpec::constant(huge), rng), SamplingFailure);
}

TEST(JMatrix, Examples) {
    const auto fam = SourceFamily::bernoulli();
    EXPECT_EQ(j_matrix({0.3}, CorrelationSpec::zero(), fam), Matrix::Zero(1, 1));
    EXPECT_NEAR(j_matrix({0.3}, CorrelationSpec::scaled_inverse_fisher(250.0), fam)(0, 0), 1.0 / 250.0, 1e-15);

    const auto markov = SourceFamily::binary_markov();
    const Matrix jm = j_matrix({0.2, 0.7}, CorrelationSpec::scaled_inverse_fisher(4.0), markov);
    EXPECT_LT((jm - 0.25 * Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-12);

    const auto explicit_corr = CorrelationSpec::explicit_matrix(
        [&](const ParamVector& t) { return Matrix(fisher_information(fam, t).inverse()); });
    const Matrix j = j_matrix({0.5}, explicit_corr, fam);
    EXPECT_NEAR(j(0, 0), 1.0, 1e-12);
}

TEST(JMatrix, PositiveDefinitenessIsEnforcedWhenRequired) {
    const auto fam = SourceFamily::bernoulli();
    EXPECT_THROW(j_matrix({0.3}, CorrelationSpec::zero(), fam, true), ModelAssumptionError);
    EXPECT_NO_THROW(j_matrix({0.3}, CorrelationSpec::scaled_inverse_fisher(10.0), fam, true));
    Matrix bad(2, 2);
    bad << 1.0, 2.0, 2.0, 1.0;
    EXPECT_THROW(j_matrix({0.3, 0.4}, CorrelationSpec::constant(bad), SourceFamily::binary_markov()),
                 ModelAssumptionError);
}
