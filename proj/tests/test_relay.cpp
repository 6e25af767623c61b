#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "memcomp/relay.hpp"
#include "memcomp/report_io.hpp"

using namespace memcomp;

namespace {

ScenarioConfig zero_corr(std::uint64_t n, std::uint64_t m, std::size_t trials = 200) {
    ScenarioConfig c;
    c.n = n;
    c.m = m;
    c.trials = trials;
    c.seed = 5;
    return c;
}

}  // namespace

TEST(RunScenario, EmptyMemoryCollapsesToUcomp) {
    auto c = zero_corr(500, 0);
    c.strategies = {RelayStrategy::ucomp, RelayStrategy::ducompme_identical, RelayStrategy::ducompme_quadrature};
    const auto rep = run_scenario(c);
    const double base = rep.row(Link::s2_m, RelayStrategy::ucomp).mean_bits;
    EXPECT_NEAR(rep.row(Link::s2_m, RelayStrategy::ducompme_identical).mean_bits, base, 1e-12);
    EXPECT_NEAR(rep.row(Link::s2_m, RelayStrategy::ducompme_quadrature).mean_bits, base, 1e-12);
    EXPECT_EQ(rep.row(Link::s1_m, RelayStrategy::ucomp).mean_bits, 0.0);
}

TEST(RunScenario, EmptyPayloadHasNoGain) {
    const auto rep = run_scenario(zero_corr(0, 100));
    const auto& row = rep.row(Link::s2_m, RelayStrategy::ducompme_identical);
    EXPECT_EQ(row.mean_bits, 0.0);
    EXPECT_FALSE(row.gain_total.has_value());
    EXPECT_FALSE(row.gain_redundancy.has_value());
}

TEST(RunScenario, DownstreamLinksCarryMemorylessCodes) {
    const auto rep = run_scenario(zero_corr(400, 400));
    for (auto s : {RelayStrategy::ucomp, RelayStrategy::ducompme_identical}) {
        EXPECT_EQ(rep.row(Link::m_c2, s).mean_bits, rep.row(Link::s2_m, RelayStrategy::ucomp).mean_bits);
        EXPECT_EQ(rep.row(Link::m_c1, s).mean_bits, rep.row(Link::s1_m, s).mean_bits);
    }
    // Savings appear on S2->M only.
    EXPECT_LT(rep.row(Link::s2_m, RelayStrategy::ducompme_identical).mean_bits,
              rep.row(Link::m_c2, RelayStrategy::ducompme_identical).mean_bits);
}

TEST(RunScenario, GainMatchesFiniteSampleExpectation) {
    // At theta = 1/2 the entropy is n bits; gain ~ (4.587 - 0.5) / (n + 4.587).
    auto c = zero_corr(1000, 1000, 2000);
    c.policy = PhiPolicy::fixed;
    c.theta = ParamVector{0.5};
    const auto& row = run_scenario(c, 2).row(Link::s2_m, RelayStrategy::ducompme_identical);
    EXPECT_NEAR(*row.gain_total, (4.587 - 0.5) / 1004.587, 3.0 * *row.gain_stderr + 2e-4);
    EXPECT_GT(*row.gain_redundancy, 0.8);
    EXPECT_LE(*row.gain_total, 1.0);
}

TEST(RunScenario, DeterministicAcrossWorkerCounts) {
    auto c = zero_corr(300, 300);
    c.corr_kind = CorrelationSpec::Kind::scaled_inverse_fisher;
    c.alpha = 300.0;
    c.strategies = {RelayStrategy::ucomp, RelayStrategy::ducompme_identical, RelayStrategy::ducompme_quadrature};
    const auto a = to_csv(scenario_table({run_scenario(c, 1)}));
    EXPECT_EQ(a, to_csv(scenario_table({run_scenario(c, 4)})));
}

TEST(RunScenario, QuadratureStrategyNeedsOneParameter) {
    auto c = zero_corr(100, 100);
    c.family = SourceFamily::binary_markov();
    c.strategies = {RelayStrategy::ducompme_quadrature};
    EXPECT_THROW(run_scenario(c), ArgumentError);
}

TEST(RunScenario, AllBitCountsNonnegative) {
    auto c = zero_corr(50, 20);
    c.family = SourceFamily::categorical(3);
    for (const auto& r : run_scenario(c).rows) {
        EXPECT_GE(r.mean_bits, 0.0);
        if (r.gain_total) {
            EXPECT_LE(*r.gain_total, 1.0);
        }
    }
}

TEST(SweepScenario, DuplicateConfigsGiveIdenticalReports) {
    const auto reps = sweep_scenario({zero_corr(200, 100), zero_corr(200, 100)});
    ASSERT_EQ(reps.size(), 2u);
    EXPECT_EQ(to_csv(scenario_table({reps[0]})), to_csv(scenario_table({reps[1]})));
}

TEST(SweepScenario, GainNondecreasingInMemory) {
    std::vector<ScenarioConfig> cfgs;
    for (std::uint64_t m : {10, 100, 1000, 10000}) cfgs.push_back(zero_corr(1000, m, 600));
    const auto reps = sweep_scenario(cfgs, 2);
    for (std::size_t i = 1; i < reps.size(); ++i) {
        const auto& prev = reps[i - 1].row(Link::s2_m, RelayStrategy::ducompme_identical);
        const auto& cur = reps[i].row(Link::s2_m, RelayStrategy::ducompme_identical);
        const double sigma = std::hypot(*prev.gain_stderr, *cur.gain_stderr);
        EXPECT_GE(*cur.gain_total, *prev.gain_total - 3.0 * sigma) << "m=" << reps[i].config.m;
    }
}

TEST(SweepScenario, StrongerCorrelationGivesLargerGain) {
    std::vector<ScenarioConfig> cfgs;
    for (double alpha : {50.0, 5000.0}) {
        auto c = zero_corr(500, 500, 800);
        c.corr_kind = CorrelationSpec::Kind::scaled_inverse_fisher;
        c.alpha = alpha;
        c.strategies = {RelayStrategy::ucomp, RelayStrategy::ducompme_quadrature};
        cfgs.push_back(c);
    }
    const auto reps = sweep_scenario(cfgs, 2);
    const auto& weak = reps[0].row(Link::s2_m, RelayStrategy::ducompme_quadrature);
    const auto& strong = reps[1].row(Link::s2_m, RelayStrategy::ducompme_quadrature);
    EXPECT_GT(*strong.gain_total, *weak.gain_total - 3.0 * std::hypot(*weak.gain_stderr, *strong.gain_stderr));
    EXPECT_GT(*strong.gain_redundancy, *weak.gain_redundancy);
}

TEST(SweepScenario, ErrorsStayWithTheirConfig) {
    auto bad = zero_corr(100, 100);
    bad.corr_kind = CorrelationSpec::Kind::explicit_matrix;
    bad.gamma = Matrix::Constant(1, 1, 1e18);
    const auto reps = sweep_scenario({zero_corr(100, 100), bad});
    EXPECT_FALSE(reps[0].error.has_value());
    ASSERT_TRUE(reps[1].error.has_value());
    EXPECT_TRUE(reps[1].rows.empty());
    const auto t = scenario_table(reps);
    EXPECT_EQ(std::get<std::string>(t.rows.back().back()), *reps[1].error);
}

TEST(SweepScenario, InvalidConfigsAreRejectedUpFront) {
    auto c = zero_corr(100, 100, 0);
    EXPECT_THROW(sweep_scenario({c}), ArgumentError);
    EXPECT_THROW(sweep_scenario({}), ArgumentError);
}

TEST(PairedGain, DeltaMethodOnKnownData) {
    const std::vector<double> base{10, 12, 14, 16}, mem{9, 11, 13, 15};
    auto [g, s] = detail::paired_gain(base, mem);
    EXPECT_NEAR(*g, 1.0 - 12.0 / 13.0, 1e-15);
    // Oracle: standard error of the linearized terms (mem - (1 - g) base) / mean(base).
    std::vector<double> lin;
    for (std::size_t i = 0; i < base.size(); ++i) lin.push_back((mem[i] - 12.0 / 13.0 * base[i]) / 13.0);
    EXPECT_NEAR(*s, *detail::mean_stderr(lin).stderr_value, 1e-15);
    EXPECT_FALSE(detail::paired_gain({0.0, 0.0}, {0.0, 0.0}).first.has_value());
}
