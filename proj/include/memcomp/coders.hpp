#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "memcomp/core.hpp"
#include "memcomp/jeffreys.hpp"
#include "memcomp/linalg.hpp"
#include "memcomp/parallel.hpp"
#include "memcomp/quadrature.hpp"
#include "memcomp/rng.hpp"
#include "memcomp/source_models.hpp"

namespace memcomp {

/// Ideal codelength -log2 P(x) in bits (no integer rounding).
struct CodeLength {
    double bits = 0.0;
};

/// Sequential Krichevsky-Trofimov (add-half) estimator. Memoryless families use
/// one context. The binary Markov family codes each symbol in the context of
/// its predecessor; the first symbol of a sequence is coded with context 0,
/// which counts every symbol seen so far and so tracks the stationary law.
class KtCoder {
  public:
    explicit KtCoder(const SourceFamily& family)
        : alphabet_(family.alphabet_size()),
          contexts_(family.memoryless() ? 1 : 3),
          counts_(static_cast<std::size_t>(contexts_ * alphabet_), 0.5),
          totals_(contexts_, 0.5 * alphabet_) {}

    /// Updates the counts with `y` without producing a codelength.
    void prime(const Sequence& y) { run(y, false); }

    /// Codes `x` sequentially and returns its ideal codelength.
    CodeLength encode(const Sequence& x) { return {run(x, true)}; }

    /// Current coding probability of `symbol` in `context`.
    double probability(int context, std::uint8_t symbol) const {
        return counts_[context * alphabet_ + symbol] / totals_[context];
    }

    double count(int context, std::uint8_t symbol) const { return counts_[context * alphabet_ + symbol]; }

  private:
    double run(const Sequence& s, bool code) {
        double bits = 0.0;
        int ctx = 0;
        for (std::size_t t = 0; t < s.size(); ++t) {
            const std::uint8_t a = s.symbols[t];
            if (a >= alphabet_) throw ArgumentError("symbol outside the coder alphabet");
            if (contexts_ > 1) ctx = t == 0 ? 0 : 1 + s.symbols[t - 1];
            double& c = counts_[ctx * alphabet_ + a];
            if (code) bits -= std::log2(c / totals_[ctx]);
            c += 1.0;
            totals_[ctx] += 1.0;
            if (ctx != 0) {
                counts_[a] += 1.0;
                totals_[0] += 1.0;
            }
        }
        return bits;
    }

    int alphabet_;
    int contexts_;
    std::vector<double> counts_;
    std::vector<double> totals_;
};

/// Jeffreys-mixture (KT) codelength of x.
inline CodeLength kt_codelength(const Sequence& x, const SourceFamily& family) {
    KtCoder coder(family);
    return coder.encode(x);
}

/// KT codelength of x with the counts pre-loaded from the memory y.
inline CodeLength memory_kt_codelength(const Sequence& x, const Sequence& y, const SourceFamily& family) {
    KtCoder coder(family);
    coder.prime(y);
    return coder.encode(x);
}

inline constexpr int kDefaultQuadratureNodes = 256;

/// Conditional mixture coder m(x | y) = m(x, y) / m(y) for a one-parameter
/// family, with theta ~ Jeffreys on the cleared domain and phi | theta a
/// Gaussian of variance Gamma(theta) truncated and renormalized to the domain.
///
/// Both axes use the same Gauss-Legendre nodes in the arcsine coordinate
/// theta = sin^2(u), where the Jeffreys density is uniform. Each kernel row is
/// normalized on the nodes, so the coder is an exact discrete mixture and its
/// codelengths satisfy Kraft with equality.
class JointMixtureCoder {
  public:
    JointMixtureCoder(const PriorSpec& prior, const CorrelationSpec& corr, int nodes = kDefaultQuadratureNodes)
        : family_(prior.family()) {
        if (family_.dimension() != 1)
            throw ArgumentError("joint mixture coder supports d = 1 families only (got d=" +
                                std::to_string(family_.dimension()) + ")");
        if (nodes < 2) throw ArgumentError("joint mixture coder needs at least 2 nodes");
        // For categorical k = 2 the parameter is P(0); for Bernoulli it is P(1).
        param_symbol_ = family_.kind() == FamilyKind::bernoulli ? 1 : 0;

        const double eps = family_.clearance();
        const QuadratureRule rule = gauss_legendre(nodes, std::asin(std::sqrt(eps)), std::asin(std::sqrt(1.0 - eps)));
        const int n = nodes;
        log_p_.resize(n);
        log_q_.resize(n);
        log_prior_.resize(n);
        theta_.resize(n);
        double wsum = 0.0;
        for (double w : rule.weights) wsum += w;
        for (int i = 0; i < n; ++i) {
            const double s = std::sin(rule.nodes[i]), c = std::cos(rule.nodes[i]);
            theta_[i] = s * s;
            log_p_[i] = 2.0 * std::log(s);
            log_q_[i] = 2.0 * std::log(c);
            log_prior_[i] = std::log(rule.weights[i] / wsum);
        }

        identity_ = corr.kind() == CorrelationSpec::Kind::zero;
        if (identity_) return;
        log_kernel_.resize(n, n);
        std::vector<double> row(n);
        for (int i = 0; i < n; ++i) {
            const double var = corr.gamma(family_, ParamVector{theta_[i]})(0, 0);
            if (!(var > 0.0)) {
                // Degenerate row: phi = theta.
                log_kernel_.row(i).setConstant(-std::numeric_limits<double>::infinity());
                log_kernel_(i, i) = 0.0;
                continue;
            }
            for (int j = 0; j < n; ++j) {
                const double diff = theta_[j] - theta_[i];
                // phi measure on node j: Jacobian sin(2u) times the GL weight.
                row[j] = -diff * diff / (2.0 * var) + std::log(std::sin(2.0 * rule.nodes[j]) * rule.weights[j]);
            }
            const double z = log_sum_exp(row);
            for (int j = 0; j < n; ++j) log_kernel_(i, j) = row[j] - z;
        }
        kernel_ = log_kernel_.array().exp().matrix();
    }

    const SourceFamily& family() const { return family_; }
    std::size_t nodes() const { return theta_.size(); }
    const std::vector<double>& theta_nodes() const { return theta_; }

    /// Ideal codelength of x given the memory y.
    CodeLength codelength(const Sequence& x, const Sequence& y) const {
        return codelength_counts(count_param_symbol(x), x.size(), count_param_symbol(y), y.size());
    }

    /// Same as codelength() from sufficient statistics (occurrences of the
    /// parameter symbol and lengths).
    CodeLength codelength_counts(std::size_t kx, std::size_t nx, std::size_t ky, std::size_t ny) const {
        const std::size_t n = theta_.size();
        std::vector<double> ly(n), lx(n);
        for (std::size_t i = 0; i < n; ++i) {
            ly[i] = log_prior_[i] + loglik(i, ky, ny);
            lx[i] = loglik(i, kx, nx);
        }
        const double log_den = log_sum_exp(ly);

        std::vector<double> joint(n);
        if (identity_) {
            for (std::size_t i = 0; i < n; ++i) joint[i] = ly[i] + lx[i];
        } else {
            double mx = -std::numeric_limits<double>::infinity();
            for (double v : lx) mx = std::max(mx, v);
            Vector b(n);
            for (std::size_t j = 0; j < n; ++j) b[j] = std::exp(lx[j] - mx);
            const Vector s = kernel_ * b;
            std::vector<double> tmp(n);
            for (std::size_t i = 0; i < n; ++i) {
                double inner;
                if (s[i] > 1e-290) {
                    inner = std::log(s[i]) + mx;
                } else {
                    for (std::size_t j = 0; j < n; ++j) tmp[j] = log_kernel_(i, j) + lx[j];
                    inner = log_sum_exp(tmp);
                }
                joint[i] = ly[i] + inner;
            }
        }
        const double log_num = log_sum_exp(joint);
        return {std::max(0.0, -(log_num - log_den) / kLn2)};
    }

  private:
    std::size_t count_param_symbol(const Sequence& s) const {
        std::size_t c = 0;
        for (auto a : s.symbols) {
            if (a >= family_.alphabet_size()) throw ArgumentError("symbol outside the coder alphabet");
            c += a == param_symbol_;
        }
        return c;
    }

    double loglik(std::size_t i, std::size_t k, std::size_t len) const {
        double v = 0.0;
        if (k) v += static_cast<double>(k) * log_p_[i];
        if (len - k) v += static_cast<double>(len - k) * log_q_[i];
        return v;
    }

    SourceFamily family_;
    std::uint8_t param_symbol_ = 1;
    bool identity_ = true;
    std::vector<double> theta_, log_p_, log_q_, log_prior_;
    Matrix log_kernel_, kernel_;
};

inline CodeLength joint_mixture_codelength(const Sequence& x, const Sequence& y, const CorrelationSpec& corr,
                                           const PriorSpec& prior, int nodes = kDefaultQuadratureNodes) {
    return JointMixtureCoder(prior, corr, nodes).codelength(x, y);
}

/// Sufficient statistics of a binary Markov block: first symbol and the four
/// transition counts n[prev][next].
struct MarkovCounts {
    int first = -1;  // -1 for an empty block
    double n[2][2] = {{0.0, 0.0}, {0.0, 0.0}};

    static MarkovCounts of(const Sequence& s) {
        MarkovCounts c;
        if (s.size() == 0) return c;
        if (s.symbols[0] > 1) throw ArgumentError("symbol outside the coder alphabet");
        c.first = s.symbols[0];
        for (std::size_t t = 1; t < s.size(); ++t) {
            if (s.symbols[t] > 1) throw ArgumentError("symbol outside the coder alphabet");
            c.n[s.symbols[t - 1]][s.symbols[t]] += 1.0;
        }
        return c;
    }
};

inline constexpr int kDefaultMarkovNodes = 192;

/// Jeffreys mixture for the binary Markov family, memory-primed. The prior
/// |I(a, b)|^{1/2} is not a product of per-state Beta(1/2, 1/2) laws (it
/// carries an extra sqrt(pi0 pi1) factor), so per-state KT is not this
/// mixture. Nodes are a Gauss-Legendre tensor grid in arcsine coordinates on
/// the cleared square; the weights are normalized, so Kraft holds exactly.
class MarkovMixtureCoder {
  public:
    explicit MarkovMixtureCoder(const SourceFamily& family, int nodes = kDefaultMarkovNodes) {
        if (family.kind() != FamilyKind::binary_markov) throw ArgumentError("Markov mixture coder needs the markov family");
        if (nodes < 2) throw ArgumentError("Markov mixture coder needs at least 2 nodes per axis");
        const double eps = family.clearance();
        const QuadratureRule rule = gauss_legendre(nodes, std::asin(std::sqrt(eps)), std::asin(std::sqrt(1.0 - eps)));
        const std::size_t n = static_cast<std::size_t>(nodes);
        std::vector<double> p(n), lp(n), lq(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double s = std::sin(rule.nodes[i]), c = std::cos(rule.nodes[i]);
            p[i] = s * s;
            lp[i] = 2.0 * std::log(s);
            lq[i] = 2.0 * std::log(c);
        }
        nodes_.reserve(n * n);
        std::vector<double> lw;
        lw.reserve(n * n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                const double a = p[i], b = p[j];
                auto [pi0, pi1] = markov_stationary(a, b);
                Node nd;
                // log P(next | prev) for prev = 0 (parameter a) and prev = 1 (parameter b).
                nd.lt[0][0] = lq[i];
                nd.lt[0][1] = lp[i];
                nd.lt[1][0] = lq[j];
                nd.lt[1][1] = lp[j];
                nd.lpi[0] = std::log(pi0);
                nd.lpi[1] = std::log(pi1);
                nodes_.push_back(nd);
                lw.push_back(std::log(rule.weights[i] * rule.weights[j]) + 0.5 * std::log(pi0 * pi1));
            }
        }
        const double z = log_sum_exp(lw);
        for (std::size_t k = 0; k < nodes_.size(); ++k) nodes_[k].lw = lw[k] - z;
    }

    CodeLength codelength(const Sequence& x, const Sequence& y) const {
        return codelength_counts(MarkovCounts::of(x), MarkovCounts::of(y));
    }

    CodeLength codelength_counts(const MarkovCounts& x, const MarkovCounts& y) const {
        if (x.first < 0) return {0.0};
        std::vector<double> ly(nodes_.size()), lxy(nodes_.size());
        for (std::size_t k = 0; k < nodes_.size(); ++k) {
            const Node& nd = nodes_[k];
            ly[k] = nd.lw + loglik(nd, y);
            lxy[k] = ly[k] + loglik(nd, x);
        }
        return {std::max(0.0, -(log_sum_exp(lxy) - log_sum_exp(ly)) / kLn2)};
    }

  private:
    struct Node {
        double lt[2][2];
        double lpi[2];
        double lw = 0.0;
    };

    static double loglik(const Node& nd, const MarkovCounts& c) {
        if (c.first < 0) return 0.0;
        double v = nd.lpi[c.first];
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                if (c.n[i][j] > 0.0) v += c.n[i][j] * nd.lt[i][j];
        return v;
    }

    std::vector<Node> nodes_;
};

/// Draws (theta, phi) either with theta fixed or theta ~ Jeffreys, then
/// phi | theta per the correlation spec.
class CorrelatedPairSource {
  public:
    CorrelatedPairSource(const PriorSpec& prior, CorrelationSpec corr, std::optional<ParamVector> fixed_theta = {})
        : prior_(prior), corr_(std::move(corr)), fixed_theta_(std::move(fixed_theta)) {
        if (fixed_theta_) prior_.family().require_in_domain(*fixed_theta_);
    }

    const SourceFamily& family() const { return prior_.family(); }
    const PriorSpec& prior() const { return prior_; }
    const CorrelationSpec& corr() const { return corr_; }

    std::pair<ParamVector, ParamVector> draw(RngStream& rng) const {
        ParamVector theta = fixed_theta_ ? *fixed_theta_ : sample_theta(prior_, rng);
        ParamVector phi = sample_phi_given_theta(prior_.family(), theta, corr_, rng);
        return {std::move(theta), std::move(phi)};
    }

  private:
    PriorSpec prior_;
    CorrelationSpec corr_;
    std::optional<ParamVector> fixed_theta_;
};

/// Monte Carlo summary of a coder's codelength. Redundancy per trial is the
/// pointwise quantity L(x) + log2 mu_phi(x), whose mean is E L - H_n(phi).
struct CodeLengthStats {
    std::size_t trials = 0;
    double mean_codelength = 0.0;
    double mean_entropy = 0.0;
    double mean_redundancy = 0.0;
    std::optional<double> stderr_redundancy;
};

struct TrialOutcome {
    double codelength = 0.0;
    double log2_prob = 0.0;
    double entropy = 0.0;
};

inline CodeLengthStats summarize(const std::vector<TrialOutcome>& outcomes) {
    CodeLengthStats st;
    st.trials = outcomes.size();
    if (outcomes.empty()) return st;
    const double t = static_cast<double>(outcomes.size());
    double sum_l = 0.0, sum_h = 0.0, sum_r = 0.0;
    for (const auto& o : outcomes) {
        sum_l += o.codelength;
        sum_h += o.entropy;
        sum_r += o.codelength + o.log2_prob;
    }
    st.mean_codelength = sum_l / t;
    st.mean_entropy = sum_h / t;
    st.mean_redundancy = sum_r / t;
    if (outcomes.size() >= 2) {
        double ss = 0.0;
        for (const auto& o : outcomes) {
            const double dev = o.codelength + o.log2_prob - st.mean_redundancy;
            ss += dev * dev;
        }
        st.stderr_redundancy = std::sqrt(ss / (t - 1.0) / t);
    }
    return st;
}

/// Monte Carlo expected codelength of `coder(x, y)` where y ~ mu_theta^m and
/// x ~ mu_phi^n. Trial t uses the stream derived from (seed, t), so the
/// result is independent of `jobs`.
template <class Coder>
CodeLengthStats expected_codelength(Coder&& coder, const CorrelatedPairSource& source, std::size_t n,
                                    std::size_t m, std::size_t trials, std::uint64_t seed, int jobs = 1) {
    if (trials < 1) throw ArgumentError("expected_codelength needs trials >= 1");
    std::vector<TrialOutcome> out(trials);
    parallel_for(trials, jobs, [&](std::size_t t) {
        RngStream rng = RngStream::derive(seed, t);
        auto [theta, phi] = source.draw(rng);
        const SourceModel s1(source.family(), theta), s2(source.family(), phi);
        const Sequence y = sample_sequence(s1, m, rng);
        const Sequence x = sample_sequence(s2, n, rng);
        out[t] = {coder(x, y), s2.log2_prob(x), entropy(s2, n)};
    });
    return summarize(out);
}

}  // namespace memcomp
