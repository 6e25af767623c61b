#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "memcomp/core.hpp"
#include "memcomp/linalg.hpp"
#include "memcomp/rng.hpp"

namespace memcomp {

inline constexpr double kDefaultClearance = 1e-3;

/// A d-dimensional parameter vector (probabilities or transition rates).
class ParamVector {
  public:
    ParamVector() = default;
    ParamVector(std::initializer_list<double> v) : values_(v) {}
    explicit ParamVector(std::vector<double> v) : values_(std::move(v)) {}

    std::size_t size() const { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }
    double& operator[](std::size_t i) { return values_[i]; }
    std::span<const double> values() const { return values_; }
    auto begin() const { return values_.begin(); }
    auto end() const { return values_.end(); }

    Vector to_eigen() const { return Eigen::Map<const Vector>(values_.data(), values_.size()); }
    static ParamVector from_eigen(const Vector& v) {
        return ParamVector(std::vector<double>(v.data(), v.data() + v.size()));
    }

    friend bool operator==(const ParamVector&, const ParamVector&) = default;

    std::string to_string() const {
        std::ostringstream os;
        os.precision(10);
        os << '[';
        for (std::size_t i = 0; i < values_.size(); ++i) os << (i ? ", " : "") << values_[i];
        os << ']';
        return os.str();
    }

  private:
    std::vector<double> values_;
};

enum class FamilyKind { bernoulli, categorical, binary_markov };

/// Parametric source family with an epsilon-cleared parameter domain.
///
///   bernoulli      d = 1, theta = P(1), domain [eps, 1 - eps]
///   categorical    d = k - 1, free parameters are p_0..p_{k-2}; every p_i
///                  (including p_{k-1} = 1 - sum) is >= eps
///   binary_markov  d = 2, (P(1|0), P(1|1)), each in [eps, 1 - eps]; chains
///                  start from the stationary distribution
class SourceFamily {
  public:
    static SourceFamily bernoulli(double eps = kDefaultClearance) {
        return SourceFamily(FamilyKind::bernoulli, 2, eps);
    }
    static SourceFamily categorical(int k, double eps = kDefaultClearance) {
        if (k < 2 || k > kMaxDimension + 1)
            throw ArgumentError("categorical alphabet size must be in [2, 17], got " + std::to_string(k));
        return SourceFamily(FamilyKind::categorical, k, eps);
    }
    static SourceFamily binary_markov(double eps = kDefaultClearance) {
        return SourceFamily(FamilyKind::binary_markov, 2, eps);
    }

    FamilyKind kind() const { return kind_; }
    int alphabet_size() const { return alphabet_; }
    int dimension() const { return kind_ == FamilyKind::categorical ? alphabet_ - 1 : (kind_ == FamilyKind::bernoulli ? 1 : 2); }
    double clearance() const { return eps_; }
    bool memoryless() const { return kind_ != FamilyKind::binary_markov; }

    std::string name() const {
        switch (kind_) {
            case FamilyKind::bernoulli: return "bernoulli";
            case FamilyKind::categorical: return "categorical" + std::to_string(alphabet_);
            case FamilyKind::binary_markov: return "markov";
        }
        return "?";
    }

    /// Width of the cleared domain along one free coordinate; <= 0 means empty.
    double domain_width() const {
        return kind_ == FamilyKind::categorical ? 1.0 - alphabet_ * eps_ : 1.0 - 2.0 * eps_;
    }

    bool contains(const ParamVector& p) const {
        constexpr double slack = 1e-12;
        if (static_cast<int>(p.size()) != dimension()) return false;
        double sum = 0.0;
        for (double v : p) {
            if (!std::isfinite(v) || v < eps_ - slack || v > 1.0 - eps_ + slack) return false;
            sum += v;
        }
        if (kind_ == FamilyKind::categorical && 1.0 - sum < eps_ - slack) return false;
        return true;
    }

    void require_in_domain(const ParamVector& p) const {
        if (static_cast<int>(p.size()) != dimension())
            throw ParameterOutOfRange(name() + ": expected " + std::to_string(dimension()) +
                                      " parameters, got " + std::to_string(p.size()));
        if (!contains(p))
            throw ParameterOutOfRange(name() + ": parameter " + p.to_string() +
                                      " outside the cleared domain (eps=" + std::to_string(eps_) + ")");
    }

    /// Uniform parameter (maximum entropy point).
    ParamVector center() const {
        if (kind_ == FamilyKind::categorical)
            return ParamVector(std::vector<double>(alphabet_ - 1, 1.0 / alphabet_));
        return ParamVector(std::vector<double>(dimension(), 0.5));
    }

    friend bool operator==(const SourceFamily&, const SourceFamily&) = default;

  private:
    SourceFamily(FamilyKind kind, int alphabet, double eps) : kind_(kind), alphabet_(alphabet), eps_(eps) {
        if (!(eps > 0.0) || !(eps < 1.0)) throw ArgumentError("domain clearance must lie in (0, 1)");
    }

    FamilyKind kind_;
    int alphabet_;
    double eps_;
};

/// A finite sequence over the family alphabet.
struct Sequence {
    std::vector<std::uint8_t> symbols;

    std::size_t size() const { return symbols.size(); }
    bool empty() const { return symbols.empty(); }

    static Sequence from_string(std::string_view s) {
        Sequence out;
        out.symbols.reserve(s.size());
        for (char c : s) out.symbols.push_back(static_cast<std::uint8_t>(c - '0'));
        return out;
    }

    /// Binary sequence whose i-th symbol is bit i of `bits`.
    static Sequence from_bits(std::uint64_t bits, std::size_t length) {
        Sequence out;
        out.symbols.resize(length);
        for (std::size_t i = 0; i < length; ++i) out.symbols[i] = static_cast<std::uint8_t>((bits >> i) & 1U);
        return out;
    }

    friend Sequence concat(const Sequence& a, const Sequence& b) {
        Sequence out = a;
        out.symbols.insert(out.symbols.end(), b.symbols.begin(), b.symbols.end());
        return out;
    }
};

/// Binary Markov stationary distribution (pi0, pi1) for P(1|0)=a, P(1|1)=b.
inline std::pair<double, double> markov_stationary(double a, double b) {
    const double denom = a + 1.0 - b;
    return {(1.0 - b) / denom, a / denom};
}

/// A family together with a concrete parameter: the measure mu_lambda.
class SourceModel {
  public:
    SourceModel(SourceFamily family, ParamVector param) : family_(family), param_(std::move(param)) {
        family_.require_in_domain(param_);
    }

    const SourceFamily& family() const { return family_; }
    const ParamVector& param() const { return param_; }

    /// Per-symbol distribution (memoryless families) or the stationary
    /// distribution (Markov).
    std::vector<double> marginal() const {
        switch (family_.kind()) {
            case FamilyKind::bernoulli: return {1.0 - param_[0], param_[0]};
            case FamilyKind::categorical: {
                std::vector<double> p(param_.begin(), param_.end());
                p.push_back(1.0 - std::accumulate(param_.begin(), param_.end(), 0.0));
                return p;
            }
            case FamilyKind::binary_markov: {
                auto [p0, p1] = markov_stationary(param_[0], param_[1]);
                return {p0, p1};
            }
        }
        return {};
    }

    /// P(next | prev) for the Markov family.
    std::vector<double> transition(std::uint8_t prev) const {
        const double p1 = prev == 0 ? param_[0] : param_[1];
        return {1.0 - p1, p1};
    }

    /// log2 mu_lambda(x).
    double log2_prob(const Sequence& x) const {
        const int k = family_.alphabet_size();
        for (auto s : x.symbols)
            if (s >= k) throw ArgumentError("symbol " + std::to_string(s) + " outside alphabet of size " + std::to_string(k));
        if (x.empty()) return 0.0;
        if (family_.memoryless()) {
            std::vector<std::size_t> counts(k, 0);
            for (auto s : x.symbols) ++counts[s];
            const auto p = marginal();
            double acc = 0.0;
            for (int a = 0; a < k; ++a)
                if (counts[a]) acc += static_cast<double>(counts[a]) * std::log2(p[a]);
            return acc;
        }
        std::size_t trans[2][2] = {{0, 0}, {0, 0}};
        for (std::size_t t = 1; t < x.size(); ++t) ++trans[x.symbols[t - 1]][x.symbols[t]];
        const auto pi = marginal();
        double acc = std::log2(pi[x.symbols[0]]);
        for (int s = 0; s < 2; ++s) {
            const auto row = transition(static_cast<std::uint8_t>(s));
            for (int c = 0; c < 2; ++c)
                if (trans[s][c]) acc += static_cast<double>(trans[s][c]) * std::log2(row[c]);
        }
        return acc;
    }

  private:
    SourceFamily family_;
    ParamVector param_;
};

/// Fisher information matrix I(lambda) per symbol, in natural-log units.
inline Matrix fisher_information(const SourceFamily& family, const ParamVector& lambda) {
    family.require_in_domain(lambda);
    const int d = family.dimension();
    Matrix fi = Matrix::Zero(d, d);
    switch (family.kind()) {
        case FamilyKind::bernoulli:
            fi(0, 0) = 1.0 / (lambda[0] * (1.0 - lambda[0]));
            break;
        case FamilyKind::categorical: {
            const double last = 1.0 - std::accumulate(lambda.begin(), lambda.end(), 0.0);
            fi.setConstant(1.0 / last);
            for (int i = 0; i < d; ++i) fi(i, i) += 1.0 / lambda[i];
            break;
        }
        case FamilyKind::binary_markov: {
            const double a = lambda[0], b = lambda[1];
            auto [pi0, pi1] = markov_stationary(a, b);
            fi(0, 0) = pi0 / (a * (1.0 - a));
            fi(1, 1) = pi1 / (b * (1.0 - b));
            break;
        }
    }
    return fi;
}

/// Block entropy H(X^n | lambda) in bits. Memoryless families give n times the
/// symbol entropy; the Markov family gives the exact block entropy from a
/// stationary start, H(X_1) + (n - 1) * entropy rate.
inline double entropy(const SourceModel& model, std::size_t n) {
    if (n == 0) return 0.0;
    const auto marg = model.marginal();
    if (model.family().memoryless()) return static_cast<double>(n) * shannon_entropy(marg);
    const auto t0 = model.transition(0);
    const auto t1 = model.transition(1);
    const double rate = marg[0] * shannon_entropy(t0) + marg[1] * shannon_entropy(t1);
    return shannon_entropy(marg) + static_cast<double>(n - 1) * rate;
}

/// Entropy rate in bits per symbol.
inline double entropy_rate(const SourceModel& model) {
    const auto marg = model.marginal();
    if (model.family().memoryless()) return shannon_entropy(marg);
    return marg[0] * shannon_entropy(model.transition(0)) + marg[1] * shannon_entropy(model.transition(1));
}

namespace detail {

inline std::uint8_t draw_symbol(std::span<const double> probs, RngStream& rng) {
    const double u = rng.uniform();
    double cum = 0.0;
    for (std::size_t a = 0; a + 1 < probs.size(); ++a) {
        cum += probs[a];
        if (u < cum) return static_cast<std::uint8_t>(a);
    }
    return static_cast<std::uint8_t>(probs.size() - 1);
}

}  // namespace detail

/// Draws x^n from mu_lambda; deterministic given the stream state.
inline Sequence sample_sequence(const SourceModel& model, std::size_t n, RngStream& rng) {
    Sequence out;
    out.symbols.resize(n);
    if (n == 0) return out;
    const auto marg = model.marginal();
    if (model.family().kind() == FamilyKind::bernoulli) {
        const double theta = model.param()[0];
        for (auto& s : out.symbols) s = rng.uniform() < theta ? 1 : 0;
        return out;
    }
    if (model.family().memoryless()) {
        for (auto& s : out.symbols) s = detail::draw_symbol(marg, rng);
        return out;
    }
    const double a = model.param()[0], b = model.param()[1];
    out.symbols[0] = rng.uniform() < marg[1] ? 1 : 0;
    for (std::size_t t = 1; t < n; ++t) out.symbols[t] = rng.uniform() < (out.symbols[t - 1] ? b : a) ? 1 : 0;
    return out;
}

/// Covariance rule Gamma(theta) tying the two sources' parameters.
class CorrelationSpec {
  public:
    enum class Kind { zero, scaled_inverse_fisher, explicit_matrix };
    using Evaluator = std::function<Matrix(const ParamVector&)>;

    static CorrelationSpec zero() { return CorrelationSpec(Kind::zero, 0.0, {}); }

    /// Gamma(theta) = (1 / alpha) I(theta)^{-1}.
    static CorrelationSpec scaled_inverse_fisher(double alpha) {
        if (!(alpha > 0.0) || !std::isfinite(alpha))
            throw ArgumentError("scaled-inverse-fisher requires a finite alpha > 0");
        return CorrelationSpec(Kind::scaled_inverse_fisher, alpha, {});
    }

    static CorrelationSpec explicit_matrix(Evaluator gamma) {
        if (!gamma) throw ArgumentError("explicit correlation needs an evaluator");
        return CorrelationSpec(Kind::explicit_matrix, 0.0, std::move(gamma));
    }

    static CorrelationSpec constant(Matrix gamma) {
        return explicit_matrix([g = std::move(gamma)](const ParamVector&) { return g; });
    }

    Kind kind() const { return kind_; }
    double alpha() const { return alpha_; }

    static std::string kind_name(Kind k) {
        switch (k) {
            case Kind::zero: return "zero";
            case Kind::scaled_inverse_fisher: return "scaled-inverse-fisher";
            case Kind::explicit_matrix: return "explicit";
        }
        return "?";
    }
    std::string kind_name() const { return kind_name(kind_); }

    /// Gamma(theta); validated symmetric PSD of the family dimension.
    Matrix gamma(const SourceFamily& family, const ParamVector& theta) const {
        const int d = family.dimension();
        switch (kind_) {
            case Kind::zero: return Matrix::Zero(d, d);
            case Kind::scaled_inverse_fisher:
                return fisher_information(family, theta).inverse() / alpha_;
            case Kind::explicit_matrix: {
                family.require_in_domain(theta);
                Matrix g = evaluator_(theta);
                if (g.rows() != d || g.cols() != d)
                    throw ArgumentError("explicit Gamma has shape " + std::to_string(g.rows()) + "x" +
                                        std::to_string(g.cols()) + ", expected " + std::to_string(d) + "x" +
                                        std::to_string(d));
                if (!is_psd(g)) throw ModelAssumptionError("Gamma(theta) is not symmetric PSD at " + theta.to_string());
                return g;
            }
        }
        return {};
    }

  private:
    CorrelationSpec(Kind kind, double alpha, Evaluator ev) : kind_(kind), alpha_(alpha), evaluator_(std::move(ev)) {}

    Kind kind_;
    double alpha_;
    Evaluator evaluator_;
};

/// J(theta) = Gamma(theta) I(theta). With `require_pd` the product must be
/// positive definite (its eigenvalues equal those of I^{1/2} Gamma I^{1/2}).
inline Matrix j_matrix(const ParamVector& theta, const CorrelationSpec& corr, const SourceFamily& family,
                       bool require_pd = false) {
    const Matrix fi = fisher_information(family, theta);
    const Matrix g = corr.gamma(family, theta);
    Matrix j = g * fi;
    if (require_pd) {
        Eigen::LLT<Matrix> chol(fi);
        const Matrix l = chol.matrixL();
        const Matrix sym = l.transpose() * g * l;
        if (min_eigenvalue(sym) <= kPivotTolerance)
            throw ModelAssumptionError("J(theta) is not positive definite at " + theta.to_string());
    }
    return j;
}

/// L^T Gamma L with I = L L^T: a symmetric matrix similar to J(theta), used for
/// determinants of (c I_d + n J).
inline Matrix j_symmetric(const ParamVector& theta, const CorrelationSpec& corr, const SourceFamily& family) {
    const Matrix fi = fisher_information(family, theta);
    const Matrix g = corr.gamma(family, theta);
    Eigen::LLT<Matrix> chol(fi);
    const Matrix l = chol.matrixL();
    return l.transpose() * g * l;
}

inline constexpr int kMaxRejectionAttempts = 100000;

/// phi ~ N(theta, Gamma(theta)) restricted to the cleared domain by rejection.
/// The zero spec returns theta exactly.
inline ParamVector sample_phi_given_theta(const SourceFamily& family, const ParamVector& theta,
                                          const CorrelationSpec& corr, RngStream& rng) {
    family.require_in_domain(theta);
    if (corr.kind() == CorrelationSpec::Kind::zero) return theta;
    const Matrix root = psd_sqrt(corr.gamma(family, theta));
    const Vector mean = theta.to_eigen();
    const int d = family.dimension();
    Vector z(d);
    for (int attempt = 0; attempt < kMaxRejectionAttempts; ++attempt) {
        for (int i = 0; i < d; ++i) z[i] = rng.normal();
        ParamVector phi = ParamVector::from_eigen(mean + root * z);
        if (family.contains(phi)) return phi;
    }
    throw SamplingFailure("phi|theta: Gaussian mass at " + theta.to_string() +
                          " lies almost entirely outside the cleared domain");
}

}  // namespace memcomp
