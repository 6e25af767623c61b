#pragma once

// Exhaustive checks of the entropy chain behind the almost-lossless UComp
// lower bound. A decoder D maps every source block to a reconstruction; the
// error indicator is 1_e(x) = [D(x) != x].

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "memcomp/bounds.hpp"
#include "memcomp/core.hpp"
#include "memcomp/rng.hpp"

namespace memcomp {

inline constexpr int kMaxEnumerationLength = 10;
inline constexpr std::size_t kMaxEnumerationBlocks = std::size_t{1} << 16;
inline constexpr double kChainTolerance = 1e-10;

struct ChainCheckInstance {
    int n = 0;
    int alphabet = 2;
    std::vector<double> probs;            // over all alphabet^n blocks, base-alphabet index
    std::vector<std::uint32_t> decoder;   // D(x) for every block index
    std::string label;

    std::size_t blocks() const { return probs.size(); }

    void validate() const {
        if (n < 0 || n > kMaxEnumerationLength)
            throw ArgumentError("enumeration needs n <= " + std::to_string(kMaxEnumerationLength) + " (got " +
                                std::to_string(n) + ")");
        if (alphabet < 2) throw ArgumentError("alphabet must have at least 2 symbols");
        std::size_t count = 1;
        for (int i = 0; i < n; ++i) {
            count *= static_cast<std::size_t>(alphabet);
            if (count > kMaxEnumerationBlocks) throw ArgumentError("alphabet^n exceeds the enumeration budget");
        }
        if (probs.size() != count) throw ArgumentError("source distribution must cover alphabet^n blocks");
        if (decoder.size() != count) throw ArgumentError("decoder must be a total map on alphabet^n");
        for (auto v : decoder)
            if (v >= count) throw ArgumentError("decoder maps outside alphabet^n");
        double total = 0.0;
        for (double p : probs) {
            if (!(p >= 0.0)) throw ArgumentError("negative block probability");
            total += p;
        }
        if (std::abs(total - 1.0) > 1e-9) throw ArgumentError("block probabilities must sum to 1");
    }
};

/// Every entropy of the chain, in bits, from exact enumeration.
struct ChainEntropies {
    double p_e = 0.0;
    double h_x = 0.0;
    double h_xhat = 0.0;
    double h_joint = 0.0;              // H(X, Xhat, 1_e)
    double h_e = 0.0;                  // H(1_e)
    double h_e_given_xhat = 0.0;
    double h_x_given_e_xhat = 0.0;
    double h_x_given_e0_xhat = 0.0;    // H(X | 1_e = 0, Xhat)
    double h_x_given_e1_xhat = 0.0;    // H(X | 1_e = 1, Xhat); 0 when p_e = 0
};

inline ChainEntropies chain_entropies(const ChainCheckInstance& inst) {
    inst.validate();
    ChainEntropies r;
    const std::size_t count = inst.blocks();
    std::vector<double> q(count, 0.0);
    // Per (xhat, e): the probabilities of the source blocks that land there.
    std::map<std::pair<std::uint32_t, int>, std::vector<double>> groups;
    std::map<std::tuple<std::size_t, std::uint32_t, int>, double> joint;
    for (std::size_t x = 0; x < count; ++x) {
        const double p = inst.probs[x];
        const std::uint32_t xh = inst.decoder[x];
        const int e = xh != x;
        q[xh] += p;
        if (e) r.p_e += p;
        if (p > 0.0) groups[{xh, e}].push_back(p);
        joint[{x, xh, e}] += p;
    }
    r.h_x = shannon_entropy(inst.probs);
    r.h_xhat = shannon_entropy(q);
    for (const auto& [key, p] : joint) r.h_joint += plogp(p);
    r.h_e = binary_entropy(std::clamp(r.p_e, 0.0, 1.0));

    // H(1_e | Xhat) = sum over xhat of q(xhat) h(P(e = 1 | xhat)).
    std::vector<double> err_mass(count, 0.0);
    for (const auto& [key, ps] : groups)
        if (key.second) err_mass[key.first] += std::accumulate(ps.begin(), ps.end(), 0.0);
    for (std::size_t xh = 0; xh < count; ++xh)
        if (q[xh] > 0.0) r.h_e_given_xhat += q[xh] * binary_entropy(std::clamp(err_mass[xh] / q[xh], 0.0, 1.0));

    // H(X | 1_e, Xhat), split by the value of the indicator.
    double mass[2] = {0.0, 0.0}, cond[2] = {0.0, 0.0};
    for (const auto& [key, ps] : groups) {
        const double g = std::accumulate(ps.begin(), ps.end(), 0.0);
        double h = 0.0;
        for (double p : ps) h += plogp(p / g);
        mass[key.second] += g;
        cond[key.second] += g * h;
    }
    r.h_x_given_e_xhat = cond[0] + cond[1];
    r.h_x_given_e0_xhat = mass[0] > 0.0 ? cond[0] / mass[0] : 0.0;
    r.h_x_given_e1_xhat = mass[1] > 0.0 ? cond[1] / mass[1] : 0.0;
    return r;
}

/// One checked relation: `slack` >= 0 means it holds (for equalities slack is
/// minus the absolute residual).
struct ChainCheck {
    std::string name;
    double slack = 0.0;
    bool enforced = true;
    bool holds() const { return slack >= -kChainTolerance; }
};

struct ChainVerdict {
    ChainEntropies entropies;
    std::vector<ChainCheck> checks;

    bool ok() const {
        return std::all_of(checks.begin(), checks.end(), [](const ChainCheck& c) { return !c.enforced || c.holds(); });
    }
    const ChainCheck& at(const std::string& name) const {
        for (const auto& c : checks)
            if (c.name == name) return c;
        throw ArgumentError("unknown chain check " + name);
    }
};

/// Joint-entropy identity, chain decomposition, indicator bound and the final
/// H(Xhat) lower bound. The Fano form (alphabet^n - 1 in place of H(X)) is
/// attached as an unenforced reference.
inline ChainVerdict chain_rule_check(const ChainCheckInstance& inst) {
    ChainVerdict v;
    v.entropies = chain_entropies(inst);
    const auto& e = v.entropies;
    const double chain = e.h_xhat + e.h_e_given_xhat + e.h_x_given_e_xhat;
    v.checks.push_back({"joint_identity", -std::abs(e.h_joint - e.h_x)});
    v.checks.push_back({"chain_decomposition", -std::abs(e.h_joint - chain)});
    v.checks.push_back({"indicator_bound", e.h_e - e.h_e_given_xhat});
    v.checks.push_back({"xhat_entropy_bound", e.h_xhat - (e.h_x - e.h_e - e.p_e * e.h_x)});
    const double blocks = static_cast<double>(inst.blocks());
    const double fano_term = blocks > 1.0 ? e.p_e * std::log2(blocks - 1.0) : 0.0;
    v.checks.push_back({"xhat_entropy_fano", e.h_xhat - (e.h_x - e.h_e - fano_term), false});
    return v;
}

/// The conditional-entropy lemma: the split by the indicator value, the zero
/// no-error term, the conditioning step and the resulting bound p_e H(X).
inline ChainVerdict lemma1_check(const ChainCheckInstance& inst) {
    ChainVerdict v;
    v.entropies = chain_entropies(inst);
    const auto& e = v.entropies;
    const double split = (1.0 - e.p_e) * e.h_x_given_e0_xhat + e.p_e * e.h_x_given_e1_xhat;
    v.checks.push_back({"indicator_split", -std::abs(e.h_x_given_e_xhat - split)});
    v.checks.push_back({"no_error_term_zero", -std::abs(e.h_x_given_e0_xhat)});
    v.checks.push_back({"error_branch_bound", e.h_x - e.h_x_given_e1_xhat});
    v.checks.push_back({"conditional_entropy_bound", e.p_e * e.h_x - e.h_x_given_e_xhat});
    return v;
}

// ---------------------------------------------------------------------------
// Instance construction

/// Product Bernoulli(theta) distribution over {0,1}^n; bit i of the index is
/// symbol i.
inline std::vector<double> bernoulli_block_probs(double theta, int n) {
    const std::size_t count = std::size_t{1} << n;
    std::vector<double> p(count);
    for (std::size_t x = 0; x < count; ++x) {
        const int ones = std::popcount(x);
        p[x] = std::pow(theta, ones) * std::pow(1.0 - theta, n - ones);
    }
    return p;
}

/// Decoder that maps the k least probable blocks onto the most probable one.
inline std::vector<std::uint32_t> typical_set_decoder(const std::vector<double>& probs, std::size_t k) {
    std::vector<std::uint32_t> order(probs.size());
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return probs[a] > probs[b]; });
    std::vector<std::uint32_t> dec(order.size());
    std::iota(dec.begin(), dec.end(), 0u);
    k = std::min(k, order.size() - 1);
    for (std::size_t i = 0; i < k; ++i) dec[order[order.size() - 1 - i]] = order.front();
    return dec;
}

inline std::vector<std::uint32_t> constant_decoder(const std::vector<double>& probs) {
    const auto top = static_cast<std::uint32_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
    return std::vector<std::uint32_t>(probs.size(), top);
}

inline std::vector<std::uint32_t> identity_decoder(std::size_t count) {
    std::vector<std::uint32_t> dec(count);
    std::iota(dec.begin(), dec.end(), 0u);
    return dec;
}

/// Each block keeps its own value with probability 1/2, else goes to a
/// uniformly random block.
inline std::vector<std::uint32_t> random_decoder(std::size_t count, RngStream& rng) {
    std::vector<std::uint32_t> dec = identity_decoder(count);
    for (auto& v : dec)
        if (rng.uniform() < 0.5) v = static_cast<std::uint32_t>(rng.next_u64() % count);
    return dec;
}

enum class DecoderFamily { mixed, typical, identity, constant, random };

inline std::string to_string(DecoderFamily f) {
    switch (f) {
        case DecoderFamily::mixed: return "mixed";
        case DecoderFamily::typical: return "typical";
        case DecoderFamily::identity: return "identity";
        case DecoderFamily::constant: return "constant";
        case DecoderFamily::random: return "random";
    }
    return "?";
}

struct BatteryConfig {
    int max_n = 8;
    std::size_t instances = 1000;
    DecoderFamily decoders = DecoderFamily::mixed;
    std::optional<std::size_t> max_k;  // cap on collapsed blocks; default all but one
    std::uint64_t seed = 1;
};

/// Random binary instances: n uniform on 1..max_n, theta uniform on
/// [0.01, 0.99]. The mixed family draws typical-set collapses 80% of the time,
/// random maps 10%, constant and identity decoders 5% each.
inline std::vector<ChainCheckInstance> make_battery(const BatteryConfig& cfg) {
    if (cfg.max_n < 1 || cfg.max_n > kMaxEnumerationLength)
        throw ArgumentError("validation needs 1 <= n <= " + std::to_string(kMaxEnumerationLength) +
                            " for exhaustive enumeration (got n=" + std::to_string(cfg.max_n) + ")");
    std::vector<ChainCheckInstance> out;
    out.reserve(cfg.instances);
    for (std::size_t i = 0; i < cfg.instances; ++i) {
        RngStream rng = RngStream::derive(cfg.seed, i);
        ChainCheckInstance inst;
        inst.n = 1 + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(cfg.max_n));
        const double theta = rng.uniform(0.01, 0.99);
        inst.probs = bernoulli_block_probs(theta, inst.n);
        const std::size_t count = inst.probs.size();

        DecoderFamily kind = cfg.decoders;
        if (kind == DecoderFamily::mixed) {
            const double u = rng.uniform();
            kind = u < 0.8 ? DecoderFamily::typical
                   : u < 0.9 ? DecoderFamily::random
                   : u < 0.95 ? DecoderFamily::constant
                              : DecoderFamily::identity;
        }
        std::string label = "n=" + std::to_string(inst.n) + " theta=" + format_number(theta) + " decoder=" + to_string(kind);
        switch (kind) {
            case DecoderFamily::typical: {
                const std::size_t cap = std::min(cfg.max_k.value_or(count - 1), count - 1);
                const std::size_t k = rng.next_u64() % (cap + 1);
                inst.decoder = typical_set_decoder(inst.probs, k);
                label += " k=" + std::to_string(k);
                break;
            }
            case DecoderFamily::random: inst.decoder = random_decoder(count, rng); break;
            case DecoderFamily::constant: inst.decoder = constant_decoder(inst.probs); break;
            case DecoderFamily::identity:
            case DecoderFamily::mixed: inst.decoder = identity_decoder(count); break;
        }
        inst.label = std::move(label);
        out.push_back(std::move(inst));
    }
    return out;
}

/// Per-check tally over a battery.
struct CheckSummary {
    std::string check;
    bool enforced = true;
    std::size_t instances = 0;
    std::size_t violations = 0;
    double min_slack = 0.0;
    std::string worst_instance;
};

struct BatteryResult {
    std::vector<CheckSummary> summaries;
    std::size_t instances = 0;

    std::size_t enforced_violations() const {
        std::size_t v = 0;
        for (const auto& s : summaries)
            if (s.enforced) v += s.violations;
        return v;
    }
};

inline BatteryResult run_battery(const std::vector<ChainCheckInstance>& battery) {
    BatteryResult res;
    res.instances = battery.size();
    std::map<std::string, std::size_t> index;
    auto record = [&](const ChainVerdict& v, const std::string& label) {
        for (const auto& c : v.checks) {
            auto it = index.find(c.name);
            if (it == index.end()) {
                it = index.emplace(c.name, res.summaries.size()).first;
                res.summaries.push_back({c.name, c.enforced, 0, 0, c.slack, label});
            }
            auto& s = res.summaries[it->second];
            ++s.instances;
            if (!c.holds()) ++s.violations;
            if (c.slack < s.min_slack) {
                s.min_slack = c.slack;
                s.worst_instance = label;
            }
        }
    };
    for (const auto& inst : battery) {
        record(chain_rule_check(inst), inst.label);
        record(lemma1_check(inst), inst.label);
    }
    return res;
}

}  // namespace memcomp
