#pragma once

// Flat `key = value` config files. Lists are written `[a, b, c]`, `#` starts a
// comment, and every key may appear once. Unknown keys and bad values are
// collected and reported together.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "memcomp/bounds.hpp"
#include "memcomp/core.hpp"
#include "memcomp/experiment.hpp"
#include "memcomp/relay.hpp"
#include "memcomp/source_models.hpp"

namespace memcomp {

/// Config validation failure; what() lists every problem on its own line.
class ConfigError : public ArgumentError {
  public:
    explicit ConfigError(std::vector<std::string> problems)
        : ArgumentError(join(problems)), problems_(std::move(problems)) {}
    const std::vector<std::string>& problems() const { return problems_; }

  private:
    static std::string join(const std::vector<std::string>& p) {
        std::string s = "invalid config:";
        for (const auto& x : p) s += "\n  " + x;
        return s;
    }
    std::vector<std::string> problems_;
};

struct ConfigEntry {
    std::vector<std::string> items;  // one item for a scalar
    bool is_list = false;
    int line = 0;
    std::string origin;  // file name, or "--set" for overrides
};

struct ConfigFile {
    std::string source;
    std::map<std::string, ConfigEntry> entries;
};

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline std::string unquote(std::string s) {
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
    return s;
}

}  // namespace detail

inline ConfigFile parse_config_text(const std::string& text, const std::string& source = "<config>") {
    ConfigFile cfg;
    cfg.source = source;
    std::vector<std::string> problems;
    std::istringstream in(text);
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        const std::string where = source + ":" + std::to_string(lineno);
        std::string line = raw;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            problems.push_back(where + ": expected `key = value`");
            continue;
        }
        const std::string key = detail::trim(std::string_view(line).substr(0, eq));
        const std::string value = detail::trim(std::string_view(line).substr(eq + 1));
        if (key.empty()) {
            problems.push_back(where + ": missing key");
            continue;
        }
        if (cfg.entries.count(key)) {
            problems.push_back(where + ": duplicate key `" + key + "` (first set on line " +
                               std::to_string(cfg.entries[key].line) + ")");
            continue;
        }
        ConfigEntry entry;
        entry.line = lineno;
        entry.origin = source;
        if (!value.empty() && value.front() == '[') {
            if (value.back() != ']') {
                problems.push_back(where + ": list for `" + key + "` is missing its closing `]`");
                continue;
            }
            entry.is_list = true;
            const std::string body = value.substr(1, value.size() - 2);
            if (!detail::trim(body).empty()) {
                std::istringstream items(body);
                std::string item;
                while (std::getline(items, item, ',')) entry.items.push_back(detail::unquote(detail::trim(item)));
            }
        } else {
            if (value.empty()) {
                problems.push_back(where + ": `" + key + "` has no value");
                continue;
            }
            entry.items.push_back(detail::unquote(value));
        }
        cfg.entries.emplace(key, std::move(entry));
    }
    if (!problems.empty()) throw ConfigError(std::move(problems));
    return cfg;
}

inline ConfigFile load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError({path + ": cannot open config file"});
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config_text(ss.str(), path);
}

/// Applies `key=value` overrides (command-line --set) on top of a file.
inline void apply_overrides(ConfigFile& cfg, const std::vector<std::string>& overrides) {
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) throw ConfigError({"--set " + o + ": expected key=value"});
        ConfigFile one = parse_config_text(o, "--set");
        for (auto& [k, v] : one.entries) {
            cfg.entries[k] = v;
            cfg.entries[k].line = 0;
        }
    }
}

/// Typed reads from a ConfigFile. Problems accumulate instead of throwing.
class ConfigReader {
  public:
    explicit ConfigReader(const ConfigFile& file) : file_(file) {}

    std::vector<std::string>& problems() { return problems_; }
    bool has(const std::string& key) const { return file_.entries.count(key) > 0; }

    void check_known(const std::vector<std::string>& known) {
        for (const auto& [k, e] : file_.entries)
            if (std::find(known.begin(), known.end(), k) == known.end())
                problems_.push_back(where(k) + ": unknown key `" + k + "`");
    }

    std::optional<std::string> str(const std::string& key) {
        const auto* e = scalar(key);
        return e ? std::optional<std::string>(e->items.front()) : std::nullopt;
    }

    std::optional<double> real(const std::string& key) {
        const auto* e = scalar(key);
        if (!e) return std::nullopt;
        return to_real(key, e->items.front());
    }

    std::optional<std::uint64_t> count(const std::string& key) {
        const auto* e = scalar(key);
        if (!e) return std::nullopt;
        return to_count(key, e->items.front());
    }

    std::optional<bool> boolean(const std::string& key) {
        const auto* e = scalar(key);
        if (!e) return std::nullopt;
        const std::string& v = e->items.front();
        if (v == "true" || v == "1" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "no") return false;
        problems_.push_back(where(key) + ": `" + key + "` expects true or false, got `" + v + "`");
        return std::nullopt;
    }

    /// Scalars are accepted as one-element lists.
    std::optional<std::vector<std::string>> strings(const std::string& key) {
        auto it = file_.entries.find(key);
        if (it == file_.entries.end()) return std::nullopt;
        return it->second.items;
    }

    std::optional<std::vector<double>> reals(const std::string& key) {
        auto items = strings(key);
        if (!items) return std::nullopt;
        std::vector<double> out;
        for (const auto& s : *items)
            if (auto v = to_real(key, s)) out.push_back(*v);
        return out;
    }

    std::optional<std::vector<std::uint64_t>> counts(const std::string& key) {
        auto items = strings(key);
        if (!items) return std::nullopt;
        std::vector<std::uint64_t> out;
        for (const auto& s : *items)
            if (auto v = to_count(key, s)) out.push_back(*v);
        return out;
    }

  private:
    std::string where(const std::string& key) const {
        auto it = file_.entries.find(key);
        if (it == file_.entries.end()) return file_.source;
        const auto& e = it->second;
        return e.line > 0 ? e.origin + ":" + std::to_string(e.line) : e.origin;
    }

    const ConfigEntry* scalar(const std::string& key) {
        auto it = file_.entries.find(key);
        if (it == file_.entries.end()) return nullptr;
        if (it->second.is_list || it->second.items.size() != 1) {
            problems_.push_back(where(key) + ": `" + key + "` expects a single value, not a list");
            return nullptr;
        }
        return &it->second;
    }

    std::optional<double> to_real(const std::string& key, const std::string& s) {
        double v = 0.0;
        const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v)) {
            problems_.push_back(where(key) + ": `" + key + "` expects a number, got `" + s + "`");
            return std::nullopt;
        }
        return v;
    }

    std::optional<std::uint64_t> to_count(const std::string& key, const std::string& s) {
        std::uint64_t v = 0;
        const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec == std::errc() && p == s.data() + s.size()) return v;
        // Also accept integral floating forms such as 1e6.
        double d = 0.0;
        const auto [q, ec2] = std::from_chars(s.data(), s.data() + s.size(), d);
        if (ec2 == std::errc() && q == s.data() + s.size() && d >= 0.0 && d <= 9.0e18 && std::floor(d) == d)
            return static_cast<std::uint64_t>(d);
        problems_.push_back(where(key) + ": `" + key + "` expects a nonnegative integer, got `" + s + "`");
        return std::nullopt;
    }

    const ConfigFile& file_;
    std::vector<std::string> problems_;
};

// ---------------------------------------------------------------------------
// Schema

struct SchemaKey {
    const char* key;
    const char* type;
    const char* meaning;
};

inline const std::vector<SchemaKey>& common_schema() {
    static const std::vector<SchemaKey> keys = {
        {"family", "bernoulli | categorical | markov", "source family (default bernoulli)"},
        {"k", "integer 2..17", "alphabet size for categorical (default 3)"},
        {"eps", "real in (0, 1/k)", "domain clearance (default 1e-3)"},
        {"corr", "zero | scaled-inverse-fisher | explicit", "parameter correlation model (default zero)"},
        {"alpha", "list of reals > 0", "scaled-inverse-fisher strengths, swept"},
        {"gamma", "list of d*d reals", "constant covariance for explicit correlation, row-major"},
        {"n", "list of integers", "lengths of x, swept"},
        {"m", "list of integers", "memory lengths, swept"},
        {"trials", "integer", "Monte Carlo trials per cell"},
        {"seed", "integer", "master seed (the --seed flag overrides it)"},
        {"phi_policy", "fixed | jeffreys", "theta held at `theta`, or drawn from the Jeffreys prior"},
        {"theta", "list of d reals", "fixed theta (default: domain center)"},
        {"quadrature_nodes", "integer >= 2", "nodes per axis of the joint mixture coder (default 256)"},
    };
    return keys;
}

inline const std::vector<SchemaKey>& experiment_schema() {
    static const std::vector<SchemaKey> keys = [] {
        auto k = common_schema();
        k.push_back({"p_e", "list of reals in [0, 1]", "error probabilities for the almost-lossless bounds"});
        k.push_back({"strategies", "list of ucomp | ducompmd | ducompme", "coding strategies per cell"});
        k.push_back({"check", "bool", "apply the tolerance rule to every cell (default true)"});
        return k;
    }();
    return keys;
}

inline const std::vector<SchemaKey>& scenario_schema() {
    static const std::vector<SchemaKey> keys = [] {
        auto k = common_schema();
        k.push_back({"strategies", "list of ucomp | ducompme-identical | ducompme-quadrature", "relay strategies"});
        return k;
    }();
    return keys;
}

namespace detail {

inline std::vector<std::string> schema_names(const std::vector<SchemaKey>& schema) {
    std::vector<std::string> names;
    for (const auto& k : schema) names.emplace_back(k.key);
    return names;
}

struct CommonFields {
    SourceFamily family = SourceFamily::bernoulli();
    CorrelationSpec::Kind corr = CorrelationSpec::Kind::zero;
    std::vector<double> alphas;
    std::optional<Matrix> gamma;
    std::optional<std::vector<std::uint64_t>> ns, ms;
    std::optional<std::size_t> trials;
    std::optional<std::uint64_t> seed;
    PhiPolicy policy = PhiPolicy::fixed;
    std::optional<ParamVector> theta;
    std::optional<int> nodes;
};

inline CommonFields read_common(ConfigReader& r, PhiPolicy default_policy) {
    CommonFields c;
    c.policy = default_policy;
    const std::string family = r.str("family").value_or("bernoulli");
    const double eps = r.real("eps").value_or(kDefaultClearance);
    const auto k = r.count("k");
    try {
        if (family == "bernoulli") {
            c.family = SourceFamily::bernoulli(eps);
        } else if (family == "categorical") {
            c.family = SourceFamily::categorical(static_cast<int>(k.value_or(3)), eps);
        } else if (family == "markov") {
            c.family = SourceFamily::binary_markov(eps);
        } else {
            r.problems().push_back("family: unknown family `" + family + "` (bernoulli, categorical, markov)");
        }
        if (c.family.domain_width() <= 0.0)
            r.problems().push_back("eps: clearance " + format_number(eps) + " leaves an empty domain");
    } catch (const Error& e) {
        r.problems().push_back(std::string("family: ") + e.what());
    }
    if (k && family != "categorical") r.problems().push_back("k: only meaningful for family = categorical");

    const std::string corr = r.str("corr").value_or("zero");
    if (corr == "zero") {
        c.corr = CorrelationSpec::Kind::zero;
    } else if (corr == "scaled-inverse-fisher") {
        c.corr = CorrelationSpec::Kind::scaled_inverse_fisher;
    } else if (corr == "explicit") {
        c.corr = CorrelationSpec::Kind::explicit_matrix;
    } else {
        r.problems().push_back("corr: unknown correlation `" + corr + "` (zero, scaled-inverse-fisher, explicit)");
    }
    if (auto a = r.reals("alpha")) c.alphas = *a;
    if (r.has("alpha") && c.corr != CorrelationSpec::Kind::scaled_inverse_fisher)
        r.problems().push_back("alpha: only meaningful for corr = scaled-inverse-fisher");
    if (auto g = r.reals("gamma")) {
        const int d = c.family.dimension();
        if (static_cast<int>(g->size()) != d * d) {
            r.problems().push_back("gamma: expected " + std::to_string(d * d) + " entries for d=" + std::to_string(d));
        } else {
            Matrix m(d, d);
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) m(i, j) = (*g)[i * d + j];
            c.gamma = m;
        }
    }
    c.ns = r.counts("n");
    c.ms = r.counts("m");
    if (auto t = r.count("trials")) c.trials = *t;
    c.seed = r.count("seed");
    if (auto p = r.str("phi_policy")) {
        if (*p == "fixed")
            c.policy = PhiPolicy::fixed;
        else if (*p == "jeffreys")
            c.policy = PhiPolicy::jeffreys;
        else
            r.problems().push_back("phi_policy: expected fixed or jeffreys, got `" + *p + "`");
    }
    if (auto th = r.reals("theta")) c.theta = ParamVector(*th);
    if (auto q = r.count("quadrature_nodes")) c.nodes = static_cast<int>(std::min<std::uint64_t>(*q, 1 << 14));
    return c;
}

}  // namespace detail

inline std::optional<Strategy> parse_strategy(const std::string& s) {
    if (s == "ucomp") return Strategy::ucomp;
    if (s == "ducompmd") return Strategy::ducompmd;
    if (s == "ducompme") return Strategy::ducompme;
    return std::nullopt;
}

/// Builds and validates an experiment config; throws ConfigError listing
/// every problem found.
inline ExperimentConfig experiment_from_config(const ConfigFile& file) {
    ConfigReader r(file);
    r.check_known(detail::schema_names(experiment_schema()));
    auto c = detail::read_common(r, PhiPolicy::fixed);
    ExperimentConfig cfg;
    cfg.family = c.family;
    cfg.corr_kind = c.corr;
    cfg.alphas = c.alphas;
    cfg.gamma = c.gamma;
    if (c.ns) cfg.ns = *c.ns;
    if (c.ms) cfg.ms = *c.ms;
    if (c.trials) cfg.trials = *c.trials;
    if (c.seed) cfg.seed = *c.seed;
    cfg.policy = c.policy;
    cfg.theta = c.theta;
    if (c.nodes) cfg.quadrature_nodes = *c.nodes;
    if (auto p = r.reals("p_e")) cfg.pes = *p;
    if (auto s = r.strings("strategies")) {
        cfg.strategies.clear();
        for (const auto& name : *s) {
            if (auto st = parse_strategy(name))
                cfg.strategies.push_back(*st);
            else
                r.problems().push_back("strategies: unknown strategy `" + name + "` (ucomp, ducompmd, ducompme)");
        }
    }
    if (auto ch = r.boolean("check")) cfg.check = *ch;
    if (r.problems().empty())
        for (auto& p : cfg.problems()) r.problems().push_back(std::move(p));
    if (!r.problems().empty()) throw ConfigError(r.problems());
    return cfg;
}

/// Expands a scenario file into one ScenarioConfig per (alpha, n, m) cell.
inline std::vector<ScenarioConfig> scenarios_from_config(const ConfigFile& file) {
    ConfigReader r(file);
    r.check_known(detail::schema_names(scenario_schema()));
    auto c = detail::read_common(r, PhiPolicy::jeffreys);
    ScenarioConfig base;
    base.family = c.family;
    base.corr_kind = c.corr;
    base.gamma = c.gamma;
    if (c.trials) base.trials = *c.trials;
    if (c.seed) base.seed = *c.seed;
    base.policy = c.policy;
    base.theta = c.theta;
    if (c.nodes) base.quadrature_nodes = *c.nodes;
    if (auto s = r.strings("strategies")) {
        base.strategies.clear();
        for (const auto& name : *s) {
            if (auto st = parse_relay_strategy(name))
                base.strategies.push_back(*st);
            else
                r.problems().push_back("strategies: unknown strategy `" + name +
                                       "` (ucomp, ducompme-identical, ducompme-quadrature)");
        }
    }
    const std::vector<std::uint64_t> ns = c.ns.value_or(std::vector<std::uint64_t>{base.n});
    const std::vector<std::uint64_t> ms = c.ms.value_or(std::vector<std::uint64_t>{base.m});
    if (ns.empty()) r.problems().push_back("n: sweep list is empty");
    if (ms.empty()) r.problems().push_back("m: sweep list is empty");
    std::vector<std::optional<double>> alphas;
    if (c.corr == CorrelationSpec::Kind::scaled_inverse_fisher) {
        if (c.alphas.empty()) r.problems().push_back("alpha: scaled-inverse-fisher correlation needs a nonempty alpha list");
        for (double a : c.alphas) alphas.emplace_back(a);
    } else {
        alphas.emplace_back(std::nullopt);
    }
    std::vector<ScenarioConfig> out;
    for (const auto& a : alphas)
        for (auto n : ns)
            for (auto m : ms) {
                ScenarioConfig s = base;
                s.alpha = a;
                s.n = n;
                s.m = m;
                out.push_back(std::move(s));
            }
    if (r.problems().empty())
        for (const auto& s : out)
            for (auto& p : s.problems()) r.problems().push_back(std::move(p));
    if (!r.problems().empty()) throw ConfigError(r.problems());
    return out;
}

}  // namespace memcomp
