// memcomp: bound evaluation, coder experiments, entropy-chain validation and the
// relay scenario from the command line.
//
// Exit codes: 0 success, 1 a tolerance or inequality check failed, 2 usage or
// config error.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "memcomp/entropy_chain.hpp"
#include "memcomp/bounds.hpp"
#include "memcomp/config.hpp"
#include "memcomp/experiment.hpp"
#include "memcomp/relay.hpp"
#include "memcomp/report_io.hpp"

namespace {

using namespace memcomp;

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;

struct GlobalOptions {
    std::optional<std::uint64_t> seed;
    int jobs = 1;
    std::string out;
    std::string format = "csv";
    bool quiet = false;
};

struct BoundsOptions {
    std::string family = "bernoulli";
    std::optional<int> k;
    double eps = kDefaultClearance;
    std::uint64_t n = 1000;
    std::uint64_t m = 1000;
    std::string corr = "zero";
    std::optional<double> alpha;
    std::vector<double> gamma;
    double pe = 0.0;
    std::vector<double> phi;
    std::string strategy = "all";
};

struct ValidateOptions {
    int n = 8;
    std::size_t instances = 1000;
    std::string decoder = "mixed";
    std::optional<std::size_t> max_k;
};

class UsageError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

int resolve_jobs(int jobs) {
    if (jobs > 0) return jobs;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? static_cast<int>(hw) : 1;
}

std::uint64_t resolve_seed(const GlobalOptions& g, std::optional<std::uint64_t> from_config) {
    if (g.seed) return *g.seed;
    if (from_config) return *from_config;
    std::random_device rd;
    const std::uint64_t s = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    std::cerr << "memcomp: no seed given; using --seed " << s << "\n";
    return s;
}

void emit(const GlobalOptions& g, const Table& table, const RunMeta& meta) {
    const std::string text = render(table, g.format == "json" ? Format::json : Format::csv, meta);
    if (g.out.empty())
        std::cout << text;
    else
        write_text(g.out, text);
}

SourceFamily family_from(const BoundsOptions& o) {
    if (o.k && o.family != "categorical") throw UsageError("--k is only valid with --family categorical");
    if (o.family == "bernoulli") return SourceFamily::bernoulli(o.eps);
    if (o.family == "categorical") return SourceFamily::categorical(o.k.value_or(3), o.eps);
    if (o.family == "markov") return SourceFamily::binary_markov(o.eps);
    throw UsageError("--family must be bernoulli, categorical or markov (got " + o.family + ")");
}

CorrelationSpec corr_from(const BoundsOptions& o, const SourceFamily& fam) {
    if (o.alpha && o.corr != "scaled-inverse-fisher")
        throw UsageError("--alpha is only valid with --corr scaled-inverse-fisher");
    if (!o.gamma.empty() && o.corr != "explicit") throw UsageError("--gamma is only valid with --corr explicit");
    if (o.corr == "zero") return CorrelationSpec::zero();
    if (o.corr == "scaled-inverse-fisher") {
        if (!o.alpha) throw UsageError("--alpha is required with --corr scaled-inverse-fisher");
        if (!(*o.alpha > 0.0)) throw UsageError("--alpha must be > 0");
        return CorrelationSpec::scaled_inverse_fisher(*o.alpha);
    }
    if (o.corr == "explicit") {
        const int d = fam.dimension();
        if (static_cast<int>(o.gamma.size()) != d * d)
            throw UsageError("--gamma needs " + std::to_string(d * d) + " values (row-major d x d)");
        Matrix g(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) g(i, j) = o.gamma[i * d + j];
        if (!is_symmetric(g) || !is_psd(g)) throw UsageError("--gamma must be symmetric positive semidefinite");
        return CorrelationSpec::constant(g);
    }
    throw UsageError("--corr must be zero, scaled-inverse-fisher or explicit (got " + o.corr + ")");
}

int cmd_bounds(const GlobalOptions& g, const BoundsOptions& o) {
    const SourceFamily fam = family_from(o);
    const CorrelationSpec corr = corr_from(o, fam);
    if (o.n < 1) throw UsageError("--n must be >= 1");
    if (!(o.pe >= 0.0 && o.pe <= 1.0)) throw UsageError("--pe must lie in [0, 1]");

    RedundancyQuery q;
    q.n = o.n;
    q.m = o.m;
    q.p_e = o.pe;
    q.family = fam;
    q.corr = corr;
    if (!o.phi.empty()) {
        const ParamVector phi(o.phi);
        if (static_cast<int>(phi.size()) != fam.dimension() || !fam.contains(phi))
            throw UsageError("--phi " + phi.to_string() + " is not a point of the cleared " + fam.name() + " domain");
        q.eval_phi = phi;
    } else {
        q.eval_phi = fam.center();
    }

    const std::vector<std::string> known = {"ucomp",        "ducompmd",        "ducompme",
                                            "ucomp-almost", "ducompmd-almost", "ducompme-almost"};
    std::vector<std::string> wanted;
    if (o.strategy == "all") {
        wanted = {"ucomp", "ducompmd"};
        if (o.m >= 1) wanted.push_back("ducompme");
        if (o.pe > 0.0) {
            wanted.push_back("ucomp-almost");
            if (o.m >= 1) {
                wanted.push_back("ducompmd-almost");
                wanted.push_back("ducompme-almost");
            }
        }
    } else if (std::find(known.begin(), known.end(), o.strategy) != known.end()) {
        wanted = {o.strategy};
    } else {
        throw UsageError("--strategy must be one of ucomp, ducompmd, ducompme, ucomp-almost, ducompmd-almost, "
                         "ducompme-almost, all (got " + o.strategy + ")");
    }
    const bool needs_memory = o.strategy == "ducompme" || o.strategy == "ducompmd-almost" || o.strategy == "ducompme-almost";
    if (needs_memory && o.m < 1) throw UsageError("--m must be >= 1 for --strategy " + o.strategy);

    std::vector<BoundResult> rows;
    for (const auto& s : wanted) {
        if (s == "ucomp") rows.push_back(ucomp_lossless(q.n, fam));
        if (s == "ducompmd") rows.push_back(ducompmd_lossless(q.n, q.m, corr, fam));
        if (s == "ducompme") rows.push_back(ducompme_lossless(q.n, q.m, corr, fam));
        if (s == "ucomp-almost") rows.push_back(ucomp_almost_lossless_lb(q));
        if (s == "ducompmd-almost") rows.push_back(ducompmd_almost_lossless_ub(q));
        if (s == "ducompme-almost") rows.push_back(ducompme_almost_lossless_lb(q));
    }
    for (auto& r : rows) r.m = q.m;
    if (!g.quiet)
        for (const auto& r : rows)
            if (r.small_n_warning)
                std::cerr << "memcomp: warning: n=" << r.n << " is below " << kAsymptoticMinN
                          << "; dropped residual terms may dominate\n";
    RunMeta meta{"bounds", std::nullopt, utc_timestamp(), {}};
    emit(g, bounds_table(rows), meta);
    return kExitOk;
}

ConfigFile load_with_overrides(const std::string& path, const std::vector<std::string>& sets) {
    ConfigFile file = load_config(path);
    apply_overrides(file, sets);
    return file;
}

int cmd_experiment(const GlobalOptions& g, const std::string& path, const std::vector<std::string>& sets) {
    ConfigFile file = load_with_overrides(path, sets);
    ExperimentConfig cfg = experiment_from_config(file);
    cfg.seed = resolve_seed(g, file.entries.count("seed") ? std::optional<std::uint64_t>(cfg.seed) : std::nullopt);
    const auto reports = run_redundancy_experiment(cfg, resolve_jobs(g.jobs));
    RunMeta meta{"experiment " + path, cfg.seed, utc_timestamp(),
                 {"redundancy per trial is L(x) + log2 mu_phi(x); its mean estimates E L - H_n(phi)",
                  "phi_policy=" + to_string(cfg.policy) +
                      (cfg.policy == PhiPolicy::fixed ? " probes one theta, not the minimax supremum" : "")}};
    emit(g, experiment_table(reports), meta);
    std::size_t failed = 0, checked = 0;
    for (const auto& r : reports) {
        if (r.pass) ++checked;
        if (r.pass && !*r.pass) ++failed;
    }
    if (!g.quiet) std::cerr << "memcomp: " << reports.size() << " cells, " << checked << " checked, " << failed << " failed\n";
    return failed ? kExitCheckFailed : kExitOk;
}

int cmd_scenario(const GlobalOptions& g, const std::string& path, const std::vector<std::string>& sets) {
    ConfigFile file = load_with_overrides(path, sets);
    auto configs = scenarios_from_config(file);
    const std::uint64_t seed =
        resolve_seed(g, file.entries.count("seed") ? std::optional<std::uint64_t>(configs.front().seed) : std::nullopt);
    for (auto& c : configs) c.seed = seed;
    const auto reports = sweep_scenario(configs, resolve_jobs(g.jobs));
    RunMeta meta{"scenario " + path, seed, utc_timestamp(),
                 {"gain_total = 1 - mean S2->M bits / mean UComp S2->M bits",
                  "gain_redundancy uses the same ratio on L(x) + log2 mu_phi(x)"}};
    emit(g, scenario_table(reports), meta);

    std::size_t problems = 0;
    for (const auto& rep : reports) {
        if (rep.error) {
            ++problems;
            if (!g.quiet) std::cerr << "memcomp: scenario n=" << rep.config.n << " m=" << rep.config.m << ": " << *rep.error << "\n";
            continue;
        }
        // Memory must not cost more than UComp beyond Monte Carlo noise.
        for (const auto& row : rep.rows) {
            if (row.link != Link::s2_m || !row.gain_total || rep.config.m == 0) continue;
            if (*row.gain_total < -3.0 * row.gain_stderr.value_or(0.0)) {
                ++problems;
                if (!g.quiet)
                    std::cerr << "memcomp: negative gain for " << to_string(row.strategy) << " at n=" << rep.config.n
                              << " m=" << rep.config.m << "\n";
            }
        }
    }
    return problems ? kExitCheckFailed : kExitOk;
}

int cmd_validate(const GlobalOptions& g, const ValidateOptions& o) {
    if (o.n < 1 || o.n > kMaxEnumerationLength)
        throw UsageError("--n " + std::to_string(o.n) + " exceeds the exhaustive enumeration bound (1 <= n <= " +
                         std::to_string(kMaxEnumerationLength) + ")");
    BatteryConfig bc;
    bc.max_n = o.n;
    bc.instances = o.instances;
    bc.max_k = o.max_k;
    const std::vector<std::pair<std::string, DecoderFamily>> kinds = {{"mixed", DecoderFamily::mixed},
                                                                      {"typical", DecoderFamily::typical},
                                                                      {"identity", DecoderFamily::identity},
                                                                      {"constant", DecoderFamily::constant},
                                                                      {"random", DecoderFamily::random}};
    bool found = false;
    for (const auto& [name, kind] : kinds)
        if (name == o.decoder) {
            bc.decoders = kind;
            found = true;
        }
    if (!found) throw UsageError("--decoder must be mixed, typical, identity, constant or random (got " + o.decoder + ")");
    if (o.instances < 1) throw UsageError("--instances must be >= 1");
    bc.seed = resolve_seed(g, std::nullopt);

    const BatteryResult res = run_battery(make_battery(bc));
    RunMeta meta{"validate", bc.seed, utc_timestamp(),
                 {"slack >= 0 means the relation holds; equalities report minus the absolute residual",
                  "xhat_entropy_fano is a reference bound and is not enforced"}};
    emit(g, battery_table(res), meta);
    const std::size_t v = res.enforced_violations();
    if (!g.quiet) {
        std::cerr << "memcomp: " << res.instances << " instances, " << v << " enforced violations\n";
        for (const auto& s : res.summaries)
            if (s.enforced && s.violations)
                std::cerr << "  " << s.check << ": " << s.violations << " violations, worst slack "
                          << format_number(s.min_slack) << " at " << s.worst_instance << "\n";
    }
    return v ? kExitCheckFailed : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"memcomp: memory-assisted universal compression laboratory"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(MEMCOMP_VERSION));

    GlobalOptions g;
    app.add_option("--seed", g.seed, "master seed; generated and printed when absent");
    app.add_option("--jobs", g.jobs, "worker threads (0 = all cores); output does not depend on it");
    app.add_option("--out", g.out, "output file (default stdout)");
    app.add_option("--format", g.format, "output format")->check(CLI::IsMember({"csv", "json"}));
    app.add_flag("--quiet", g.quiet, "suppress progress and warnings on stderr");
    app.fallthrough();

    BoundsOptions bo;
    auto* bounds = app.add_subcommand("bounds", "evaluate redundancy bounds in closed form");
    bounds->add_option("--family", bo.family, "bernoulli | categorical | markov");
    bounds->add_option("--k", bo.k, "categorical alphabet size");
    bounds->add_option("--eps", bo.eps, "domain clearance");
    bounds->add_option("--n", bo.n, "length of x");
    bounds->add_option("--m", bo.m, "memory length");
    bounds->add_option("--corr", bo.corr, "zero | scaled-inverse-fisher | explicit");
    bounds->add_option("--alpha", bo.alpha, "scaled-inverse-fisher strength");
    bounds->add_option("--gamma", bo.gamma, "explicit constant covariance, row-major")->delimiter(',');
    bounds->add_option("--pe", bo.pe, "permissible error probability");
    bounds->add_option("--phi", bo.phi, "parameter for H_n(phi) in the almost-lossless bounds")->delimiter(',');
    bounds->add_option("--strategy", bo.strategy,
                       "ucomp | ducompmd | ducompme | ucomp-almost | ducompmd-almost | ducompme-almost | all");

    std::string exp_path, scen_path;
    std::vector<std::string> exp_sets, scen_sets;
    auto* experiment = app.add_subcommand("experiment", "Monte Carlo coder redundancy against the bounds");
    experiment->add_option("config", exp_path, "experiment config file")->required();
    experiment->add_option("--set", exp_sets, "override a config key (key=value), repeatable");

    ValidateOptions vo;
    auto* validate = app.add_subcommand("validate", "exhaustive check of the almost-lossless entropy chain");
    validate->add_option("--n", vo.n, "largest block length (<= 10)");
    validate->add_option("--instances", vo.instances, "number of random instances");
    validate->add_option("--decoder", vo.decoder, "mixed | typical | identity | constant | random");
    validate->add_option("--max-k", vo.max_k, "cap on collapsed blocks for typical-set decoders");

    auto* scenario = app.add_subcommand("scenario", "two-source relay traffic simulation");
    scenario->add_option("config", scen_path, "scenario config file")->required();
    scenario->add_option("--set", scen_sets, "override a config key (key=value), repeatable");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*bounds) return cmd_bounds(g, bo);
        if (*experiment) return cmd_experiment(g, exp_path, exp_sets);
        if (*validate) return cmd_validate(g, vo);
        if (*scenario) return cmd_scenario(g, scen_path, scen_sets);
    } catch (const InfinitePenalty& e) {
        std::cerr << "memcomp: error: --pe: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        // Bad flags, invalid configs, unwritable output paths and samplers
        // that cannot honor the configured model all land here.
        std::cerr << "memcomp: error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
