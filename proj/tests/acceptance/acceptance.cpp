// Acceptance checks, one PASS/FAIL line per criterion. Tolerances are fixed
// here; nothing is read from the environment except --only and --seeds.

#include "../oracles/oracles.hpp"

#include <morphosys/errors.hpp>
#include <morphosys/placement.hpp>
#include <morphosys/repack.hpp>
#include <morphosys/schedulability.hpp>
#include <morphosys/sim.hpp>
#include <morphosys/transform.hpp>
#include <morphosys/workload.hpp>

#include <CLI11.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace morphosys;

namespace {

// --- pinned tolerances -------------------------------------------------------
constexpr double kLlTwo = 0.8284271247;
constexpr double kLlTolerance = 1e-9;
constexpr double kBfBand = 0.05;
constexpr double kNrCeiling = 0.25;
constexpr double kSigmaShare = 0.80;
constexpr double kAdmitBudgetMs = 50.0;
constexpr std::size_t kScaleHosts = 4000;
constexpr int kScaleRequests = 1000;
constexpr std::uint64_t kSimNodeBudget = 2000;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

// ---------------------------------------------------------------------------
// 1: subtype_ct against brute-force containment

Outcome subtyping_exhaustive() {
    const auto t0 = Clock::now();
    int pairs = 0, agree = 0, raw = 0;
    std::string first_bad;
    for (Slots t = 1; t <= 6; ++t)
        for (Slots c = 1; c <= t; ++c)
            for (Slots t2 = 1; t2 <= 6; ++t2)
                for (Slots c2 = 1; c2 <= t2; ++c2) {
                    const SlaType next{c, t}, orig{c2, t2};
                    ++pairs;
                    // every 2^L window when L is small; tight schedules otherwise
                    bool truth;
                    if (std::lcm(t, t2) <= 20) {
                        truth = oracle::contained_raw(next, orig);
                        ++raw;
                    } else {
                        truth = oracle::contained(next, orig);
                    }
                    if (subtype_ct(next, orig).holds == truth) {
                        ++agree;
                    } else if (first_bad.empty()) {
                        first_bad = fmt::format(" first mismatch ({},{}) vs ({},{})", c, t, c2, t2);
                    }
                }
    const double secs = seconds_since(t0);
    return {agree == pairs && secs < 120.0,
            fmt::format("{}/{} pairs agree ({} by raw windows), {:.1f} s{}", agree, pairs, raw, secs,
                        first_bad)};
}

// ---------------------------------------------------------------------------
// 2: emitted miss bounds against adversarial enumeration

// Largest miss count over any aligned block of `b` orig intervals, over every
// schedule that satisfies `next` exactly.
int worst_block_misses(const SlaType& next, const SlaType& orig, std::int64_t b, Slots span) {
    int worst = 0;
    const std::uint64_t unit = (std::uint64_t{1} << orig.t) - 1;
    for (auto w : oracle::tight_schedules(next, span)) {
        for (Slots start = 0; start < span; start += b * orig.t) {
            int n = 0;
            for (Slots at = start; at < start + b * orig.t; at += orig.t)
                if (std::popcount((w >> at) & unit) < orig.c) ++n;
            worst = std::max(worst, n);
        }
    }
    return worst;
}

Outcome miss_bounds() {
    const auto t0 = Clock::now();
    int checked = 0, violations = 0, skipped = 0;
    std::string first_bad;
    auto check = [&](const SlaType& next, const SlaType& orig, const MissBound& bound) {
        const Slots span = std::lcm(next.t, bound.b * orig.t);
        if (span > 64) {
            ++skipped;
            return;
        }
        ++checked;
        if (worst_block_misses(next, orig, bound.b, span) > bound.a) {
            ++violations;
            if (first_bad.empty())
                first_bad = fmt::format(" first violation ({},{}) for ({},{}) bound ({},{})", next.c,
                                        next.t, orig.c, orig.t, bound.a, bound.b);
        }
    };
    for (Slots t = 1; t <= 6; ++t)
        for (Slots c = 1; c <= t; ++c) {
            const SlaType orig{c, t};
            for (std::int64_t k = 2; k <= 3; ++k)
                for (Slots cn = 1; cn <= k * t; ++cn) {
                    const auto st = bounded_stretch(orig, k, cn);
                    if (st.transform) check(st.transform->result, orig, st.transform->bound);
                }
            for (Slots tn = c; tn < t; ++tn) {
                if (2 * tn <= t + c) continue;
                const auto sh = bounded_shrink(orig, tn);
                check(sh.transform.result, orig, sh.transform.bound);
            }
        }
    const double secs = seconds_since(t0);
    return {violations == 0 && skipped == 0 && checked > 0 && secs < 300.0,
            fmt::format("{} bounds checked, {} violations, {} skipped, {:.1f} s{}", checked, violations,
                        skipped, secs, first_bad)};
}

// ---------------------------------------------------------------------------
// 3: bound composition

Outcome bound_algebra() {
    std::mt19937_64 rng(2024);
    int formula_bad = 0, commute_pairs = 0, commute_bad = 0;
    for (int i = 0; i < 10'000; ++i) {
        const std::int64_t b = 1 + static_cast<std::int64_t>(rng() % 40);
        const std::int64_t a = static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(b + 1));
        const std::int64_t y = 1 + static_cast<std::int64_t>(rng() % 40);
        const std::int64_t x = static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(y + 1));
        const auto got = compose_bounds({a, b}, {x, y});
        if (got.a != b * x + (y - x) * a || got.b != b * y) ++formula_bad;
    }
    // stretch and shrink of the same task, both orders
    for (int i = 0; i < 10'000; ++i) {
        const Slots t = 3 + static_cast<Slots>(rng() % 30);
        const Slots c = 1 + static_cast<Slots>(rng() % static_cast<std::uint64_t>(t - 1));
        const std::int64_t k = 2 + static_cast<std::int64_t>(rng() % 4);
        const Slots cn = 1 + static_cast<Slots>(rng() % static_cast<std::uint64_t>(k * t));
        const auto st = bounded_stretch({c, t}, k, cn);
        if (!st.transform) continue;
        std::vector<Slots> shrinks;
        for (Slots tn = c; tn < t; ++tn)
            if (2 * tn > t + c) shrinks.push_back(tn);
        if (shrinks.empty()) continue;
        const auto sh = bounded_shrink({c, t}, shrinks[rng() % shrinks.size()]);
        ++commute_pairs;
        if (compose_bounds(st.transform->bound, sh.transform.bound) !=
            compose_bounds(sh.transform.bound, st.transform->bound))
            ++commute_bad;
    }
    return {formula_bad == 0 && commute_bad == 0 && commute_pairs > 0,
            fmt::format("10000 pairs, {} formula mismatches; {} stretch/shrink pairs, {} non-commuting",
                        formula_bad, commute_pairs, commute_bad)};
}

// ---------------------------------------------------------------------------
// 4: admission test chain

Outcome admission_chain() {
    std::mt19937_64 rng(77);
    int ll_not_h = 0, h_not_e = 0, ll_yes = 0, h_yes = 0;
    for (int i = 0; i < 10'000; ++i) {
        const std::size_t n = 1 + rng() % 8;
        std::vector<SlaType> ts;
        // spread utilizations so all three tests see both verdicts
        const double target = 0.4 + 0.7 * static_cast<double>(rng() % 1000) / 1000.0;
        for (std::size_t j = 0; j < n; ++j) {
            const Slots t = 1 + static_cast<Slots>(rng() % 32);
            const double share = target / static_cast<double>(n);
            const Slots c = std::clamp<Slots>(static_cast<Slots>(std::llround(share * static_cast<double>(t))) +
                                                  static_cast<Slots>(rng() % 3) - 1,
                                              1, t);
            ts.push_back({c, t});
        }
        const bool ll = admissible(ts, AdmissionTest::LL);
        const bool h = admissible(ts, AdmissionTest::Harmonic);
        const bool e = admissible(ts, AdmissionTest::Exact);
        ll_yes += ll;
        h_yes += h;
        if (ll && !h) ++ll_not_h;
        if (h && !e) ++h_not_e;
    }
    const double ll2 = ll_bound(2);
    const std::vector<SlaType> full{{1, 2}, {1, 4}, {1, 8}, {1, 8}};
    const std::vector<SlaType> over{{1, 2}, {1, 4}, {1, 8}, {2, 8}};
    const bool harmonic_one = ll_bound(1) == 1.0 && admissible(full, AdmissionTest::Harmonic) &&
                              !admissible(over, AdmissionTest::Harmonic);
    const bool pass = ll_not_h == 0 && h_not_e == 0 && std::abs(ll2 - kLlTwo) <= kLlTolerance && harmonic_one;
    return {pass, fmt::format("10000 sets ({} LL-admissible, {} harmonic-admissible), {} LL!=>H, {} H!=>E; "
                              "ll_bound(2)={:.10f}; single-cluster bound 1.0 {}",
                              ll_yes, h_yes, ll_not_h, h_not_e, ll2, harmonic_one ? "holds" : "broken")};
}

// ---------------------------------------------------------------------------
// simulation helpers

SimConfig sim_base(double lambda) {
    SimConfig cfg;
    cfg.gen.lambda = lambda;
    cfg.repack.node_budget = kSimNodeBudget;
    return cfg;
}

std::vector<std::uint64_t> seed_range(std::size_t n) {
    std::vector<std::uint64_t> s(n);
    std::iota(s.begin(), s.end(), std::uint64_t{1});
    return s;
}

const CeSummary& find(const MatrixResult& r, std::string_view name) {
    for (const auto& s : r.summary)
        if (s.strategy == name) return s;
    throw PreconditionError(fmt::format("no strategy {}", name));
}

// Paired per-seed difference x - y with its 95% interval.
MeanCi paired(const CeSummary& x, const CeSummary& y) {
    std::vector<double> d(x.per_seed.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = x.per_seed[i] - y.per_seed[i];
    return mean_ci95(d);
}

bool significantly_above(const CeSummary& x, const CeSummary& y) {
    const auto d = paired(x, y);
    return d.mean - d.half_width > 0.0;
}

// x >= y at 95%: the paired interval admits no negative difference
bool at_least(const CeSummary& x, const CeSummary& y) {
    const auto d = paired(x, y);
    return d.mean - d.half_width >= 0.0;
}

bool significantly_below(const CeSummary& x, const CeSummary& y) {
    const auto d = paired(x, y);
    return d.mean + d.half_width < 0.0;
}

std::string fmt_ce(const CeSummary& s) { return fmt::format("{}={:.3f}[{:.3f},{:.3f}]", s.strategy, s.mean, s.ci_low, s.ci_high); }

// CE of `strategy` at each setting, each against FF under the same setting.
std::vector<CeSummary> sweep(const std::vector<SimConfig>& configs, const std::string& strategy,
                             std::span<const std::uint64_t> seeds, std::span<const StreamProfile> cat) {
    std::vector<CeSummary> out;
    const std::vector<std::string> strategies{"FF", strategy};
    for (const auto& cfg : configs) out.push_back(find(run_matrix(cfg, strategies, seeds, cat), strategy));
    return out;
}

// Non-decreasing with 95% confidence: no step drops significantly and the
// last setting sits significantly above the first.
Outcome non_decreasing(const std::vector<CeSummary>& ce, const std::vector<std::string>& labels) {
    std::string line;
    int drops = 0;
    for (std::size_t i = 0; i < ce.size(); ++i) {
        line += fmt::format("{}{}:{:.3f}", i ? " " : "", labels[i], ce[i].mean);
        if (i > 0 && significantly_below(ce[i], ce[i - 1])) ++drops;
    }
    const bool rise = significantly_above(ce.back(), ce.front());
    return {drops == 0 && rise, fmt::format("{}; {} significant drops, overall rise {}", line, drops,
                                            rise ? "significant" : "not significant")};
}

// ---------------------------------------------------------------------------
// 5: strategy ordering

Outcome strategy_ordering(std::size_t nseeds) {
    const auto t0 = Clock::now();
    const auto cat = gen_catalog({});
    const auto seeds = seed_range(nseeds);
    const std::vector<std::string> strategies{"FF",    "BF",    "FF-NR", "BF-NR", "FF-NM",
                                              "BF-NM", "FF-CM", "BF-CM", "FF-UM", "BF-UM"};
    bool pass = nseeds >= 20;
    std::string detail;
    for (double lambda : {0.5, 1.0, 2.0}) {
        const auto r = run_matrix(sim_base(lambda), strategies, seeds, cat);
        std::vector<std::string> failed;
        if (std::abs(find(r, "BF").mean) > kBfBand) failed.push_back("a");
        for (const char* fit : {"FF", "BF"}) {
            const auto& nr = find(r, fmt::format("{}-NR", fit));
            const auto& nm = find(r, fmt::format("{}-NM", fit));
            const auto& cm = find(r, fmt::format("{}-CM", fit));
            const auto& um = find(r, fmt::format("{}-UM", fit));
            if (!(nr.ci_low > 0.0 && nr.mean <= kNrCeiling)) failed.push_back(fmt::format("b:{}", fit));
            if (!significantly_above(nm, nr)) failed.push_back(fmt::format("c:{}", fit));
            if (!at_least(um, cm) || !at_least(cm, nm))
                failed.push_back(fmt::format("d:{}", fit));
        }
        if (!failed.empty()) pass = false;
        std::string ces;
        for (const auto& s : r.summary)
            if (s.strategy != "FF") ces += " " + fmt_ce(s);
        std::string fails;
        for (const auto& f : failed) fails += (fails.empty() ? "" : ",") + f;
        detail += fmt::format(" | lambda={}:{}{}", lambda, ces, failed.empty() ? "" : " failed " + fails);
    }
    const double secs = seconds_since(t0);
    pass = pass && secs < 1800.0;
    return {pass, fmt::format("{} seeds, {:.0f} s{}", nseeds, secs, detail)};
}

// ---------------------------------------------------------------------------
// 6: fluidity

Outcome fluidity(std::size_t nseeds) {
    const auto cat = gen_catalog({});
    const auto seeds = seed_range(nseeds);
    std::string detail;
    bool pass = true;
    for (const char* strategy : {"FF-NR", "BF-NR"}) {
        std::vector<SimConfig> cfgs;
        std::vector<std::string> labels;
        for (double f : {0.0, 0.25, 0.5, 0.75, 1.0}) {
            auto c = sim_base(1.0);
            c.gen.sigma = 1.0;
            c.gen.fluid_fraction = f;
            cfgs.push_back(c);
            labels.push_back(fmt::format("{:.0f}%", 100 * f));
        }
        const auto o = non_decreasing(sweep(cfgs, strategy, seeds, cat), labels);
        pass = pass && o.pass;
        detail += fmt::format("{} fraction {}; ", strategy, o.detail);
    }
    std::vector<SimConfig> sig;
    for (double s : {2.0, 4.0}) {
        auto c = sim_base(1.0);
        c.gen.sigma = s;
        c.gen.fluid_fraction = 1.0;
        sig.push_back(c);
    }
    const auto ce = sweep(sig, "FF-NR", seeds, cat);
    const bool share = ce[0].mean >= kSigmaShare * ce[1].mean;
    pass = pass && share;
    detail += fmt::format("FF-NR sigma=2 {:.3f} vs sigma=4 {:.3f} ({:.0f}%)", ce[0].mean, ce[1].mean,
                          ce[1].mean != 0.0 ? 100.0 * ce[0].mean / ce[1].mean : 0.0);
    return {pass, detail};
}

// ---------------------------------------------------------------------------
// 7: uptime

Outcome uptime(std::size_t nseeds) {
    const auto cat = gen_catalog({});
    const auto seeds = seed_range(nseeds);
    std::vector<SimConfig> by_delta;
    std::vector<std::string> dl;
    for (double d : {0.999, 0.998, 0.997, 0.996, 0.995}) {
        auto c = sim_base(1.0);
        c.gen.up_fraction = 1.0;
        c.gen.delta = d;
        by_delta.push_back(c);
        dl.push_back(fmt::format("{}", d));
    }
    std::vector<SimConfig> by_frac;
    std::vector<std::string> fl;
    for (double f : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        auto c = sim_base(1.0);
        c.gen.up_fraction = f;
        c.gen.delta = 0.995;
        by_frac.push_back(c);
        fl.push_back(fmt::format("{:.0f}%", 100 * f));
    }
    const auto a = non_decreasing(sweep(by_delta, "FF-NR", seeds, cat), dl);
    const auto b = non_decreasing(sweep(by_frac, "FF-NR", seeds, cat), fl);
    return {a.pass && b.pass, fmt::format("FF-NR delta {}; UP fraction {}", a.detail, b.detail)};
}

// ---------------------------------------------------------------------------
// 8: pruned search against the exhaustive oracle

Outcome search_equivalence() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(99);
    int instances = 0, mismatches = 0, below_optimum = 0, gap = 0;
    const std::vector<std::vector<Slots>> contexts{{4, 8}, {6, 12}, {5, 10, 20}, {3, 9}, {4, 6, 12}};
    for (int i = 0; i < 3000; ++i) {
        SearchProblem p;
        const std::size_t n = 1 + rng() % 6;
        const auto& ctx = contexts[rng() % contexts.size()];
        for (std::size_t t = 0; t < n; ++t) {
            const Slots period = 2 + static_cast<Slots>(rng() % 11);
            const Slots c = 1 + static_cast<Slots>(rng() % static_cast<std::uint64_t>(period));
            const Slots sigma = static_cast<Slots>(rng() % 3);
            const std::int64_t d = (rng() % 4 == 0) ? 1 : 0;
            const FluidSla f{c, period, std::max<Slots>(c, period - sigma), period + sigma, d, d ? 4 : 1};
            auto opts = gen_transforms(f, ctx);
            opts.resize(std::min<std::size_t>(opts.size(), 1 + rng() % 3));
            p.tasks.push_back({static_cast<TaskId>(t), opts});
        }
        if (rng() % 2) {
            p.hint_order.resize(n);
            std::iota(p.hint_order.begin(), p.hint_order.end(), std::size_t{0});
            std::shuffle(p.hint_order.begin(), p.hint_order.end(), rng);
        }
        ++instances;
        SearchOptions o;
        o.order = (i % 3 == 0) ? SearchOrder::BFS : SearchOrder::DFS;
        const auto r = search_packing(p, o, {n + 1, std::nullopt});
        const auto want = oracle::exhaustive_bins(p);
        if (!r.best || r.best->bins != want) ++mismatches;
        const auto opt = oracle::optimal_bins(p);
        if (want < opt) ++below_optimum;
        if (want > opt) ++gap;
    }
    const double secs = seconds_since(t0);
    return {mismatches == 0 && below_optimum == 0,
            fmt::format("{} instances (<=6 tasks, <=3 options), {} mismatches, {} above the true optimum, "
                        "{:.1f} s",
                        instances, mismatches, gap, secs)};
}

// ---------------------------------------------------------------------------
// 9: admission at 4000 hosts

Outcome scale_smoke() {
    const auto cat = gen_catalog({});
    WorkloadSpec spec;
    spec.lambda = 50.0;
    spec.fluid_fraction = 0.5;
    spec.seed = 5;
    const auto arrivals = gen_arrivals(spec, cat, static_cast<Slots>(3600 * spec.slot_rate));
    std::vector<FluidSla> pool;
    for (const auto& a : arrivals)
        if (a.sla) pool.push_back(*a.sla);

    // fill hosts directly with identity placements until each is about 85% full
    Cluster cluster;
    AdmissionConfig adm;
    std::size_t next = 0;
    TaskId id = 0;
    while (cluster.host_count() < kScaleHosts) {
        const HostId h = cluster.open_host();
        for (int tries = 0; tries < 12 && cluster.host(h)->approx_util() < 0.85; ++tries) {
            const auto& f = pool[next++ % pool.size()];
            if (fits(*cluster.host(h), f.nominal(), adm))
                cluster.place(h, {id++, f, identity_transform(f.nominal())});
        }
    }

    RepackContext rctx;
    rctx.config.policy = RepackPolicy::FR;
    rctx.config.migration = MigrationPolicy::NM;
    rctx.config.node_budget = 200;
    rctx.config.max_groups = 8;
    rctx.admission = adm;
    std::vector<RepackRecord> log;
    Slots clock = 0;
    WasPolicy policy;
    policy.forced_repack = make_forced_repack_hook(rctx, &log, &clock);

    std::int64_t repacked = 0, placed = 0;
    double worst = 0.0;
    const auto t0 = Clock::now();
    for (int i = 0; i < kScaleRequests; ++i) {
        const auto& f = pool[next++ % pool.size()];
        const auto s = Clock::now();
        const auto d = was_admit(cluster, id++, f, policy);
        worst = std::max(worst, seconds_since(s));
        if (d.outcome != PlacementOutcome::Rejected) ++placed;
        if (d.outcome == PlacementOutcome::PlacedAfterRepack) ++repacked;
        ++clock;
    }
    const double mean_ms = 1000.0 * seconds_since(t0) / kScaleRequests;
    const bool safe = !audit(cluster, adm).has_value();
    return {mean_ms < kAdmitBudgetMs && safe && cluster.host_count() >= kScaleHosts,
            fmt::format("{} hosts, {} requests: mean {:.2f} ms, worst {:.1f} ms, {} placed after NM repack, "
                        "{} forced repacks logged, audit {}",
                        cluster.host_count(), kScaleRequests, mean_ms, 1000.0 * worst, repacked, log.size(),
                        safe ? "clean" : "FAILED")};
}

// ---------------------------------------------------------------------------
// 10: byte-identical output

Outcome determinism() {
    const auto cat = gen_catalog({12, 1800.0, 3.0, 8.0, 7});
    auto cfg = sim_base(1.5);
    cfg.horizon_s = 3600.0;
    cfg.gen.fluid_fraction = 0.5;
    cfg.gen.up_fraction = 0.3;
    const std::vector<std::string> strategies{"FF", "BF", "FF-NR", "BF-NM", "FF-CM", "BF-UM", "FF-UM-PR"};
    const auto seeds = seed_range(3);
    auto csv = [&](unsigned threads) {
        const auto r = run_matrix(cfg, strategies, seeds, cat, threads);
        std::ostringstream out;
        write_runs_csv(out, r.rows);
        write_summary_csv(out, r.summary);
        return out.str();
    };
    const auto a = csv(1), b = csv(1), c = csv(4);
    return {a == b && a == c && !a.empty(),
            fmt::format("{} strategies x {} seeds, {} bytes; repeat {}, 1 vs 4 threads {}", strategies.size(),
                        seeds.size(), a.size(), a == b ? "identical" : "DIFFERENT",
                        a == c ? "identical" : "DIFFERENT")};
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance checks"};
    std::vector<int> only;
    std::size_t seeds = 20;
    app.add_option("--only", only, "criteria to run (default all)");
    app.add_option("--seeds", seeds, "paired seeds for the simulation criteria");
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
        {1, subtyping_exhaustive},
        {2, miss_bounds},
        {3, bound_algebra},
        {4, admission_chain},
        {5, [&] { return strategy_ordering(seeds); }},
        {6, [&] { return fluidity(seeds); }},
        {7, [&] { return uptime(seeds); }},
        {8, search_equivalence},
        {9, scale_smoke},
        {10, determinism},
    };
    int failures = 0;
    for (const auto& [n, fn] : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), n) == only.end()) continue;
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, fmt::format("threw: {}", e.what())};
        }
        if (!o.pass) ++failures;
        fmt::print("criterion {:>2} {}: {}\n", n, o.pass ? "PASS" : "FAIL", o.detail);
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
