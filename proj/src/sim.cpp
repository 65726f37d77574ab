#include <morphosys/errors.hpp>
#include <morphosys/sim.hpp>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <numeric>
#include <queue>
#include <thread>

namespace morphosys {

std::string_view to_string(TransformMode m) {
    switch (m) {
    case TransformMode::All: return "all";
    case TransformMode::Fluid: return "fluid";
    case TransformMode::NonFluid: return "nonfluid";
    case TransformMode::None: return "none";
    }
    return "?";
}

TransformMode parse_transform_mode(std::string_view name) {
    if (name == "all") return TransformMode::All;
    if (name == "fluid") return TransformMode::Fluid;
    if (name == "nonfluid") return TransformMode::NonFluid;
    if (name == "none") return TransformMode::None;
    throw PreconditionError(fmt::format("unknown transform mode '{}'", name));
}

Slots SimConfig::horizon_slots() const {
    return static_cast<Slots>(std::llround(horizon_s * gen.slot_rate));
}

void validate(const SimConfig& cfg) {
    if (!(cfg.horizon_s > 0.0)) throw PreconditionError("sim.horizon_s must be positive");
    if (!(cfg.epoch_s > 0.0)) throw PreconditionError("sim.epoch_s must be positive");
    if (cfg.admission.exact_cap <= 0) throw PreconditionError("sim.exact_horizon_cap must be positive");
    if (cfg.repack.policy == RepackPolicy::PR && !(cfg.repack_epoch_s > 0.0))
        throw PreconditionError("repack.epoch_s must be positive for periodic repacking");
    validate(cfg.gen);
    RepackConfig r = cfg.repack;
    r.epoch = std::max<Slots>(1, static_cast<Slots>(std::llround(cfg.repack_epoch_s * cfg.gen.slot_rate)));
    validate(r);
}

namespace {

enum class EventKind { Departure = 0, Arrival = 1, Epoch = 2, Audit = 3 };

struct Event {
    Slots time;
    EventKind kind;
    std::int64_t seq;

    bool operator>(const Event& o) const {
        if (time != o.time) return time > o.time;
        if (kind != o.kind) return kind > o.kind;
        return seq > o.seq;
    }
};

GenLimits limits_for(const SimConfig& cfg) {
    GenLimits l = cfg.limits;
    l.fluid = cfg.transform_mode == TransformMode::All || cfg.transform_mode == TransformMode::Fluid;
    l.rigid = cfg.transform_mode == TransformMode::All || cfg.transform_mode == TransformMode::NonFluid;
    return l;
}

} // namespace

SimMetrics run(const SimConfig& cfg, std::span<const StreamProfile> catalog) {
    validate(cfg);
    const Slots horizon = cfg.horizon_slots();
    const auto arrivals = gen_arrivals(cfg.gen, catalog, horizon);

    SimMetrics m;
    Cluster cluster;
    Slots clock = 0;

    RepackContext rctx;
    rctx.config = cfg.repack;
    rctx.config.epoch = std::max<Slots>(1, static_cast<Slots>(std::llround(cfg.repack_epoch_s * cfg.gen.slot_rate)));
    rctx.admission = cfg.admission;
    rctx.limits = limits_for(cfg);
    rctx.transforms = cfg.transform_mode != TransformMode::None;

    std::vector<RepackRecord> repack_log;
    WasPolicy policy;
    policy.fit = cfg.fit;
    policy.admission = cfg.admission;
    policy.limits = rctx.limits;
    policy.transforms = rctx.transforms;
    if (cfg.host_cap > 0) policy.host_cap = cfg.host_cap;
    if (cfg.repack.policy == RepackPolicy::FR)
        policy.forced_repack = make_forced_repack_hook(rctx, &repack_log, &clock);

    std::priority_queue<Event, std::vector<Event>, std::greater<>> queue;
    for (std::size_t i = 0; i < arrivals.size(); ++i)
        queue.push({arrivals[i].time, EventKind::Arrival, static_cast<std::int64_t>(i)});
    if (cfg.repack.policy == RepackPolicy::PR && rctx.config.epoch < horizon)
        queue.push({rctx.config.epoch, EventKind::Epoch, 0});
    const Slots audit_step = std::max<Slots>(1, static_cast<Slots>(std::llround(cfg.epoch_s * cfg.gen.slot_rate)));
    if (cfg.audit && audit_step < horizon) queue.push({audit_step, EventKind::Audit, 0});

    Slots last = 0;
    auto integrate = [&](Slots until) {
        const Slots dt = until - last;
        if (dt <= 0) return;
        const auto hosts = static_cast<std::int64_t>(cluster.host_count());
        const auto d = static_cast<double>(dt);
        m.host_time += static_cast<double>(hosts) * d;
        if (hosts > 0) {
            m.wasted += to_double(Rational(hosts) - cluster.allocated_util()) * d;
            m.wasted_orig += to_double(Rational(hosts) - cluster.original_util()) * d;
        }
        last = until;
    };

    auto drain_repacks = [&] {
        for (auto& r : repack_log) {
            if (r.adopted) ++m.repacks;
            m.migrations += static_cast<std::int64_t>(r.migrations);
            if (cfg.record_events) m.repack_log.push_back(std::move(r));
        }
        repack_log.clear();
    };

    while (!queue.empty()) {
        const Event ev = queue.top();
        queue.pop();
        if (ev.time >= horizon) break;
        integrate(ev.time);
        clock = ev.time;
        switch (ev.kind) {
        case EventKind::Departure:
            cluster.remove(ev.seq);
            break;
        case EventKind::Arrival: {
            const Arrival& a = arrivals[static_cast<std::size_t>(ev.seq)];
            PlacementRecord rec{ev.time, a.id, PlacementOutcome::Rejected, std::nullopt, ""};
            if (a.sla) {
                const auto d = was_admit(cluster, a.id, *a.sla, policy);
                drain_repacks();
                rec.outcome = d.outcome;
                rec.host = d.host;
                if (d.transform) rec.source = d.transform->source.label();
                if (d.outcome != PlacementOutcome::Rejected) {
                    ++m.placements;
                    if (d.transform && d.transform->source.kind != TransformKind::Identity) ++m.transformed;
                    if (a.departure < horizon) queue.push({a.departure, EventKind::Departure, a.id});
                }
            }
            if (rec.outcome == PlacementOutcome::Rejected) ++m.rejections;
            if (cfg.record_events) m.placement_log.push_back(std::move(rec));
            m.peak_hosts = std::max(m.peak_hosts, cluster.host_count());
            break;
        }
        case EventKind::Epoch:
            repack_log = maybe_repack(cluster, clock, rctx, RepackTrigger::PeriodicTick);
            drain_repacks();
            if (ev.time + rctx.config.epoch < horizon)
                queue.push({ev.time + rctx.config.epoch, EventKind::Epoch, 0});
            break;
        case EventKind::Audit:
            if (auto problem = audit(cluster, cfg.admission))
                throw Error(fmt::format("audit failed at slot {}: {}", ev.time, *problem));
            if (ev.time + audit_step < horizon) queue.push({ev.time + audit_step, EventKind::Audit, 0});
            break;
        }
    }
    integrate(horizon);
    return m;
}

double colocation_efficiency(double wx, double wff) {
    if (wff == 0.0) throw UndefinedBaseline("baseline wasted capacity is zero");
    return 1.0 - wx / wff;
}

SimConfig apply_strategy(const SimConfig& base, std::string_view strategy) {
    std::vector<std::string> parts;
    std::string cur;
    for (char ch : strategy) {
        if (ch == '-') {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(ch))));
        }
    }
    parts.push_back(cur);
    auto bad = [&] { return PreconditionError(fmt::format("unknown strategy '{}'", strategy)); };
    if (parts.empty() || parts.size() > 3) throw bad();

    SimConfig cfg = base;
    if (parts[0] == "FF") cfg.fit = FitRule::FirstFit;
    else if (parts[0] == "BF") cfg.fit = FitRule::BestFit;
    else throw bad();

    if (parts.size() == 1) {
        cfg.transform_mode = TransformMode::None;
        cfg.repack.policy = RepackPolicy::NR;
        return cfg;
    }
    if (cfg.transform_mode == TransformMode::None) cfg.transform_mode = TransformMode::All;
    const std::string& mig = parts[1];
    if (mig == "NR") {
        if (parts.size() != 2) throw bad();
        cfg.repack.policy = RepackPolicy::NR;
        return cfg;
    }
    if (mig == "NM") cfg.repack.migration = MigrationPolicy::NM;
    else if (mig == "CM") cfg.repack.migration = MigrationPolicy::CM;
    else if (mig == "UM") cfg.repack.migration = MigrationPolicy::UM;
    else throw bad();
    cfg.repack.policy = RepackPolicy::FR;
    if (parts.size() == 3) {
        if (parts[2] != "PR") throw bad();
        cfg.repack.policy = RepackPolicy::PR;
    }
    return cfg;
}

MeanCi mean_ci95(std::span<const double> xs) {
    MeanCi out;
    if (xs.empty()) return out;
    const double n = static_cast<double>(xs.size());
    out.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    if (xs.size() < 2) return out;
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.half_width = 1.96 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    return out;
}

MatrixResult run_matrix(const SimConfig& base, std::span<const std::string> strategies,
                        std::span<const std::uint64_t> seeds, std::span<const StreamProfile> catalog,
                        unsigned threads) {
    const auto ff = std::find_if(strategies.begin(), strategies.end(), [](const std::string& s) {
        return s == "FF" || s == "ff";
    });
    if (ff == strategies.end()) throw PreconditionError("strategy list must include the FF baseline");
    if (seeds.empty()) throw PreconditionError("at least one seed is required");

    std::vector<SimConfig> configs;
    for (const auto& s : strategies) configs.push_back(apply_strategy(base, s));

    MatrixResult out;
    out.rows.resize(strategies.size() * seeds.size());
    for (std::size_t i = 0; i < strategies.size(); ++i) {
        for (std::size_t j = 0; j < seeds.size(); ++j) {
            auto& row = out.rows[i * seeds.size() + j];
            row.strategy = strategies[i];
            row.seed = seeds[j];
        }
    }

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < out.rows.size(); k = next++) {
            SimConfig cfg = configs[k / seeds.size()];
            cfg.gen.seed = out.rows[k].seed;
            out.rows[k].metrics = run(cfg, catalog);
        }
    };
    if (threads == 0) threads = std::max(1U, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, static_cast<unsigned>(out.rows.size()));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    const std::size_t ff_index = static_cast<std::size_t>(ff - strategies.begin());
    for (std::size_t i = 0; i < strategies.size(); ++i) {
        CeSummary s;
        s.strategy = strategies[i];
        for (std::size_t j = 0; j < seeds.size(); ++j) {
            const double wff = out.rows[ff_index * seeds.size() + j].metrics.wasted;
            const double wx = out.rows[i * seeds.size() + j].metrics.wasted;
            s.per_seed.push_back(i == ff_index ? 0.0 : colocation_efficiency(wx, wff));
        }
        const auto ci = mean_ci95(s.per_seed);
        s.mean = ci.mean;
        s.ci_low = ci.mean - ci.half_width;
        s.ci_high = ci.mean + ci.half_width;
        out.summary.push_back(std::move(s));
    }
    return out;
}

void write_runs_csv(std::ostream& out, std::span<const RunRow> rows) {
    out << "strategy,seed,wasted,wasted_orig,host_time,placements,rejections,repacks,migrations\n";
    for (const auto& r : rows) {
        const auto& m = r.metrics;
        fmt::print(out, "{},{},{:.3f},{:.3f},{:.0f},{},{},{},{}\n", r.strategy, r.seed, m.wasted,
                   m.wasted_orig, m.host_time, m.placements, m.rejections, m.repacks, m.migrations);
    }
}

void write_summary_csv(std::ostream& out, std::span<const CeSummary> summary) {
    out << "strategy,mean_ce,ci_low,ci_high\n";
    for (const auto& s : summary)
        fmt::print(out, "{},{:.6f},{:.6f},{:.6f}\n", s.strategy, s.mean, s.ci_low, s.ci_high);
}

void write_placement_log(std::ostream& out, std::span<const PlacementRecord> log) {
    out << "time,task_id,outcome,host_id,transform_source\n";
    for (const auto& r : log) {
        fmt::print(out, "{},{},{},{},{}\n", r.time, r.task, to_string(r.outcome),
                   r.host ? fmt::format("{}", *r.host) : std::string(), r.source);
    }
}

void write_repack_log(std::ostream& out, std::span<const RepackRecord> log) {
    out << "time,group,hosts_before,hosts_after,nodes_expanded,migrations\n";
    for (const auto& r : log) {
        std::string group;
        for (std::size_t i = 0; i < r.group.size(); ++i) group += (i ? ";" : "") + std::to_string(r.group[i]);
        fmt::print(out, "{},{},{},{},{},{}\n", r.time, group, r.hosts_before, r.hosts_after, r.nodes,
                   r.migrations);
    }
}

} // namespace morphosys
