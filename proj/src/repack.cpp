#include <morphosys/errors.hpp>
#include <morphosys/repack.hpp>

#include <boost/container/small_vector.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <deque>
#include <numeric>
#include <string>

namespace morphosys {

namespace {

std::string lowered(std::string_view name) {
    std::string out(name);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    return out;
}

} // namespace

std::string_view to_string(RepackPolicy p) {
    switch (p) {
    case RepackPolicy::NR: return "nr";
    case RepackPolicy::PR: return "pr";
    case RepackPolicy::FR: return "fr";
    }
    return "?";
}

std::string_view to_string(MigrationPolicy p) {
    switch (p) {
    case MigrationPolicy::NM: return "nm";
    case MigrationPolicy::CM: return "cm";
    case MigrationPolicy::UM: return "um";
    }
    return "?";
}

std::string_view to_string(SearchOrder o) { return o == SearchOrder::DFS ? "dfs" : "bfs"; }

RepackPolicy parse_repack_policy(std::string_view name) {
    const auto s = lowered(name);
    if (s == "nr") return RepackPolicy::NR;
    if (s == "pr") return RepackPolicy::PR;
    if (s == "fr") return RepackPolicy::FR;
    throw PreconditionError(fmt::format("unknown repack policy '{}'", name));
}

MigrationPolicy parse_migration_policy(std::string_view name) {
    const auto s = lowered(name);
    if (s == "nm") return MigrationPolicy::NM;
    if (s == "cm") return MigrationPolicy::CM;
    if (s == "um") return MigrationPolicy::UM;
    throw PreconditionError(fmt::format("unknown migration policy '{}'", name));
}

SearchOrder parse_search_order(std::string_view name) {
    const auto s = lowered(name);
    if (s == "dfs") return SearchOrder::DFS;
    if (s == "bfs") return SearchOrder::BFS;
    throw PreconditionError(fmt::format("unknown search order '{}'", name));
}

void validate(const RepackConfig& cfg) {
    if (cfg.policy == RepackPolicy::PR && cfg.epoch <= 0)
        throw PreconditionError("periodic repacking needs a positive epoch");
    if (cfg.migration == MigrationPolicy::CM && !(cfg.epsilon > 0.0 && cfg.epsilon <= 1.0))
        throw PreconditionError("constrained migration needs 0 < epsilon <= 1");
    if (cfg.node_budget == 0 && !(cfg.time_budget_s > 0.0))
        throw PreconditionError("repack time budget must be positive");
}

std::vector<std::vector<HostId>> select_hosts(const Cluster& cluster, const RepackConfig& cfg) {
    std::vector<std::vector<HostId>> groups;
    switch (cfg.migration) {
    case MigrationPolicy::NM:
        for (const auto& [id, host] : cluster.hosts()) groups.push_back({id});
        break;
    case MigrationPolicy::UM: {
        std::vector<HostId> all;
        for (const auto& [id, host] : cluster.hosts()) all.push_back(id);
        if (!all.empty()) groups.push_back(std::move(all));
        break;
    }
    case MigrationPolicy::CM: {
        double sum = 0.0;
        std::size_t busy = 0;
        for (const auto& [id, host] : cluster.hosts()) {
            if (host.approx_util() > 0.0) {
                sum += host.approx_util();
                ++busy;
            }
        }
        if (busy == 0) break;
        const double phi = sum / static_cast<double>(busy);
        std::vector<HostId> chosen;
        for (const auto& [id, host] : cluster.hosts()) {
            if (phi - host.approx_original_util() >= cfg.epsilon - 1e-12) chosen.push_back(id);
        }
        if (!chosen.empty()) groups.push_back(std::move(chosen));
        break;
    }
    }
    return groups;
}

// --- tree search -------------------------------------------------------------

namespace {

struct Option {
    SlaType sla;
    double util;
    double overhead;
    Rational exact_overhead;
};

// One host under construction; keeps its distinct periods sorted so the
// harmonic test does not rebuild them per query.
struct Bin {
    std::vector<SlaType> slas;
    double util = 0.0;
    boost::container::small_vector<std::pair<Slots, int>, 16> periods; // (period, tasks)
    std::size_t k = 0;

    void add(const Option& o) {
        slas.push_back(o.sla);
        util += o.util;
        auto it = std::lower_bound(periods.begin(), periods.end(), std::pair{o.sla.t, 0});
        if (it != periods.end() && it->first == o.sla.t) {
            ++it->second;
            return;
        }
        periods.insert(it, {o.sla.t, 1});
        recount();
    }

    void pop(double prev_util) {
        const Slots t = slas.back().t;
        slas.pop_back();
        util = prev_util;
        auto it = std::lower_bound(periods.begin(), periods.end(), std::pair{t, 0});
        if (--it->second == 0) {
            periods.erase(it);
            recount();
        }
    }

    void recount() {
        boost::container::small_vector<Slots, 16> ps;
        for (const auto& [p, n] : periods) ps.push_back(p);
        k = harmonic_chain_count({ps.data(), ps.size()});
    }

    // cluster count with one more task of period t
    std::size_t k_with(Slots t) const {
        boost::container::small_vector<Slots, 16> ps;
        bool seen = false;
        for (const auto& [p, n] : periods) {
            if (!seen && t <= p) {
                if (t == p) return k;
                ps.push_back(t);
                seen = true;
            }
            ps.push_back(p);
        }
        if (!seen) ps.push_back(t);
        return harmonic_chain_count({ps.data(), ps.size()});
    }

    bool fits(const Option& o, const AdmissionConfig& adm) const {
        const double u = util + o.util;
        if (u > 1.0 + 1e-9) return false;
        if (adm.test == AdmissionTest::Harmonic && u < 0.69) return true;
        if (adm.test == AdmissionTest::Harmonic) {
            const auto kk = static_cast<std::int64_t>(k_with(o.sla.t));
            const double limit = (kk == 1 ? 1.0 : ll_bound(kk)) + kBoundTolerance;
            if (std::abs(u - limit) > 1e-7) return u <= limit;
        }
        return morphosys::fits(slas, util, o.sla, adm);
    }
};

class Searcher {
public:
    Searcher(const SearchProblem& problem, const SearchOptions& opts, const Incumbent& inc)
        : problem_(problem), opts_(opts), best_bins_(inc.bins), best_over_(inc.overhead) {
        if (best_over_) best_over_approx_ = to_double(*best_over_);
        const std::size_t n = problem.tasks.size();
        order_.resize(n);
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        // fewest options first; equal counts take larger demands first
        std::stable_sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
            const auto& ta = problem.tasks[a].options;
            const auto& tb = problem.tasks[b].options;
            if (ta.size() != tb.size()) return ta.size() < tb.size();
            return approx_utilization(ta.front().original) > approx_utilization(tb.front().original);
        });
        options_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (problem.tasks[i].options.empty())
                throw PreconditionError(fmt::format("task {} has no options", problem.tasks[i].id));
            for (const auto& t : problem.tasks[i].options) {
                options_[i].push_back({t.result, approx_utilization(t.result), t.approx_overhead(),
                                       t.overhead()});
            }
        }
        min_util_.assign(n + 1, 0.0);
        min_over_.assign(n + 1, 0.0);
        for (std::size_t d = n; d-- > 0;) {
            const auto& opts_d = options_[order_[d]];
            double mu = opts_d.front().util, mo = opts_d.front().overhead;
            for (const auto& o : opts_d) {
                mu = std::min(mu, o.util);
                mo = std::min(mo, o.overhead);
            }
            min_util_[d] = min_util_[d + 1] + mu;
            min_over_[d] = min_over_[d + 1] + mo;
        }
        chosen_.assign(n, 0);
        placed_bin_.assign(n, 0);
        start_ = std::chrono::steady_clock::now();
    }

    SearchResult run() {
        if (opts_.order == SearchOrder::DFS) {
            dfs(0, 0.0, 0.0);
        } else {
            bfs();
        }
        result_.complete = !stopped_;
        return std::move(result_);
    }

private:
    bool out_of_budget() {
        if (stopped_) return true;
        if (opts_.node_budget > 0 && result_.nodes >= opts_.node_budget) stopped_ = true;
        if (opts_.time_budget_s > 0.0 && (result_.nodes & 63U) == 0) {
            const std::chrono::duration<double> spent = std::chrono::steady_clock::now() - start_;
            if (spent.count() >= opts_.time_budget_s) stopped_ = true;
        }
        return stopped_;
    }

    bool pruned(std::size_t depth, double util, double over) const {
        if (!opts_.prune) return false;
        const double need = util + min_util_[depth];
        const auto lb = static_cast<std::size_t>(std::ceil(need - 1e-9));
        if (lb > best_bins_) return true;
        if (lb == best_bins_ && best_over_ &&
            over + min_over_[depth] >= best_over_approx_ + 1e-12) {
            return true;
        }
        return false;
    }

    struct Placed {
        std::size_t bin;
        bool opened;
        double prev_util;
    };

    std::size_t first_fit(const Option& o) const {
        for (std::size_t b = 0; b < bins_.size(); ++b)
            if (bins_[b].fits(o, problem_.admission)) return b;
        return bins_.size();
    }

    Placed place_at(const Option& o, std::size_t b) {
        if (b == bins_.size()) {
            bins_.emplace_back().add(o);
            return {b, true, 0.0};
        }
        const double prev = bins_[b].util;
        bins_[b].add(o);
        return {b, false, prev};
    }

    Placed place(const Option& o) { return place_at(o, first_fit(o)); }

    // extra harmonic clusters the option adds to bin b (new bins count as one)
    std::size_t added_clusters(const Option& o, std::size_t b) const {
        if (b == bins_.size()) return 1;
        return bins_[b].k_with(o.sla.t) - bins_[b].k;
    }

    // Children best-first: options that keep their bin harmonic, then earlier bins, then cheaper.
    std::vector<std::pair<std::size_t, std::size_t>> ranked_children(std::size_t task) const {
        const auto& opts = options_[task];
        struct Child {
            std::size_t bin, k, added;
        };
        std::vector<Child> kids;
        kids.reserve(opts.size());
        for (std::size_t k = 0; k < opts.size(); ++k) {
            const std::size_t b = first_fit(opts[k]);
            kids.push_back({b, k, added_clusters(opts[k], b)});
        }
        std::stable_sort(kids.begin(), kids.end(), [&](const Child& x, const Child& y) {
            if (x.added != y.added) return x.added < y.added;
            if (x.bin != y.bin) return x.bin < y.bin;
            return opts[x.k].overhead < opts[y.k].overhead;
        });
        std::vector<std::pair<std::size_t, std::size_t>> out; // (bin, option)
        out.reserve(kids.size());
        for (const auto& c : kids) out.emplace_back(c.bin, c.k);
        return out;
    }

    void unplace(std::size_t b, bool opened, double prev_util) {
        if (opened) {
            bins_.pop_back();
        } else {
            bins_[b].pop(prev_util);
        }
    }

    // FF over the leaf's tasks by (period, larger demand first, id)
    std::pair<std::size_t, std::vector<std::size_t>> sorted_pack() const {
        const std::size_t n = chosen_.size();
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            const Option& x = options_[a][chosen_[a]];
            const Option& y = options_[b][chosen_[b]];
            if (x.sla.t != y.sla.t) return x.sla.t < y.sla.t;
            return x.util > y.util;
        });
        return pack_in(idx);
    }

    std::pair<std::size_t, std::vector<std::size_t>> pack_in(const std::vector<std::size_t>& idx) const {
        const std::size_t n = chosen_.size();
        std::vector<Bin> bins;
        std::vector<std::size_t> where(n);
        for (std::size_t i : idx) {
            const Option& o = options_[i][chosen_[i]];
            std::size_t b = 0;
            while (b < bins.size() && !bins[b].fits(o, problem_.admission)) ++b;
            if (b == bins.size()) bins.emplace_back();
            bins[b].add(o);
            where[i] = b;
        }
        return {bins.size(), std::move(where)};
    }

    void leaf(double util, double over_approx) {
        std::size_t bins = bins_.size();
        std::vector<std::size_t> where = placed_bin_;
        const auto lb = static_cast<std::size_t>(std::ceil(util - 1e-9));
        if (bins > lb) {
            auto alt = sorted_pack();
            if (alt.first < bins) {
                bins = alt.first;
                where = std::move(alt.second);
            }
        }
        if (bins > lb && !problem_.hint_order.empty()) {
            auto alt = pack_in(problem_.hint_order);
            if (alt.first < bins) {
                bins = alt.first;
                where = std::move(alt.second);
            }
        }
        if (bins > best_bins_) return;
        if (bins == best_bins_ && best_over_ && over_approx > best_over_approx_ + 1e-9) return;
        Rational over = 0;
        for (std::size_t i = 0; i < chosen_.size(); ++i) over += options_[i][chosen_[i]].exact_overhead;
        const bool better = bins < best_bins_ || (bins == best_bins_ && (!best_over_ || over < *best_over_));
        if (!better) return;
        best_bins_ = bins;
        best_over_ = over;
        best_over_approx_ = to_double(over);
        result_.best = Packing{chosen_, std::move(where), bins, over};
    }

    void dfs(std::size_t depth, double util, double over) {
        if (out_of_budget()) return;
        ++result_.nodes;
        if (pruned(depth, util, over)) return;
        if (depth == order_.size()) {
            leaf(util, over);
            return;
        }
        const std::size_t task = order_[depth];
        for (const auto& [bin, k] : ranked_children(task)) {
            const Option& o = options_[task][k];
            const Placed at = place_at(o, bin);
            chosen_[task] = k;
            placed_bin_[task] = at.bin;
            dfs(depth + 1, util + o.util, over + o.overhead);
            unplace(at.bin, at.opened, at.prev_util);
            if (stopped_) return;
        }
    }

    void bfs() {
        std::deque<std::vector<std::size_t>> frontier;
        frontier.emplace_back();
        while (!frontier.empty()) {
            if (out_of_budget()) return;
            auto path = std::move(frontier.front());
            frontier.pop_front();
            ++result_.nodes;
            bins_.clear();
            double util = 0.0, over = 0.0;
            for (std::size_t d = 0; d < path.size(); ++d) {
                const std::size_t task = order_[d];
                const Option& o = options_[task][path[d]];
                chosen_[task] = path[d];
                placed_bin_[task] = place(o).bin;
                util += o.util;
                over += o.overhead;
            }
            if (pruned(path.size(), util, over)) continue;
            if (path.size() == order_.size()) {
                leaf(util, over);
                continue;
            }
            const std::size_t task = order_[path.size()];
            for (const auto& [bin, k] : ranked_children(task)) {
                auto child = path;
                child.push_back(k);
                frontier.push_back(std::move(child));
            }
        }
    }

    const SearchProblem& problem_;
    SearchOptions opts_;
    std::size_t best_bins_;
    std::optional<Rational> best_over_;
    double best_over_approx_ = 0.0;
    std::vector<std::size_t> order_;
    std::vector<std::vector<Option>> options_;
    std::vector<double> min_util_, min_over_;
    std::vector<std::size_t> chosen_, placed_bin_;
    std::vector<Bin> bins_;
    SearchResult result_;
    bool stopped_ = false;
    std::chrono::steady_clock::time_point start_;
};

} // namespace

SearchResult search_packing(const SearchProblem& problem, const SearchOptions& opts,
                            const Incumbent& incumbent) {
    return Searcher(problem, opts, incumbent).run();
}

// --- cluster-level repacking -------------------------------------------------

namespace {

std::vector<BoundedTransform> options_for(const FluidSla& request,
                                          const std::optional<BoundedTransform>& current,
                                          std::span<const Slots> context, const RepackContext& ctx) {
    std::vector<BoundedTransform> out;
    if (ctx.transforms) {
        out = gen_transforms(request, context, ctx.limits);
    } else {
        out.push_back(identity_transform(request.nominal()));
    }
    if (current && std::find(out.begin(), out.end(), *current) == out.end()) out.push_back(*current);
    return out;
}

SearchOptions search_options(const RepackConfig& cfg) {
    SearchOptions o;
    o.order = cfg.order;
    o.node_budget = cfg.node_budget;
    o.time_budget_s = cfg.node_budget > 0 ? 0.0 : cfg.time_budget_s;
    return o;
}

} // namespace

RepackRecord repack(Cluster& cluster, const std::vector<HostId>& group, const RepackContext& ctx,
                    const std::optional<PendingRequest>& pending) {
    RepackRecord rec;
    for (HostId h : group)
        if (cluster.host(h) != nullptr) rec.group.push_back(h);
    std::sort(rec.group.begin(), rec.group.end());
    rec.hosts_before = rec.group.size();
    rec.hosts_after = rec.group.size();
    if (rec.group.empty()) return rec;

    const auto context = cluster.periods();
    SearchProblem problem;
    problem.admission = ctx.admission;
    std::vector<Resident> residents;
    std::vector<HostId> old_host;
    Rational current_overhead = 0;
    for (HostId h : rec.group) {
        for (const auto& r : cluster.host(h)->residents()) {
            residents.push_back(r);
            old_host.push_back(h);
            current_overhead += r.active.overhead();
            problem.tasks.push_back({r.id, options_for(r.request, r.active, context, ctx)});
        }
    }
    if (pending) {
        problem.tasks.push_back({pending->id, options_for(pending->request, std::nullopt, context, ctx)});
    }

    // current layout, fullest hosts first, request last
    {
        std::vector<std::size_t> by_host(residents.size());
        std::iota(by_host.begin(), by_host.end(), std::size_t{0});
        std::stable_sort(by_host.begin(), by_host.end(), [&](std::size_t a, std::size_t b) {
            const double ua = cluster.host(old_host[a])->approx_util();
            const double ub = cluster.host(old_host[b])->approx_util();
            if (ua != ub) return ua > ub;
            return old_host[a] < old_host[b];
        });
        if (pending) by_host.push_back(residents.size());
        problem.hint_order = std::move(by_host);
    }

    Incumbent inc{rec.group.size(), pending ? std::nullopt : std::optional<Rational>(current_overhead)};
    const auto found = search_packing(problem, search_options(ctx.config), inc);
    rec.nodes = found.nodes;
    if (!found.best || found.best->bins > rec.group.size()) return rec;

    const Packing& p = *found.best;
    for (const auto& r : residents) cluster.remove(r.id);
    for (std::size_t b = 0; b < p.bins; ++b) cluster.open_host(rec.group[b]);
    for (std::size_t i = 0; i < problem.tasks.size(); ++i) {
        const HostId target = rec.group[p.bin[i]];
        const auto& chosen = problem.tasks[i].options[p.option[i]];
        if (i < residents.size()) {
            if (target != old_host[i]) ++rec.migrations;
            cluster.place(target, {residents[i].id, residents[i].request, chosen});
        } else {
            cluster.place(target, {pending->id, pending->request, chosen});
            rec.request_host = target;
        }
    }
    rec.adopted = true;
    rec.hosts_after = p.bins;
    return rec;
}

bool repack_due(const RepackConfig& cfg, Slots clock, RepackTrigger trigger) {
    switch (cfg.policy) {
    case RepackPolicy::NR: return false;
    case RepackPolicy::PR:
        return trigger == RepackTrigger::PeriodicTick && cfg.epoch > 0 && clock % cfg.epoch == 0;
    case RepackPolicy::FR: return trigger == RepackTrigger::WasFailure;
    }
    return false;
}

namespace {

// With only miss-free tasks no option drops below the original utilization.
bool could_absorb(const HostState& host, const FluidSla& request) {
    if (request.d > 0) return true;
    for (const auto& r : host.residents())
        if (r.request.d > 0) return true;
    return host.approx_original_util() + approx_utilization(request.nominal()) <= 1.0 + 1e-9;
}

} // namespace

namespace {

// One host at a time, residents stay put; stops once a host takes the request.
bool absorb_in_place(Cluster& cluster, const std::vector<HostId>& hosts, const RepackContext& ctx,
                     const PendingRequest& pending, Slots clock, std::vector<RepackRecord>& out) {
    std::size_t tried = 0;
    for (HostId id : hosts) {
        const HostState* h = cluster.host(id);
        if (h == nullptr || !could_absorb(*h, pending.request)) continue;
        if (ctx.config.max_groups > 0 && tried >= ctx.config.max_groups) break;
        ++tried;
        auto rec = repack(cluster, {id}, ctx, pending);
        rec.time = clock;
        const bool absorbed = rec.request_host.has_value();
        out.push_back(std::move(rec));
        if (absorbed) return true;
    }
    return false;
}

} // namespace

std::vector<RepackRecord> maybe_repack(Cluster& cluster, Slots clock, const RepackContext& ctx,
                                       RepackTrigger trigger,
                                       const std::optional<PendingRequest>& pending) {
    std::vector<RepackRecord> out;
    if (!repack_due(ctx.config, clock, trigger)) return out;
    auto groups = select_hosts(cluster, ctx.config);
    if (trigger == RepackTrigger::WasFailure && pending) {
        if (ctx.config.migration == MigrationPolicy::UM) {
            // the whole-cluster search is greedy at this size; the underloaded
            // hosts alone are a smaller problem it often solves
            RepackConfig narrow = ctx.config;
            narrow.migration = MigrationPolicy::CM;
            for (auto& g : select_hosts(cluster, narrow))
                if (groups.empty() || g.size() < groups.front().size()) groups.insert(groups.begin(), std::move(g));
        }
        if (ctx.config.migration != MigrationPolicy::NM) {
            for (const auto& group : groups) {
                auto rec = repack(cluster, group, ctx, pending);
                rec.time = clock;
                const bool absorbed = rec.request_host.has_value();
                out.push_back(std::move(rec));
                if (absorbed) return out;
            }
        }
        // In-place repacking moves nothing, so every migration policy allows it.
        std::vector<HostId> all;
        for (const auto& [id, host] : cluster.hosts()) all.push_back(id);
        absorb_in_place(cluster, all, ctx, *pending, clock, out);
        return out;
    }
    for (const auto& group : groups) {
        auto rec = repack(cluster, group, ctx);
        rec.time = clock;
        out.push_back(std::move(rec));
    }
    return out;
}

ForcedRepackHook make_forced_repack_hook(const RepackContext& ctx, std::vector<RepackRecord>* log,
                                         const Slots* clock) {
    return [ctx, log, clock](Cluster& cluster, TaskId id,
                             const FluidSla& request) -> std::optional<HostId> {
        auto recs = maybe_repack(cluster, clock ? *clock : 0, ctx, RepackTrigger::WasFailure,
                                 PendingRequest{id, request});
        std::optional<HostId> placed;
        for (auto& r : recs) {
            if (r.request_host) placed = r.request_host;
            if (log) log->push_back(std::move(r));
        }
        return placed;
    };
}

} // namespace morphosys
