#include <morphosys/arith.hpp>
#include <morphosys/errors.hpp>
#include <morphosys/transform.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <set>

namespace morphosys {

std::string Provenance::label() const {
    switch (kind) {
    case TransformKind::Identity: return "identity";
    case TransformKind::FluidRetime: return fmt::format("fluid:T={}", period);
    case TransformKind::HarmonicScale: return fmt::format("scale:K={}", k);
    case TransformKind::BoundedStretch: return fmt::format("stretch:K={};J={}", k, j);
    case TransformKind::BoundedShrink:
        return fmt::format("shrink:T={};m={};n={};s={};l={}", period, m, n, s, l);
    }
    return "unknown";
}

Rational BoundedTransform::overhead() const { return utilization(result) - utilization(original); }

double BoundedTransform::approx_overhead() const noexcept {
    return approx_utilization(result) - approx_utilization(original);
}

BoundedTransform identity_transform(const SlaType& sla) {
    return {sla, sla, MissBound{}, Provenance{}};
}

namespace {

void require_valid(const SlaType& sla, const char* role) {
    if (auto v = validate(sla)) {
        throw PreconditionError(fmt::format("{} SLA {} violates {}", role, to_string(sla),
                                            v->constraint));
    }
}

} // namespace

// --- subtyping ---------------------------------------------------------------

int ct_condition(const SlaType& next, const SlaType& orig) {
    const Slots c = next.c, t = next.t, cp = orig.c, tp = orig.t;
    if (2 * t <= tp) {
        const std::int64_t k = tp / t; // >= 2
        return c * (k - 1) >= cp ? 1 : 0;
    }
    if (t > tp) return 2 * c >= 2 * t - (tp - cp) ? 2 : 0;
    return 3 * c >= 3 * t - (tp - cp) ? 3 : 0;
}

bool ct_contained(const SlaType& next, const SlaType& orig) {
    require_valid(next, "new");
    require_valid(orig, "original");
    const Slots hyper = checked_lcm(next.t, orig.t);
    for (Slots start = 0; start < hyper; start += orig.t) {
        const Slots end = start + orig.t;
        Slots guaranteed = 0;
        for (Slots q = start / next.t; q * next.t < end; ++q) {
            const Slots lo = std::max(start, q * next.t);
            const Slots hi = std::min(end, (q + 1) * next.t);
            // The adversary parks as many of the interval's C slots outside the overlap as fit.
            guaranteed += std::max<Slots>(0, next.c - (next.t - (hi - lo)));
        }
        if (guaranteed < orig.c) return false;
    }
    return true;
}

SubtypeVerdict subtype_ct(const SlaType& next, const SlaType& orig) {
    const bool holds = ct_contained(next, orig);
    return {holds, holds ? ct_condition(next, orig) : 0};
}

bool miss_ratio_admissible(const SlaType& next, const SlaType& orig) {
    return static_cast<__int128>(next.d) * orig.w <= static_cast<__int128>(orig.d) * next.w;
}

int ctdw_condition(const SlaType& next, const SlaType& orig) {
    const int bracket = ct_condition(next, orig);
    if (bracket == 0) return 0;
    const __int128 d = next.d, w = next.w, dp = orig.d, wp = orig.w;
    if (dp == 0) return d == 0 ? bracket : 0;
    const __int128 k = orig.t / next.t;
    switch (bracket) {
    case 1: return (2 * d <= dp && w * dp >= d * wp * (k + 1)) ? 1 : 0;
    // The stricter D <= D'/(2(K+1)) that the argument actually supports.
    case 2: return (2 * (k + 1) * d <= dp && w * dp >= d * wp * (k + 1)) ? 2 : 0;
    case 3: return (2 * d <= dp && w * dp >= 2 * d * wp) ? 3 : 0;
    default: return 0;
    }
}

std::int64_t worst_window_misses(const SlaType& next, const SlaType& orig, Slots cap) {
    require_valid(next, "new");
    require_valid(orig, "original");
    const Slots next_span = next.w * next.t;
    const Slots orig_span = orig.w * orig.t;
    const Slots hyper = checked_lcm(next_span, orig_span, cap);

    const std::int64_t c = next.c, cp = orig.c, dmax = next.d;
    // state = (ones in current new interval, interval written off, misses spent in
    // current new window, ones in current original interval capped at C')
    const std::size_t n_on = c + 1, n_wm = dmax + 1, n_oo = cp + 1;
    const std::size_t n_states = n_on * 2 * n_wm * n_oo;
    auto index = [&](std::int64_t on, int missed, std::int64_t wm, std::int64_t oo) {
        return ((static_cast<std::size_t>(on) * 2 + missed) * n_wm + wm) * n_oo + oo;
    };

    std::int64_t worst = 0;
    std::vector<std::int64_t> cur(n_states), nxt(n_states);
    for (Slots s = 0; s < hyper; s += orig_span) {
        std::fill(cur.begin(), cur.end(), -1);
        const Slots pos0 = s % next.t;
        if (pos0 == 0) {
            cur[index(0, 0, 0, 0)] = 0;
        } else {
            // Ones of the current interval placed before the window are free for the adversary.
            cur[index(std::min<Slots>(c, pos0), 0, 0, 0)] = 0;
            if (dmax > 0) cur[index(0, 1, 1, 0)] = 0;
        }
        for (Slots t = s; t < s + orig_span; ++t) {
            std::fill(nxt.begin(), nxt.end(), -1);
            const bool fresh = t % next.t == 0;
            const bool fresh_window = t % next_span == 0;
            const Slots left_after = next.t - (t % next.t) - 1;
            const bool closes_orig = (t + 1) % orig.t == 0;
            auto emit = [&](std::int64_t on, int missed, std::int64_t wm, std::int64_t oo,
                            int bit, std::int64_t misses) {
                std::int64_t oo2 = std::min<std::int64_t>(cp, oo + bit);
                if (closes_orig) {
                    if (oo2 < cp) ++misses;
                    oo2 = 0;
                }
                auto& slot = nxt[index(on, missed, wm, oo2)];
                slot = std::max(slot, misses);
            };
            for (std::size_t on = 0; on < n_on; ++on) {
                for (int missed = 0; missed < 2; ++missed) {
                    for (std::size_t wm = 0; wm < n_wm; ++wm) {
                        for (std::size_t oo = 0; oo < n_oo; ++oo) {
                            const std::int64_t om = cur[index(on, missed, wm, oo)];
                            if (om < 0) continue;
                            if (fresh) {
                                const std::int64_t wm0 = fresh_window ? 0 : wm;
                                for (int b = 0; b < 2; ++b)
                                    if (b <= c && c - b <= left_after) emit(b, 0, wm0, oo, b, om);
                                if (wm0 < dmax) emit(0, 1, wm0 + 1, oo, 0, om);
                            } else if (missed) {
                                emit(on, 1, wm, oo, 0, om);
                            } else {
                                for (int b = 0; b < 2; ++b) {
                                    const std::int64_t on2 = static_cast<std::int64_t>(on) + b;
                                    if (on2 <= c && c - on2 <= left_after)
                                        emit(on2, 0, wm, oo, b, om);
                                }
                            }
                        }
                    }
                }
            }
            std::swap(cur, nxt);
        }
        for (auto om : cur) worst = std::max(worst, om);
    }
    return worst;
}

CtdwVerdict subtype_ctdw(const SlaType& next, const SlaType& orig, Slots replay_cap) {
    require_valid(next, "new");
    require_valid(orig, "original");
    CtdwVerdict v;
    v.ratio_ok = miss_ratio_admissible(next, orig);
    if (orig.d == 0) {
        if (next.d != 0) {
            v.reason = "original admits no misses";
            return v;
        }
        const auto ct = subtype_ct(next, orig);
        v.holds = ct.holds;
        v.condition = ct.condition;
        v.reason = ct.holds ? "miss-free containment" : "no containment";
        return v;
    }
    if (!v.ratio_ok) {
        v.reason = "D/W exceeds D'/W'";
        return v;
    }
    v.condition = ctdw_condition(next, orig);
    if (v.condition == 0) {
        v.reason = "no sufficient condition holds";
        return v;
    }
    try {
        v.worst_misses = worst_window_misses(next, orig, replay_cap);
    } catch (const HorizonOverflow&) {
        v.reason = "adversarial replay exceeds horizon cap";
        return v;
    }
    v.holds = *v.worst_misses <= orig.d;
    v.reason = v.holds ? "replay confirms bound"
                       : fmt::format("replay finds {} misses per window, over {}", *v.worst_misses,
                                     orig.d);
    return v;
}

// --- rewrite rules -----------------------------------------------------------

ScaledDemand harmonic_scale(const SlaType& host, std::int64_t k) {
    if (k < 1) throw PreconditionError("K must be at least 1");
    require_valid(host, "host");
    ScaledDemand out{{host.c * k, host.t * k, 0, 1}, false};
    out.certified = ct_contained({host.c, host.t, 0, 1}, out.demand);
    return out;
}

SlaType scaled_supply(const SlaType& demand, std::int64_t k) {
    if (k < 1 || demand.t % k != 0) {
        throw PreconditionError(fmt::format("K={} does not divide T={}", k, demand.t));
    }
    return {ceil_div(demand.c, k), demand.t / k, 0, 1};
}

Slots stretch_band_floor(const SlaType& orig, std::int64_t k, std::int64_t j) {
    return k * (orig.c - 1) + (j - 1) * (orig.t - (orig.c - 1)) + 1;
}

StretchOutcome bounded_stretch(const SlaType& orig, std::int64_t k, Slots c_new) {
    require_valid(orig, "original");
    if (k <= 1) throw PreconditionError("stretch factor K must exceed 1");
    const Slots t_new = k * orig.t;
    if (c_new < 0 || c_new > t_new) {
        throw PreconditionError(fmt::format("supply C'={} outside [0, T'={}]", c_new, t_new));
    }
    const SlaType base{orig.c, orig.t, 0, 1};
    if (c_new < stretch_band_floor(base, k, 1)) return {StretchClass::Rejected, 0, std::nullopt};
    Provenance src{TransformKind::BoundedStretch};
    src.k = k;
    if (c_new >= stretch_band_floor(base, k, k)) {
        src.j = k;
        return {StretchClass::Safe, k, BoundedTransform{{c_new, t_new, 0, 1}, orig, {0, 1}, src}};
    }
    std::int64_t j = 1;
    while (c_new >= stretch_band_floor(base, k, j + 1)) ++j;
    src.j = j;
    return {StretchClass::Bounded, j,
            BoundedTransform{{c_new, t_new, 0, 1}, orig, {k - j, k}, src}};
}

ShrinkOutcome bounded_shrink(const SlaType& orig, Slots t_new) {
    require_valid(orig, "original");
    if (!(2 * t_new > orig.t + orig.c && t_new < orig.t && orig.c <= t_new)) {
        throw PreconditionError(fmt::format(
            "period {} outside the shrink band ((T+C)/2, T) = (({}+{})/2, {}) with C <= T'", t_new,
            orig.t, orig.c, orig.t));
    }
    const Slots hyper = checked_lcm(orig.t, t_new);
    TransferBound tb;
    tb.m = hyper / orig.t;
    tb.n = hyper / t_new;
    tb.s = tb.n - tb.m + 1;
    tb.l = ceil_div(tb.m, orig.c + 1);
    Provenance src{TransformKind::BoundedShrink};
    src.period = t_new;
    src.m = tb.m;
    src.n = tb.n;
    src.s = tb.s;
    src.l = tb.l;
    const std::int64_t a = tb.misses();
    MissBound bound = a == 0 ? MissBound{0, 1} : MissBound{a, tb.m};
    return {BoundedTransform{{orig.c, t_new, 0, 1}, orig, bound, src}, tb};
}

MissBound compose_bounds(const MissBound& first, const MissBound& second) {
    if (first.a < 0 || first.a > first.b || second.a < 0 || second.a > second.b || first.b < 1 ||
        second.b < 1) {
        throw PreconditionError("miss bounds need 0 <= a <= b and b >= 1");
    }
    return {first.b * second.a + (second.b - second.a) * first.a, first.b * second.b};
}

SlaType fluid_retime(const FluidSla& fluid, Slots t_new) {
    if (t_new < fluid.tl || t_new > fluid.tu) {
        throw PreconditionError(
            fmt::format("period {} outside [{}, {}]", t_new, fluid.tl, fluid.tu));
    }
    return {ceil_div(fluid.c * t_new, fluid.t), t_new, fluid.d, fluid.w};
}

bool fits_miss_budget(const MissBound& bound, std::int64_t d, std::int64_t w) {
    if (bound.a == 0) return true;
    if (d <= 0 || w < 1) return false;
    if (static_cast<__int128>(bound.a) * w > static_cast<__int128>(d) * bound.b) return false;
    const std::int64_t period = checked_lcm(w, bound.b);
    for (std::int64_t start = 0; start < period; start += w) {
        std::int64_t misses = 0;
        for (std::int64_t blk = start / bound.b; blk * bound.b < start + w; ++blk) {
            const std::int64_t lo = std::max(start, blk * bound.b);
            const std::int64_t hi = std::min(start + w, (blk + 1) * bound.b);
            misses += std::min(bound.a, hi - lo);
        }
        if (misses > d) return false;
    }
    return true;
}

namespace {

bool cheaper(const BoundedTransform& x, const BoundedTransform& y) {
    const Rational ox = x.overhead(), oy = y.overhead();
    if (ox != oy) return ox < oy;
    if (x.result.t != y.result.t) return x.result.t < y.result.t;
    // smaller a/b first
    return static_cast<__int128>(x.bound.a) * y.bound.b < static_cast<__int128>(y.bound.a) * x.bound.b;
}

} // namespace

std::vector<BoundedTransform> gen_transforms(const FluidSla& task, std::span<const Slots> context,
                                             const GenLimits& limits) {
    if (auto v = validate(task)) {
        throw PreconditionError(
            fmt::format("task {} violates {}", to_string(task), v->constraint));
    }
    const SlaType nominal = task.nominal();

    std::set<Slots> periods;
    for (Slots p : context) {
        if (p <= 0) continue;
        periods.insert(p);
        for (std::int64_t j = 2; j <= limits.max_k; ++j) {
            periods.insert(p * j);
            if (p % j == 0) periods.insert(p / j);
        }
    }

    std::vector<BoundedTransform> out;
    out.push_back(identity_transform(nominal));

    if (limits.fluid && task.is_fluid()) {
        for (auto it = periods.lower_bound(task.tl); it != periods.end() && *it <= task.tu; ++it) {
            if (*it == task.t) continue;
            Provenance src{TransformKind::FluidRetime};
            src.period = *it;
            out.push_back({fluid_retime(task, *it), nominal, {0, 1}, src});
        }
    }

    if (limits.rigid) {
        // Only periods already resident: scaling toward derived divisors would
        // admit near-unit supplies such as (1,1).
        for (std::int64_t k = 2; k <= limits.max_k; ++k) {
            if (task.t % k != 0) continue;
            if (std::find(context.begin(), context.end(), task.t / k) == context.end()) continue;
            Provenance src{TransformKind::HarmonicScale};
            src.k = k;
            out.push_back({scaled_supply(nominal, k), nominal, {0, 1}, src});
        }
        if (task.d > 0) {
            for (std::int64_t k = 2; k <= limits.max_k; ++k) {
                if (!periods.contains(k * task.t)) continue;
                for (std::int64_t j = 1; j <= k; ++j) {
                    const MissBound bound = j == k ? MissBound{0, 1} : MissBound{k - j, k};
                    if (!fits_miss_budget(bound, task.d, task.w)) continue;
                    const auto st = bounded_stretch(nominal, k, stretch_band_floor(nominal, k, j));
                    if (st.transform) out.push_back(*st.transform);
                    break;
                }
            }
            for (auto it = periods.upper_bound((task.t + task.c) / 2);
                 it != periods.end() && *it < task.t; ++it) {
                if (2 * *it <= task.t + task.c || task.c > *it) continue;
                auto sh = bounded_shrink(nominal, *it);
                if (fits_miss_budget(sh.transform.bound, task.d, task.w))
                    out.push_back(sh.transform);
            }
        }
    }

    std::stable_sort(out.begin(), out.end(), cheaper);
    // Same period and bound at a higher C is dominated by the earlier, cheaper entry.
    std::vector<BoundedTransform> kept;
    kept.reserve(out.size());
    for (auto& cand : out) {
        const bool dominated = std::any_of(kept.begin(), kept.end(), [&](const auto& k) {
            return k.result.t == cand.result.t && k.result.d == cand.result.d &&
                   k.result.w == cand.result.w && k.bound == cand.bound &&
                   k.result.c <= cand.result.c;
        });
        if (!dominated) kept.push_back(std::move(cand));
    }
    if (kept.size() > limits.max_candidates) {
        const bool identity_kept = std::any_of(
            kept.begin(), kept.begin() + static_cast<std::ptrdiff_t>(limits.max_candidates),
            [](const auto& k) { return k.source.kind == TransformKind::Identity; });
        kept.resize(std::max<std::size_t>(limits.max_candidates, 1));
        if (!identity_kept) kept.back() = identity_transform(nominal);
    }
    return kept;
}

bool certify(const FluidSla& task, const BoundedTransform& t) {
    const SlaType nominal = task.nominal();
    if (t.original != nominal || validate(t.result)) return false;
    switch (t.source.kind) {
    case TransformKind::Identity: return t.result == nominal && t.bound.miss_free();
    case TransformKind::FluidRetime:
        return t.result.t >= task.tl && t.result.t <= task.tu &&
               t.result == fluid_retime(task, t.result.t) && t.bound.miss_free();
    case TransformKind::HarmonicScale: {
        const std::int64_t k = t.source.k;
        return k >= 2 && task.t % k == 0 && t.result == scaled_supply(nominal, k) &&
               harmonic_scale(t.result, k).certified && ct_contained(t.result, nominal) &&
               t.bound.miss_free();
    }
    case TransformKind::BoundedStretch: {
        const auto st = bounded_stretch(nominal, t.source.k, t.result.c);
        return st.transform && st.transform->result == t.result && st.transform->bound == t.bound &&
               fits_miss_budget(t.bound, task.d, task.w);
    }
    case TransformKind::BoundedShrink: {
        const auto sh = bounded_shrink(nominal, t.result.t);
        return sh.transform.result == t.result && sh.transform.bound == t.bound &&
               fits_miss_budget(t.bound, task.d, task.w);
    }
    }
    return false;
}

} // namespace morphosys
