#pragma once

#include <morphosys/rational.hpp>
#include <morphosys/sla.hpp>

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace morphosys {

/// Which rewrite rule produced a scheduled SLA.
enum class TransformKind {
    Identity,
    FluidRetime,    ///< period renegotiated inside [Tl, Tu], C rounded up
    HarmonicScale,  ///< (KC, KT) demand served by a (C, T) supply
    BoundedStretch, ///< period multiplied by K, bounded misses per K intervals
    BoundedShrink,  ///< period shortened, bounded misses per hyperperiod
};

/// Transform provenance and the parameters that produced it. Unused fields are 0.
struct Provenance {
    TransformKind kind = TransformKind::Identity;
    std::int64_t k = 0;
    std::int64_t j = 0;
    std::int64_t period = 0;
    std::int64_t m = 0;
    std::int64_t n = 0;
    std::int64_t s = 0;
    std::int64_t l = 0;

    /// Comma-free label, e.g. `stretch:K=2;J=1`.
    [[nodiscard]] std::string label() const;

    friend bool operator==(const Provenance&, const Provenance&) = default;
};

/// At most `a` unsatisfied original intervals in every aligned block of `b`.
/// `{0, 1}` is a miss-free substitution.
struct MissBound {
    std::int64_t a = 0;
    std::int64_t b = 1;

    [[nodiscard]] bool miss_free() const noexcept { return a == 0; }

    friend bool operator==(const MissBound&, const MissBound&) = default;
};

/// A rewritten SLA together with the guarantee it gives the original.
struct BoundedTransform {
    SlaType result;
    SlaType original;
    MissBound bound;
    Provenance source;

    /// utilization(result) - utilization(original); may be negative for bounded rewrites.
    [[nodiscard]] Rational overhead() const;
    [[nodiscard]] double approx_overhead() const noexcept;

    friend bool operator==(const BoundedTransform&, const BoundedTransform&) = default;
};

[[nodiscard]] BoundedTransform identity_transform(const SlaType& sla);

/// Counting detail for a period shrink over one hyperperiod.
struct TransferBound {
    std::int64_t m = 0; ///< lcm / T original intervals
    std::int64_t n = 0; ///< lcm / T' supply intervals
    std::int64_t s = 0; ///< satisfied through full overlap, n - m + 1
    std::int64_t l = 0; ///< satisfied through pigeonhole, ceil(m / (C + 1))

    [[nodiscard]] std::int64_t misses() const noexcept { return m - std::max(s, l); }
};

// --- subtyping ---------------------------------------------------------------

/// Which of the three closed-form period brackets certifies `next` as a subtype
/// of `orig` (1, 2 or 3), or 0 when none does. Sufficient only.
[[nodiscard]] int ct_condition(const SlaType& next, const SlaType& orig);

/// Exact schedule-set containment for miss-free SLAs: the worst-case allocation
/// that any `next`-satisfying schedule leaves in each aligned `orig` interval.
[[nodiscard]] bool ct_contained(const SlaType& next, const SlaType& orig);

struct SubtypeVerdict {
    bool holds = false;
    int condition = 0; ///< closed-form bracket that certifies the verdict, 0 if none
};

/// `(next.c, next.t)` subtype of `(orig.c, orig.t)`. Exact: false means some
/// schedule satisfies `next` but not `orig`.
[[nodiscard]] SubtypeVerdict subtype_ct(const SlaType& next, const SlaType& orig);

/// The D/W-aware sufficient condition (1, 2, 3) that holds, or 0.
[[nodiscard]] int ctdw_condition(const SlaType& next, const SlaType& orig);

/// `D/W <= D'/W'`, necessary for any subtype relation with misses.
[[nodiscard]] bool miss_ratio_admissible(const SlaType& next, const SlaType& orig);

struct CtdwVerdict {
    bool holds = false;
    int condition = 0;
    bool ratio_ok = false;
    std::optional<std::int64_t> worst_misses; ///< adversarial misses per orig window, when checked
    std::string reason;
};

/// Sufficient-only subtype check for SLAs with misses. True requires the miss
/// ratio guard, one closed-form condition, and an adversarial replay over the
/// joint hyperperiod confirming no `orig` window exceeds D'. False means "not
/// shown safe".
[[nodiscard]] CtdwVerdict subtype_ctdw(const SlaType& next, const SlaType& orig,
                                       Slots replay_cap = 1'000'000);

/// Maximum number of unsatisfied `orig` intervals in any aligned W'-window,
/// over every schedule that satisfies `next`. Throws HorizonOverflow when
/// lcm(W*T, W'*T') exceeds `cap`.
[[nodiscard]] std::int64_t worst_window_misses(const SlaType& next, const SlaType& orig,
                                               Slots cap = 1'000'000);

// --- rewrite rules -----------------------------------------------------------

struct ScaledDemand {
    SlaType demand;
    bool certified = false;
};

/// A `(c, t)` supply satisfies the demand `(K c, K t)`.
[[nodiscard]] ScaledDemand harmonic_scale(const SlaType& host, std::int64_t k);

/// `(ceil(C/K), T/K)`: K of these intervals tile one demand interval and
/// together supply at least C. Requires K | T.
[[nodiscard]] SlaType scaled_supply(const SlaType& demand, std::int64_t k);

enum class StretchClass { Rejected, Bounded, Safe };

struct StretchOutcome {
    StretchClass cls = StretchClass::Rejected;
    std::int64_t j = 0;
    std::optional<BoundedTransform> transform; ///< empty when rejected
};

/// Smallest supply in band `j` for a stretch by `k`: K(C-1) + (J-1)(T-(C-1)) + 1.
[[nodiscard]] Slots stretch_band_floor(const SlaType& orig, std::int64_t k, std::int64_t j);

/// Classifies a `(c_new, k * orig.t)` supply for the demand `orig`.
[[nodiscard]] StretchOutcome bounded_stretch(const SlaType& orig, std::int64_t k, Slots c_new);

struct ShrinkOutcome {
    BoundedTransform transform;
    TransferBound detail;
};

/// Keeps C and shortens the period to `t_new`, with (T+C)/2 < t_new < T.
[[nodiscard]] ShrinkOutcome bounded_shrink(const SlaType& orig, Slots t_new);

/// Chains two bounded substitutions.
[[nodiscard]] MissBound compose_bounds(const MissBound& first, const MissBound& second);

/// `(ceil(C T'/T), T', D, W)` for `T'` inside `[Tl, Tu]`.
[[nodiscard]] SlaType fluid_retime(const FluidSla& fluid, Slots t_new);

/// True iff a substitution missing at most `a` per aligned block of `b`
/// intervals keeps every aligned `w`-window at `d` misses or fewer.
[[nodiscard]] bool fits_miss_budget(const MissBound& bound, std::int64_t d, std::int64_t w);

struct GenLimits {
    std::int64_t max_k = 8;
    std::size_t max_candidates = 32;
    bool fluid = true; ///< emit fluid retimings
    bool rigid = true; ///< emit scalings and bounded rewrites
};

/// Candidate rewrites of `task` for a host whose resident periods are `context`,
/// cheapest overhead first. Always contains the identity.
[[nodiscard]] std::vector<BoundedTransform> gen_transforms(const FluidSla& task,
                                                           std::span<const Slots> context,
                                                           const GenLimits& limits = {});

/// Re-derives `t` from `task` and checks the guarantee it claims.
[[nodiscard]] bool certify(const FluidSla& task, const BoundedTransform& t);

} // namespace morphosys
