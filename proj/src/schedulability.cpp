#include <morphosys/arith.hpp>
#include <morphosys/errors.hpp>
#include <morphosys/schedulability.hpp>

#include <boost/container/small_vector.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <string>

namespace morphosys {

std::string_view to_string(AdmissionTest test) {
    switch (test) {
    case AdmissionTest::LL: return "ll";
    case AdmissionTest::Harmonic: return "harmonic";
    case AdmissionTest::Exact: return "exact";
    }
    return "?";
}

AdmissionTest parse_admission_test(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    if (lower == "ll") return AdmissionTest::LL;
    if (lower == "harmonic") return AdmissionTest::Harmonic;
    if (lower == "exact") return AdmissionTest::Exact;
    throw PreconditionError(fmt::format("unknown admission test '{}'", name));
}

double ll_bound(std::int64_t n) {
    if (n < 1) throw PreconditionError("ll_bound needs n >= 1");
    const double nd = static_cast<double>(n);
    // expm1 keeps precision for large n where 2^(1/n) - 1 is tiny
    return nd * std::expm1(std::log(2.0) / nd);
}

namespace {

std::vector<Slots> sorted_distinct_periods(std::span<const SlaType> tasks) {
    std::vector<Slots> periods;
    periods.reserve(tasks.size());
    for (const auto& t : tasks) periods.push_back(t.t);
    std::sort(periods.begin(), periods.end());
    periods.erase(std::unique(periods.begin(), periods.end()), periods.end());
    return periods;
}

} // namespace

std::size_t harmonic_chain_count(std::span<const Slots> periods) {
    boost::container::small_vector<Slots, 16> tails;
    for (Slots p : periods) {
        std::size_t c = 0;
        while (c < tails.size() && p % tails[c] != 0) ++c;
        if (c == tails.size()) tails.push_back(p);
        else tails[c] = p;
    }
    return tails.size();
}

namespace {

// cluster index for each distinct period, in ascending period order
std::vector<std::size_t> cluster_periods(const std::vector<Slots>& periods, std::size_t& k) {
    std::vector<Slots> tails;
    std::vector<std::size_t> assignment;
    assignment.reserve(periods.size());
    for (Slots p : periods) {
        std::size_t c = 0;
        while (c < tails.size() && p % tails[c] != 0) ++c;
        if (c == tails.size()) tails.push_back(p);
        else tails[c] = p;
        assignment.push_back(c);
    }
    k = tails.size();
    return assignment;
}

} // namespace

HarmonicClustering harmonic_clusters(std::span<const SlaType> tasks) {
    const auto periods = sorted_distinct_periods(tasks);
    std::size_t k = 0;
    const auto assignment = cluster_periods(periods, k);
    HarmonicClustering out;
    out.clusters.resize(k);
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        const auto pos = std::lower_bound(periods.begin(), periods.end(), tasks[i].t) - periods.begin();
        out.clusters[assignment[static_cast<std::size_t>(pos)]].push_back(i);
    }
    return out;
}

std::size_t harmonic_cluster_count(std::span<const SlaType> tasks) {
    boost::container::small_vector<Slots, 32> periods;
    for (const auto& t : tasks) periods.push_back(t.t);
    std::sort(periods.begin(), periods.end());
    periods.erase(std::unique(periods.begin(), periods.end()), periods.end());
    return harmonic_chain_count({periods.data(), periods.size()});
}

Rational total_utilization(std::span<const SlaType> tasks) {
    Rational sum = 0;
    for (const auto& t : tasks) sum += utilization(t);
    return sum;
}

namespace {

// U <= 1, decided exactly; the double sum only short-circuits clear cases.
bool within_unit(std::span<const SlaType> tasks, double approx) {
    if (approx < 1.0 - 1e-12) return true;
    if (approx > 1.0 + 1e-12) return false;
    return total_utilization(tasks) <= 1;
}

bool within_bound(std::span<const SlaType> tasks, double approx, double bound) {
    const double limit = bound + kBoundTolerance;
    if (std::abs(approx - limit) > 1e-12) return approx <= limit;
    return to_double(total_utilization(tasks)) <= limit;
}

bool misses_within_budget(const std::vector<std::uint8_t>& flags, const SlaType& task) {
    const auto w = static_cast<std::size_t>(task.w);
    for (std::size_t start = 0; start < flags.size(); start += w) {
        std::int64_t misses = 0;
        for (std::size_t q = start; q < std::min(flags.size(), start + w); ++q)
            misses += flags[q] == 0 ? 1 : 0;
        if (misses > task.d) return false;
    }
    return true;
}

} // namespace

bool admissible(std::span<const SlaType> tasks, AdmissionTest test, Slots exact_cap) {
    if (tasks.empty()) return true;
    double approx = 0.0;
    for (const auto& t : tasks) approx += approx_utilization(t);
    if (!within_unit(tasks, approx)) return false;

    switch (test) {
    case AdmissionTest::LL:
        if (tasks.size() == 1) return true;
        return within_bound(tasks, approx, ll_bound(static_cast<std::int64_t>(tasks.size())));
    case AdmissionTest::Harmonic: {
        const auto k = harmonic_cluster_count(tasks);
        if (k == 1) return true;
        return within_bound(tasks, approx, ll_bound(static_cast<std::int64_t>(k)));
    }
    case AdmissionTest::Exact: {
        const bool any_misses = std::any_of(tasks.begin(), tasks.end(),
                                            [](const SlaType& t) { return t.d > 0; });
        if (!any_misses) {
            // Synchronous release is the critical instant: if every first job
            // completes in time, no interval in the hyperperiod is missed.
            const auto rt = rm_response_times(tasks);
            return std::none_of(rt.begin(), rt.end(), [](Slots r) { return r < 0; });
        }
        Slots horizon = 1;
        for (const auto& t : tasks) {
            const Slots span = t.d > 0 ? t.w * t.t : t.t;
            horizon = checked_lcm(horizon, span, exact_cap);
        }
        const auto flags = rm_interval_flags(tasks, horizon, exact_cap);
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            if (!misses_within_budget(flags[i], tasks[i])) return false;
        }
        return true;
    }
    }
    return false;
}

std::vector<std::size_t> rm_priority_order(std::span<const SlaType> tasks) {
    std::vector<std::size_t> order(tasks.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (tasks[a].t != tasks[b].t) return tasks[a].t < tasks[b].t;
        return tasks[a].c > tasks[b].c;
    });
    return order;
}

std::vector<std::vector<std::uint8_t>> rm_interval_flags(std::span<const SlaType> tasks,
                                                         Slots horizon, Slots cap) {
    if (horizon > cap) throw HorizonOverflow(horizon, cap);
    for (const auto& t : tasks) {
        if (auto v = validate(t)) {
            throw PreconditionError(fmt::format("task {} violates {}", to_string(t), v->constraint));
        }
        if (horizon <= 0 || horizon % t.t != 0) {
            throw PreconditionError(
                fmt::format("horizon {} is not a positive multiple of period {}", horizon, t.t));
        }
    }
    if (tasks.empty()) return {};
    const auto order = rm_priority_order(tasks);
    const std::size_t n = tasks.size();
    std::vector<std::vector<std::uint8_t>> flags(n);
    std::vector<Slots> remaining(n), next_release(n);
    for (std::size_t i = 0; i < n; ++i) {
        flags[i].reserve(static_cast<std::size_t>(horizon / tasks[i].t));
        remaining[i] = tasks[i].c;
        next_release[i] = tasks[i].t;
    }

    Slots now = 0;
    while (now < horizon) {
        const Slots boundary = *std::min_element(next_release.begin(), next_release.end());
        auto running = std::find_if(order.begin(), order.end(),
                                    [&](std::size_t i) { return remaining[i] > 0; });
        if (running != order.end()) {
            const Slots run = std::min(remaining[*running], boundary - now);
            remaining[*running] -= run;
            now += run;
        } else {
            now = boundary;
        }
        if (now < boundary) continue;
        for (std::size_t i = 0; i < n; ++i) {
            if (next_release[i] != now) continue;
            flags[i].push_back(remaining[i] == 0 ? 1 : 0);
            remaining[i] = tasks[i].c;
            next_release[i] += tasks[i].t;
        }
    }
    return flags;
}

std::vector<std::int64_t> rm_simulate(std::span<const SlaType> tasks, Slots horizon, Slots cap) {
    if (tasks.empty()) return {};
    if (horizon == 0) {
        horizon = 1;
        for (const auto& t : tasks) horizon = checked_lcm(horizon, t.t, cap);
    }
    const auto flags = rm_interval_flags(tasks, horizon, cap);
    std::vector<std::int64_t> misses;
    misses.reserve(flags.size());
    for (const auto& f : flags) misses.push_back(std::count(f.begin(), f.end(), std::uint8_t{0}));
    return misses;
}

std::vector<Slots> rm_response_times(std::span<const SlaType> tasks) {
    const auto order = rm_priority_order(tasks);
    std::vector<Slots> out(tasks.size(), -1);
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        const auto& self = tasks[order[rank]];
        Slots r = self.c;
        while (r <= self.t) {
            Slots next = self.c;
            for (std::size_t h = 0; h < rank; ++h) {
                const auto& hp = tasks[order[h]];
                next += ceil_div(r, hp.t) * hp.c;
            }
            if (next == r) break;
            r = next;
        }
        if (r <= self.t) out[order[rank]] = r;
    }
    return out;
}

} // namespace morphosys
