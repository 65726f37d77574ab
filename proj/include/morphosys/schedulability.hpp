#pragma once

#include <morphosys/rational.hpp>
#include <morphosys/sla.hpp>

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace morphosys {

enum class AdmissionTest { LL, Harmonic, Exact };

[[nodiscard]] std::string_view to_string(AdmissionTest test);
/// Accepts "ll", "harmonic", "exact" in any case. Throws PreconditionError otherwise.
[[nodiscard]] AdmissionTest parse_admission_test(std::string_view name);

/// n(2^(1/n) - 1).
[[nodiscard]] double ll_bound(std::int64_t n);

/// Indices into the task set, grouped so that periods inside a group form a
/// divisibility chain.
struct HarmonicClustering {
    std::vector<std::vector<std::size_t>> clusters;

    [[nodiscard]] std::size_t k() const noexcept { return clusters.size(); }
};

/// Greedy rule: distinct periods are visited in ascending order and each joins
/// the first cluster whose largest period divides it, else opens a new cluster.
/// Tasks sharing a period share a cluster; within a cluster, task indices keep
/// input order.
[[nodiscard]] HarmonicClustering harmonic_clusters(std::span<const SlaType> tasks);

/// The same greedy count over distinct periods already sorted ascending.
[[nodiscard]] std::size_t harmonic_chain_count(std::span<const Slots> periods);

/// Number of clusters only, without materializing them.
[[nodiscard]] std::size_t harmonic_cluster_count(std::span<const SlaType> tasks);

/// Absolute tolerance applied when a utilization sum meets an irrational bound.
inline constexpr double kBoundTolerance = 1e-9;

/// Default slot cap for the exact test's simulation horizon.
inline constexpr Slots kDefaultExactCap = 1'000'000;

/// Unit-capacity host admission. Throws HorizonOverflow from the exact test
/// when the simulation horizon exceeds `exact_cap`.
[[nodiscard]] bool admissible(std::span<const SlaType> tasks, AdmissionTest test,
                              Slots exact_cap = kDefaultExactCap);

[[nodiscard]] Rational total_utilization(std::span<const SlaType> tasks);

/// Task indices in rate-monotonic priority order: shorter period, then larger C,
/// then input order.
[[nodiscard]] std::vector<std::size_t> rm_priority_order(std::span<const SlaType> tasks);

/// Per task and per aligned interval in `[0, horizon)`: 1 iff the task received
/// C slots before the interval ended. Unserved demand is dropped at the interval
/// boundary. `horizon` must be a multiple of every period.
[[nodiscard]] std::vector<std::vector<std::uint8_t>>
rm_interval_flags(std::span<const SlaType> tasks, Slots horizon, Slots cap = kDefaultExactCap);

/// Unsatisfied interval count per task over `horizon` (0 means one hyperperiod).
[[nodiscard]] std::vector<std::int64_t> rm_simulate(std::span<const SlaType> tasks,
                                                    Slots horizon = 0,
                                                    Slots cap = kDefaultExactCap);

/// Worst-case response time of each task under synchronous release, or -1 when
/// it exceeds the task's period.
[[nodiscard]] std::vector<Slots> rm_response_times(std::span<const SlaType> tasks);

} // namespace morphosys
