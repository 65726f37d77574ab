#pragma once

#include <morphosys/placement.hpp>
#include <morphosys/rational.hpp>
#include <morphosys/transform.hpp>

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace morphosys {

enum class RepackPolicy { NR, PR, FR };
enum class MigrationPolicy { NM, CM, UM };
enum class SearchOrder { DFS, BFS };

[[nodiscard]] std::string_view to_string(RepackPolicy p);
[[nodiscard]] std::string_view to_string(MigrationPolicy p);
[[nodiscard]] std::string_view to_string(SearchOrder o);
[[nodiscard]] RepackPolicy parse_repack_policy(std::string_view name);
[[nodiscard]] MigrationPolicy parse_migration_policy(std::string_view name);
[[nodiscard]] SearchOrder parse_search_order(std::string_view name);

struct RepackConfig {
    RepackPolicy policy = RepackPolicy::NR;
    Slots epoch = 0;                 ///< PR epoch length in slots
    MigrationPolicy migration = MigrationPolicy::NM;
    double epsilon = 0.02;            ///< CM candidacy margin
    SearchOrder order = SearchOrder::DFS;
    std::uint64_t node_budget = 0;   ///< 0: no node cap
    double time_budget_s = 300.0;    ///< used only when node_budget is 0
    std::size_t max_groups = 0;      ///< NM hosts tried per forced repack, 0: all
};

/// Throws PreconditionError for an out-of-range field.
void validate(const RepackConfig& cfg);

/// NM: every host alone. UM: all hosts. CM: hosts whose original utilization
/// sits at least epsilon below the mean allocated utilization of busy hosts.
[[nodiscard]] std::vector<std::vector<HostId>> select_hosts(const Cluster& cluster,
                                                            const RepackConfig& cfg);

// --- tree search core --------------------------------------------------------

struct SearchTask {
    TaskId id = 0;
    std::vector<BoundedTransform> options; ///< best-first; must be non-empty
};

struct SearchProblem {
    std::vector<SearchTask> tasks;
    AdmissionConfig admission;
    /// Optional extra leaf packing order (task indices), e.g. the current
    /// layout; empty to skip.
    std::vector<std::size_t> hint_order;
};

struct SearchOptions {
    bool prune = true;
    SearchOrder order = SearchOrder::DFS;
    std::uint64_t node_budget = 0; ///< 0: unlimited
    double time_budget_s = 0.0;    ///< 0: unlimited
};

/// Per task (in problem order): chosen option and bin. Bins are numbered in
/// first-fit order.
struct Packing {
    std::vector<std::size_t> option;
    std::vector<std::size_t> bin;
    std::size_t bins = 0;
    Rational overhead = 0;
};

struct SearchResult {
    std::optional<Packing> best; ///< empty when nothing beat the incumbent
    std::uint64_t nodes = 0;
    bool complete = false;       ///< the whole tree was explored or pruned
};

/// Incumbent to beat: `bins`, then `overhead` (nullopt: any packing within
/// `bins` hosts wins).
struct Incumbent {
    std::size_t bins = 0;
    std::optional<Rational> overhead;
};

/// Branches over each task's options in ascending option-count order and
/// packs each leaf first-fit, in branch order, by ascending period or in the
/// hint order, whichever needs fewest bins. Returns the lexicographically best (bins,
/// overhead) packing strictly better than the incumbent.
[[nodiscard]] SearchResult search_packing(const SearchProblem& problem, const SearchOptions& opts,
                                          const Incumbent& incumbent);

// --- cluster-level repacking -------------------------------------------------

struct RepackContext {
    RepackConfig config;
    AdmissionConfig admission;
    GenLimits limits;
    bool transforms = true;
};

struct RepackRecord {
    Slots time = 0;
    std::vector<HostId> group;
    std::size_t hosts_before = 0;
    std::size_t hosts_after = 0;
    std::uint64_t nodes = 0;
    std::size_t migrations = 0;
    bool adopted = false;
    std::optional<HostId> request_host; ///< where a pending request landed
};

struct PendingRequest {
    TaskId id = 0;
    FluidSla request;
};

/// Repacks the group's residents (and the pending request, if any) and adopts
/// the result only when it is strictly better. With a pending request, any
/// packing that fits it inside the group counts as better.
RepackRecord repack(Cluster& cluster, const std::vector<HostId>& group, const RepackContext& ctx,
                    const std::optional<PendingRequest>& pending = std::nullopt);

enum class RepackTrigger { PeriodicTick, WasFailure };

/// NR never acts; PR acts on ticks at epoch boundaries; FR acts on WAS failure.
[[nodiscard]] bool repack_due(const RepackConfig& cfg, Slots clock, RepackTrigger trigger);

/// Runs select_hosts and repack when due. On a WAS failure, stops at the first
/// group that absorbs the pending request.
std::vector<RepackRecord> maybe_repack(Cluster& cluster, Slots clock, const RepackContext& ctx,
                                       RepackTrigger trigger,
                                       const std::optional<PendingRequest>& pending = std::nullopt);

/// A WAS hook that performs forced repacking with `ctx` and appends records to `log`.
[[nodiscard]] ForcedRepackHook make_forced_repack_hook(const RepackContext& ctx,
                                                       std::vector<RepackRecord>* log,
                                                       const Slots* clock);

} // namespace morphosys
