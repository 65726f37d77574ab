#pragma once

#include <morphosys/rational.hpp>
#include <morphosys/schedulability.hpp>
#include <morphosys/sla.hpp>
#include <morphosys/transform.hpp>

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace morphosys {

using TaskId = std::int64_t;
using HostId = std::int64_t;

/// A placed request: what the client asked for and what the host schedules.
struct Resident {
    TaskId id = 0;
    FluidSla request;
    BoundedTransform active;
};

/// One unit-capacity physical machine.
class HostState {
public:
    explicit HostState(HostId id) : id_(id) {}

    [[nodiscard]] HostId id() const noexcept { return id_; }
    [[nodiscard]] const std::vector<Resident>& residents() const noexcept { return residents_; }
    [[nodiscard]] bool empty() const noexcept { return residents_.empty(); }

    /// Sum of active C/T.
    [[nodiscard]] Rational allocated_util() const;
    /// Sum of original C/T, the basis for migration candidacy.
    [[nodiscard]] Rational original_util() const;
    [[nodiscard]] double approx_util() const noexcept { return approx_util_; }
    [[nodiscard]] double approx_original_util() const noexcept { return approx_orig_; }

    [[nodiscard]] std::vector<SlaType> active_slas() const;

    void add(Resident r);
    /// Removes and returns the resident, or nothing when absent.
    std::optional<Resident> remove(TaskId id);

private:
    void refresh();

    HostId id_;
    std::vector<Resident> residents_;
    double approx_util_ = 0.0;
    double approx_orig_ = 0.0;
};

/// Host-level admission settings shared by placement and repacking.
struct AdmissionConfig {
    AdmissionTest test = AdmissionTest::Harmonic;
    Slots exact_cap = kDefaultExactCap;
};

/// True iff `host`'s active SLAs plus `extra` pass the admission test. A
/// horizon overflow in the exact test counts as not admissible.
[[nodiscard]] bool fits(const HostState& host, const SlaType& extra, const AdmissionConfig& adm);
[[nodiscard]] bool fits(std::span<const SlaType> resident, double resident_util,
                        const SlaType& extra, const AdmissionConfig& adm);

/// Every powered host, keyed by id, plus task and period indexes.
class Cluster {
public:
    [[nodiscard]] const std::map<HostId, HostState>& hosts() const noexcept { return hosts_; }
    [[nodiscard]] std::size_t host_count() const noexcept { return hosts_.size(); }
    [[nodiscard]] std::size_t task_count() const noexcept { return where_.size(); }
    [[nodiscard]] const HostState* host(HostId id) const;
    [[nodiscard]] std::optional<HostId> host_of(TaskId task) const;

    /// Distinct active periods across all hosts, ascending.
    [[nodiscard]] std::vector<Slots> periods() const;

    /// Powers on a host with the lowest unused id.
    HostId open_host();
    /// Powers on the given unused id.
    void open_host(HostId id);
    /// Places a resident on an existing host.
    void place(HostId host, Resident r);
    /// Removes a task; the host powers down when it becomes empty.
    std::optional<Resident> remove(TaskId task);

    [[nodiscard]] const Rational& allocated_util() const noexcept { return allocated_; }
    [[nodiscard]] const Rational& original_util() const noexcept { return original_; }

private:
    std::map<HostId, HostState> hosts_;
    std::set<HostId> free_ids_;
    HostId next_id_ = 0;
    std::unordered_map<TaskId, HostId> where_;
    std::map<Slots, std::size_t> period_refs_;
    Rational allocated_ = 0;
    Rational original_ = 0;
};

enum class FitRule { FirstFit, BestFit };

[[nodiscard]] std::string_view to_string(FitRule fit);
[[nodiscard]] FitRule parse_fit_rule(std::string_view name);

/// FF: lowest-id host that stays admissible with `sla`. BF: the feasible host
/// with the highest allocated utilization, ties to the lower id. Pure query.
[[nodiscard]] std::optional<HostId> assign(const Cluster& cluster, const SlaType& sla,
                                           FitRule fit, const AdmissionConfig& adm);

/// Called when no host accepts a request. Returns the host that now holds the
/// request if the hook placed it.
using ForcedRepackHook =
    std::function<std::optional<HostId>(Cluster&, TaskId, const FluidSla&)>;

struct WasPolicy {
    FitRule fit = FitRule::FirstFit;
    AdmissionConfig admission;
    GenLimits limits;
    bool transforms = true;
    ForcedRepackHook forced_repack; ///< empty: no forced repacking
    std::optional<std::size_t> host_cap;
};

enum class PlacementOutcome { Placed, PlacedAfterRepack, NewHost, Rejected };

[[nodiscard]] std::string_view to_string(PlacementOutcome outcome);

struct PlacementDecision {
    PlacementOutcome outcome = PlacementOutcome::Rejected;
    std::optional<HostId> host;
    std::optional<BoundedTransform> transform;
    std::size_t attempts = 0; ///< candidate SLAs tried
};

/// Online admission of one request: identity first, then each generated
/// transform in order across all hosts, then forced repacking if configured,
/// then a fresh host.
PlacementDecision was_admit(Cluster& cluster, TaskId id, const FluidSla& request,
                            const WasPolicy& policy);

/// Re-checks admission on every host and the certificate of every resident.
/// Returns a description of the first problem found.
[[nodiscard]] std::optional<std::string> audit(const Cluster& cluster, const AdmissionConfig& adm);

} // namespace morphosys
