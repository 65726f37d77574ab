#pragma once

#include <morphosys/placement.hpp>
#include <morphosys/repack.hpp>
#include <morphosys/transform.hpp>
#include <morphosys/workload.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace morphosys {

enum class TransformMode { All, Fluid, NonFluid, None };

[[nodiscard]] std::string_view to_string(TransformMode m);
[[nodiscard]] TransformMode parse_transform_mode(std::string_view name);

struct SimConfig {
    double horizon_s = 10800.0;
    double epoch_s = 60.0;         ///< audit interval when `audit` is set
    bool audit = false;            ///< re-check every host at each epoch
    FitRule fit = FitRule::FirstFit;
    AdmissionConfig admission;
    TransformMode transform_mode = TransformMode::All;
    GenLimits limits;
    RepackConfig repack;
    double repack_epoch_s = 600.0; ///< PR epoch, converted to slots at run time
    WorkloadSpec gen;
    std::size_t host_cap = 0;      ///< 0: unlimited
    bool record_events = false;

    [[nodiscard]] Slots horizon_slots() const;
};

/// Throws PreconditionError on an invalid configuration.
void validate(const SimConfig& cfg);

struct PlacementRecord {
    Slots time = 0;
    TaskId task = 0;
    PlacementOutcome outcome = PlacementOutcome::Rejected;
    std::optional<HostId> host;
    std::string source;
};

struct SimMetrics {
    double wasted = 0.0;      ///< integral of unallocated capacity on powered hosts, host-slots
    double wasted_orig = 0.0; ///< same against original utilizations
    double host_time = 0.0;   ///< integral of the powered host count
    std::int64_t placements = 0;
    std::int64_t rejections = 0;
    std::int64_t repacks = 0; ///< adopted repackings
    std::int64_t migrations = 0;
    std::int64_t transformed = 0; ///< placements using a non-identity SLA
    std::size_t peak_hosts = 0;
    std::vector<PlacementRecord> placement_log;
    std::vector<RepackRecord> repack_log;
};

/// One simulation over the given catalog. Deterministic in (cfg, catalog).
[[nodiscard]] SimMetrics run(const SimConfig& cfg, std::span<const StreamProfile> catalog);

/// 1 - wx / wff. Throws UndefinedBaseline when wff is 0.
[[nodiscard]] double colocation_efficiency(double wx, double wff);

/// Applies a strategy name: FF or BF alone disable transformations and
/// repacking; `-NR` enables transformations; `-NM`, `-CM`, `-UM` add forced
/// repacking with that migration policy; a trailing `-PR` switches the
/// repacking trigger to periodic epochs.
[[nodiscard]] SimConfig apply_strategy(const SimConfig& base, std::string_view strategy);

struct RunRow {
    std::string strategy;
    std::uint64_t seed = 0;
    SimMetrics metrics;
};

struct CeSummary {
    std::string strategy;
    double mean = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::vector<double> per_seed;
};

struct MatrixResult {
    std::vector<RunRow> rows;         ///< strategy-major, seeds in given order
    std::vector<CeSummary> summary;   ///< one per strategy, in given order
};

/// Runs every (strategy, seed) pair and reports CE against FF on the same seed
/// with a normal 95% interval. Throws PreconditionError without FF.
[[nodiscard]] MatrixResult run_matrix(const SimConfig& base, std::span<const std::string> strategies,
                                      std::span<const std::uint64_t> seeds,
                                      std::span<const StreamProfile> catalog, unsigned threads = 0);

/// Mean and normal-approximation 95% half width of a sample.
struct MeanCi {
    double mean = 0.0;
    double half_width = 0.0;
};
[[nodiscard]] MeanCi mean_ci95(std::span<const double> xs);

void write_runs_csv(std::ostream& out, std::span<const RunRow> rows);
void write_summary_csv(std::ostream& out, std::span<const CeSummary> summary);
void write_placement_log(std::ostream& out, std::span<const PlacementRecord> log);
void write_repack_log(std::ostream& out, std::span<const RepackRecord> log);

} // namespace morphosys
