#pragma once

#include <morphosys/sla.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace morphosys {

/// Per-GoP byte volumes of one stream.
struct StreamProfile {
    std::string id;
    double frame_rate = 25.0;
    std::int64_t gop_frames = 1;
    std::vector<std::int64_t> gop_bytes;

    /// Seconds between I-frames.
    [[nodiscard]] double base_period_s() const noexcept {
        return static_cast<double>(gop_frames) / frame_rate;
    }
    [[nodiscard]] double duration_s() const noexcept {
        return base_period_s() * static_cast<double>(gop_bytes.size());
    }
    /// Base period in slots; throws PreconditionError unless it is a whole number.
    [[nodiscard]] Slots base_period_slots(double slot_rate) const;
    [[nodiscard]] Slots duration_slots(double slot_rate) const;
};

/// Reads `index,type,size_bytes` lines (type I, P or B). Blank lines and lines
/// starting with '#' are skipped. Throws ParseError with the offending line.
[[nodiscard]] StreamProfile parse_trace(std::istream& in, double frame_rate, std::string id);
[[nodiscard]] StreamProfile ingest_trace(const std::filesystem::path& path, double frame_rate);

/// Writes a profile as a frame trace that parses back to the same GoP sums.
void write_trace(std::ostream& out, const StreamProfile& profile);

/// Manifest lines `path,frame_rate`; relative paths resolve against the
/// manifest's directory.
[[nodiscard]] std::vector<StreamProfile> load_catalog(const std::filesystem::path& manifest);

struct CatalogSpec {
    std::size_t streams = 30;
    double duration_s = 3600.0;
    double min_mbps = 3.0;
    double max_mbps = 8.0;
    std::uint64_t seed = 1;
};

/// Synthetic streams cycling through three GoP structures: 12 frames at 24 fps,
/// 16 at 30 fps and 15 at 25 fps.
[[nodiscard]] std::vector<StreamProfile> gen_catalog(const CatalogSpec& spec);

/// Period `theta` GoPs, demand the ceiling of the peak theta-GoP byte volume
/// over `disk_unit`, and admissible periods `(theta -/+ sigma)` GoPs. Throws
/// UndeliverableStream when the demand exceeds the period.
[[nodiscard]] FluidSla derive_sla(const StreamProfile& profile, std::int64_t theta, double sigma,
                                  double slot_rate, double disk_unit);

/// W intervals per `interval_s` of wall time, D = floor((1 - delta) W).
[[nodiscard]] FluidSla apply_uptime_policy(const FluidSla& sla, double delta, double interval_s,
                                           double slot_rate);

struct WorkloadSpec {
    double lambda = 1.0;      ///< arrivals per rate_unit_s
    double rate_unit_s = 60.0;
    double fluid_fraction = 0.0;
    double sigma = 1.0;
    std::int64_t beta = 1;
    std::int64_t gamma = 10;
    double up_fraction = 0.0;
    double delta = 0.999;
    double up_interval_s = 300.0;
    double slot_rate = 120.0;
    double disk_unit = 60000.0;
    std::uint64_t seed = 1;
};

void validate(const WorkloadSpec& spec);

struct Arrival {
    std::int64_t id = 0;
    Slots time = 0;
    Slots departure = 0;
    std::size_t stream = 0;
    std::int64_t theta = 1;
    bool fluid = false;
    bool uptime = false;
    std::optional<FluidSla> sla; ///< empty when the stream is undeliverable
};

/// Poisson arrivals over `[0, horizon)`. Each arrival consumes the same five
/// random draws, so two specs differing only in fractions, sigma or delta see
/// the same arrival times, streams and theta values.
[[nodiscard]] std::vector<Arrival> gen_arrivals(const WorkloadSpec& spec,
                                                std::span<const StreamProfile> catalog,
                                                Slots horizon);

} // namespace morphosys
