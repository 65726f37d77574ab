#pragma once

#include <morphosys/rational.hpp>

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace morphosys {

/// Time is discretized into unit slots.
using Slots = std::int64_t;

/// Periodic resource demand or supply: `c` slots in every aligned interval of
/// `t` slots, with at most `d` unsatisfied intervals in every aligned group of
/// `w` intervals. `(c, t)` is shorthand for `(c, t, 0, 1)`.
struct SlaType {
    Slots c = 1;
    Slots t = 1;
    std::int64_t d = 0;
    std::int64_t w = 1;

    [[nodiscard]] bool miss_free() const noexcept { return d == 0; }

    friend bool operator==(const SlaType&, const SlaType&) = default;
    friend auto operator<=>(const SlaType&, const SlaType&) = default;
};

/// An SLA whose period may be renegotiated anywhere in `[tl, tu]`.
struct FluidSla {
    Slots c = 1;
    Slots t = 1;
    Slots tl = 1;
    Slots tu = 1;
    std::int64_t d = 0;
    std::int64_t w = 1;

    static FluidSla rigid(const SlaType& s) { return {s.c, s.t, s.t, s.t, s.d, s.w}; }

    [[nodiscard]] SlaType nominal() const noexcept { return {c, t, d, w}; }
    [[nodiscard]] bool is_fluid() const noexcept { return tl < tu; }

    friend bool operator==(const FluidSla&, const FluidSla&) = default;
};

/// Names the first violated type constraint, e.g. "C <= T".
struct Violation {
    std::string constraint;
};

[[nodiscard]] std::optional<Violation> validate(const SlaType& sla);
[[nodiscard]] std::optional<Violation> validate(const FluidSla& sla);

[[nodiscard]] Rational utilization(const SlaType& sla);
[[nodiscard]] Rational utilization(const FluidSla& sla);

/// `c / t` in floating point; only for prefilters and reporting.
[[nodiscard]] inline double approx_utilization(const SlaType& sla) noexcept {
    return static_cast<double>(sla.c) / static_cast<double>(sla.t);
}

/// Finite binary allocation schedule, extended periodically when interpreted
/// as an infinite schedule.
class ScheduleWindow {
public:
    ScheduleWindow() = default;
    explicit ScheduleWindow(std::vector<std::uint8_t> slots);

    /// Parses a string of '0'/'1' characters; spaces and underscores are ignored.
    static ScheduleWindow parse(std::string_view bits);

    [[nodiscard]] std::size_t size() const noexcept { return slots_.size(); }
    [[nodiscard]] bool operator[](std::size_t i) const noexcept { return slots_[i] != 0; }
    [[nodiscard]] std::span<const std::uint8_t> slots() const noexcept { return slots_; }

    /// The window concatenated with itself `times` times.
    [[nodiscard]] ScheduleWindow repeated(std::size_t times) const;

    [[nodiscard]] std::string to_string() const;

private:
    std::vector<std::uint8_t> slots_;
};

/// True iff every aligned interval `[qT, qT+T)` holds at least `c` allocated slots.
/// Throws WindowLengthError unless the window length is a positive multiple of `t`.
[[nodiscard]] bool satisfies_ct(const ScheduleWindow& window, Slots c, Slots t);

/// Per aligned interval: 1 iff it holds at least `c` allocated slots.
[[nodiscard]] std::vector<std::uint8_t> interval_flags(const ScheduleWindow& window, Slots c,
                                                       Slots t);

/// True iff every aligned group of `w` intervals has at least `w - d` satisfied
/// intervals. The window length must be a positive multiple of `w * t`.
[[nodiscard]] bool satisfies_ctdw(const ScheduleWindow& window, const SlaType& sla);

[[nodiscard]] std::string to_string(const SlaType& sla);
[[nodiscard]] std::string to_string(const FluidSla& sla);
std::ostream& operator<<(std::ostream& os, const SlaType& sla);
std::ostream& operator<<(std::ostream& os, const FluidSla& sla);

} // namespace morphosys
