#include <morphosys/errors.hpp>
#include <morphosys/sla.hpp>

#include <fmt/format.h>

#include <ostream>

namespace morphosys {

std::optional<Violation> validate(const SlaType& sla) {
    if (sla.c <= 0) return Violation{"0 < C"};
    if (sla.t <= 0) return Violation{"0 < T"};
    if (sla.c > sla.t) return Violation{"C <= T"};
    if (sla.w < 1) return Violation{"W >= 1"};
    if (sla.d < 0) return Violation{"0 <= D"};
    if (sla.d > sla.w) return Violation{"D <= W"};
    return std::nullopt;
}

std::optional<Violation> validate(const FluidSla& sla) {
    if (auto v = validate(sla.nominal())) return v;
    if (sla.tl <= 0) return Violation{"0 < Tl"};
    if (sla.tl > sla.t) return Violation{"Tl <= T"};
    if (sla.t > sla.tu) return Violation{"T <= Tu"};
    return std::nullopt;
}

Rational utilization(const SlaType& sla) { return make_ratio(sla.c, sla.t); }

Rational utilization(const FluidSla& sla) { return make_ratio(sla.c, sla.t); }

ScheduleWindow::ScheduleWindow(std::vector<std::uint8_t> slots) : slots_(std::move(slots)) {
    for (auto& s : slots_) s = s ? 1 : 0;
}

ScheduleWindow ScheduleWindow::parse(std::string_view bits) {
    std::vector<std::uint8_t> slots;
    slots.reserve(bits.size());
    for (char ch : bits) {
        switch (ch) {
        case '0': slots.push_back(0); break;
        case '1': slots.push_back(1); break;
        case ' ':
        case '_': break;
        default: throw PreconditionError(fmt::format("invalid schedule character '{}'", ch));
        }
    }
    return ScheduleWindow(std::move(slots));
}

ScheduleWindow ScheduleWindow::repeated(std::size_t times) const {
    std::vector<std::uint8_t> out;
    out.reserve(slots_.size() * times);
    for (std::size_t i = 0; i < times; ++i) out.insert(out.end(), slots_.begin(), slots_.end());
    return ScheduleWindow(std::move(out));
}

std::string ScheduleWindow::to_string() const {
    std::string s;
    s.reserve(slots_.size());
    for (auto b : slots_) s.push_back(b ? '1' : '0');
    return s;
}

namespace {

void require_multiple(std::size_t length, Slots unit, const char* what) {
    if (unit <= 0) throw PreconditionError(fmt::format("{} must be positive", what));
    if (length == 0 || length % static_cast<std::size_t>(unit) != 0) {
        throw WindowLengthError(
            fmt::format("window length {} is not a positive multiple of {} = {}", length, what, unit));
    }
}

} // namespace

std::vector<std::uint8_t> interval_flags(const ScheduleWindow& window, Slots c, Slots t) {
    require_multiple(window.size(), t, "T");
    const auto slots = window.slots();
    const auto period = static_cast<std::size_t>(t);
    std::vector<std::uint8_t> flags(slots.size() / period);
    for (std::size_t q = 0; q < flags.size(); ++q) {
        Slots ones = 0;
        for (std::size_t i = q * period; i < (q + 1) * period; ++i) ones += slots[i];
        flags[q] = ones >= c ? 1 : 0;
    }
    return flags;
}

bool satisfies_ct(const ScheduleWindow& window, Slots c, Slots t) {
    for (auto f : interval_flags(window, c, t))
        if (!f) return false;
    return true;
}

bool satisfies_ctdw(const ScheduleWindow& window, const SlaType& sla) {
    if (sla.w < 1) throw PreconditionError("W must be at least 1");
    require_multiple(window.size(), sla.w * sla.t, "W*T");
    const auto flags = interval_flags(window, sla.c, sla.t);
    const auto group = static_cast<std::size_t>(sla.w);
    for (std::size_t g = 0; g < flags.size(); g += group) {
        std::int64_t satisfied = 0;
        for (std::size_t i = g; i < g + group; ++i) satisfied += flags[i];
        if (satisfied < sla.w - sla.d) return false;
    }
    return true;
}

std::string to_string(const SlaType& sla) {
    return fmt::format("({},{},{},{})", sla.c, sla.t, sla.d, sla.w);
}

std::string to_string(const FluidSla& sla) {
    return fmt::format("({},{},{},{},{},{})", sla.c, sla.t, sla.tl, sla.tu, sla.d, sla.w);
}

std::ostream& operator<<(std::ostream& os, const SlaType& sla) { return os << to_string(sla); }
std::ostream& operator<<(std::ostream& os, const FluidSla& sla) { return os << to_string(sla); }

} // namespace morphosys
