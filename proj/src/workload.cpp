#include <morphosys/arith.hpp>
#include <morphosys/errors.hpp>
#include <morphosys/workload.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <string_view>

namespace morphosys {

namespace {

Slots whole_slots(double value, const char* what) {
    const double r = std::round(value);
    if (std::abs(value - r) > 1e-6) {
        throw PreconditionError(fmt::format("{} of {} slots is not a whole number", what, value));
    }
    return static_cast<Slots>(r);
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
    s = trim(s);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

} // namespace

Slots StreamProfile::base_period_slots(double slot_rate) const {
    return whole_slots(base_period_s() * slot_rate, "base period");
}

Slots StreamProfile::duration_slots(double slot_rate) const {
    return base_period_slots(slot_rate) * static_cast<Slots>(gop_bytes.size());
}

StreamProfile parse_trace(std::istream& in, double frame_rate, std::string id) {
    if (!(frame_rate > 0.0)) throw PreconditionError("frame rate must be positive");
    StreamProfile out;
    out.id = std::move(id);
    out.frame_rate = frame_rate;

    std::string raw;
    std::size_t lineno = 0;
    std::int64_t expected_index = 0;
    bool first = true;
    std::int64_t frames_in_gop = 0;
    std::int64_t gop_len = 0;
    std::int64_t gop_sum = 0;
    std::size_t gop_start_line = 0;

    auto close_gop = [&]() {
        if (gop_len == 0) {
            gop_len = frames_in_gop;
        } else if (frames_in_gop != gop_len) {
            throw ParseError(gop_start_line,
                             fmt::format("GoP of {} frames, expected {} (inconsistent GoP length)",
                                         frames_in_gop, gop_len));
        }
        out.gop_bytes.push_back(gop_sum);
    };

    while (std::getline(in, raw)) {
        ++lineno;
        const std::string_view line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        const auto fields = split(line, ',');
        if (fields.size() != 3) throw ParseError(lineno, "expected index,type,size_bytes");
        std::int64_t index = 0, size = 0;
        if (!parse_number(fields[0], index)) throw ParseError(lineno, "bad frame index");
        const auto type = trim(fields[1]);
        if (type != "I" && type != "P" && type != "B")
            throw ParseError(lineno, fmt::format("unknown frame type '{}'", type));
        if (!parse_number(fields[2], size) || size < 0) throw ParseError(lineno, "bad frame size");
        if (first) {
            if (type != "I") throw ParseError(lineno, "trace must start with an I frame");
            expected_index = index;
        } else if (index != expected_index) {
            throw ParseError(lineno, fmt::format("frame index {} out of sequence, expected {}",
                                                 index, expected_index));
        }
        ++expected_index;
        if (type == "I") {
            if (!first) close_gop();
            frames_in_gop = 0;
            gop_sum = 0;
            gop_start_line = lineno;
        }
        first = false;
        ++frames_in_gop;
        gop_sum += size;
    }
    if (first) throw ParseError(0, "trace has no frames");
    close_gop();
    out.gop_frames = gop_len;
    return out;
}

StreamProfile ingest_trace(const std::filesystem::path& path, double frame_rate) {
    std::ifstream in(path);
    if (!in) throw PreconditionError(fmt::format("cannot open trace '{}'", path.string()));
    return parse_trace(in, frame_rate, path.stem().string());
}

void write_trace(std::ostream& out, const StreamProfile& profile) {
    out << "# stream " << profile.id << ", " << profile.gop_frames << " frames per GoP\n";
    std::int64_t index = 0;
    const std::int64_t n = profile.gop_frames;
    for (std::int64_t bytes : profile.gop_bytes) {
        const std::int64_t rest_frames = n - 1;
        std::int64_t i_bytes = bytes;
        std::int64_t each = 0;
        if (rest_frames > 0) {
            each = (bytes * 6 / 10) / rest_frames;
            i_bytes = bytes - each * rest_frames;
        }
        out << index++ << ",I," << i_bytes << '\n';
        for (std::int64_t f = 1; f < n; ++f) out << index++ << ',' << (f % 3 == 0 ? 'P' : 'B') << ',' << each << '\n';
    }
}

std::vector<StreamProfile> load_catalog(const std::filesystem::path& manifest) {
    std::ifstream in(manifest);
    if (!in) throw PreconditionError(fmt::format("cannot open manifest '{}'", manifest.string()));
    std::vector<StreamProfile> out;
    std::string raw;
    std::size_t lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        const auto line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        const auto fields = split(line, ',');
        double rate = 0.0;
        if (fields.size() != 2 || !parse_number(fields[1], rate) || !(rate > 0.0))
            throw ParseError(lineno, "expected path,frame_rate");
        std::filesystem::path p{std::string(trim(fields[0]))};
        if (p.is_relative()) p = manifest.parent_path() / p;
        try {
            out.push_back(ingest_trace(p, rate));
        } catch (const ParseError& e) {
            throw ParseError(lineno, fmt::format("{}: {}", p.string(), e.what()));
        }
    }
    if (out.empty()) throw ParseError(0, "manifest lists no traces");
    return out;
}

std::vector<StreamProfile> gen_catalog(const CatalogSpec& spec) {
    struct Structure {
        std::int64_t frames;
        double fps;
    };
    static constexpr Structure kStructures[] = {{12, 24.0}, {16, 30.0}, {15, 25.0}};
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    constexpr double kRho = 0.95;
    constexpr double kSpread = 0.3;

    std::vector<StreamProfile> out;
    for (std::size_t s = 0; s < spec.streams; ++s) {
        const auto& st = kStructures[s % 3];
        StreamProfile p;
        p.id = fmt::format("stream{:02}", s);
        p.frame_rate = st.fps;
        p.gop_frames = st.frames;
        const double mbps = spec.min_mbps + (spec.max_mbps - spec.min_mbps) * unit(rng);
        const double mean_gop = mbps * 1e6 / 8.0 * p.base_period_s();
        const auto gops = static_cast<std::size_t>(std::llround(spec.duration_s / p.base_period_s()));
        double x = kSpread * gauss(rng);
        p.gop_bytes.reserve(gops);
        for (std::size_t g = 0; g < gops; ++g) {
            p.gop_bytes.push_back(std::llround(mean_gop * std::exp(x - kSpread * kSpread / 2.0)));
            x = kRho * x + std::sqrt(1.0 - kRho * kRho) * kSpread * gauss(rng);
        }
        out.push_back(std::move(p));
    }
    return out;
}

namespace {

std::int64_t peak_window_bytes(const StreamProfile& profile, std::int64_t theta) {
    std::int64_t peak = 0;
    const auto n = static_cast<std::int64_t>(profile.gop_bytes.size());
    for (std::int64_t start = 0; start < n; start += theta) {
        std::int64_t sum = 0;
        for (std::int64_t i = start; i < std::min(n, start + theta); ++i) sum += profile.gop_bytes[static_cast<std::size_t>(i)];
        peak = std::max(peak, sum);
    }
    return peak;
}

FluidSla sla_from_peak(std::int64_t peak, Slots base, std::int64_t theta, double sigma,
                       double disk_unit, const std::string& id) {
    const Slots t = theta * base;
    const auto c = std::max<Slots>(1, static_cast<Slots>(std::ceil(static_cast<double>(peak) / disk_unit - 1e-9)));
    if (c > t) {
        throw UndeliverableStream(fmt::format(
            "stream {} needs C={} slots per period of T={} slots at theta={}", id, c, t, theta));
    }
    const double s = std::min(sigma, static_cast<double>(theta));
    const Slots tl = std::max<Slots>(1, static_cast<Slots>(std::ceil((theta - s) * static_cast<double>(base) - 1e-9)));
    const Slots tu = static_cast<Slots>(std::floor((theta + s) * static_cast<double>(base) + 1e-9));
    return {c, t, std::min(tl, t), std::max(tu, t), 0, 1};
}

} // namespace

FluidSla derive_sla(const StreamProfile& profile, std::int64_t theta, double sigma,
                    double slot_rate, double disk_unit) {
    if (theta < 1) throw PreconditionError("theta must be at least 1");
    if (sigma < 0.0 || sigma > static_cast<double>(theta))
        throw PreconditionError(fmt::format("sigma {} outside [0, theta={}]", sigma, theta));
    if (!(disk_unit > 0.0)) throw PreconditionError("disk_unit must be positive");
    if (profile.gop_bytes.empty()) throw PreconditionError("profile has no GoPs");
    return sla_from_peak(peak_window_bytes(profile, theta), profile.base_period_slots(slot_rate),
                         theta, sigma, disk_unit, profile.id);
}

FluidSla apply_uptime_policy(const FluidSla& sla, double delta, double interval_s,
                             double slot_rate) {
    if (!(delta > 0.0 && delta < 1.0)) throw PreconditionError("uptime delta must lie in (0, 1)");
    if (!(interval_s > 0.0) || !(slot_rate > 0.0))
        throw PreconditionError("uptime interval and slot rate must be positive");
    FluidSla out = sla;
    const double span = interval_s * slot_rate;
    out.w = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(span / static_cast<double>(sla.t) - 1e-9)));
    out.d = static_cast<std::int64_t>(std::floor((1.0 - delta) * static_cast<double>(out.w) + 1e-9));
    return out;
}

void validate(const WorkloadSpec& spec) {
    if (spec.lambda < 0.0) throw PreconditionError("gen.lambda must be non-negative");
    if (!(spec.rate_unit_s > 0.0)) throw PreconditionError("gen.rate_unit_s must be positive");
    if (spec.fluid_fraction < 0.0 || spec.fluid_fraction > 1.0)
        throw PreconditionError("gen.fluid_fraction must lie in [0, 1]");
    if (spec.up_fraction < 0.0 || spec.up_fraction > 1.0)
        throw PreconditionError("gen.up_fraction must lie in [0, 1]");
    if (spec.beta < 1 || spec.beta > spec.gamma) throw PreconditionError("need 1 <= gen.beta <= gen.gamma");
    if (spec.sigma < 0.0) throw PreconditionError("gen.sigma must be non-negative");
    if (!(spec.delta > 0.0 && spec.delta < 1.0)) throw PreconditionError("gen.delta must lie in (0, 1)");
    if (!(spec.slot_rate > 0.0) || !(spec.disk_unit > 0.0) || !(spec.up_interval_s > 0.0))
        throw PreconditionError("slot rate, disk unit and uptime interval must be positive");
}

std::vector<Arrival> gen_arrivals(const WorkloadSpec& spec, std::span<const StreamProfile> catalog,
                                  Slots horizon) {
    validate(spec);
    if (catalog.empty()) throw PreconditionError("catalog is empty");
    std::vector<Arrival> out;
    if (spec.lambda == 0.0 || horizon <= 0) return out;

    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::map<std::pair<std::size_t, std::int64_t>, std::int64_t> peaks;
    const double rate_per_s = spec.lambda / spec.rate_unit_s;
    const auto span = static_cast<std::int64_t>(spec.gamma - spec.beta + 1);

    double clock_s = 0.0;
    for (std::int64_t id = 0;; ++id) {
        const double u_gap = unit(rng), u_stream = unit(rng), u_theta = unit(rng),
                     u_fluid = unit(rng), u_up = unit(rng);
        clock_s += -std::log1p(-u_gap) / rate_per_s;
        const auto at = static_cast<Slots>(std::floor(clock_s * spec.slot_rate));
        if (at >= horizon) break;

        Arrival a;
        a.id = id;
        a.time = at;
        a.stream = std::min(catalog.size() - 1, static_cast<std::size_t>(u_stream * static_cast<double>(catalog.size())));
        a.theta = spec.beta + std::min(span - 1, static_cast<std::int64_t>(u_theta * static_cast<double>(span)));
        a.fluid = u_fluid < spec.fluid_fraction;
        a.uptime = u_up < spec.up_fraction;
        const auto& profile = catalog[a.stream];
        a.departure = at + profile.duration_slots(spec.slot_rate);

        auto key = std::make_pair(a.stream, a.theta);
        auto it = peaks.find(key);
        if (it == peaks.end()) it = peaks.emplace(key, peak_window_bytes(profile, a.theta)).first;
        try {
            FluidSla sla = sla_from_peak(it->second, profile.base_period_slots(spec.slot_rate), a.theta,
                                         a.fluid ? spec.sigma : 0.0, spec.disk_unit, profile.id);
            if (a.uptime) sla = apply_uptime_policy(sla, spec.delta, spec.up_interval_s, spec.slot_rate);
            a.sla = sla;
        } catch (const UndeliverableStream&) {
            a.sla.reset();
        }
        out.push_back(std::move(a));
    }
    return out;
}

} // namespace morphosys
