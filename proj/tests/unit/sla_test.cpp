#include <doctest.h>

#include <morphosys/errors.hpp>
#include <morphosys/sla.hpp>

#include <cstdint>
#include <vector>

using namespace morphosys;

TEST_SUITE("sla") {

TEST_CASE("validate names the broken constraint") {
    CHECK_FALSE(validate(SlaType{2, 4, 0, 1}));
    auto v = validate(SlaType{5, 4, 0, 1});
    REQUIRE(v);
    CHECK(v->constraint == "C <= T");
    auto f = validate(FluidSla{2, 4, 6, 8, 0, 1});
    REQUIRE(f);
    CHECK(f->constraint == "Tl <= T");
    CHECK(validate(SlaType{1, 4, 3, 2})->constraint == "D <= W");
    CHECK(validate(SlaType{1, 4, 0, 0})->constraint == "W >= 1");
    CHECK_FALSE(validate(FluidSla{2, 4, 2, 8, 1, 5}));
}

TEST_CASE("satisfies_ct on aligned intervals") {
    CHECK(satisfies_ct(ScheduleWindow::parse("101010"), 1, 2));
    CHECK_FALSE(satisfies_ct(ScheduleWindow::parse("110000"), 1, 2));
    CHECK_THROWS_AS((void)satisfies_ct(ScheduleWindow::parse("10101"), 1, 2), WindowLengthError);
    // a (1,4) schedule re-laid on 5-slot boundaries: slots 3,4 then 11 leave [5,10) empty
    std::vector<std::uint8_t> s(20, 0);
    for (int i : {3, 4, 11, 12, 19}) s[static_cast<std::size_t>(i)] = 1;
    CHECK(satisfies_ct(ScheduleWindow(s), 1, 4));
    CHECK_FALSE(satisfies_ct(ScheduleWindow(s), 1, 5));
}

TEST_CASE("interval_flags") {
    CHECK(interval_flags(ScheduleWindow::parse("1100 0000 1100"), 2, 4) ==
          std::vector<std::uint8_t>{1, 0, 1});
    CHECK(interval_flags(ScheduleWindow::parse("11111111"), 3, 4) == std::vector<std::uint8_t>{1, 1});
    CHECK(interval_flags(ScheduleWindow::parse("1000 1000"), 2, 4) == std::vector<std::uint8_t>{0, 0});
}

TEST_CASE("satisfies_ctdw") {
    CHECK(satisfies_ctdw(ScheduleWindow::parse("10 00 10"), SlaType{1, 2, 1, 3}));
    CHECK_FALSE(satisfies_ctdw(ScheduleWindow::parse("10 00"), SlaType{1, 2, 0, 1}));
    // two empty 30-slot intervals out of five
    std::vector<std::uint8_t> slots(150, 0);
    slots[0] = slots[60] = slots[120] = 1;
    CHECK(satisfies_ctdw(ScheduleWindow(slots), SlaType{1, 30, 2, 5}));
    slots[60] = 0;
    CHECK_FALSE(satisfies_ctdw(ScheduleWindow(slots), SlaType{1, 30, 2, 5}));
    CHECK_THROWS_AS((void)satisfies_ctdw(ScheduleWindow::parse("1010"), SlaType{1, 2, 1, 3}),
                    WindowLengthError);
}

TEST_CASE("utilization is exact") {
    CHECK(utilization(SlaType{1, 2}) == make_ratio(1, 2));
    CHECK(utilization(SlaType{2, 5}) == make_ratio(2, 5));
    CHECK(utilization(FluidSla{4, 10, 8, 12, 0, 1}) == make_ratio(2, 5));
}

// every window up to length 12
static std::vector<ScheduleWindow> windows(std::size_t len) {
    std::vector<ScheduleWindow> out;
    for (std::uint32_t m = 0; m < (1U << len); ++m) {
        std::vector<std::uint8_t> s(len);
        for (std::size_t i = 0; i < len; ++i) s[i] = (m >> i) & 1U;
        out.emplace_back(std::move(s));
    }
    return out;
}

TEST_CASE("shorthand (C,T) agrees with (C,T,0,1)") {
    for (Slots t = 1; t <= 4; ++t)
        for (Slots c = 1; c <= t; ++c)
            for (const auto& w : windows(static_cast<std::size_t>(3 * t)))
                CHECK(satisfies_ct(w, c, t) == satisfies_ctdw(w, SlaType{c, t, 0, 1}));
}

TEST_CASE("flags plus per-window zero count equals satisfies_ctdw") {
    for (std::int64_t wlen = 1; wlen <= 3; ++wlen) {
        for (Slots t = 1; t <= 4; ++t) {
            if (wlen * t > 12) continue;
            const auto len = static_cast<std::size_t>(12 / (wlen * t) * wlen * t);
            for (Slots c = 1; c <= t; ++c) {
                for (std::int64_t d = 0; d <= wlen; ++d) {
                    const SlaType sla{c, t, d, wlen};
                    for (const auto& w : windows(len)) {
                        const auto f = interval_flags(w, c, t);
                        bool ok = true;
                        for (std::size_t s = 0; s < f.size(); s += static_cast<std::size_t>(wlen)) {
                            std::int64_t zeros = 0;
                            for (std::size_t q = s; q < s + static_cast<std::size_t>(wlen); ++q)
                                zeros += f[q] == 0;
                            ok = ok && zeros <= d;
                        }
                        REQUIRE(ok == satisfies_ctdw(w, sla));
                    }
                }
            }
        }
    }
}

TEST_CASE("adding allocation never breaks satisfaction") {
    for (const auto& w : windows(12)) {
        for (auto [c, t] : {std::pair<Slots, Slots>{1, 2}, {2, 3}, {2, 4}, {3, 6}}) {
            if (!satisfies_ct(w, c, t)) continue;
            for (std::size_t i = 0; i < w.size(); ++i) {
                if (w[i]) continue;
                std::vector<std::uint8_t> s(w.slots().begin(), w.slots().end());
                s[i] = 1;
                REQUIRE(satisfies_ct(ScheduleWindow(s), c, t));
            }
        }
    }
}

TEST_CASE("periodic extension preserves satisfaction") {
    for (const auto& w : windows(12))
        for (Slots t : {2, 3, 4, 6})
            for (Slots c = 1; c <= t; ++c) REQUIRE(satisfies_ct(w, c, t) == satisfies_ct(w.repeated(2), c, t));
}

}
