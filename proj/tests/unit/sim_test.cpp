#include <doctest.h>

#include <morphosys/config.hpp>
#include <morphosys/errors.hpp>
#include <morphosys/sim.hpp>

#include <cmath>
#include <sstream>

using namespace morphosys;

namespace {

// Small, fast configuration over a short synthetic catalog.
SimConfig small_config(double lambda = 2.0) {
    SimConfig cfg;
    cfg.horizon_s = 1800.0;
    cfg.gen.lambda = lambda;
    cfg.repack.node_budget = 300;
    return cfg;
}

std::vector<StreamProfile> small_catalog() { return gen_catalog({9, 900.0, 3.0, 8.0, 3}); }

std::string runs_csv(const MatrixResult& r) {
    std::ostringstream out;
    write_runs_csv(out, r.rows);
    write_summary_csv(out, r.summary);
    return out.str();
}

} // namespace

TEST_SUITE("sim") {

TEST_CASE("colocation efficiency") {
    CHECK(colocation_efficiency(40.0, 100.0) == doctest::Approx(0.6));
    CHECK(colocation_efficiency(100.0, 100.0) == 0.0);
    CHECK(colocation_efficiency(0.0, 100.0) == 1.0);
    CHECK_THROWS_AS((void)colocation_efficiency(1.0, 0.0), UndefinedBaseline);
}

TEST_CASE("zero arrivals waste nothing") {
    SimConfig cfg = small_config(0.0);
    const auto cat = small_catalog();
    const auto m = run(cfg, cat);
    CHECK(m.wasted == 0.0);
    CHECK(m.host_time == 0.0);
    CHECK(m.placements == 0);
}

TEST_CASE("one task at 0.6 for 100 slots wastes 40") {
    StreamProfile p;
    p.id = "flat";
    p.frame_rate = 1.0;
    p.gop_frames = 1;
    p.gop_bytes.assign(10, 6); // 1 s GoPs; 10 slots per GoP at slot_rate 10
    std::vector<StreamProfile> cat{p};
    SimConfig cfg;
    cfg.gen.slot_rate = 10.0;
    cfg.gen.disk_unit = 1.0;
    cfg.gen.beta = cfg.gen.gamma = 1;
    cfg.gen.lambda = 0.01;
    cfg.transform_mode = TransformMode::None;
    // horizon ends between the first and second arrival, after the first departs
    const auto arrivals = gen_arrivals(cfg.gen, cat, 1'000'000'000);
    REQUIRE(arrivals.size() >= 2);
    REQUIRE(arrivals[1].time > arrivals[0].time + 101);
    REQUIRE(arrivals[0].sla);
    CHECK(arrivals[0].sla->c == 6);
    CHECK(arrivals[0].sla->t == 10);
    cfg.horizon_s = static_cast<double>(arrivals[0].time + 101) / 10.0;
    const auto m = run(cfg, cat);
    CHECK(m.placements == 1);
    CHECK(m.wasted == doctest::Approx(40.0));
    CHECK(m.wasted_orig == doctest::Approx(40.0));
    CHECK(m.host_time == doctest::Approx(100.0));
}

TEST_CASE("runs are deterministic and audited") {
    const auto cat = small_catalog();
    for (const char* strategy : {"FF", "BF-NR", "FF-NM", "FF-CM", "BF-UM", "FF-UM-PR"}) {
        SimConfig cfg = apply_strategy(small_config(), strategy);
        cfg.audit = true;
        cfg.record_events = true;
        const auto a = run(cfg, cat);
        const auto b = run(cfg, cat);
        CHECK(a.wasted == b.wasted);
        CHECK(a.placements == b.placements);
        CHECK(a.migrations == b.migrations);
        CHECK(a.placement_log.size() == b.placement_log.size());
        CHECK(a.wasted >= 0.0);
        CHECK(a.placements + a.rejections == static_cast<std::int64_t>(a.placement_log.size()));
    }
}

TEST_CASE("strategy names") {
    const SimConfig base;
    auto c = apply_strategy(base, "FF");
    CHECK(c.fit == FitRule::FirstFit);
    CHECK(c.transform_mode == TransformMode::None);
    CHECK(c.repack.policy == RepackPolicy::NR);
    c = apply_strategy(base, "BF-NR");
    CHECK(c.fit == FitRule::BestFit);
    CHECK(c.transform_mode == TransformMode::All);
    CHECK(c.repack.policy == RepackPolicy::NR);
    c = apply_strategy(base, "FF-CM");
    CHECK(c.repack.policy == RepackPolicy::FR);
    CHECK(c.repack.migration == MigrationPolicy::CM);
    c = apply_strategy(base, "BF-UM-PR");
    CHECK(c.repack.policy == RepackPolicy::PR);
    CHECK(c.repack.migration == MigrationPolicy::UM);
    CHECK_THROWS_AS((void)apply_strategy(base, "XF"), PreconditionError);
    CHECK_THROWS_AS((void)apply_strategy(base, "FF-ZZ"), PreconditionError);
}

TEST_CASE("matrix: baseline against itself and thread independence") {
    const auto cat = small_catalog();
    const std::vector<std::string> strategies{"FF", "BF", "FF-NR", "FF-NM"};
    const std::vector<std::uint64_t> seeds{1, 2, 3};
    const auto one = run_matrix(small_config(), strategies, seeds, cat, 1);
    const auto many = run_matrix(small_config(), strategies, seeds, cat, 3);
    CHECK(runs_csv(one) == runs_csv(many));
    REQUIRE(one.summary.size() == 4);
    CHECK(one.summary[0].strategy == "FF");
    CHECK(one.summary[0].mean == 0.0);
    CHECK(one.summary[0].ci_low == 0.0);
    CHECK(one.summary[0].ci_high == 0.0);
    for (const auto& s : one.summary) {
        CHECK(s.per_seed.size() == 3);
        CHECK(s.mean <= 1.0);
        CHECK(s.ci_low <= s.mean);
        CHECK(s.mean <= s.ci_high);
    }
    CHECK(one.rows.size() == 12);
    const std::vector<std::string> no_ff{"BF"};
    CHECK_THROWS_AS((void)run_matrix(small_config(), no_ff, seeds, cat, 1), PreconditionError);
}

TEST_CASE("CE does not depend on the sampling epoch") {
    const auto cat = small_catalog();
    SimConfig a = apply_strategy(small_config(), "FF-NR");
    SimConfig ff = apply_strategy(small_config(), "FF");
    const double ce_a = colocation_efficiency(run(a, cat).wasted, run(ff, cat).wasted);
    SimConfig b = a, ffb = ff;
    for (SimConfig* c : {&b, &ffb}) {
        c->epoch_s = 7.0;
        c->audit = true;
    }
    const double ce_b = colocation_efficiency(run(b, cat).wasted, run(ffb, cat).wasted);
    CHECK(ce_a == doctest::Approx(ce_b));
}

TEST_CASE("mean and interval") {
    const std::vector<double> xs{1.0, 2.0, 3.0};
    const auto m = mean_ci95(xs);
    CHECK(m.mean == doctest::Approx(2.0));
    CHECK(m.half_width == doctest::Approx(1.959964 * 1.0 / std::sqrt(3.0)).epsilon(1e-4));
    const std::vector<double> one{5.0};
    CHECK(mean_ci95(one).half_width == 0.0);
}

TEST_CASE("csv columns") {
    std::ostringstream out;
    const std::vector<RunRow> rows{{"FF", 4, {}}};
    write_runs_csv(out, rows);
    const auto text = out.str();
    CHECK(text.rfind("strategy,seed,wasted,wasted_orig,host_time,placements,rejections,repacks,migrations", 0) == 0);
    std::ostringstream sum;
    write_summary_csv(sum, std::vector<CeSummary>{{"FF", 0.0, 0.0, 0.0, {}}});
    CHECK(sum.str() == "strategy,mean_ce,ci_low,ci_high\nFF,0.000000,0.000000,0.000000\n");
}

TEST_CASE("config dump round trip") {
    Setup s;
    set_option(s, "gen.lambda", "2.5");
    set_option(s, "sim.strategies", "FF,BF-CM");
    set_option(s, "repack.epsilon", "0.1");
    set_option(s, "sim.seeds", "3");
    const auto text = dump_setup(s);
    std::istringstream in(text);
    const auto back = parse_setup(in);
    CHECK(dump_setup(back) == text);
    CHECK(back.sim.gen.lambda == 2.5);
    CHECK(back.strategies == std::vector<std::string>{"FF", "BF-CM"});
    CHECK(back.seed_list() == std::vector<std::uint64_t>{1, 2, 3});
}

TEST_CASE("config errors carry line numbers") {
    std::istringstream in("gen.lambda = 1\n\n# c\nbogus.key = 3\n");
    try {
        (void)parse_setup(in);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 4);
    }
    std::istringstream bad("gen.lambda = fast\n");
    CHECK_THROWS_AS((void)parse_setup(bad), ParseError);
    Setup s;
    CHECK_THROWS_AS(set_option(s, "sim.fit", "worst"), PreconditionError);
}

TEST_CASE("dumped config reproduces the run") {
    Setup s;
    s.sim = small_config();
    s.catalog_spec = {9, 900.0, 3.0, 8.0, 3};
    s.strategies = {"FF", "FF-NR"};
    std::istringstream in(dump_setup(s));
    const auto back = parse_setup(in);
    const auto cat_a = resolve_catalog(s, ".");
    const auto cat_b = resolve_catalog(back, ".");
    const auto seeds = s.seed_list();
    const auto a = run_matrix(s.sim, s.strategies, seeds, cat_a, 1);
    const auto b = run_matrix(back.sim, back.strategies, back.seed_list(), cat_b, 1);
    CHECK(runs_csv(a) == runs_csv(b));
}

}
