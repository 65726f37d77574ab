// Command-line front end: simulation runs, subtype checks, transform listing,
// snapshot repacking, trace ingestion and synthetic catalog generation.

#include <morphosys/config.hpp>
#include <morphosys/errors.hpp>
#include <morphosys/repack.hpp>
#include <morphosys/sim.hpp>
#include <morphosys/transform.hpp>
#include <morphosys/workload.hpp>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace morphosys;

namespace {

std::vector<std::int64_t> parse_ints(const std::string& text, const char* what) {
    std::vector<std::int64_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::int64_t v = 0;
        auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (ec != std::errc() || p != item.data() + item.size())
            throw CLI::ValidationError(what, fmt::format("'{}' is not an integer list", text));
        out.push_back(v);
    }
    return out;
}

SlaType parse_sla(const std::string& text, const char* what) {
    const auto v = parse_ints(text, what);
    if (v.size() != 2 && v.size() != 4) throw CLI::ValidationError(what, "expected C,T or C,T,D,W");
    SlaType s{v[0], v[1], 0, 1};
    if (v.size() == 4) {
        s.d = v[2];
        s.w = v[3];
    }
    if (auto bad = validate(s)) throw PreconditionError(fmt::format("{} {} violates {}", what, text, bad->constraint));
    return s;
}

FluidSla parse_fluid(const std::string& text, const char* what) {
    const auto v = parse_ints(text, what);
    FluidSla f;
    if (v.size() == 6) {
        f = {v[0], v[1], v[2], v[3], v[4], v[5]};
    } else if (v.size() == 4) {
        f = {v[0], v[1], v[2], v[3], 0, 1};
    } else if (v.size() == 2) {
        f = {v[0], v[1], v[1], v[1], 0, 1};
    } else {
        throw CLI::ValidationError(what, "expected C,T or C,T,Tl,Tu or C,T,Tl,Tu,D,W");
    }
    if (auto bad = validate(f)) throw PreconditionError(fmt::format("{} {} violates {}", what, text, bad->constraint));
    return f;
}

void write_file(const std::string& path, const std::function<void(std::ostream&)>& body) {
    std::ofstream out(path);
    if (!out) throw PreconditionError(fmt::format("cannot write '{}'", path));
    body(out);
}

struct SimulateArgs {
    std::string config;
    std::vector<std::string> sets;
    std::uint64_t budget_nodes = 0;
    std::string out, summary, placements, repacks;
    bool dump = false;
    unsigned threads = 0;
};

int cmd_simulate(const SimulateArgs& a) {
    Setup setup;
    std::filesystem::path base = std::filesystem::current_path();
    if (!a.config.empty()) {
        setup = load_setup(a.config);
        base = std::filesystem::absolute(a.config).parent_path();
    }
    for (const auto& kv : a.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw CLI::ValidationError("--set", "expected key=value");
        try {
            set_option(setup, kv.substr(0, eq), kv.substr(eq + 1));
        } catch (const PreconditionError& e) {
            throw CLI::ValidationError("--set", e.what());
        }
    }
    if (const char* env = std::getenv("MORPHOSYS_SEED")) set_option(setup, "sim.seed", env);
    if (a.budget_nodes > 0) setup.sim.repack.node_budget = a.budget_nodes;
    if (a.dump) {
        std::cout << dump_setup(setup);
        return 0;
    }

    const auto catalog = resolve_catalog(setup, base);
    const auto seeds = setup.seed_list();
    if (a.placements.empty() && a.repacks.empty()) {
        const auto result = run_matrix(setup.sim, setup.strategies, seeds, catalog, a.threads);
        if (a.out.empty()) write_runs_csv(std::cout, result.rows);
        else write_file(a.out, [&](std::ostream& o) { write_runs_csv(o, result.rows); });
        if (!a.summary.empty())
            write_file(a.summary, [&](std::ostream& o) { write_summary_csv(o, result.summary); });
        return 0;
    }
    // Event logs are per run: only the first strategy and seed.
    SimConfig cfg = apply_strategy(setup.sim, setup.strategies.at(0));
    cfg.gen.seed = seeds.front();
    cfg.record_events = true;
    RunRow row{setup.strategies.front(), seeds.front(), run(cfg, catalog)};
    if (a.out.empty()) write_runs_csv(std::cout, std::span(&row, 1));
    else write_file(a.out, [&](std::ostream& o) { write_runs_csv(o, std::span(&row, 1)); });
    if (!a.placements.empty())
        write_file(a.placements, [&](std::ostream& o) { write_placement_log(o, row.metrics.placement_log); });
    if (!a.repacks.empty())
        write_file(a.repacks, [&](std::ostream& o) { write_repack_log(o, row.metrics.repack_log); });
    return 0;
}

int cmd_check_subtype(const std::string& next_text, const std::string& orig_text) {
    const SlaType next = parse_sla(next_text, "--new");
    const SlaType orig = parse_sla(orig_text, "--orig");
    if (next.miss_free() && orig.miss_free()) {
        const auto v = subtype_ct(next, orig);
        if (!v.holds) std::cout << "subtype: false\n";
        else if (v.condition > 0) std::cout << "subtype: true (condition " << v.condition << ")\n";
        else std::cout << "subtype: true (containment)\n";
        return 0;
    }
    const auto v = subtype_ctdw(next, orig);
    if (v.holds) std::cout << "subtype: true (condition " << v.condition << ")\n";
    else std::cout << "subtype: false\n";
    std::cerr << v.reason << '\n';
    return 0;
}

int cmd_transform(const std::string& task_text, const std::string& context_text, const GenLimits& limits) {
    const FluidSla task = parse_fluid(task_text, "--task");
    std::vector<Slots> context;
    if (!context_text.empty()) context = parse_ints(context_text, "--context");
    for (const auto& t : gen_transforms(task, context, limits)) {
        fmt::print("{},{},{},{},{},{},{}\n", t.result.c, t.result.t, t.result.d, t.result.w, t.bound.a,
                   t.bound.b, t.source.label());
    }
    return 0;
}

struct RepackArgs {
    std::string snapshot;
    std::string config;
    std::uint64_t budget_nodes = 0;
    std::string migration;
};

int cmd_repack(const RepackArgs& a) {
    Setup setup;
    if (!a.config.empty()) setup = load_setup(a.config);
    if (const char* env = std::getenv("MORPHOSYS_SEED")) set_option(setup, "sim.seed", env);
    if (!a.migration.empty()) setup.sim.repack.migration = parse_migration_policy(a.migration);
    if (a.budget_nodes > 0) setup.sim.repack.node_budget = a.budget_nodes;

    std::ifstream in(a.snapshot);
    if (!in) throw PreconditionError(fmt::format("cannot open snapshot '{}'", a.snapshot));
    Cluster cluster;
    std::string raw;
    std::size_t lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        if (raw.empty() || raw[0] == '#' || raw.rfind("host,", 0) == 0) continue;
        std::vector<std::int64_t> v;
        try {
            v = parse_ints(raw, "snapshot");
        } catch (const CLI::ValidationError&) {
            throw ParseError(lineno, "expected host,task,C,T,Tl,Tu,D,W");
        }
        if (v.size() != 8) throw ParseError(lineno, "expected host,task,C,T,Tl,Tu,D,W");
        const FluidSla f{v[2], v[3], v[4], v[5], v[6], v[7]};
        if (auto bad = validate(f)) throw ParseError(lineno, fmt::format("SLA violates {}", bad->constraint));
        if (cluster.host(v[0]) == nullptr) cluster.open_host(v[0]);
        cluster.place(v[0], {v[1], f, identity_transform(f.nominal())});
    }

    RepackContext ctx;
    ctx.config = setup.sim.repack;
    ctx.admission = setup.sim.admission;
    ctx.limits = setup.sim.limits;
    ctx.transforms = setup.sim.transform_mode != TransformMode::None;
    for (const auto& group : select_hosts(cluster, ctx.config)) {
        const auto rec = repack(cluster, group, ctx);
        fmt::print(std::cerr, "group of {} hosts: {} -> {}, {} nodes, {} migrations\n", rec.hosts_before,
                   rec.hosts_before, rec.hosts_after, rec.nodes, rec.migrations);
    }
    std::cout << "host,task,C,T,D,W,a,b,source\n";
    for (const auto& [id, host] : cluster.hosts()) {
        for (const auto& r : host.residents()) {
            const auto& t = r.active;
            fmt::print("{},{},{},{},{},{},{},{},{}\n", id, r.id, t.result.c, t.result.t, t.result.d,
                       t.result.w, t.bound.a, t.bound.b, t.source.label());
        }
    }
    return 0;
}

struct IngestArgs {
    std::string trace;
    double frame_rate = 25.0;
    std::int64_t theta = 0;
    double sigma = 0.0;
    double slot_rate = 120.0;
    double disk_unit = 60000.0;
};

int cmd_ingest(const IngestArgs& a) {
    const auto profile = ingest_trace(a.trace, a.frame_rate);
    if (a.theta > 0) {
        const auto f = derive_sla(profile, a.theta, a.sigma, a.slot_rate, a.disk_unit);
        std::cout << "C,T,Tl,Tu,D,W\n";
        fmt::print("{},{},{},{},{},{}\n", f.c, f.t, f.tl, f.tu, f.d, f.w);
        return 0;
    }
    std::cout << "gop,bytes\n";
    for (std::size_t i = 0; i < profile.gop_bytes.size(); ++i) fmt::print("{},{}\n", i, profile.gop_bytes[i]);
    return 0;
}

int cmd_gen_catalog(const std::string& dir, const CatalogSpec& spec) {
    std::filesystem::create_directories(dir);
    const auto catalog = gen_catalog(spec);
    const auto manifest = std::filesystem::path(dir) / "manifest.csv";
    std::ofstream m(manifest);
    if (!m) throw PreconditionError(fmt::format("cannot write '{}'", manifest.string()));
    m << "# path,frame_rate\n";
    for (const auto& p : catalog) {
        const std::string name = p.id + ".trace";
        write_file((std::filesystem::path(dir) / name).string(), [&](std::ostream& o) { write_trace(o, p); });
        m << name << ',' << p.frame_rate << '\n';
    }
    std::cout << manifest.string() << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Periodic SLA colocation toolkit"};
    app.require_subcommand(1, 1);

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "run strategies over seeds and print per-run CSV");
    simulate->add_option("--config", sim.config, "key = value configuration file")->check(CLI::ExistingFile);
    simulate->add_option("--set", sim.sets, "override one key, e.g. gen.lambda=2");
    simulate->add_option("--budget-nodes", sim.budget_nodes, "repack search node budget (replaces the wall-clock budget)");
    simulate->add_option("--out", sim.out, "per-run CSV path (default stdout)");
    simulate->add_option("--summary", sim.summary, "CE summary CSV path");
    simulate->add_option("--placements", sim.placements, "placement event log for the first strategy and seed");
    simulate->add_option("--repacks", sim.repacks, "repack event log for the first strategy and seed");
    simulate->add_option("--threads", sim.threads, "worker threads (default: hardware concurrency)");
    simulate->add_flag("--dump-config", sim.dump, "print the effective configuration and exit");

    std::string next_text, orig_text;
    auto* check = app.add_subcommand("check-subtype", "decide whether --new can replace --orig");
    check->add_option("--new", next_text, "C,T[,D,W]")->required();
    check->add_option("--orig", orig_text, "C,T[,D,W]")->required();

    std::string task_text, context_text;
    GenLimits limits;
    auto* transform = app.add_subcommand("transform", "list candidate rewrites, one C,T,D,W,a,b,source line each");
    transform->add_option("--task", task_text, "C,T,Tl,Tu,D,W")->required();
    transform->add_option("--context", context_text, "comma-separated host periods");
    transform->add_option("--max-k", limits.max_k, "largest multiplier or divisor");
    transform->add_option("--max-candidates", limits.max_candidates, "candidate cap");

    RepackArgs rp;
    auto* repack_cmd = app.add_subcommand("repack", "repack a host snapshot and print the new placement");
    repack_cmd->add_option("--snapshot", rp.snapshot, "CSV host,task,C,T,Tl,Tu,D,W")->required()->check(CLI::ExistingFile);
    repack_cmd->add_option("--config", rp.config, "configuration file")->check(CLI::ExistingFile);
    repack_cmd->add_option("--budget-nodes", rp.budget_nodes, "search node budget");
    repack_cmd->add_option("--migration", rp.migration, "nm, cm or um");

    IngestArgs ing;
    auto* ingest = app.add_subcommand("ingest", "parse a frame trace; print GoP volumes or a derived SLA");
    ingest->add_option("--trace", ing.trace, "index,type,size_bytes file")->required()->check(CLI::ExistingFile);
    ingest->add_option("--frame-rate", ing.frame_rate, "frames per second");
    ingest->add_option("--theta", ing.theta, "GoPs per period; prints the SLA when set");
    ingest->add_option("--sigma", ing.sigma, "fluidity in GoPs");
    ingest->add_option("--slot-rate", ing.slot_rate, "slots per second");
    ingest->add_option("--disk-unit", ing.disk_unit, "bytes served per slot");

    std::string cat_dir;
    CatalogSpec cat;
    auto* gencat = app.add_subcommand("gen-catalog", "write synthetic traces and a manifest");
    gencat->add_option("--out", cat_dir, "output directory")->required();
    gencat->add_option("--streams", cat.streams, "number of streams");
    gencat->add_option("--seed", cat.seed, "generator seed");
    gencat->add_option("--duration-s", cat.duration_s, "stream length in seconds");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*simulate) return cmd_simulate(sim);
        if (*check) return cmd_check_subtype(next_text, orig_text);
        if (*transform) return cmd_transform(task_text, context_text, limits);
        if (*repack_cmd) return cmd_repack(rp);
        if (*ingest) return cmd_ingest(ing);
        if (*gencat) return cmd_gen_catalog(cat_dir, cat);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
