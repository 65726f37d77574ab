#include <morphosys/config.hpp>
#include <morphosys/errors.hpp>

#include <fmt/format.h>

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace morphosys {

std::vector<std::uint64_t> Setup::seed_list() const {
    std::vector<std::uint64_t> out;
    for (std::size_t i = 0; i < seeds; ++i) out.push_back(seed + i);
    return out;
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double as_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
        throw PreconditionError(fmt::format("{}: '{}' is not a number", key, v));
    return out;
}

std::int64_t as_int(const std::string& key, const std::string& v) {
    std::int64_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
        throw PreconditionError(fmt::format("{}: '{}' is not an integer", key, v));
    return out;
}

std::uint64_t as_count(const std::string& key, const std::string& v) {
    const auto x = as_int(key, v);
    if (x < 0) throw PreconditionError(fmt::format("{}: must be non-negative", key));
    return static_cast<std::uint64_t>(x);
}

bool as_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw PreconditionError(fmt::format("{}: '{}' is not a boolean", key, v));
}

std::vector<std::string> as_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

using Setter = std::function<void(Setup&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"sim.horizon_s", [](Setup& s, auto& k, auto& v) { s.sim.horizon_s = as_double(k, v); }},
        {"sim.slot_rate", [](Setup& s, auto& k, auto& v) { s.sim.gen.slot_rate = as_double(k, v); }},
        {"sim.epoch_s", [](Setup& s, auto& k, auto& v) { s.sim.epoch_s = as_double(k, v); }},
        {"sim.audit", [](Setup& s, auto& k, auto& v) { s.sim.audit = as_bool(k, v); }},
        {"sim.fit", [](Setup& s, auto&, auto& v) { s.sim.fit = parse_fit_rule(v); }},
        {"sim.admission", [](Setup& s, auto&, auto& v) { s.sim.admission.test = parse_admission_test(v); }},
        {"sim.exact_horizon_cap", [](Setup& s, auto& k, auto& v) { s.sim.admission.exact_cap = as_int(k, v); }},
        {"sim.host_cap", [](Setup& s, auto& k, auto& v) { s.sim.host_cap = as_count(k, v); }},
        {"sim.seed", [](Setup& s, auto& k, auto& v) { s.seed = as_count(k, v); }},
        {"sim.seeds", [](Setup& s, auto& k, auto& v) { s.seeds = as_count(k, v); }},
        {"sim.strategies", [](Setup& s, auto&, auto& v) { s.strategies = as_list(v); }},
        {"sim.record_events", [](Setup& s, auto& k, auto& v) { s.sim.record_events = as_bool(k, v); }},
        {"gen.lambda", [](Setup& s, auto& k, auto& v) { s.sim.gen.lambda = as_double(k, v); }},
        {"gen.rate_unit_s", [](Setup& s, auto& k, auto& v) { s.sim.gen.rate_unit_s = as_double(k, v); }},
        {"gen.fluid_fraction", [](Setup& s, auto& k, auto& v) { s.sim.gen.fluid_fraction = as_double(k, v); }},
        {"gen.sigma", [](Setup& s, auto& k, auto& v) { s.sim.gen.sigma = as_double(k, v); }},
        {"gen.beta", [](Setup& s, auto& k, auto& v) { s.sim.gen.beta = as_int(k, v); }},
        {"gen.gamma", [](Setup& s, auto& k, auto& v) { s.sim.gen.gamma = as_int(k, v); }},
        {"gen.up_fraction", [](Setup& s, auto& k, auto& v) { s.sim.gen.up_fraction = as_double(k, v); }},
        {"gen.delta", [](Setup& s, auto& k, auto& v) { s.sim.gen.delta = as_double(k, v); }},
        {"gen.up_interval_s", [](Setup& s, auto& k, auto& v) { s.sim.gen.up_interval_s = as_double(k, v); }},
        {"gen.disk_unit", [](Setup& s, auto& k, auto& v) { s.sim.gen.disk_unit = as_double(k, v); }},
        {"gen.catalog", [](Setup& s, auto&, auto& v) { s.catalog = v; }},
        {"gen.catalog_streams", [](Setup& s, auto& k, auto& v) { s.catalog_spec.streams = as_count(k, v); }},
        {"gen.catalog_seed", [](Setup& s, auto& k, auto& v) { s.catalog_spec.seed = as_count(k, v); }},
        {"gen.catalog_duration_s", [](Setup& s, auto& k, auto& v) { s.catalog_spec.duration_s = as_double(k, v); }},
        {"transform.mode", [](Setup& s, auto&, auto& v) { s.sim.transform_mode = parse_transform_mode(v); }},
        {"transform.max_k", [](Setup& s, auto& k, auto& v) { s.sim.limits.max_k = as_int(k, v); }},
        {"transform.max_candidates", [](Setup& s, auto& k, auto& v) { s.sim.limits.max_candidates = as_count(k, v); }},
        {"repack.policy", [](Setup& s, auto&, auto& v) { s.sim.repack.policy = parse_repack_policy(v); }},
        {"repack.epoch_s", [](Setup& s, auto& k, auto& v) { s.sim.repack_epoch_s = as_double(k, v); }},
        {"repack.migration", [](Setup& s, auto&, auto& v) { s.sim.repack.migration = parse_migration_policy(v); }},
        {"repack.epsilon", [](Setup& s, auto& k, auto& v) { s.sim.repack.epsilon = as_double(k, v); }},
        {"repack.order", [](Setup& s, auto&, auto& v) { s.sim.repack.order = parse_search_order(v); }},
        {"repack.budget_nodes", [](Setup& s, auto& k, auto& v) { s.sim.repack.node_budget = as_count(k, v); }},
        {"repack.time_budget_s", [](Setup& s, auto& k, auto& v) { s.sim.repack.time_budget_s = as_double(k, v); }},
        {"repack.max_groups", [](Setup& s, auto& k, auto& v) { s.sim.repack.max_groups = as_count(k, v); }},
    };
    return table;
}

} // namespace

void set_option(Setup& setup, const std::string& key, const std::string& value) {
    const auto it = setters().find(key);
    if (it == setters().end()) throw PreconditionError(fmt::format("unknown key '{}'", key));
    it->second(setup, key, value);
}

Setup parse_setup(std::istream& in) {
    Setup s;
    std::string raw;
    std::size_t lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        const auto hash = raw.find('#');
        const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError(lineno, "expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            set_option(s, key, value);
        } catch (const PreconditionError& e) {
            throw ParseError(lineno, e.what());
        }
    }
    return s;
}

Setup load_setup(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw PreconditionError(fmt::format("cannot open config '{}'", path.string()));
    return parse_setup(in);
}

std::string dump_setup(const Setup& s) {
    const auto& g = s.sim.gen;
    const auto& r = s.sim.repack;
    std::string list;
    for (std::size_t i = 0; i < s.strategies.size(); ++i) list += (i ? "," : "") + s.strategies[i];
    std::string out;
    auto line = [&](std::string_view key, const auto& value) { out += fmt::format("{} = {}\n", key, value); };
    line("sim.horizon_s", s.sim.horizon_s);
    line("sim.slot_rate", g.slot_rate);
    line("sim.epoch_s", s.sim.epoch_s);
    line("sim.audit", s.sim.audit ? "true" : "false");
    line("sim.fit", to_string(s.sim.fit));
    line("sim.admission", to_string(s.sim.admission.test));
    line("sim.exact_horizon_cap", s.sim.admission.exact_cap);
    line("sim.host_cap", s.sim.host_cap);
    line("sim.seed", s.seed);
    line("sim.seeds", s.seeds);
    line("sim.strategies", list);
    line("sim.record_events", s.sim.record_events ? "true" : "false");
    line("gen.lambda", g.lambda);
    line("gen.rate_unit_s", g.rate_unit_s);
    line("gen.fluid_fraction", g.fluid_fraction);
    line("gen.sigma", g.sigma);
    line("gen.beta", g.beta);
    line("gen.gamma", g.gamma);
    line("gen.up_fraction", g.up_fraction);
    line("gen.delta", g.delta);
    line("gen.up_interval_s", g.up_interval_s);
    line("gen.disk_unit", g.disk_unit);
    line("gen.catalog", s.catalog);
    line("gen.catalog_streams", s.catalog_spec.streams);
    line("gen.catalog_seed", s.catalog_spec.seed);
    line("gen.catalog_duration_s", s.catalog_spec.duration_s);
    line("transform.mode", to_string(s.sim.transform_mode));
    line("transform.max_k", s.sim.limits.max_k);
    line("transform.max_candidates", s.sim.limits.max_candidates);
    line("repack.policy", to_string(r.policy));
    line("repack.epoch_s", s.sim.repack_epoch_s);
    line("repack.migration", to_string(r.migration));
    line("repack.epsilon", r.epsilon);
    line("repack.order", to_string(r.order));
    line("repack.budget_nodes", r.node_budget);
    line("repack.time_budget_s", r.time_budget_s);
    line("repack.max_groups", r.max_groups);
    return out;
}

std::vector<StreamProfile> resolve_catalog(const Setup& setup, const std::filesystem::path& base_dir) {
    if (setup.catalog == "synthetic") return gen_catalog(setup.catalog_spec);
    std::filesystem::path p(setup.catalog);
    if (p.is_relative()) p = base_dir / p;
    return load_catalog(p);
}

} // namespace morphosys
