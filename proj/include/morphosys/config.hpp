#pragma once

#include <morphosys/sim.hpp>
#include <morphosys/workload.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace morphosys {

/// Everything a `simulate` invocation needs.
struct Setup {
    SimConfig sim;
    std::string catalog = "synthetic"; ///< "synthetic" or a manifest path
    CatalogSpec catalog_spec;
    std::vector<std::string> strategies{"FF", "BF", "FF-NR", "BF-NR"};
    std::uint64_t seed = 1;             ///< first seed
    std::size_t seeds = 1;              ///< seeds seed, seed+1, ...

    [[nodiscard]] std::vector<std::uint64_t> seed_list() const;
};

/// Flat `section.key = value` lines; '#' starts a comment. Unknown keys and
/// malformed values raise ParseError with the line number.
[[nodiscard]] Setup parse_setup(std::istream& in);
[[nodiscard]] Setup load_setup(const std::filesystem::path& path);

/// Assigns one key; throws PreconditionError for unknown keys or bad values.
void set_option(Setup& setup, const std::string& key, const std::string& value);

/// Every key with its effective value, in a fixed order. Parsing the output
/// yields an identical Setup.
[[nodiscard]] std::string dump_setup(const Setup& setup);

/// The synthetic catalog or the manifest's traces (relative to `base_dir`).
[[nodiscard]] std::vector<StreamProfile> resolve_catalog(const Setup& setup,
                                                         const std::filesystem::path& base_dir);

} // namespace morphosys
