#pragma once

#include "solrcal/cal_solvers.hpp"
#include "solrcal/config.hpp"
#include "solrcal/standards.hpp"

#include <string>
#include <vector>

namespace solrcal {

/// A named line section of a pack (thrus and mTRL lines).
struct NamedLine {
    std::string name;
    LineModel line;
};

/// Standard definitions and fixture of one calibration substrate.
struct StandardPack {
    std::string name;
    double z_ref = kDefaultZref;
    ReflectPoly open{ReflectKind::Open, {}, 0.0, 0.0};
    ReflectPoly short_circuit{ReflectKind::Short, {}, 0.0, 0.0};
    LoadModel load;
    FixtureModel fixture;
    std::vector<NamedLine> thrus;
    std::vector<NamedLine> lines;
    std::string mtrl_thru = "straight";

    const LineModel& thru(const std::string& name) const;
    /// Open, Short and Load evaluated at the standard reference plane.
    StandardTriple definitions(const FrequencyGrid& grid) const;
};

StandardPack parse_pack(const Config& cfg);

/// Text of the built-in reference pack.
std::string_view builtin_pack_text();

/// Loads a pack by file path, by name from the default config directory, or
/// the built-in pack by its name.
StandardPack load_pack(const std::string& name_or_path, const std::string& base_dir = "");

} // namespace solrcal
