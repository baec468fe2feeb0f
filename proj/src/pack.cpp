#include "solrcal/pack.hpp"

#include "solrcal/error.hpp"

#include <filesystem>

namespace solrcal {

namespace {

constexpr std::string_view kBuiltinPack = R"(# Reference standard pack for on-chip SOLR / mTRL work on a 28 nm CMOS
# stack. Model parameters for desk-scale testing, not extracted values.
# All values are SI. Line loss: alpha_c in Np/m at 1 GHz scaling with sqrt(f),
# alpha_d in Np/m at 1 GHz scaling with f.

[pack]
name = nyu28-pack
z_ref = 50

[open]
c0 = 5e-15
c1 = 0
c2 = 0
c3 = 0
offset_delay = 0

[short]
l0 = 2e-12
l1 = 0
l2 = 0
l3 = 0
offset_delay = 0

# 50 ohm poly resistor behind a 45 um tuning line. The 75 ohm line
# compensates the series inductance so |S11| stays below -15 dB to ~130 GHz.
[load]
r_dc = 50
l_series = 10e-12
tune_length = 45e-6
tune_delay = 3.00208e-13
tune_z0 = 75
tune_loss = 10

# 35 um x 55 um pad and the 55 um feed line in front of every standard.
[fixture]
pad_c = 20e-15
length = 55e-6
z0 = 50
eps_eff = 4
alpha_c = 10
alpha_d = 0.2

[thru.arc]
length = 300e-6
z0 = 50
eps_eff = 4
alpha_c = 10
alpha_d = 0.2

[thru.diagonal]
length = 420e-6
z0 = 50
eps_eff = 4
alpha_c = 10
alpha_d = 0.2

[thru.straight]
length = 0
z0 = 50
eps_eff = 4
alpha_c = 10
alpha_d = 0.2

[line.l250]
length = 250e-6
z0 = 50
eps_eff = 4
alpha_c = 10
alpha_d = 0.2

[line.l550]
length = 550e-6
z0 = 50
eps_eff = 4
alpha_c = 10
alpha_d = 0.2

[line.l1300]
length = 1300e-6
z0 = 50
eps_eff = 4
alpha_c = 10
alpha_d = 0.2

[mtrl]
thru = straight
)";

LineModel parse_line(const ConfigSection& s, double z_ref)
{
    LineModel l;
    l.length = s.get_double("length");
    l.z0 = s.get_double("z0", z_ref);
    l.eps_eff = s.get_double("eps_eff", 1.0);
    l.alpha_c = s.get_double("alpha_c", 0.0);
    l.alpha_d = s.get_double("alpha_d", 0.0);
    if (!(l.length >= 0.0) || !(l.z0 > 0.0) || !(l.eps_eff >= 1.0) || !(l.alpha_c >= 0.0) || !(l.alpha_d >= 0.0))
        throw Error(Errc::ConfigBadValue, "section [" + s.name() + "]: line needs length >= 0, z0 > 0, eps_eff >= 1 "
                                                                   "and non-negative losses")
            .at_line(s.line());
    return l;
}

ReflectPoly parse_reflect(const ConfigSection& s, ReflectKind kind)
{
    ReflectPoly p;
    p.kind = kind;
    const char prefix = kind == ReflectKind::Open ? 'c' : 'l';
    for (std::size_t i = 0; i < 4; ++i)
        p.coeffs[i] = s.get_double(std::string(1, prefix) + std::to_string(i), 0.0);
    p.offset_delay = s.get_double("offset_delay", 0.0);
    p.offset_loss = s.get_double("offset_loss", 0.0);
    return p;
}

} // namespace

const LineModel& StandardPack::thru(const std::string& thru_name) const
{
    for (const auto& t : thrus)
        if (t.name == thru_name)
            return t.line;
    throw Error(Errc::ConfigMissingKey, "pack " + name + " has no thru named '" + thru_name + "'");
}

StandardTriple StandardPack::definitions(const FrequencyGrid& grid) const
{
    return {eval_reflect(short_circuit, grid, z_ref), eval_reflect(open, grid, z_ref), eval_load(load, grid, z_ref)};
}

StandardPack parse_pack(const Config& cfg)
{
    StandardPack p;
    const auto& head = cfg.section("pack");
    p.name = head.get_string("name");
    p.z_ref = head.get_double("z_ref", kDefaultZref);
    p.open = parse_reflect(cfg.section("open"), ReflectKind::Open);
    p.short_circuit = parse_reflect(cfg.section("short"), ReflectKind::Short);

    const auto& load = cfg.section("load");
    p.load.r_dc = load.get_double("r_dc");
    p.load.l_series = load.get_double("l_series", 0.0);
    if (load.has("tune_delay") || load.has("tune_length")) {
        TuneLine t;
        t.length = load.get_double("tune_length", t.length);
        t.delay = load.get_double("tune_delay", 0.0);
        t.z0 = load.get_double("tune_z0", p.z_ref);
        t.loss = load.get_double("tune_loss", 0.0);
        p.load.tune_line = t;
    }

    const auto& fx = cfg.section("fixture");
    p.fixture.pad_c = fx.get_double("pad_c", 0.0);
    p.fixture.feed = parse_line(fx, p.z_ref);

    for (const auto* s : cfg.sections_with_prefix("thru."))
        p.thrus.push_back({s->name().substr(5), parse_line(*s, p.z_ref)});
    for (const auto* s : cfg.sections_with_prefix("line."))
        p.lines.push_back({s->name().substr(5), parse_line(*s, p.z_ref)});
    if (const auto* m = cfg.find_section("mtrl"))
        p.mtrl_thru = m->get_string("thru", p.mtrl_thru);
    return p;
}

std::string_view builtin_pack_text()
{
    return kBuiltinPack;
}

StandardPack load_pack(const std::string& name_or_path, const std::string& base_dir)
{
    namespace fs = std::filesystem;
    std::vector<fs::path> candidates;
    const fs::path given(name_or_path);
    if (given.is_absolute())
        candidates.push_back(given);
    else {
        if (!base_dir.empty())
            candidates.push_back(fs::path(base_dir) / given);
        candidates.push_back(given);
        const fs::path dir(default_config_dir());
        candidates.push_back(dir / given);
        candidates.push_back(dir / (name_or_path + ".ini"));
    }
    for (const auto& c : candidates) {
        std::error_code ec;
        if (fs::is_regular_file(c, ec))
            return parse_pack(Config::load(c.string()));
    }
    const Config builtin = Config::parse(kBuiltinPack, "<builtin nyu28-pack>");
    if (name_or_path == builtin.section("pack").get_string("name"))
        return parse_pack(builtin);
    throw Error(Errc::Io, "standard pack '" + name_or_path + "' not found");
}

} // namespace solrcal
