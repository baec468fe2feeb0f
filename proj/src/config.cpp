#include "solrcal/config.hpp"

#include "solrcal/error.hpp"
#include "text_util.hpp"

#include <charconv>
#include <cstdlib>
#include <filesystem>

#ifndef SOLRCAL_CONFIG_INSTALL_DIR
#define SOLRCAL_CONFIG_INSTALL_DIR "config"
#endif

namespace solrcal {

namespace {

std::string where(const std::string& source, int line)
{
    return source + ":" + std::to_string(line);
}

} // namespace

const ConfigSection::Entry* ConfigSection::find(std::string_view key) const
{
    for (const auto& e : entries_)
        if (e.key == key) {
            e.used = true;
            return &e;
        }
    return nullptr;
}

void ConfigSection::bad_value(const Entry& e, const std::string& what) const
{
    throw Error(Errc::ConfigBadValue,
                where(source_, e.line) + ": [" + name_ + "] " + e.key + " = '" + e.value + "': " + what)
        .at_line(e.line);
}

bool ConfigSection::has(std::string_view key) const
{
    return find(key) != nullptr;
}

std::string ConfigSection::get_string(std::string_view key) const
{
    const Entry* e = find(key);
    if (!e)
        throw Error(Errc::ConfigMissingKey,
                    where(source_, line_) + ": section [" + name_ + "] is missing key '" + std::string(key) + "'")
            .at_line(line_);
    return e->value;
}

std::string ConfigSection::get_string(std::string_view key, std::string fallback) const
{
    const Entry* e = find(key);
    return e ? e->value : std::move(fallback);
}

double ConfigSection::get_double(std::string_view key) const
{
    const std::string v = get_string(key);
    double out = 0.0;
    if (!detail::parse_double(v, out))
        bad_value(*find(key), "expected a number");
    return out;
}

double ConfigSection::get_double(std::string_view key, double fallback) const
{
    return has(key) ? get_double(key) : fallback;
}

std::optional<double> ConfigSection::get_optional_double(std::string_view key) const
{
    if (!has(key))
        return std::nullopt;
    return get_double(key);
}

std::uint64_t ConfigSection::get_u64(std::string_view key, std::uint64_t fallback) const
{
    const Entry* e = find(key);
    if (!e)
        return fallback;
    std::uint64_t out = 0;
    const auto res = std::from_chars(e->value.data(), e->value.data() + e->value.size(), out);
    if (res.ec != std::errc() || res.ptr != e->value.data() + e->value.size())
        bad_value(*e, "expected an unsigned integer");
    return out;
}

std::size_t ConfigSection::get_size(std::string_view key, std::size_t fallback) const
{
    return static_cast<std::size_t>(get_u64(key, fallback));
}

std::vector<std::string> ConfigSection::get_list(std::string_view key) const
{
    std::string v = get_string(key);
    for (auto& c : v)
        if (c == ',')
            c = ' ';
    std::vector<std::string> out;
    for (const auto tok : detail::split_ws(v))
        out.emplace_back(tok);
    return out;
}

Config Config::parse(std::string_view text, std::string source)
{
    Config cfg;
    cfg.source_ = std::move(source);
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos)
            end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        const auto hash = line.find_first_of("#;");
        if (hash != std::string_view::npos)
            line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty())
            continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw Error(Errc::ConfigSyntax, where(cfg.source_, line_no) + ": unterminated section header")
                    .at_line(line_no);
            const std::string name(detail::trim(line.substr(1, line.size() - 2)));
            if (name.empty())
                throw Error(Errc::ConfigSyntax, where(cfg.source_, line_no) + ": empty section name").at_line(line_no);
            if (cfg.find_section(name))
                throw Error(Errc::ConfigSyntax, where(cfg.source_, line_no) + ": duplicate section [" + name + "]")
                    .at_line(line_no);
            ConfigSection s;
            s.source_ = cfg.source_;
            s.name_ = name;
            s.line_ = line_no;
            cfg.sections_.push_back(std::move(s));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw Error(Errc::ConfigSyntax, where(cfg.source_, line_no) + ": expected 'key = value'").at_line(line_no);
        if (cfg.sections_.empty())
            throw Error(Errc::ConfigSyntax, where(cfg.source_, line_no) + ": key outside of any section")
                .at_line(line_no);
        const std::string key(detail::trim(line.substr(0, eq)));
        const std::string value(detail::trim(line.substr(eq + 1)));
        if (key.empty())
            throw Error(Errc::ConfigSyntax, where(cfg.source_, line_no) + ": empty key").at_line(line_no);
        auto& sec = cfg.sections_.back();
        for (const auto& e : sec.entries_)
            if (e.key == key)
                throw Error(Errc::ConfigSyntax, where(cfg.source_, line_no) + ": duplicate key '" + key + "' in [" +
                                                    sec.name_ + "]")
                    .at_line(line_no);
        sec.entries_.push_back({key, value, line_no, false});
    }
    return cfg;
}

Config Config::load(const std::string& path)
{
    Config cfg = parse(detail::read_file(path), path);
    cfg.base_dir_ = std::filesystem::path(path).parent_path().string();
    return cfg;
}

const ConfigSection* Config::find_section(std::string_view name) const
{
    for (const auto& s : sections_)
        if (s.name() == name)
            return &s;
    return nullptr;
}

bool Config::has_section(std::string_view name) const
{
    return find_section(name) != nullptr;
}

const ConfigSection& Config::section(std::string_view name) const
{
    if (const auto* s = find_section(name))
        return *s;
    throw Error(Errc::ConfigMissingKey, source_ + ": missing section [" + std::string(name) + "]");
}

std::vector<const ConfigSection*> Config::sections_with_prefix(std::string_view prefix) const
{
    std::vector<const ConfigSection*> out;
    for (const auto& s : sections_)
        if (s.name().size() > prefix.size() && s.name().compare(0, prefix.size(), prefix) == 0)
            out.push_back(&s);
    return out;
}

std::string Config::resolve(const std::string& path) const
{
    const std::filesystem::path p(path);
    if (p.is_absolute() || base_dir_.empty())
        return path;
    return (std::filesystem::path(base_dir_) / p).string();
}

std::string default_config_dir()
{
    if (const char* env = std::getenv("SOLRCAL_CONFIG_DIR"); env && *env)
        return env;
    return SOLRCAL_CONFIG_INSTALL_DIR;
}

} // namespace solrcal
