#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace solrcal {

/// Sectioned `key = value` text used for standard packs, cal sessions and
/// scenarios. `#` and `;` start comments. Section and key names are
/// case-sensitive; duplicate keys or sections are errors.
class ConfigSection {
public:
    struct Entry {
        std::string key;
        std::string value;
        int line = 0;
        mutable bool used = false;
    };

    const std::string& name() const noexcept { return name_; }
    int line() const noexcept { return line_; }
    const std::vector<Entry>& entries() const noexcept { return entries_; }

    bool has(std::string_view key) const;
    std::string get_string(std::string_view key) const;
    std::string get_string(std::string_view key, std::string fallback) const;
    double get_double(std::string_view key) const;
    double get_double(std::string_view key, double fallback) const;
    std::optional<double> get_optional_double(std::string_view key) const;
    std::uint64_t get_u64(std::string_view key, std::uint64_t fallback) const;
    std::size_t get_size(std::string_view key, std::size_t fallback) const;
    /// Whitespace- or comma-separated list.
    std::vector<std::string> get_list(std::string_view key) const;

private:
    friend class Config;
    const Entry* find(std::string_view key) const;
    [[noreturn]] void bad_value(const Entry& e, const std::string& what) const;

    std::string source_;
    std::string name_;
    int line_ = 0;
    std::vector<Entry> entries_;
};

class Config {
public:
    static Config parse(std::string_view text, std::string source = "<config>");
    static Config load(const std::string& path);

    const std::string& source() const noexcept { return source_; }
    /// Directory of the file the config was loaded from ("" for in-memory text).
    const std::string& base_dir() const noexcept { return base_dir_; }

    bool has_section(std::string_view name) const;
    const ConfigSection& section(std::string_view name) const;
    const ConfigSection* find_section(std::string_view name) const;
    /// Sections named "<prefix><suffix>", in file order.
    std::vector<const ConfigSection*> sections_with_prefix(std::string_view prefix) const;
    const std::vector<ConfigSection>& sections() const noexcept { return sections_; }

    /// Resolves a path relative to base_dir unless absolute.
    std::string resolve(const std::string& path) const;

private:
    std::string source_;
    std::string base_dir_;
    std::vector<ConfigSection> sections_;
};

/// Directory searched for configs named without a path: $SOLRCAL_CONFIG_DIR,
/// else the installed config directory.
std::string default_config_dir();

} // namespace solrcal
