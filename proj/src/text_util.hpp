#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace solrcal::detail {

std::string_view trim(std::string_view s);
std::vector<std::string_view> split_ws(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::string upper(std::string_view s);
std::string lower(std::string_view s);

/// Whole-token parse; accepts a leading '+', rejects trailing garbage.
bool parse_double(std::string_view tok, double& out);

/// Shortest decimal that round-trips to the same double.
std::string shortest(double v);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& text);

} // namespace solrcal::detail
