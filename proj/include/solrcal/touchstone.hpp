#pragma once

#include "solrcal/sparams.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace solrcal {

enum class FreqUnit { Hz, kHz, MHz, GHz };
enum class DataFormat { RI, MA, DB };

/// Touchstone v1 option line. Only S-parameters are supported.
struct TouchstoneOptions {
    FreqUnit freq_unit = FreqUnit::GHz;
    DataFormat format = DataFormat::MA;
    double z_ref = kDefaultZref;
};

double freq_unit_scale(FreqUnit unit);

struct TouchstoneData {
    Network network;
    TouchstoneOptions options;
    std::vector<std::string> warnings;
};

/// Parses Touchstone v1 text. 2-port records are S11 S21 S12 S22, larger
/// networks are row-major and may wrap across lines. Noise data after a
/// 2-port block is skipped with a warning.
TouchstoneData parse_touchstone_full(std::string_view text, std::size_t n_ports);
Network parse_touchstone(std::string_view text, std::size_t n_ports);

/// Header comment lines written above the option line.
struct TouchstoneHeader {
    std::string tool = "solrcal";
    std::string cal_state = "uncalibrated";
    std::vector<std::string> extra;
};

/// Writes text that parses back to the same grid bit-for-bit and to S values
/// within 1e-9 relative (RI is exact). n-port rows wrap at four values.
std::string write_touchstone(const Network& net, const TouchstoneOptions& opts = {},
                             const TouchstoneHeader& header = {});

/// Port count implied by a ".sNp" extension, 0 when the name does not match.
std::size_t ports_from_extension(std::string_view path);

Network read_touchstone_file(const std::string& path, std::size_t n_ports = 0);
void write_touchstone_file(const std::string& path, const Network& net, const TouchstoneOptions& opts = {},
                           const TouchstoneHeader& header = {});

} // namespace solrcal
