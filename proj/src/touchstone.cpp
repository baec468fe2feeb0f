#include "solrcal/touchstone.hpp"

#include "solrcal/error.hpp"
#include "text_util.hpp"

#include <algorithm>
#include <charconv>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace solrcal {

double freq_unit_scale(FreqUnit unit)
{
    switch (unit) {
    case FreqUnit::Hz: return 1.0;
    case FreqUnit::kHz: return 1e3;
    case FreqUnit::MHz: return 1e6;
    case FreqUnit::GHz: return 1e9;
    }
    return 1.0;
}

namespace {

int unit_exponent(FreqUnit unit)
{
    switch (unit) {
    case FreqUnit::Hz: return 0;
    case FreqUnit::kHz: return 3;
    case FreqUnit::MHz: return 6;
    case FreqUnit::GHz: return 9;
    }
    return 9;
}

// Frequency token in the file unit to Hz by shifting the decimal exponent, so
// the conversion is one correctly rounded decimal parse.
bool parse_frequency(std::string_view tok, int exp10, double& out)
{
    std::string mant(tok);
    long e = 0;
    if (const auto pos = mant.find_first_of("eE"); pos != std::string::npos) {
        double ev = 0.0;
        if (!detail::parse_double(std::string_view(mant).substr(pos + 1), ev) || ev != std::floor(ev) ||
            std::abs(ev) > 1000)
            return false;
        e = static_cast<long>(ev);
        mant.resize(pos);
    }
    return detail::parse_double(mant + "e" + std::to_string(e + exp10), out);
}

const char* unit_keyword(FreqUnit unit)
{
    switch (unit) {
    case FreqUnit::Hz: return "HZ";
    case FreqUnit::kHz: return "KHZ";
    case FreqUnit::MHz: return "MHZ";
    case FreqUnit::GHz: return "GHZ";
    }
    return "GHZ";
}

const char* format_keyword(DataFormat f)
{
    switch (f) {
    case DataFormat::RI: return "RI";
    case DataFormat::MA: return "MA";
    case DataFormat::DB: return "DB";
    }
    return "MA";
}

TouchstoneOptions parse_option_line(std::string_view body, int line_no)
{
    TouchstoneOptions opts;
    const auto tokens = detail::split_ws(body);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const std::string tok = detail::upper(tokens[i]);
        if (tok == "HZ") opts.freq_unit = FreqUnit::Hz;
        else if (tok == "KHZ") opts.freq_unit = FreqUnit::kHz;
        else if (tok == "MHZ") opts.freq_unit = FreqUnit::MHz;
        else if (tok == "GHZ") opts.freq_unit = FreqUnit::GHz;
        else if (tok == "S") {
        } else if (tok == "Y" || tok == "Z" || tok == "H" || tok == "G") {
            throw Error(Errc::MalformedOptionLine, "line " + std::to_string(line_no) +
                                                       ": only S-parameter files are supported (got " + tok + ")")
                .at_line(line_no);
        } else if (tok == "RI") opts.format = DataFormat::RI;
        else if (tok == "MA") opts.format = DataFormat::MA;
        else if (tok == "DB") opts.format = DataFormat::DB;
        else if (tok == "R") {
            double z = 0.0;
            if (i + 1 >= tokens.size() || !detail::parse_double(tokens[i + 1], z) || !(z > 0.0))
                throw Error(Errc::MalformedOptionLine,
                            "line " + std::to_string(line_no) + ": R must be followed by a positive impedance")
                    .at_line(line_no);
            opts.z_ref = z;
            ++i;
        } else {
            throw Error(Errc::MalformedOptionLine,
                        "line " + std::to_string(line_no) + ": unknown option token '" + std::string(tokens[i]) + "'")
                .at_line(line_no);
        }
    }
    return opts;
}

cplx decode_pair(double x, double y, DataFormat format)
{
    switch (format) {
    case DataFormat::RI: return {x, y};
    case DataFormat::MA: return std::polar(x, y * kPi / 180.0);
    case DataFormat::DB: return std::polar(std::pow(10.0, x / 20.0), y * kPi / 180.0);
    }
    return {};
}

} // namespace

TouchstoneData parse_touchstone_full(std::string_view text, std::size_t n_ports)
{
    if (n_ports == 0)
        throw Error(Errc::InvalidNetwork, "port count must be positive");

    TouchstoneData result;
    bool have_options = false;
    bool in_noise = false;
    const std::size_t per_record = 1 + 2 * n_ports * n_ports;

    std::vector<double> freqs;
    std::vector<CMatrix> mats;
    std::vector<double> record;
    int record_line = 0;
    int line_no = 0;
    int exp10 = 9;
    double record_freq = 0.0;

    auto finish_record = [&]() {
        CMatrix m(static_cast<Eigen::Index>(n_ports), static_cast<Eigen::Index>(n_ports));
        for (std::size_t idx = 0; idx < n_ports * n_ports; ++idx) {
            const cplx v = decode_pair(record[1 + 2 * idx], record[2 + 2 * idx], result.options.format);
            std::size_t row = idx / n_ports;
            std::size_t col = idx % n_ports;
            if (n_ports == 2)
                std::swap(row, col); // S11 S21 S12 S22
            m(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) = v;
        }
        freqs.push_back(record_freq);
        mats.push_back(std::move(m));
        record.clear();
    };

    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos)
            end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;

        if (const auto bang = line.find('!'); bang != std::string_view::npos)
            line = line.substr(0, bang);
        line = detail::trim(line);
        if (line.empty())
            continue;
        if (in_noise)
            continue;

        if (line.front() == '[') {
            throw Error(Errc::UnsupportedVersion, "line " + std::to_string(line_no) +
                                                      ": Touchstone v2 keyword found; only v1 files are supported")
                .at_line(line_no);
        }
        if (line.front() == '#') {
            if (!have_options && freqs.empty() && record.empty()) {
                result.options = parse_option_line(line.substr(1), line_no);
                exp10 = unit_exponent(result.options.freq_unit);
                have_options = true;
            }
            continue;
        }

        const auto tokens = detail::split_ws(line);
        std::vector<double> values;
        values.reserve(tokens.size());
        for (const auto tok : tokens) {
            double v = 0.0;
            if (!detail::parse_double(tok, v))
                throw Error(Errc::WrongValueCount,
                            "line " + std::to_string(line_no) + ": non-numeric value '" + std::string(tok) + "'")
                    .at_line(line_no);
            values.push_back(v);
        }

        if (record.empty()) {
            double f = 0.0;
            parse_frequency(tokens.front(), exp10, f);
            record_freq = f;
            if (!freqs.empty() && !(f > freqs.back())) {
                if (n_ports == 2) {
                    in_noise = true;
                    result.warnings.push_back("line " + std::to_string(line_no) +
                                              ": noise parameter data skipped");
                    continue;
                }
                throw Error(Errc::NonMonotonicFrequency,
                            "line " + std::to_string(line_no) + ": frequency not strictly increasing")
                    .at_line(line_no);
            }
            if (f < 0.0 || !std::isfinite(f) || (f == 0.0 && !freqs.empty()))
                throw Error(Errc::NonMonotonicFrequency, "line " + std::to_string(line_no) + ": invalid frequency")
                    .at_line(line_no);
            record_line = line_no;
        }
        if (record.size() + values.size() > per_record)
            throw Error(Errc::WrongValueCount, "line " + std::to_string(line_no) + ": expected " +
                                                   std::to_string(per_record - record.size()) +
                                                   " more values in this record, got " +
                                                   std::to_string(values.size()))
                .at_line(line_no);
        record.insert(record.end(), values.begin(), values.end());
        if (record.size() == per_record)
            finish_record();
    }

    if (!record.empty())
        throw Error(Errc::WrongValueCount, "line " + std::to_string(record_line) + ": record has " +
                                               std::to_string(record.size()) + " values, expected " +
                                               std::to_string(per_record))
            .at_line(record_line);
    if (freqs.empty())
        throw Error(Errc::EmptyFile, "no network data found");

    result.network = Network(FrequencyGrid(std::move(freqs)), std::move(mats), result.options.z_ref);
    return result;
}

Network parse_touchstone(std::string_view text, std::size_t n_ports)
{
    return parse_touchstone_full(text, n_ports).network;
}

namespace {

// Shortest round-trip digits of f with the decimal exponent lowered by exp10.
// parse_frequency turns the text back into exactly f.
std::string format_frequency(double f, int exp10)
{
    if (f == 0.0)
        return "0";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, f, std::chars_format::scientific);
    const std::string sci(buf, res.ptr);
    const auto epos = sci.find('e');
    std::string digits;
    for (char c : sci.substr(0, epos))
        if (c != '.')
            digits += c;
    const int e = std::stoi(sci.substr(epos + 1)) - exp10;
    const int n = static_cast<int>(digits.size());
    if (e >= 21 || e < -6)
        return digits.substr(0, 1) + (n > 1 ? "." + digits.substr(1) : "") + "e" + std::to_string(e);
    if (e >= n - 1)
        return digits + std::string(static_cast<std::size_t>(e - n + 1), '0');
    if (e >= 0)
        return digits.substr(0, static_cast<std::size_t>(e + 1)) + "." + digits.substr(static_cast<std::size_t>(e + 1));
    return "0." + std::string(static_cast<std::size_t>(-e - 1), '0') + digits;
}

void append_pair(std::string& out, cplx v, DataFormat format)
{
    double x = 0.0;
    double y = 0.0;
    switch (format) {
    case DataFormat::RI:
        x = v.real();
        y = v.imag();
        break;
    case DataFormat::MA:
        x = std::abs(v);
        y = std::arg(v) * 180.0 / kPi;
        break;
    case DataFormat::DB: {
        const double mag = std::abs(v);
        x = mag > 0.0 ? 20.0 * std::log10(mag) : -999.0;
        y = std::arg(v) * 180.0 / kPi;
        break;
    }
    }
    out += ' ';
    out += detail::shortest(x);
    out += ' ';
    out += detail::shortest(y);
}

} // namespace

std::string write_touchstone(const Network& net, const TouchstoneOptions& opts, const TouchstoneHeader& header)
{
    std::string out;
    out += "! " + header.tool + " Touchstone v1 export\n";
    out += "! cal state: " + header.cal_state + "\n";
    for (const auto& line : header.extra)
        out += "! " + line + "\n";
    out += "# ";
    out += unit_keyword(opts.freq_unit);
    out += " S ";
    out += format_keyword(opts.format);
    out += " R ";
    out += detail::shortest(net.z_ref());
    out += '\n';

    const int exp10 = unit_exponent(opts.freq_unit);
    const auto n = static_cast<Eigen::Index>(net.n_ports());
    for (std::size_t k = 0; k < net.size(); ++k) {
        out += format_frequency(net.frequency(k), exp10);
        const CMatrix& m = net[k];
        if (n <= 2) {
            for (Eigen::Index col = 0; col < n; ++col)
                for (Eigen::Index row = 0; row < n; ++row)
                    append_pair(out, n == 2 ? m(row, col) : m(col, row), opts.format);
            out += '\n';
            continue;
        }
        for (Eigen::Index row = 0; row < n; ++row) {
            for (Eigen::Index col = 0; col < n; ++col) {
                if (col > 0 && col % 4 == 0)
                    out += "\n ";
                append_pair(out, m(row, col), opts.format);
            }
            out += '\n';
            if (row + 1 < n)
                out += ' ';
        }
    }
    return out;
}

std::size_t ports_from_extension(std::string_view path)
{
    const auto dot = path.rfind('.');
    if (dot == std::string_view::npos)
        return 0;
    const std::string ext = detail::upper(path.substr(dot + 1));
    if (ext.size() < 3 || ext.front() != 'S' || ext.back() != 'P')
        return 0;
    std::size_t n = 0;
    for (std::size_t i = 1; i + 1 < ext.size(); ++i) {
        if (!std::isdigit(static_cast<unsigned char>(ext[i])))
            return 0;
        n = n * 10 + static_cast<std::size_t>(ext[i] - '0');
    }
    return n;
}

Network read_touchstone_file(const std::string& path, std::size_t n_ports)
{
    if (n_ports == 0)
        n_ports = ports_from_extension(path);
    if (n_ports == 0)
        throw Error(Errc::Io, path + ": cannot infer port count from extension");
    const std::string text = detail::read_file(path);
    try {
        return parse_touchstone(text, n_ports);
    } catch (const Error& e) {
        Error wrapped(e.code(), path + ": " + e.message());
        if (e.line())
            wrapped.at_line(*e.line());
        throw wrapped;
    }
}

void write_touchstone_file(const std::string& path, const Network& net, const TouchstoneOptions& opts,
                           const TouchstoneHeader& header)
{
    detail::write_file(path, write_touchstone(net, opts, header));
}

} // namespace solrcal
