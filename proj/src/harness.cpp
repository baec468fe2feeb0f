#include "solrcal/harness.hpp"

#include "solrcal/error.hpp"
#include "solrcal/touchstone.hpp"
#include "text_util.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

namespace solrcal {

double Rng::uniform()
{
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
}

double Rng::normal()
{
    if (spare_) {
        const double v = *spare_;
        spare_.reset();
        return v;
    }
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * kPi * u2);
    return r * std::cos(2.0 * kPi * u2);
}

cplx Rng::complex_normal(double sigma)
{
    const double s = sigma / std::sqrt(2.0);
    const double re = normal();
    const double im = normal();
    return {s * re, s * im};
}

namespace {

std::vector<double> normalized_axis(const FrequencyGrid& grid)
{
    std::vector<double> x(grid.size(), 0.0);
    const double span = grid.back() - grid.front();
    if (span > 0.0)
        for (std::size_t k = 0; k < grid.size(); ++k)
            x[k] = 2.0 * (grid[k] - grid.front()) / span - 1.0;
    return x;
}

double chebyshev(int order, double x)
{
    double t0 = 1.0, t1 = x;
    if (order == 0)
        return t0;
    for (int i = 1; i < order; ++i) {
        const double t2 = 2.0 * x * t1 - t0;
        t0 = t1;
        t1 = t2;
    }
    return t1;
}

// Cubic Chebyshev series mapped into [lo, hi].
std::vector<double> bounded_profile(const std::vector<double>& x, double lo, double hi, Rng& rng)
{
    std::array<double, 4> c{};
    double norm = 0.0;
    for (auto& v : c) {
        v = rng.uniform(-1.0, 1.0);
        norm += std::abs(v);
    }
    std::vector<double> out(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
        double f = 0.0;
        for (int i = 0; i < 4; ++i)
            f += c[static_cast<std::size_t>(i)] * chebyshev(i, x[k]);
        out[k] = lo + (hi - lo) * (0.5 + 0.5 * f / norm);
    }
    return out;
}

std::vector<double> phase_profile(const std::vector<double>& x, Rng& rng)
{
    std::array<double, 4> c{};
    c[0] = rng.uniform(-kPi, kPi);
    for (std::size_t i = 1; i < 4; ++i)
        c[i] = rng.uniform(-kPi, kPi);
    std::vector<double> out(x.size());
    for (std::size_t k = 0; k < x.size(); ++k)
        out[k] = c[0] + x[k] * (c[1] + x[k] * (c[2] + x[k] * c[3]));
    return out;
}

} // namespace

Network random_passive_box(const FrequencyGrid& grid, Rng& rng, const BoxBounds& b)
{
    const auto x = normalized_axis(grid);
    const auto m00 = bounded_profile(x, 0.0, b.e00_max, rng);
    const auto p00 = phase_profile(x, rng);
    const auto m11 = bounded_profile(x, 0.0, b.e11_max, rng);
    const auto p11 = phase_profile(x, rng);
    const auto mt = bounded_profile(x, b.tracking_min, b.tracking_max, rng);
    const auto pt = phase_profile(x, rng);
    const double sign = b.random_sign && rng.uniform() < 0.5 ? -1.0 : 1.0;

    Network box(grid, 2);
    auto fill = [&](double scale) {
        for (std::size_t k = 0; k < grid.size(); ++k) {
            const cplx s = sign * scale * std::polar(std::sqrt(mt[k]), 0.5 * pt[k]);
            box[k] << std::polar(m00[k], p00[k]), s, s, std::polar(m11[k], p11[k]);
        }
    };
    double scale = 1.0;
    fill(scale);
    for (int iter = 0; iter < 200; ++iter) {
        const auto margin = passivity_margin(box);
        if (*std::min_element(margin.begin(), margin.end()) >= 0.0)
            return box;
        scale *= 0.95;
        fill(scale);
    }
    throw Error(Errc::InvalidScenario, "could not make a random error box passive");
}

Network random_passive_dut(const FrequencyGrid& grid, std::size_t n_ports, Rng& rng)
{
    const auto x = normalized_axis(grid);
    const auto n = static_cast<Eigen::Index>(n_ports);
    Network dut(grid, n_ports);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i; j < n; ++j) {
            std::array<cplx, 4> c{};
            for (auto& v : c)
                v = cplx(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));
            for (std::size_t k = 0; k < grid.size(); ++k) {
                cplx v = 0.0;
                for (int m = 0; m < 4; ++m)
                    v += c[static_cast<std::size_t>(m)] * chebyshev(m, x[k]);
                dut[k](i, j) = v;
                dut[k](j, i) = v;
            }
        }
    for (std::size_t k = 0; k < grid.size(); ++k) {
        Eigen::JacobiSVD<CMatrix> svd(dut[k]);
        const double smax = svd.singularValues()(0);
        if (smax > 0.95)
            dut[k] *= 0.95 / smax;
    }
    return dut;
}

void add_noise(Network& net, double noise_db, Rng& rng)
{
    const double sigma = std::pow(10.0, noise_db / 20.0);
    const auto n = static_cast<Eigen::Index>(net.n_ports());
    for (std::size_t k = 0; k < net.size(); ++k)
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j)
                net[k](i, j) += rng.complex_normal(sigma);
}

// Scenario -----------------------------------------------------------------------

FrequencyGrid Scenario::grid() const
{
    return FrequencyGrid::linear(start_hz, stop_hz, points);
}

void Scenario::validate() const
{
    if (!(start_hz >= 0.0 && stop_hz > start_hz && points >= 2))
        throw Error(Errc::InvalidScenario, "grid needs 0 <= start < stop and at least 2 points");
    if (ports.empty())
        throw Error(Errc::InvalidScenario, "scenario has no ports");
    if (boxes.size() != ports.size())
        throw Error(Errc::InvalidScenario, "need one error-box spec per port");
    for (const auto& p : pairs) {
        if (p.a >= ports.size() || p.b >= ports.size() || p.a == p.b)
            throw Error(Errc::InvalidScenario, "pair references an invalid port");
        pack.thru(p.thru);
    }
    if (ports.size() > 1 && pairs.empty())
        throw Error(Errc::InvalidScenario, "multi-port scenario needs at least one pair");
    if (dut == DutKind::Diagonal && ports.size() != 2)
        throw Error(Errc::InvalidScenario, "the diagonal-thru DUT needs exactly 2 ports");
    if (mtrl && (pairs.empty() || pack.lines.empty()))
        throw Error(Errc::InvalidScenario, "mTRL set needs a pair and at least one pack line");
    for (const auto& b : boxes)
        if (b.mode == BoxMode::RandomPassive &&
            !(b.bounds.e00_max >= 0.0 && b.bounds.e11_max >= 0.0 && b.bounds.tracking_min > 0.0 &&
              b.bounds.tracking_max >= b.bounds.tracking_min && b.bounds.tracking_max <= 1.0))
            throw Error(Errc::InvalidScenario, "error-box bounds are not valid magnitudes");
}

namespace {

BoxSpec parse_box(const ConfigSection& s, const Config& cfg, BoxSpec spec)
{
    const std::string mode = s.get_string("mode", "");
    if (mode == "random-passive")
        spec.mode = BoxMode::RandomPassive;
    else if (mode == "identity")
        spec.mode = BoxMode::Identity;
    else if (mode == "file")
        spec.mode = BoxMode::File;
    else if (!mode.empty())
        throw Error(Errc::ConfigBadValue, cfg.source() + ": [" + s.name() + "] unknown box mode '" + mode +
                                              "' (random-passive, identity, file)")
            .at_line(s.line());
    if (spec.mode == BoxMode::File)
        spec.file = cfg.resolve(s.get_string("file"));
    spec.bounds.e00_max = s.get_double("e00_max", spec.bounds.e00_max);
    spec.bounds.e11_max = s.get_double("e11_max", spec.bounds.e11_max);
    spec.bounds.tracking_min = s.get_double("tracking_min", spec.bounds.tracking_min);
    spec.bounds.tracking_max = s.get_double("tracking_max", spec.bounds.tracking_max);
    if (s.has("random_sign")) {
        const std::string v = s.get_string("random_sign");
        if (v != "true" && v != "false")
            throw Error(Errc::ConfigBadValue, cfg.source() + ": random_sign must be true or false").at_line(s.line());
        spec.bounds.random_sign = v == "true";
    }
    return spec;
}

bool parse_bool(const ConfigSection& s, std::string_view key, bool fallback, const Config& cfg)
{
    if (!s.has(key))
        return fallback;
    const std::string v = s.get_string(key);
    if (v == "true" || v == "yes" || v == "1")
        return true;
    if (v == "false" || v == "no" || v == "0")
        return false;
    throw Error(Errc::ConfigBadValue, cfg.source() + ": [" + s.name() + "] " + std::string(key) +
                                          " must be true or false")
        .at_line(s.line());
}

} // namespace

Scenario parse_scenario(const Config& cfg)
{
    Scenario scn;
    const auto& s = cfg.section("scenario");
    scn.seed = s.get_u64("seed", scn.seed);
    scn.start_hz = s.get_double("start_hz", scn.start_hz);
    scn.stop_hz = s.get_double("stop_hz", scn.stop_hz);
    scn.points = s.get_size("points", scn.points);
    scn.pack_ref = s.get_string("pack", scn.pack_ref);
    {
        std::error_code ec;
        const std::string resolved = cfg.resolve(scn.pack_ref);
        if (std::filesystem::is_regular_file(resolved, ec))
            scn.pack_ref = std::filesystem::absolute(resolved).string();
    }
    scn.pack = load_pack(scn.pack_ref, cfg.base_dir());
    if (s.has("ports"))
        scn.ports = s.get_list("ports");
    if (s.has("pairs")) {
        scn.pairs.clear();
        for (const auto& tok : s.get_list("pairs")) {
            ScenarioPair p;
            std::string spec = tok;
            if (const auto colon = spec.find(':'); colon != std::string::npos) {
                p.thru = spec.substr(colon + 1);
                spec = spec.substr(0, colon);
            }
            const auto parts = detail::split(spec, '-');
            auto index = [&](const std::string& name) {
                for (std::size_t i = 0; i < scn.ports.size(); ++i)
                    if (scn.ports[i] == name)
                        return i;
                throw Error(Errc::ConfigBadValue, cfg.source() + ": pair '" + tok + "' names unknown port '" + name + "'");
            };
            if (parts.size() != 2)
                throw Error(Errc::ConfigBadValue, cfg.source() + ": pair '" + tok + "' must look like A-B[:thru]");
            p.a = index(parts[0]);
            p.b = index(parts[1]);
            scn.pairs.push_back(p);
        }
    } else if (scn.ports.size() != 2) {
        scn.pairs.clear();
        for (std::size_t p = 1; p < scn.ports.size(); ++p)
            scn.pairs.push_back({p - 1, p, "arc"});
    }
    if (s.has("noise_db"))
        scn.noise_db = s.get_double("noise_db");
    const std::string dut = s.get_string("dut", scn.ports.size() == 2 ? "diagonal" : "random");
    if (dut == "diagonal")
        scn.dut = DutKind::Diagonal;
    else if (dut == "random")
        scn.dut = DutKind::Random;
    else if (dut == "none")
        scn.dut = DutKind::None;
    else
        throw Error(Errc::ConfigBadValue, cfg.source() + ": dut must be diagonal, random or none");
    scn.fixture = parse_bool(s, "fixture", true, cfg);
    scn.mtrl = parse_bool(s, "mtrl", scn.ports.size() >= 2, cfg);

    BoxSpec common;
    if (const auto* b = cfg.find_section("boxes"))
        common = parse_box(*b, cfg, common);
    scn.boxes.assign(scn.ports.size(), common);
    for (std::size_t p = 0; p < scn.ports.size(); ++p)
        if (const auto* b = cfg.find_section("box." + scn.ports[p]))
            scn.boxes[p] = parse_box(*b, cfg, common);
    scn.validate();
    return scn;
}

Simulation simulate_measurements(const Scenario& scn)
{
    scn.validate();
    Simulation sim;
    sim.scenario = scn;
    sim.grid = scn.grid();
    const FrequencyGrid& grid = sim.grid;
    const double z_ref = scn.pack.z_ref;
    Rng rng(scn.seed);

    const Network fixture = eval_fixture(scn.pack.fixture, grid, z_ref);
    std::vector<PortErrorBox> boxes;
    for (std::size_t p = 0; p < scn.ports.size(); ++p) {
        Network raw_box;
        switch (scn.boxes[p].mode) {
        case BoxMode::RandomPassive:
            raw_box = random_passive_box(grid, rng, scn.boxes[p].bounds);
            break;
        case BoxMode::Identity: {
            CMatrix thru(2, 2);
            thru << 0.0, 1.0, 1.0, 0.0;
            raw_box = Network::constant(grid, thru, z_ref);
            break;
        }
        case BoxMode::File:
            raw_box = read_touchstone_file(scn.boxes[p].file, 2);
            require_same_grid(raw_box, Network(grid, 2, z_ref), "error-box file");
            break;
        }
        const Network composite = scn.fixture ? cascade(raw_box, fixture) : raw_box;
        sim.truth_boxes.push_back(composite);
        boxes.push_back(PortErrorBox::from_network(composite));
    }
    std::vector<KEdge> edges;
    for (std::size_t p = 1; p < boxes.size(); ++p)
        edges.push_back({0, p, std::vector<cplx>(grid.size(), 1.0)});
    sim.truth = MultiPortCalModel(boxes, edges, scn.ports, z_ref);

    switch (scn.dut) {
    case DutKind::Diagonal:
        sim.dut_truth = eval_line(scn.pack.thru("diagonal"), grid, z_ref);
        break;
    case DutKind::Random:
        sim.dut_truth = random_passive_dut(grid, scn.ports.size(), rng);
        break;
    case DutKind::None:
        break;
    }

    sim.definitions = scn.pack.definitions(grid);
    for (std::size_t p = 0; p < scn.ports.size(); ++p) {
        const OnePortTerms& t = boxes[p].terms;
        sim.raw_sol.push_back({embed_oneport(t, sim.definitions.short_circuit),
                               embed_oneport(t, sim.definitions.open_circuit),
                               embed_oneport(t, sim.definitions.load)});
    }
    for (const auto& pair : scn.pairs) {
        sim.thru_models.push_back(eval_line(scn.pack.thru(pair.thru), grid, z_ref));
        sim.raw_thrus.push_back(embed_multiport(sim.truth.restrict_to({pair.a, pair.b}), sim.thru_models.back()));
    }
    if (scn.dut != DutKind::None)
        sim.raw_dut = embed_multiport(sim.truth, sim.dut_truth);
    if (scn.mtrl) {
        const auto sub = sim.truth.restrict_to({scn.pairs[0].a, scn.pairs[0].b});
        const LineModel& thru = scn.pack.thru(scn.pack.mtrl_thru);
        sim.mtrl_thru_model = eval_line(thru, grid, z_ref);
        sim.raw_mtrl_thru = embed_multiport(sub, sim.mtrl_thru_model);
        for (const auto& l : scn.pack.lines)
            sim.raw_lines.push_back({l.name, l.line.length, embed_multiport(sub, eval_line(l.line, grid, z_ref))});
    }

    if (scn.noise_db) {
        const double db = *scn.noise_db;
        for (auto& t : sim.raw_sol) {
            add_noise(t.short_circuit, db, rng);
            add_noise(t.open_circuit, db, rng);
            add_noise(t.load, db, rng);
        }
        for (auto& t : sim.raw_thrus)
            add_noise(t, db, rng);
        if (scn.dut != DutKind::None)
            add_noise(sim.raw_dut, db, rng);
        if (scn.mtrl) {
            add_noise(sim.raw_mtrl_thru, db, rng);
            for (auto& l : sim.raw_lines)
                add_noise(l.raw, db, rng);
        }
    }
    return sim;
}

std::vector<std::string> write_simulation(const Simulation& sim, const std::string& out_dir)
{
    namespace fs = std::filesystem;
    const Scenario& scn = sim.scenario;
    std::error_code ec;
    fs::create_directories(fs::path(out_dir) / "raw", ec);
    fs::create_directories(fs::path(out_dir) / "truth", ec);
    if (ec)
        throw Error(Errc::Io, "cannot create output directory '" + out_dir + "': " + ec.message());

    const TouchstoneOptions opts{FreqUnit::Hz, DataFormat::RI, scn.pack.z_ref};
    std::vector<std::string> written;
    nlohmann::json files = nlohmann::json::array();
    auto put = [&](const std::string& rel, const Network& net, const std::string& role, nlohmann::json extra,
                   const std::string& state) {
        TouchstoneHeader h;
        h.tool = "solrcal simulate";
        h.cal_state = state;
        h.extra.push_back("role: " + role);
        h.extra.push_back("seed: " + std::to_string(scn.seed));
        write_touchstone_file((fs::path(out_dir) / rel).string(), net, opts, h);
        extra["path"] = rel;
        extra["role"] = role;
        extra["ports"] = net.n_ports();
        files.push_back(extra);
        written.push_back(rel);
    };

    const char* names[3] = {"short", "open", "load"};
    for (std::size_t p = 0; p < scn.ports.size(); ++p) {
        const std::string& port = scn.ports[p];
        const std::array<const Network*, 3> raw{&sim.raw_sol[p].short_circuit, &sim.raw_sol[p].open_circuit,
                                                &sim.raw_sol[p].load};
        for (int s = 0; s < 3; ++s)
            put("raw/port_" + port + "_" + names[s] + ".s1p", *raw[static_cast<std::size_t>(s)],
                std::string("raw ") + names[s], {{"port", port}}, "raw");
        put("truth/box_" + port + ".s2p", sim.truth_boxes[p], "true error box incl. fixture", {{"port", port}},
            "truth");
    }
    for (std::size_t i = 0; i < scn.pairs.size(); ++i) {
        const auto& pr = scn.pairs[i];
        const std::string tag = scn.ports[pr.a] + "-" + scn.ports[pr.b];
        put("raw/thru_" + tag + ".s2p", sim.raw_thrus[i], "raw reciprocal thru",
            {{"pair", tag}, {"thru", pr.thru}}, "raw");
        put("truth/thru_" + tag + ".s2p", sim.thru_models[i], "true thru", {{"pair", tag}, {"thru", pr.thru}},
            "truth");
    }
    const std::string dut_ext = ".s" + std::to_string(scn.ports.size()) + "p";
    if (scn.dut != DutKind::None) {
        put("raw/dut" + dut_ext, sim.raw_dut, "raw DUT", nlohmann::json::object(), "raw");
        put("truth/dut" + dut_ext, sim.dut_truth, "true DUT", nlohmann::json::object(), "truth");
    }
    if (scn.mtrl) {
        put("raw/mtrl_thru.s2p", sim.raw_mtrl_thru, "raw mTRL thru", {{"length_m", scn.pack.thru(scn.pack.mtrl_thru).length}},
            "raw");
        for (const auto& l : sim.raw_lines)
            put("raw/mtrl_line_" + l.name + ".s2p", l.raw, "raw mTRL line", {{"length_m", l.length}}, "raw");
    }
    detail::write_file((fs::path(out_dir) / "truth/model.cal").string(), write_cal_model(sim.truth));
    written.push_back("truth/model.cal");

    // Session files for the generated data.
    std::string session;
    auto port_sections = [&] {
        std::string out;
        for (const auto& port : scn.ports) {
            out += "\n[port." + port + "]\n";
            for (const char* s : names)
                out += std::string(s) + " = raw/port_" + port + "_" + s + ".s1p\n";
        }
        return out;
    };
    std::string ports_line;
    for (const auto& p : scn.ports)
        ports_line += (ports_line.empty() ? "" : " ") + p;

    session = "# SOLR session for simulated data, seed " + std::to_string(scn.seed) + "\n[session]\npack = " +
              scn.pack_ref + "\nmethod = solr\nports = " + ports_line + "\nthreshold_db = -15\n";
    session += port_sections();
    for (const auto& pr : scn.pairs) {
        const std::string tag = scn.ports[pr.a] + "-" + scn.ports[pr.b];
        session += "\n[pair." + tag + "]\nthru = raw/thru_" + tag + ".s2p\nthru_model = " + pr.thru + "\n";
    }
    detail::write_file((fs::path(out_dir) / "solr.ini").string(), session);
    written.push_back("solr.ini");

    if (scn.mtrl) {
        const auto& pr = scn.pairs[0];
        session = "# mTRL session for simulated data, seed " + std::to_string(scn.seed) + "\n[session]\npack = " +
                  scn.pack_ref + "\nmethod = mtrl\nports = " + scn.ports[pr.a] + " " + scn.ports[pr.b] +
                  "\nthreshold_db = -15\n";
        session += "\n[mtrl]\nthru = raw/mtrl_thru.s2p\nthru_length = " +
                   detail::shortest(scn.pack.thru(scn.pack.mtrl_thru).length) + "\nreflect_" + scn.ports[pr.a] +
                   " = raw/port_" + scn.ports[pr.a] + "_short.s1p\nreflect_" + scn.ports[pr.b] + " = raw/port_" +
                   scn.ports[pr.b] + "_short.s1p\nreflect_hint = short\n";
        for (const auto& l : sim.raw_lines)
            session += "\n[mtrl.line." + l.name + "]\nlength = " + detail::shortest(l.length) +
                       "\nfile = raw/mtrl_line_" + l.name + ".s2p\n";
        for (const auto* port : {&scn.ports[pr.a], &scn.ports[pr.b]}) {
            session += "\n[port." + *port + "]\n";
            for (const char* s : names)
                session += std::string(s) + " = raw/port_" + *port + "_" + s + ".s1p\n";
        }
        detail::write_file((fs::path(out_dir) / "mtrl.ini").string(), session);
        written.push_back("mtrl.ini");
    }

    nlohmann::json manifest;
    manifest["tool"] = "solrcal";
    manifest["seed"] = scn.seed;
    manifest["grid"] = {{"start_hz", scn.start_hz}, {"stop_hz", scn.stop_hz}, {"points", scn.points}};
    manifest["pack"] = scn.pack_ref;
    manifest["ports"] = scn.ports;
    if (scn.noise_db)
        manifest["noise_db"] = *scn.noise_db;
    else
        manifest["noise_db"] = nullptr;
    manifest["files"] = files;
    manifest["sessions"] = scn.mtrl ? nlohmann::json{"solr.ini", "mtrl.ini"} : nlohmann::json{"solr.ini"};
    detail::write_file((fs::path(out_dir) / "manifest.json").string(), manifest.dump(2) + "\n");
    written.push_back("manifest.json");
    return written;
}

} // namespace solrcal
