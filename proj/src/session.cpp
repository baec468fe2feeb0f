#include "solrcal/session.hpp"

#include "solrcal/error.hpp"
#include "solrcal/touchstone.hpp"
#include "text_util.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <sstream>

namespace solrcal {

using nlohmann::json;

namespace {

std::string ghz(double hz)
{
    std::ostringstream ss;
    ss.setf(std::ios::fixed);
    ss.precision(3);
    ss << hz / 1e9 << " GHz";
    return ss.str();
}

std::string sci(double v)
{
    std::ostringstream ss;
    ss.precision(2);
    ss << std::scientific << v;
    return ss.str();
}

std::string plain(double v)
{
    std::ostringstream ss;
    ss << v;
    return ss.str();
}

std::vector<double> unwrapped_phase_deg(const std::vector<cplx>& v)
{
    std::vector<double> out(v.size());
    double prev = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k) {
        double ph = std::arg(v[k]);
        if (k > 0)
            ph = prev + std::remainder(ph - prev, 2.0 * kPi);
        out[k] = ph;
        prev = ph;
    }
    for (auto& p : out)
        p *= 180.0 / kPi;
    return out;
}

std::vector<double> db_trace(const std::vector<cplx>& v)
{
    std::vector<double> out(v.size());
    for (std::size_t k = 0; k < v.size(); ++k)
        out[k] = to_db20(std::abs(v[k]));
    return out;
}

// JSON has no infinity; -inf dB levels are reported as null.
json finite_or_null(const std::vector<double>& v)
{
    json out = json::array();
    for (const double x : v)
        out.push_back(std::isfinite(x) ? json(x) : json(nullptr));
    return out;
}

Network read_port_file(const std::string& path, std::size_t n_ports)
{
    return read_touchstone_file(path, n_ports);
}

std::vector<std::string> selected_ports(const Session& s, const RunOptions& opts)
{
    if (opts.ports.empty())
        return s.ports;
    for (const auto& p : opts.ports)
        if (std::find(s.ports.begin(), s.ports.end(), p) == s.ports.end())
            throw Error(Errc::ConfigBadValue, "port '" + p + "' is not part of session " + s.path);
    return opts.ports;
}

struct ThresholdOutcome {
    json report;
    std::string line;
    bool valid = true;
};

ThresholdOutcome load_threshold(const Network& load_def, double threshold_db, std::optional<double> require)
{
    const ThresholdReport rep = threshold_report(load_def, threshold_db, ThresholdQuantity::S11Below);
    ThresholdOutcome out;
    out.report["quantity"] = "load_s11_below";
    out.report["threshold_db"] = threshold_db;
    out.report["valid_up_to_hz"] = rep.valid_up_to ? json(*rep.valid_up_to) : json(nullptr);
    out.report["full_grid"] = rep.full_grid;
    out.report["valid_points"] = rep.valid_points;
    out.report["level_db"] = finite_or_null(rep.level_db);
    out.report["margin_db"] = finite_or_null(rep.margin_db);
    out.report["required_hz"] = require ? json(*require) : json(nullptr);
    if (!rep.valid_up_to) {
        out.valid = false;
        out.line = "Load definition is above " + plain(threshold_db) + " dB at the first point: cal INVALID";
    } else {
        out.valid = !require || *rep.valid_up_to >= *require;
        out.line = "Load definition below " + plain(threshold_db) + " dB up to " + ghz(*rep.valid_up_to) + (rep.full_grid ? " (full grid)" : "") +
                   (out.valid ? ": cal valid to " + ghz(*rep.valid_up_to)
                              : ": cal INVALID, " + ghz(*require) + " required");
    }
    out.report["valid"] = out.valid;
    return out;
}

json terms_json(const MultiPortCalModel& model)
{
    json ports = json::array();
    for (std::size_t p = 0; p < model.n_ports(); ++p) {
        const auto& t = model.boxes()[p].terms;
        ports.push_back({{"name", model.port_names()[p]},
                         {"e00_db", finite_or_null(db_trace(t.e00))},
                         {"e11_db", finite_or_null(db_trace(t.e11))},
                         {"tracking_db", finite_or_null(db_trace(t.tracking))}});
    }
    return ports;
}

StandardTriple session_definitions(const Session& s, const FrequencyGrid& grid)
{
    if (!s.definitions)
        return s.pack.definitions(grid);
    StandardTriple d{read_port_file(s.definitions->short_file, 1), read_port_file(s.definitions->open_file, 1),
                     read_port_file(s.definitions->load_file, 1)};
    if (!(d.short_circuit.grid() == grid) || !(d.open_circuit.grid() == grid) || !(d.load.grid() == grid))
        throw Error(Errc::GridMismatch, "characterized definitions are on a different grid than the raw data");
    return d;
}

json grid_json(const FrequencyGrid& grid)
{
    return json(std::vector<double>(grid.points().begin(), grid.points().end()));
}

// Attaches file context to solver errors.
template <class F>
auto with_context(const std::string& context, F&& f)
{
    try {
        return f();
    } catch (const Error& e) {
        Error wrapped(e.code(), context + ": " + e.message());
        if (e.frequency())
            wrapped.at_frequency(*e.frequency());
        if (e.line())
            wrapped.at_line(*e.line());
        throw wrapped;
    }
}

} // namespace

const SessionPort& Session::port(const std::string& name) const
{
    for (const auto& p : port_files)
        if (p.name == name)
            return p;
    throw Error(Errc::ConfigMissingKey, path + ": no [port." + name + "] section");
}

Session parse_session(const Config& cfg)
{
    Session s;
    s.path = cfg.source();
    const auto& head = cfg.section("session");
    s.pack = load_pack(head.get_string("pack", "nyu28-pack"), cfg.base_dir());
    s.method = head.get_string("method", "");
    s.ports = head.get_list("ports");
    if (s.ports.empty())
        throw Error(Errc::ConfigBadValue, cfg.source() + ": [session] ports is empty").at_line(head.line());
    s.threshold_db = head.get_double("threshold_db", s.threshold_db);
    s.require_valid_to_hz = head.get_optional_double("require_valid_to_hz");

    for (const auto& name : s.ports) {
        const auto* sec = cfg.find_section("port." + name);
        if (!sec)
            continue;
        s.port_files.push_back({name, cfg.resolve(sec->get_string("short")), cfg.resolve(sec->get_string("open")),
                                cfg.resolve(sec->get_string("load"))});
    }

    for (const auto* sec : cfg.sections_with_prefix("pair.")) {
        const auto ends = detail::split(sec->name().substr(5), '-');
        if (ends.size() != 2 || ends[0].empty() || ends[1].empty())
            throw Error(Errc::ConfigSyntax, cfg.source() + ": pair section [" + sec->name() + "] must be [pair.A-B]")
                .at_line(sec->line());
        for (const auto& e : ends)
            if (std::find(s.ports.begin(), s.ports.end(), e) == s.ports.end())
                throw Error(Errc::ConfigBadValue, cfg.source() + ": [" + sec->name() + "] names unknown port '" + e +
                                                      "'")
                    .at_line(sec->line());
        SessionPair p{ends[0], ends[1], cfg.resolve(sec->get_string("thru")), 0.0};
        if (sec->has("delay_estimate")) {
            p.delay_estimate = sec->get_double("delay_estimate");
        } else if (sec->has("thru_model")) {
            const LineModel& l = s.pack.thru(sec->get_string("thru_model"));
            p.delay_estimate = l.length * std::sqrt(l.eps_eff) / kSpeedOfLight;
        } else if (sec->has("thru_length")) {
            const double eps = sec->get_double("eps_eff", s.pack.fixture.feed.eps_eff);
            p.delay_estimate = sec->get_double("thru_length") * std::sqrt(eps) / kSpeedOfLight;
        } else {
            throw Error(Errc::ConfigMissingKey, cfg.source() + ": [" + sec->name() +
                                                    "] needs delay_estimate, thru_model or thru_length")
                .at_line(sec->line());
        }
        s.pairs.push_back(std::move(p));
    }

    if (const auto* sec = cfg.find_section("mtrl")) {
        SessionMtrl m;
        m.thru_file = cfg.resolve(sec->get_string("thru"));
        m.thru_length = sec->get_double("thru_length", 0.0);
        for (const auto& name : s.ports)
            m.reflect_files.push_back(cfg.resolve(sec->get_string("reflect_" + name)));
        const std::string hint = sec->get_string("reflect_hint", "short");
        if (hint == "short")
            m.hint = ReflectHint::ShortLike;
        else if (hint == "open")
            m.hint = ReflectHint::OpenLike;
        else
            throw Error(Errc::ConfigBadValue, cfg.source() + ": reflect_hint must be short or open").at_line(sec->line());
        m.eps_eff_hint = sec->get_optional_double("eps_eff_hint");
        m.degenerate_tol = sec->get_double("degenerate_tol_deg", kDegenerateTol * 180.0 / kPi) * kPi / 180.0;
        for (const auto* l : cfg.sections_with_prefix("mtrl.line."))
            m.lines.push_back({l->name().substr(10), l->get_double("length"), cfg.resolve(l->get_string("file"))});
        if (m.lines.empty())
            throw Error(Errc::ConfigMissingKey, cfg.source() + ": [mtrl] needs at least one [mtrl.line.NAME] section");
        s.mtrl = std::move(m);
    }

    if (s.method != "" && s.method != "solr" && s.method != "mtrl")
        throw Error(Errc::ConfigBadValue, cfg.source() + ": method must be solr or mtrl, got '" + s.method + "'")
            .at_line(head.line());
    if (s.method == "solr") {
        if (s.port_files.size() != s.ports.size())
            throw Error(Errc::ConfigMissingKey, cfg.source() + ": every SOLR port needs a [port.NAME] section");
        if (s.pairs.empty())
            throw Error(Errc::ConfigMissingKey, cfg.source() + ": SOLR needs at least one [pair.A-B] section");
    }
    if (s.method == "mtrl" && !s.mtrl)
        throw Error(Errc::ConfigMissingKey, cfg.source() + ": method mtrl needs an [mtrl] section");

    if (const auto* sec = cfg.find_section("definitions"))
        s.definitions = SessionDefinitions{cfg.resolve(sec->get_string("short")), cfg.resolve(sec->get_string("open")),
                                           cfg.resolve(sec->get_string("load"))};
    return s;
}

Session load_session(const std::string& path)
{
    return parse_session(Config::load(path));
}

CalRun run_cal_solr(const Session& session, const RunOptions& opts)
{
    const auto ports = selected_ports(session, opts);
    const double threshold_db = opts.threshold_db.value_or(session.threshold_db);
    const auto require = opts.require_valid_to ? opts.require_valid_to : session.require_valid_to_hz;

    std::map<std::string, StandardTriple> raw;
    for (const auto& name : ports) {
        const SessionPort& p = session.port(name);
        raw[name] = {read_port_file(p.short_file, 1), read_port_file(p.open_file, 1), read_port_file(p.load_file, 1)};
    }
    const FrequencyGrid grid = raw[ports.front()].short_circuit.grid();
    const StandardTriple defs = session_definitions(session, grid);

    std::vector<MultiPortCalModel> pair_models;
    json pairs = json::array();
    std::string summary;
    CalRun run;
    for (const auto& pr : session.pairs) {
        if (std::find(ports.begin(), ports.end(), pr.a) == ports.end() ||
            std::find(ports.begin(), ports.end(), pr.b) == ports.end())
            continue;
        const std::string tag = pr.a + "-" + pr.b;
        SolrInput in;
        in.port_a = {pr.a, raw[pr.a], defs};
        in.port_b = {pr.b, raw[pr.b], defs};
        in.thru = read_port_file(pr.thru_file, 2);
        in.delay_estimate = pr.delay_estimate;
        const SolrResult res = with_context("pair " + tag + " (" + pr.thru_file + ")", [&] { return solve_solr(in); });
        const Network corrected = correct_multiport(res.model, in.thru);
        const double round_trip = max_abs_diff(embed_multiport(res.model, corrected), in.thru);

        json signs = json::array();
        for (const auto& d : res.signs)
            signs.push_back({{"hz", d.hz},
                             {"k_re", d.k.real()},
                             {"k_im", d.k.imag()},
                             {"deviation_rad", d.deviation},
                             {"alt_deviation_rad", d.alt_deviation}});
        double worst_dev = 0.0;
        for (const auto& d : res.signs)
            worst_dev = std::max(worst_dev, std::abs(d.deviation));
        pairs.push_back({{"pair", tag},
                         {"thru_file", pr.thru_file},
                         {"delay_estimate_s", pr.delay_estimate},
                         {"corrected_thru_reciprocity_max", res.thru_reciprocity},
                         {"round_trip_error", round_trip},
                         {"max_sign_deviation_rad", worst_dev},
                         {"sign_decisions", signs}});
        summary += "pair " + tag + ": corrected thru reciprocity " + sci(res.thru_reciprocity) +
                   ", correction round-trip " + sci(round_trip) + ", worst sign phase miss " + sci(worst_dev) +
                   " rad\n";
        pair_models.push_back(res.model);
    }
    if (pair_models.empty() && ports.size() > 1)
        throw Error(Errc::DisconnectedTree, "no [pair.*] section connects the selected ports");

    if (ports.size() == 1) {
        // Single-port session: SOL only.
        const OnePortTerms t = solve_one_port_sol(raw[ports[0]], defs);
        run.model = MultiPortCalModel({PortErrorBox(t)}, {}, ports, grid.empty() ? kDefaultZref : defs.load.z_ref());
    } else {
        run.model = build_fourport_cal(pair_models, ports);
    }

    const ThresholdOutcome th = load_threshold(defs.load, threshold_db, require);
    run.valid = th.valid;
    run.report["method"] = "solr";
    run.report["session"] = session.path;
    run.report["ports"] = ports;
    run.report["frequencies_hz"] = grid_json(grid);
    run.report["definitions"] = session.definitions ? "characterized" : "pack " + session.pack.name;
    run.report["terms"] = terms_json(run.model);
    run.report["pairs"] = pairs;
    run.report["k_consistency_residual"] = run.model.k_consistency_residual();
    run.report["threshold"] = th.report;

    std::string head = "SOLR calibration, ports";
    for (const auto& p : ports)
        head += " " + p;
    head += ", " + std::to_string(grid.size()) + " points " + ghz(grid.front()) + " to " + ghz(grid.back()) + "\n";
    run.summary = head + summary + "k consistency residual " + sci(run.model.k_consistency_residual()) + "\n" +
                  th.line + "\n";
    return run;
}

namespace {

MtrlInput mtrl_input(const Session& session, const std::vector<std::string>& ports)
{
    if (!session.mtrl)
        throw Error(Errc::ConfigMissingKey, session.path + ": no [mtrl] section");
    if (ports.size() != 2)
        throw Error(Errc::ConfigBadValue, session.path + ": mTRL needs exactly two ports");
    const SessionMtrl& m = *session.mtrl;
    auto reflect_of = [&](const std::string& name) {
        for (std::size_t i = 0; i < session.ports.size(); ++i)
            if (session.ports[i] == name)
                return read_port_file(m.reflect_files[i], 1);
        throw Error(Errc::ConfigBadValue, "unknown port " + name);
    };
    MtrlInput in;
    in.name_a = ports[0];
    in.name_b = ports[1];
    in.thru = read_port_file(m.thru_file, 2);
    in.thru_length = m.thru_length;
    for (const auto& l : m.lines)
        in.lines.push_back({l.length, read_port_file(l.file, 2)});
    in.reflect_a = reflect_of(ports[0]);
    in.reflect_b = reflect_of(ports[1]);
    in.reflect_hint = m.hint;
    in.eps_eff_hint = m.eps_eff_hint;
    in.degenerate_tol = m.degenerate_tol;
    return in;
}

json gamma_json(const GammaEstimate& g)
{
    json out;
    std::vector<double> re, im, res;
    std::vector<bool> flags;
    for (std::size_t k = 0; k < g.grid.size(); ++k) {
        re.push_back(g.gamma[k].real());
        im.push_back(g.gamma[k].imag());
        res.push_back(g.residual[k]);
        flags.push_back(g.degenerate[k]);
    }
    out["alpha_np_per_m"] = re;
    out["beta_rad_per_m"] = im;
    out["residual"] = res;
    out["degenerate"] = flags;
    json bands = json::array();
    for (const auto& b : g.degenerate_bands())
        bands.push_back({b.first, b.second});
    out["degenerate_bands_hz"] = bands;
    // Complement of the flagged points.
    json valid = json::array();
    for (std::size_t k = 0; k < g.grid.size(); ++k) {
        if (g.degenerate[k])
            continue;
        if (k > 0 && !g.degenerate[k - 1])
            valid.back()[1] = g.grid[k];
        else
            valid.push_back({g.grid[k], g.grid[k]});
    }
    out["valid_bands_hz"] = valid;
    return out;
}

std::string bands_text(const GammaEstimate& g)
{
    const auto bands = g.degenerate_bands();
    if (bands.empty())
        return "no degenerate frequencies";
    std::string s = "degenerate (excluded):";
    for (const auto& b : bands)
        s += " " + ghz(b.first) + "-" + ghz(b.second);
    return s;
}

} // namespace

CalRun run_cal_mtrl(const Session& session, const RunOptions& opts)
{
    const auto ports = selected_ports(session, opts);
    const double threshold_db = opts.threshold_db.value_or(session.threshold_db);
    const auto require = opts.require_valid_to ? opts.require_valid_to : session.require_valid_to_hz;
    const MtrlInput in = mtrl_input(session, ports);
    const MtrlResult res = with_context("mTRL " + ports[0] + "-" + ports[1], [&] { return solve_mtrl(in); });

    CalRun run;
    run.model = res.model;
    const FrequencyGrid& grid = in.thru.grid();
    const StandardTriple defs = session_definitions(session, grid);
    const ThresholdOutcome th = load_threshold(defs.load, threshold_db, require);
    run.valid = th.valid;

    const Network corrected_thru = correct_multiport(res.model, in.thru);
    double thru_err = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        CMatrix ideal(2, 2);
        ideal << 0.0, 1.0, 1.0, 0.0;
        thru_err = std::max(thru_err, (corrected_thru[k] - ideal).cwiseAbs().maxCoeff());
    }
    std::size_t flagged = 0;
    for (const bool b : res.gamma.degenerate)
        flagged += b ? 1 : 0;

    run.report["method"] = "mtrl";
    run.report["session"] = session.path;
    run.report["ports"] = ports;
    run.report["frequencies_hz"] = grid_json(grid);
    run.report["reference_plane"] = "thru center";
    run.report["gamma"] = gamma_json(res.gamma);
    run.report["terms"] = terms_json(run.model);
    run.report["corrected_thru_error"] = thru_err;
    run.report["threshold"] = th.report;
    run.summary = "mTRL calibration, ports " + ports[0] + " " + ports[1] + ", " + std::to_string(in.lines.size()) +
                  " lines, " + std::to_string(grid.size()) + " points\n" + bands_text(res.gamma) + " (" +
                  std::to_string(flagged) + " points)\ncorrected thru deviation from ideal " + sci(thru_err) + "\n" +
                  th.line + "\n";
    return run;
}

CharacterizeRun run_characterize(const Session& session, const RunOptions& opts)
{
    const auto ports = selected_ports(session, opts);
    CharacterizeRun run;
    const MtrlInput in = mtrl_input(session, ports);
    run.mtrl = with_context("mTRL " + ports[0] + "-" + ports[1], [&] { return solve_mtrl(in); });
    std::vector<CharacterizeInput> raw;
    for (std::size_t i = 0; i < 2; ++i) {
        const SessionPort& p = session.port(ports[i]);
        raw.push_back({i, {read_port_file(p.short_file, 1), read_port_file(p.open_file, 1),
                           read_port_file(p.load_file, 1)}});
    }
    run.standards = with_context("characterize", [&] { return characterize_standards(run.mtrl.model, raw); });

    const double threshold_db = opts.threshold_db.value_or(session.threshold_db);
    const auto require = opts.require_valid_to ? opts.require_valid_to : session.require_valid_to_hz;
    const ThresholdOutcome th = load_threshold(run.standards.load_gamma, threshold_db, require);

    auto fit_json = [](const ReflectFit& f) {
        return json{{"coeffs", f.model.coeffs}, {"max_residual", f.max_residual}, {"condition", f.condition_estimate}};
    };
    const FrequencyGrid& grid = in.thru.grid();
    run.report["method"] = "characterize";
    run.report["session"] = session.path;
    run.report["ports"] = ports;
    run.report["frequencies_hz"] = grid_json(grid);
    run.report["gamma"] = gamma_json(run.mtrl.gamma);
    run.report["open_fit"] = fit_json(run.standards.open_fit);
    run.report["short_fit"] = fit_json(run.standards.short_fit);
    run.report["port_spread"] = run.standards.port_spread;
    run.report["load_s11_db"] = finite_or_null(db_trace(run.standards.load_gamma.trace(0, 0)));
    run.report["threshold"] = th.report;

    std::ostringstream ss;
    ss.precision(6);
    ss << "standards characterized with mTRL on ports " << ports[0] << " " << ports[1] << "\n";
    ss << "Open  C0..C3 = " << run.standards.open_fit.model.coeffs[0] << " " << run.standards.open_fit.model.coeffs[1]
       << " " << run.standards.open_fit.model.coeffs[2] << " " << run.standards.open_fit.model.coeffs[3]
       << " (fit residual " << sci(run.standards.open_fit.max_residual) << ")\n";
    ss << "Short L0..L3 = " << run.standards.short_fit.model.coeffs[0] << " "
       << run.standards.short_fit.model.coeffs[1] << " " << run.standards.short_fit.model.coeffs[2] << " "
       << run.standards.short_fit.model.coeffs[3] << " (fit residual " << sci(run.standards.short_fit.max_residual)
       << ")\n";
    ss << "port disagreement S/O/L: " << sci(run.standards.port_spread[0]) << " " << sci(run.standards.port_spread[1])
       << " " << sci(run.standards.port_spread[2]) << "\n";
    ss << th.line << "\n";
    run.summary = ss.str();
    return run;
}

void write_characterized(const CharacterizeRun& run, const std::string& out_dir)
{
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec)
        throw Error(Errc::Io, "cannot create '" + out_dir + "': " + ec.message());
    const TouchstoneOptions opts{FreqUnit::Hz, DataFormat::RI, run.standards.load_gamma.z_ref()};
    TouchstoneHeader h;
    h.tool = "solrcal characterize";
    h.cal_state = "de-embedded with mTRL";
    const std::string dir = fs::absolute(out_dir).string();
    write_touchstone_file(dir + "/short.s1p", run.standards.definitions.short_circuit, opts, h);
    write_touchstone_file(dir + "/open.s1p", run.standards.definitions.open_circuit, opts, h);
    write_touchstone_file(dir + "/load.s1p", run.standards.definitions.load, opts, h);

    std::string fits = "# polynomial fits of the de-embedded reflects\n[open]\n";
    for (std::size_t i = 0; i < 4; ++i)
        fits += "c" + std::to_string(i) + " = " + detail::shortest(run.standards.open_fit.model.coeffs[i]) + "\n";
    fits += "\n[short]\n";
    for (std::size_t i = 0; i < 4; ++i)
        fits += "l" + std::to_string(i) + " = " + detail::shortest(run.standards.short_fit.model.coeffs[i]) + "\n";
    detail::write_file(dir + "/fits.ini", fits);
    detail::write_file(dir + "/definitions.ini", "# append to a SOLR session to use these definitions\n"
                                                 "[definitions]\nshort = " + dir + "/short.s1p\nopen = " + dir +
                                                     "/open.s1p\nload = " + dir + "/load.s1p\n");
}

CorrectRun run_correct(const MultiPortCalModel& model, const Network& raw)
{
    CorrectRun run;
    run.corrected = correct_multiport(model, raw);
    const FrequencyGrid& grid = raw.grid();
    run.report["ports"] = model.port_names();
    run.report["frequencies_hz"] = grid_json(grid);
    std::ostringstream ss;
    ss << "corrected " << model.n_ports() << "-port DUT, " << grid.size() << " points\n";
    if (raw.n_ports() >= 2) {
        const auto raw21 = raw.trace(1, 0);
        const auto cor21 = run.corrected.trace(1, 0);
        const auto raw_ph = unwrapped_phase_deg(raw21);
        const auto cor_ph = unwrapped_phase_deg(cor21);
        run.report["raw_s21_db"] = finite_or_null(db_trace(raw21));
        run.report["raw_s21_phase_deg"] = raw_ph;
        run.report["corrected_s21_db"] = finite_or_null(db_trace(cor21));
        run.report["corrected_s21_phase_deg"] = cor_ph;
        const auto rec = reciprocity_error(run.corrected);
        run.report["corrected_reciprocity_error"] = rec;
        const double worst = *std::max_element(rec.begin(), rec.end());
        run.report["corrected_reciprocity_max"] = worst;
        ss << "S21 phase at " << ghz(grid.back()) << ": raw " << raw_ph.back() << " deg, corrected " << cor_ph.back()
           << " deg\n";
        ss << "corrected |S21| at " << ghz(grid.back()) << ": " << to_db20(std::abs(cor21.back())) << " dB\n";
        ss << "corrected reciprocity error max " << sci(worst) << "\n";
    }
    run.summary = ss.str();
    return run;
}

json check_network(const Network& net)
{
    json out;
    out["ports"] = net.n_ports();
    out["points"] = net.size();
    const auto pass = passivity_margin(net);
    const double min_margin = *std::min_element(pass.begin(), pass.end());
    out["passivity_margin_min"] = min_margin;
    out["passive"] = min_margin >= -1e-9;
    if (net.n_ports() >= 2) {
        const auto rec = reciprocity_error(net);
        const double worst = *std::max_element(rec.begin(), rec.end());
        out["reciprocity_error_max"] = worst;
        out["reciprocal"] = worst < 1e-9;
    }
    return out;
}

json threshold_json(const Network& net, double threshold_db)
{
    json out;
    out["threshold_db"] = threshold_db;
    auto one = [&](ThresholdQuantity q) {
        const auto rep = threshold_report(net, threshold_db, q);
        return json{{"valid_up_to_hz", rep.valid_up_to ? json(*rep.valid_up_to) : json(nullptr)},
                    {"full_grid", rep.full_grid},
                    {"valid_points", rep.valid_points},
                    {"level_db", finite_or_null(rep.level_db)}};
    };
    out["s11_below"] = one(ThresholdQuantity::S11Below);
    if (net.n_ports() >= 2)
        out["s21_reciprocity"] = one(ThresholdQuantity::S21Reciprocity);
    return out;
}

} // namespace solrcal
