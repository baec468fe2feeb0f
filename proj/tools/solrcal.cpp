// solrcal: command-line front end.
//
// Exit codes
//   0   success
//   1   I/O error (missing or unwritable file)
//   2   parse error (Touchstone, config, cal-model, scenario)
//   3   solver error (singular, ambiguous, inconsistent, ...)
//   4   cal invalid: the Load definition fails the threshold criterion, or a
//       `check --strict` finds a non-passive or non-reciprocal network
//   64  usage error

#include "solrcal/error.hpp"
#include "solrcal/harness.hpp"
#include "solrcal/session.hpp"
#include "solrcal/touchstone.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace solrcal;

namespace {

enum Exit { kOk = 0, kIo = 1, kParse = 2, kSolver = 3, kInvalid = 4, kUsage = 64 };

struct Options {
    std::string config;
    std::string out;
    std::string model;
    std::string in;
    std::optional<std::uint64_t> seed;
    double threshold_db = -15.0;
    bool threshold_given = false;
    std::optional<double> require_valid_to;
    std::string ports;
    bool strict = false;
    bool quiet = false;
};

std::vector<std::string> port_list(const std::string& s)
{
    std::vector<std::string> out;
    std::string cur;
    for (const char c : s + ",") {
        if (c == ',' || c == ' ') {
            if (!cur.empty())
                out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    return out;
}

std::string resolve_config(const std::string& path)
{
    std::error_code ec;
    if (fs::is_regular_file(path, ec))
        return path;
    const fs::path alt = fs::path(default_config_dir()) / path;
    if (fs::is_regular_file(alt, ec))
        return alt.string();
    return path;
}

void write_json(const std::string& path, const nlohmann::json& j)
{
    std::ofstream f(path);
    if (!f)
        throw Error(Errc::Io, "cannot write '" + path + "'");
    f << j.dump(2) << "\n";
}

fs::path out_dir(const Options& o)
{
    const fs::path dir = o.out.empty() ? fs::path(".") : fs::path(o.out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw Error(Errc::Io, "cannot create '" + dir.string() + "': " + ec.message());
    return dir;
}

RunOptions run_options(const Options& o)
{
    RunOptions r;
    if (o.threshold_given)
        r.threshold_db = o.threshold_db;
    r.require_valid_to = o.require_valid_to;
    r.ports = port_list(o.ports);
    return r;
}

int cmd_simulate(const Options& o)
{
    Scenario scn;
    if (!o.config.empty())
        scn = parse_scenario(Config::load(resolve_config(o.config)));
    else
        scn.pack = load_pack(scn.pack_ref);
    if (o.seed)
        scn.seed = *o.seed;
    const fs::path dir = out_dir(o);
    const Simulation sim = simulate_measurements(scn);
    const auto files = write_simulation(sim, dir.string());
    if (!o.quiet)
        std::cout << "simulated " << scn.ports.size() << "-port scenario, seed " << scn.seed << ", "
                  << files.size() << " files in " << dir.string() << "\n";
    return kOk;
}

int cmd_cal(const Options& o, bool mtrl)
{
    const Session session = load_session(resolve_config(o.config));
    const CalRun run = mtrl ? run_cal_mtrl(session, run_options(o)) : run_cal_solr(session, run_options(o));
    const fs::path dir = out_dir(o);
    write_cal_model_file((dir / "model.cal").string(), run.model);
    write_json((dir / "report.json").string(), run.report);
    if (!o.quiet)
        std::cout << run.summary << "wrote " << (dir / "model.cal").string() << "\n";
    return run.valid ? kOk : kInvalid;
}

int cmd_characterize(const Options& o)
{
    const Session session = load_session(resolve_config(o.config));
    const CharacterizeRun run = run_characterize(session, run_options(o));
    const fs::path dir = out_dir(o);
    write_characterized(run, dir.string());
    write_cal_model_file((dir / "mtrl_model.cal").string(), run.mtrl.model);
    write_json((dir / "report.json").string(), run.report);
    if (!o.quiet)
        std::cout << run.summary << "wrote definitions to " << dir.string() << "\n";
    return kOk;
}

int cmd_correct(const Options& o)
{
    MultiPortCalModel model = read_cal_model_file(o.model);
    const auto ports = port_list(o.ports);
    if (!ports.empty()) {
        std::vector<std::size_t> idx;
        for (const auto& p : ports)
            idx.push_back(model.port_index(p));
        model = model.restrict_to(idx);
    }
    const Network raw = read_touchstone_file(o.in, model.n_ports());
    const CorrectRun run = run_correct(model, raw);
    const fs::path dir = out_dir(o);
    const std::string name = "corrected.s" + std::to_string(model.n_ports()) + "p";
    TouchstoneHeader h;
    h.tool = "solrcal correct";
    h.cal_state = "corrected with " + o.model;
    write_touchstone_file((dir / name).string(), run.corrected, {FreqUnit::Hz, DataFormat::RI, raw.z_ref()}, h);
    write_json((dir / "report.json").string(), run.report);
    if (!o.quiet)
        std::cout << run.summary << "wrote " << (dir / name).string() << "\n";
    return kOk;
}

int cmd_report(const Options& o)
{
    const Network net = read_touchstone_file(o.in);
    nlohmann::json j = threshold_json(net, o.threshold_db);
    j["file"] = o.in;
    if (!o.out.empty())
        write_json((out_dir(o) / "report.json").string(), j);
    const auto& s11 = j["s11_below"];
    std::cout << o.in << ": |S11| below " << o.threshold_db << " dB ";
    if (s11["valid_up_to_hz"].is_null())
        std::cout << "nowhere (fails at the first point)\n";
    else
        std::cout << "up to " << s11["valid_up_to_hz"].get<double>() / 1e9 << " GHz"
                  << (s11["full_grid"].get<bool>() ? " (full grid)" : "") << "\n";
    if (o.out.empty() && !o.quiet)
        std::cout << j.dump(2) << "\n";
    return kOk;
}

int cmd_check(const Options& o)
{
    const Network net = read_touchstone_file(o.in);
    nlohmann::json j = check_network(net);
    j["file"] = o.in;
    std::cout << j.dump(2) << "\n";
    if (o.strict && (!j["passive"].get<bool>() || (j.contains("reciprocal") && !j["reciprocal"].get<bool>())))
        return kInvalid;
    return kOk;
}

int exit_for(const Error& e)
{
    switch (errc_category(e.code())) {
    case ErrorCategory::Io:
        return kIo;
    case ErrorCategory::Parse:
        return kParse;
    case ErrorCategory::Solver:
        return kSolver;
    }
    return kSolver;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"SOLR / multiline-TRL VNA calibration toolkit"};
    app.require_subcommand(1);
    Options o;

    auto add_common = [&](CLI::App* c) {
        c->add_option("--out", o.out, "Output directory");
        c->add_flag("--quiet", o.quiet, "No human summary");
    };
    auto add_threshold = [&](CLI::App* c) {
        c->add_option_function<double>(
             "--threshold-db",
             [&](const double& v) {
                 o.threshold_db = v;
                 o.threshold_given = true;
             },
             "Load |S11| threshold in dB (default -15)");
    };

    auto* sim = app.add_subcommand("simulate", "Generate raw measurements from a scenario");
    sim->add_option("--config", o.config, "Scenario file");
    sim->add_option("--seed", o.seed, "Override the scenario seed");
    add_common(sim);

    auto* solr = app.add_subcommand("cal-solr", "SOLR calibration from a session file");
    auto* mtrl = app.add_subcommand("cal-mtrl", "Multiline TRL calibration from a session file");
    auto* chr = app.add_subcommand("characterize", "De-embed Short/Open/Load with mTRL");
    for (auto* c : {solr, mtrl, chr}) {
        c->add_option("--config", o.config, "Cal-session file")->required();
        c->add_option("--ports", o.ports, "Comma-separated subset of session ports");
        c->add_option("--require-valid-to", o.require_valid_to, "Minimum valid frequency in Hz");
        add_threshold(c);
        add_common(c);
    }

    auto* cor = app.add_subcommand("correct", "Apply a cal model to a raw Touchstone file");
    cor->add_option("--model", o.model, "Cal-model file")->required();
    cor->add_option("--in", o.in, "Raw Touchstone file")->required();
    cor->add_option("--ports", o.ports, "Model ports matching the file's ports, in order");
    add_common(cor);

    auto* rep = app.add_subcommand("report", "Threshold report of a Touchstone file");
    rep->add_option("--in", o.in, "Touchstone file")->required();
    add_threshold(rep);
    add_common(rep);

    auto* chk = app.add_subcommand("check", "Reciprocity and passivity of a Touchstone file");
    chk->add_option("--in", o.in, "Touchstone file")->required();
    chk->add_flag("--strict", o.strict, "Exit 4 unless passive and reciprocal");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        if (sim->parsed())
            return cmd_simulate(o);
        if (solr->parsed())
            return cmd_cal(o, false);
        if (mtrl->parsed())
            return cmd_cal(o, true);
        if (chr->parsed())
            return cmd_characterize(o);
        if (cor->parsed())
            return cmd_correct(o);
        if (rep->parsed())
            return cmd_report(o);
        if (chk->parsed())
            return cmd_check(o);
    } catch (const Error& e) {
        std::cerr << "solrcal: " << e.what() << "\n";
        return exit_for(e);
    } catch (const std::exception& e) {
        std::cerr << "solrcal: " << e.what() << "\n";
        return kSolver;
    }
    return kUsage;
}
