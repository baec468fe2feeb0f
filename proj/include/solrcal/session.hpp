#pragma once

#include "solrcal/cal_solvers.hpp"
#include "solrcal/config.hpp"
#include "solrcal/pack.hpp"

#include "json.hpp"

#include <optional>
#include <string>
#include <vector>

namespace solrcal {

struct SessionPort {
    std::string name;
    std::string short_file;
    std::string open_file;
    std::string load_file;
};

struct SessionPair {
    std::string a;
    std::string b;
    std::string thru_file;
    double delay_estimate = 0.0;
};

struct SessionLine {
    std::string name;
    double length = 0.0;
    std::string file;
};

struct SessionMtrl {
    std::string thru_file;
    double thru_length = 0.0;
    std::vector<std::string> reflect_files; ///< one per session port, in port order
    ReflectHint hint = ReflectHint::ShortLike;
    std::optional<double> eps_eff_hint;
    double degenerate_tol = kDegenerateTol;
    std::vector<SessionLine> lines;
};

/// Characterized definitions replacing the pack's Open/Short/Load.
struct SessionDefinitions {
    std::string short_file;
    std::string open_file;
    std::string load_file;
};

/// Parsed cal-session file. File paths are resolved against the session's
/// directory.
struct Session {
    std::string path;
    StandardPack pack;
    std::string method;
    std::vector<std::string> ports;
    double threshold_db = -15.0;
    std::optional<double> require_valid_to_hz;
    std::vector<SessionPort> port_files;
    std::vector<SessionPair> pairs;
    std::optional<SessionMtrl> mtrl;
    std::optional<SessionDefinitions> definitions;

    const SessionPort& port(const std::string& name) const;
};

Session parse_session(const Config& cfg);
Session load_session(const std::string& path);

struct RunOptions {
    std::optional<double> threshold_db;      ///< overrides the session value
    std::optional<double> require_valid_to;  ///< overrides the session value
    std::vector<std::string> ports;          ///< subset of session ports, empty = all
};

struct CalRun {
    MultiPortCalModel model;
    nlohmann::json report;
    std::string summary;
    /// False when the Load definition fails the threshold criterion.
    bool valid = true;
};

CalRun run_cal_solr(const Session& session, const RunOptions& opts = {});
CalRun run_cal_mtrl(const Session& session, const RunOptions& opts = {});

struct CharacterizeRun {
    MtrlResult mtrl;
    CharacterizedStandards standards;
    nlohmann::json report;
    std::string summary;
};

/// mTRL on the session's line set, then de-embedding of the Short/Open/Load
/// raw files of the mTRL ports.
CharacterizeRun run_characterize(const Session& session, const RunOptions& opts = {});

/// Writes short.s1p, open.s1p, load.s1p, fits.ini and a [definitions]
/// snippet for SOLR sessions into out_dir.
void write_characterized(const CharacterizeRun& run, const std::string& out_dir);

struct CorrectRun {
    Network corrected;
    nlohmann::json report;
    std::string summary;
};

CorrectRun run_correct(const MultiPortCalModel& model, const Network& raw);

/// Reciprocity and passivity figures of any network.
nlohmann::json check_network(const Network& net);

/// threshold_report of S11 (and reciprocity for 2+ ports) as JSON.
nlohmann::json threshold_json(const Network& net, double threshold_db);

} // namespace solrcal
