// Acceptance runner: `acceptance [id ...]` runs the listed criteria (all ten
// when none are given) and prints one PASS/FAIL line each. Exit status is 0
// only when every requested criterion passes.

#include "solrcal/cal_solvers.hpp"
#include "solrcal/error.hpp"
#include "solrcal/harness.hpp"
#include "solrcal/session.hpp"
#include "solrcal/touchstone.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>

using namespace solrcal;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a)
{
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

std::string fmt2(const char* f, double a, double b)
{
    char buf[160];
    std::snprintf(buf, sizeof buf, f, a, b);
    return buf;
}

const StandardPack& pack()
{
    static const StandardPack p = load_pack("nyu28-pack");
    return p;
}

double delay_of(const LineModel& line)
{
    return line.length * std::sqrt(line.eps_eff) / kSpeedOfLight;
}

SolrInput solr_input(const Simulation& sim, std::size_t pair, const StandardTriple& defs)
{
    const auto& sp = sim.scenario.pairs[pair];
    SolrInput in;
    in.port_a = {sim.scenario.ports[sp.a], sim.raw_sol[sp.a], defs};
    in.port_b = {sim.scenario.ports[sp.b], sim.raw_sol[sp.b], defs};
    in.thru = sim.raw_thrus[pair];
    in.delay_estimate = delay_of(sim.scenario.pack.thru(sp.thru));
    return in;
}

MtrlInput mtrl_input(const Simulation& sim)
{
    MtrlInput in;
    in.name_a = sim.scenario.ports[sim.scenario.pairs[0].a];
    in.name_b = sim.scenario.ports[sim.scenario.pairs[0].b];
    in.thru = sim.raw_mtrl_thru;
    in.thru_length = sim.scenario.pack.thru(sim.scenario.pack.mtrl_thru).length;
    for (const auto& l : sim.raw_lines)
        in.lines.push_back({l.length, l.raw});
    in.reflect_a = sim.raw_sol[sim.scenario.pairs[0].a].short_circuit;
    in.reflect_b = sim.raw_sol[sim.scenario.pairs[0].b].short_circuit;
    return in;
}

Scenario base(std::uint64_t seed)
{
    Scenario scn;
    scn.pack = pack();
    scn.seed = seed;
    return scn;
}

// 1. SOLR round trip ----------------------------------------------------------
Outcome solr_round_trip()
{
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    int failures = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        Scenario scn = base(seed);
        scn.dut = DutKind::Random;
        scn.mtrl = false;
        try {
            const Simulation sim = simulate_measurements(scn);
            const SolrResult r = solve_solr(solr_input(sim, 0, sim.definitions));
            const double err = max_abs_diff(correct_multiport(r.model, sim.raw_dut), sim.dut_truth);
            worst = std::max(worst, err);
            if (!(err < 1e-9))
                ++failures;
        } catch (const Error& e) {
            ++failures;
            std::printf("  seed %llu: %s\n", static_cast<unsigned long long>(seed), e.what());
        }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    Outcome o;
    o.pass = failures == 0 && secs < 60.0;
    o.detail = "100 scenarios, max |dS| " + fmt("%.2e", worst) + ", " + std::to_string(failures) + " over 1e-9, " +
               fmt("%.2f s", secs) + " (limit 60 s)";
    return o;
}

// 2. Four-port assembly ---------------------------------------------------------
Outcome fourport()
{
    double worst = 0.0;
    double worst_k = 0.0;
    bool ok = true;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        Scenario scn = base(seed);
        scn.ports = {"N", "E", "S", "W"};
        scn.pairs = {{0, 1, "arc"}, {1, 2, "arc"}, {2, 3, "arc"}, {0, 3, "arc"}};
        scn.boxes.assign(4, BoxSpec{});
        scn.dut = DutKind::Random;
        scn.mtrl = false;
        const Simulation sim = simulate_measurements(scn);
        std::vector<MultiPortCalModel> pairwise;
        for (std::size_t p = 0; p < scn.pairs.size(); ++p)
            pairwise.push_back(solve_solr(solr_input(sim, p, sim.definitions)).model);
        const MultiPortCalModel tree = build_fourport_cal({pairwise[0], pairwise[1], pairwise[2]});
        const double err = max_abs_diff(correct_multiport(tree, sim.raw_dut), sim.dut_truth);
        const MultiPortCalModel redundant = build_fourport_cal(pairwise);
        worst = std::max(worst, err);
        worst_k = std::max(worst_k, redundant.k_consistency_residual());
        ok = ok && err < 1e-9 && redundant.k_consistency_residual() < 1e-9;
    }
    return {ok, "10 seeds, tree {N-E,E-S,S-W} max |dS| " + fmt("%.2e", worst) + ", with N-W k residual " +
                    fmt("%.2e", worst_k)};
}

// 3. Sign resolution ------------------------------------------------------------
Outcome sign_resolution()
{
    Scenario proto = base(0);
    proto.points = 201;
    proto.dut = DutKind::None;
    proto.mtrl = false;
    const FrequencyGrid grid = proto.grid();
    const double df = grid[1] - grid[0];
    const double tau_max = 1.0 / (2.0 * df);
    const double tau_min = 0.1e-12;
    const LineModel& ref = pack().thru("arc");

    int correct = 0, flagged = 0, errors = 0;
    const int trials = 1000;
    Rng pick(2024);
    for (int t = 0; t < trials; ++t) {
        // log-spaced delays with both ends included
        const double frac = static_cast<double>(t) / (trials - 1);
        const double tau = tau_min * std::pow(tau_max / tau_min, frac);
        Scenario scn = proto;
        scn.seed = 1000 + static_cast<std::uint64_t>(t);
        LineModel line = ref;
        line.length = tau * kSpeedOfLight / std::sqrt(line.eps_eff);
        // lossless: at ~9 cm the arc loss per meter would push |S21| under the transmission gate
        line.alpha_c = 0.0;
        line.alpha_d = 0.0;
        scn.pack.thrus.push_back({"trial", line});
        scn.pairs = {{0, 1, "trial"}};
        try {
            const Simulation sim = simulate_measurements(scn);
            SolrInput in = solr_input(sim, 0, sim.definitions);
            // coarse estimate: up to ±5 % off
            in.delay_estimate = tau * (1.0 + pick.uniform(-0.05, 0.05));
            const SolrResult r = solve_solr(in);
            const Network thru = correct_multiport(r.model, sim.raw_thrus[0]);
            if (max_abs_diff(thru, sim.thru_models[0]) < 1e-9)
                ++correct;

            // negative control: wrong sign over the whole sweep or from a random point on
            std::vector<KEdge> edges = r.model.edges();
            const std::size_t from = t % 2 == 0 ? 0 : 1 + static_cast<std::size_t>(pick.uniform() * (grid.size() - 1));
            for (std::size_t k = from; k < grid.size(); ++k)
                edges[0].k[k] = -edges[0].k[k];
            const MultiPortCalModel wrong(r.model.boxes(), edges, r.model.port_names());
            const SignCheck chk = check_thru_sign(correct_multiport(wrong, sim.raw_thrus[0]), in.delay_estimate);
            if (!chk.consistent && chk.first_bad == from)
                ++flagged;
        } catch (const Error& e) {
            ++errors;
            std::printf("  trial %d (tau %.4g ps): %s\n", t, tau * 1e12, e.what());
        }
    }
    Outcome o;
    o.pass = correct == trials && flagged == trials;
    o.detail = "delays 0.1 ps .. " + fmt("%.1f ps", tau_max * 1e12) + ", correct sign " + std::to_string(correct) +
               "/1000, negative control flagged " + std::to_string(flagged) + "/1000, solver errors " +
               std::to_string(errors);
    return o;
}

// 4. mTRL gamma -----------------------------------------------------------------
Outcome mtrl_gamma()
{
    double worst = 0.0;
    int mismatched = 0;
    std::size_t flagged_points = 0;
    std::size_t bands = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        Scenario scn = base(seed);
        scn.dut = DutKind::None;
        const Simulation sim = simulate_measurements(scn);
        const MtrlInput in = mtrl_input(sim);
        const MtrlResult r = solve_mtrl(in);
        const LineModel& line = pack().lines.front().line;
        std::vector<double> lengths{in.thru_length};
        for (const auto& l : in.lines)
            lengths.push_back(l.length);
        for (std::size_t k = 0; k < sim.grid.size(); ++k) {
            const cplx truth = line.gamma(sim.grid[k]);
            bool predicted = true;
            for (std::size_t i = 0; i < lengths.size(); ++i)
                for (std::size_t j = i + 1; j < lengths.size(); ++j) {
                    const double phi = truth.imag() * std::abs(lengths[j] - lengths[i]);
                    predicted = predicted && std::abs(phi - kPi * std::round(phi / kPi)) < in.degenerate_tol;
                }
            if (predicted != r.gamma.degenerate[k])
                ++mismatched;
            if (r.gamma.degenerate[k]) {
                ++flagged_points;
                continue;
            }
            worst = std::max(worst, std::abs(r.gamma.gamma[k] - truth) / std::abs(truth));
        }
        bands = std::max(bands, r.gamma.degenerate_bands().size());
    }
    Outcome o;
    o.pass = worst < 1e-6 && mismatched == 0;
    o.detail = "10 seeds, max relative gamma error " + fmt("%.2e", worst) + " outside flagged bands, " +
               std::to_string(flagged_points / 10) + " flagged points per sweep in " + std::to_string(bands) +
               " band(s), " + std::to_string(mismatched) + " flag mismatches vs prediction";
    return o;
}

// 5. Virtual-mTRL characterization -----------------------------------------------
Outcome characterization()
{
    double worst_def = 0.0, worst_c0 = 0.0, worst_dut = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const Simulation sim = simulate_measurements(base(seed));
        const MtrlResult m = solve_mtrl(mtrl_input(sim));
        const CharacterizedStandards ch = characterize_standards(m.model, {{0, sim.raw_sol[0]}, {1, sim.raw_sol[1]}});
        worst_def = std::max({worst_def, max_abs_diff(ch.definitions.open_circuit, sim.definitions.open_circuit),
                              max_abs_diff(ch.definitions.short_circuit, sim.definitions.short_circuit),
                              max_abs_diff(ch.definitions.load, sim.definitions.load)});
        worst_c0 = std::max(worst_c0, std::abs(ch.open_fit.model.coeffs[0] - 5e-15));
        const SolrResult r = solve_solr(solr_input(sim, 0, ch.definitions));
        worst_dut = std::max(worst_dut, max_abs_diff(correct_multiport(r.model, sim.raw_dut), sim.dut_truth));
    }
    Outcome o;
    o.pass = worst_def < 1e-8 && worst_c0 <= 0.01e-15 && worst_dut < 1e-7;
    o.detail = "10 seeds, O/S/L vs pack " + fmt("%.2e", worst_def) + ", |C0 - 5 fF| " +
               fmt("%.2e fF", worst_c0 * 1e15) + ", diagonal-thru DUT via characterized SOLR " +
               fmt("%.2e", worst_dut);
    return o;
}

// 6. Threshold semantics -----------------------------------------------------------
Outcome threshold()
{
    const auto grid = FrequencyGrid::linear(1e9, 170e9, 16901);
    const Network embedded = terminate(eval_fixture(pack().fixture, grid), eval_load(pack().load, grid));
    const ThresholdReport emb = threshold_report(embedded, -15.0, ThresholdQuantity::S11Below);
    const bool finite = emb.valid_up_to.has_value() && std::isfinite(*emb.valid_up_to);

    // bisection oracle on |Γ| of 50 Ω + 10 pH, independent of eval_load
    auto mag = [](double f) {
        const cplx z(50.0, 2.0 * kPi * f * 10e-12);
        return std::abs((z - 50.0) / (z + 50.0));
    };
    const double target = std::pow(10.0, -15.0 / 20.0);
    double lo = 1e9, hi = 2e12;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (mag(mid) < target ? lo : hi) = mid;
    }
    const double oracle = 0.5 * (lo + hi);

    const auto fine = FrequencyGrid::linear(1e9, 400e9, 39901);
    const ThresholdReport rep =
        threshold_report(eval_load({50.0, 10e-12, std::nullopt}, fine), -15.0, ThresholdQuantity::S11Below);
    const double fstar = rep.valid_up_to.value_or(0.0);
    const bool matches_oracle = std::abs(fstar - oracle) <= 0.1e9;
    const bool matches_stated = std::abs(fstar - 28.3e9) <= 0.1e9;

    Outcome o;
    o.pass = finite && matches_oracle && matches_stated;
    o.detail = "embedded pack Load f* " + (finite ? fmt("%.3f GHz", *emb.valid_up_to / 1e9) : std::string("none")) +
               "; 50 ohm + 10 pH f* " + fmt2("%.2f GHz (bisection oracle %.2f GHz)", fstar / 1e9, oracle / 1e9) +
               ", required 28.3 +/- 0.1 GHz";
    return o;
}

// 7. Reciprocity gate ------------------------------------------------------------
Outcome reciprocity_gate()
{
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        for (const char* thru : {"arc", "diagonal", "straight"}) {
            Scenario scn = base(seed);
            scn.pairs = {{0, 1, thru}};
            scn.mtrl = false;
            scn.dut = DutKind::None;
            const Simulation sim = simulate_measurements(scn);
            const SolrResult r = solve_solr(solr_input(sim, 0, sim.definitions));
            const auto rec = reciprocity_error(correct_multiport(r.model, sim.raw_thrus[0]));
            worst = std::max(worst, *std::max_element(rec.begin(), rec.end()));
        }
    }

    // an isolator presented as the reciprocal thru standard
    Scenario scn = base(99);
    scn.mtrl = false;
    scn.dut = DutKind::None;
    Simulation sim = simulate_measurements(scn);
    CMatrix iso(2, 2);
    iso << 0.0, 0.0, 1.0, 0.0;
    const Network raw_iso = embed_multiport(sim.truth, Network::constant(sim.grid, iso));
    SolrInput in = solr_input(sim, 0, sim.definitions);
    in.thru = raw_iso;
    std::string verdict = "accepted";
    bool rejected = false;
    try {
        solve_solr(in);
    } catch (const Error& e) {
        rejected = e.code() == Errc::LowTransmission;
        verdict = "rejected (" + std::string(errc_name(e.code())) + ")";
    }
    return {worst < 1e-9 && rejected, "corrected thrus max reciprocity_error " + fmt("%.2e", worst) +
                                          " over 60 cases; isolator thru " + verdict};
}

// 8. Noise robustness ---------------------------------------------------------------
Outcome noise()
{
    const double bound = std::pow(10.0, -60.0 / 20.0) * 30.0;
    int good = 0;
    const int trials = 200;
    double median_err = 0.0;
    std::vector<double> errs;
    for (int t = 0; t < trials; ++t) {
        Scenario scn = base(5000 + static_cast<std::uint64_t>(t));
        scn.noise_db = -60.0;
        scn.dut = DutKind::Random;
        scn.mtrl = false;
        try {
            const Simulation sim = simulate_measurements(scn);
            const SolrResult r = solve_solr(solr_input(sim, 0, sim.definitions));
            const double err = max_abs_diff(correct_multiport(r.model, sim.raw_dut), sim.dut_truth);
            errs.push_back(err);
            if (err < bound)
                ++good;
        } catch (const Error& e) {
            errs.push_back(INFINITY);
            std::printf("  trial %d: %s\n", t, e.what());
        }
    }
    std::sort(errs.begin(), errs.end());
    median_err = errs[errs.size() / 2];
    return {good >= 190, std::to_string(good) + "/200 trials under " + fmt("%.3g", bound) + " (need 190), median " +
                             fmt("%.2e", median_err) + ", worst " + fmt("%.2e", errs.back())};
}

// whitespace-separated tokens of the first line that is not a comment or option line
std::vector<std::string> first_data_row(const std::string& text)
{
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const auto pos = line.find_first_not_of(" \t");
        if (pos == std::string::npos || line[pos] == '!' || line[pos] == '#')
            continue;
        std::istringstream row(line.substr(0, line.find('!')));
        std::vector<std::string> tokens;
        for (std::string t; row >> t;)
            tokens.push_back(t);
        return tokens;
    }
    return {};
}

// 9. Touchstone round trip ----------------------------------------------------------------
Outcome touchstone()
{
    Rng rng(9);
    double worst = 0.0;
    int cases = 0;
    for (const std::size_t ports : {1u, 2u, 4u})
        for (const FreqUnit u : {FreqUnit::Hz, FreqUnit::kHz, FreqUnit::MHz, FreqUnit::GHz})
            for (const DataFormat f : {DataFormat::RI, DataFormat::MA, DataFormat::DB}) {
                const auto grid = FrequencyGrid::linear(1.7e6, 170e9, 57);
                Network n(grid, ports);
                for (std::size_t k = 0; k < grid.size(); ++k)
                    for (Eigen::Index i = 0; i < n[k].size(); ++i)
                        n[k](i) = std::polar(rng.uniform(1e-3, 1.0), rng.uniform(-kPi, kPi));
                const Network back = parse_touchstone(write_touchstone(n, {u, f, 50.0}), ports);
                if (!(back.grid() == grid))
                    worst = INFINITY;
                for (std::size_t k = 0; k < grid.size(); ++k)
                    for (Eigen::Index i = 0; i < n[k].size(); ++i)
                        worst = std::max(worst, std::abs(back[k](i) - n[k](i)) / std::abs(n[k](i)));
                ++cases;
            }

    // hand-written golden file: S11 = .11+.12j, S21 = .21+.22j, S12 = .31+.32j, S22 = .41+.42j
    bool golden_ok = false;
    try {
        const Network g = read_touchstone_file(std::string(SOLRCAL_TEST_DATA) + "/golden_column_order.s2p");
        golden_ok = g.at(0, 0, 0) == cplx(0.11, 0.12) && g.at(0, 1, 0) == cplx(0.21, 0.22) &&
                    g.at(0, 0, 1) == cplx(0.31, 0.32) && g.at(0, 1, 1) == cplx(0.41, 0.42);
        std::ifstream f(std::string(SOLRCAL_TEST_DATA) + "/golden_column_order.s2p");
        std::stringstream golden;
        golden << f.rdbuf();
        const std::string written = write_touchstone(g, {FreqUnit::GHz, DataFormat::RI, 50.0});
        golden_ok = golden_ok && first_data_row(written) == first_data_row(golden.str());
    } catch (const Error& e) {
        std::printf("  golden: %s\n", e.what());
    }
    return {worst < 1e-9 && golden_ok && cases == 36,
            std::to_string(cases) + " format/unit/port combinations, max relative error " + fmt("%.2e", worst) +
                ", golden S11 S21 S12 S22 order " + (golden_ok ? "ok" : "WRONG")};
}

// 10. SOLR vs mTRL ----------------------------------------------------------------------
Outcome cross_validation()
{
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Scenario scn = base(seed);
        scn.dut = DutKind::Random;
        const Simulation sim = simulate_measurements(scn);
        MultiPortCalModel solr = solve_solr(solr_input(sim, 0, sim.definitions)).model;
        const MtrlInput min = mtrl_input(sim);
        const MtrlResult m = solve_mtrl(min);
        // move the SOLR plane to the center of the mTRL thru
        if (min.thru_length > 0.0) {
            LineModel half = pack().thru(pack().mtrl_thru);
            half.length = 0.5 * min.thru_length;
            const Network section = eval_line(half, sim.grid, pack().z_ref);
            solr = shift_reference_plane(shift_reference_plane(solr, 0, section), 1, section);
        }
        const double d = max_abs_diff(correct_multiport(solr, sim.raw_dut), correct_multiport(m.model, sim.raw_dut));
        worst = std::max(worst, d);
    }
    return {worst < 1e-8, "20 seeds, max |S_solr - S_mtrl| " + fmt("%.2e", worst) + " (straight thru, " +
                              fmt("%g um", pack().thru(pack().mtrl_thru).length * 1e6) + " plane offset)"};
}

const std::map<int, std::pair<const char*, std::function<Outcome()>>>& criteria()
{
    static const std::map<int, std::pair<const char*, std::function<Outcome()>>> table{
        {1, {"SOLR round-trip", solr_round_trip}},
        {2, {"four-port assembly", fourport}},
        {3, {"sign resolution", sign_resolution}},
        {4, {"mTRL gamma recovery", mtrl_gamma}},
        {5, {"virtual-mTRL characterization", characterization}},
        {6, {"threshold semantics", threshold}},
        {7, {"reciprocity gate", reciprocity_gate}},
        {8, {"noise robustness", noise}},
        {9, {"Touchstone round-trip", touchstone}},
        {10, {"SOLR/mTRL cross-validation", cross_validation}},
    };
    return table;
}

} // namespace

int main(int argc, char** argv)
{
    std::vector<int> ids;
    for (int i = 1; i < argc; ++i) {
        char* end = nullptr;
        const long v = std::strtol(argv[i], &end, 10);
        if (*end != '\0' || !criteria().count(static_cast<int>(v))) {
            std::fprintf(stderr, "usage: acceptance [1-10 ...]\n");
            return 64;
        }
        ids.push_back(static_cast<int>(v));
    }
    if (ids.empty())
        for (const auto& [id, c] : criteria())
            ids.push_back(id);

    int failed = 0;
    for (const int id : ids) {
        const auto& [name, fn] = criteria().at(id);
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::printf("criterion %2d %-30s %s  %s\n", id, name, o.pass ? "PASS" : "FAIL", o.detail.c_str());
        std::fflush(stdout);
        failed += o.pass ? 0 : 1;
    }
    return failed == 0 ? 0 : 1;
}
