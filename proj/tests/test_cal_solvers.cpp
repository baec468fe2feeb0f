#include "solrcal/cal_solvers.hpp"
#include "solrcal/error.hpp"
#include "solrcal/harness.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <functional>

using namespace solrcal;

namespace {

Errc code_of(const std::function<void()>& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return Errc::Io;
}

Scenario base_scenario(std::uint64_t seed, std::size_t points = 101)
{
    Scenario scn;
    scn.pack = load_pack("nyu28-pack");
    scn.seed = seed;
    scn.points = points;
    scn.dut = DutKind::Random;
    return scn;
}

double delay_of(const LineModel& line)
{
    return line.length * std::sqrt(line.eps_eff) / kSpeedOfLight;
}

SolrInput solr_input(const Simulation& sim, std::size_t pair = 0)
{
    const auto& sp = sim.scenario.pairs[pair];
    SolrInput in;
    in.port_a = {sim.scenario.ports[sp.a], sim.raw_sol[sp.a], sim.definitions};
    in.port_b = {sim.scenario.ports[sp.b], sim.raw_sol[sp.b], sim.definitions};
    in.thru = sim.raw_thrus[pair];
    in.delay_estimate = delay_of(sim.scenario.pack.thru(sp.thru));
    return in;
}

MtrlInput mtrl_input(const Simulation& sim)
{
    MtrlInput in;
    in.thru = sim.raw_mtrl_thru;
    in.thru_length = sim.scenario.pack.thru(sim.scenario.pack.mtrl_thru).length;
    for (const auto& l : sim.raw_lines)
        in.lines.push_back({l.length, l.raw});
    in.reflect_a = sim.raw_sol[0].short_circuit;
    in.reflect_b = sim.raw_sol[1].short_circuit;
    return in;
}

Network one_port(const FrequencyGrid& grid, cplx v)
{
    const std::vector<cplx> g(grid.size(), v);
    return Network::one_port(grid, g);
}

} // namespace

TEST(SolveSol, KnownTerms)
{
    const auto grid = FrequencyGrid(std::vector<double>{1e9});
    const StandardTriple measured{one_port(grid, -0.65), one_port(grid, 1.225), one_port(grid, 0.1)};
    const StandardTriple defs{one_port(grid, -1.0), one_port(grid, 1.0), one_port(grid, 0.0)};
    const OnePortTerms t = solve_one_port_sol(measured, defs);
    EXPECT_NEAR(std::abs(t.e00[0] - cplx(0.1)), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(t.e11[0] - cplx(0.2)), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(t.tracking[0] - cplx(0.9)), 0.0, 1e-14);
}

TEST(SolveSol, RecoversRandomBoxes)
{
    const auto grid = FrequencyGrid::linear(1e9, 170e9, 51);
    const auto defs = load_pack("nyu28-pack").definitions(grid);
    Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        const auto box = PortErrorBox::from_network(random_passive_box(grid, rng));
        const StandardTriple m{embed_oneport(box.terms, defs.short_circuit), embed_oneport(box.terms, defs.open_circuit),
                               embed_oneport(box.terms, defs.load)};
        const OnePortTerms t = solve_one_port_sol(m, defs);
        for (std::size_t k = 0; k < grid.size(); ++k) {
            ASSERT_LT(std::abs(t.e00[k] - box.terms.e00[k]), 1e-12);
            ASSERT_LT(std::abs(t.e11[k] - box.terms.e11[k]), 1e-12);
            ASSERT_LT(std::abs(t.tracking[k] - box.terms.tracking[k]), 1e-12);
        }
    }
}

TEST(SolveSol, DegenerateStandards)
{
    const auto grid = FrequencyGrid(std::vector<double>{1e9});
    const StandardTriple measured{one_port(grid, -0.65), one_port(grid, 1.225), one_port(grid, 0.1)};
    const StandardTriple defs{one_port(grid, -1.0), one_port(grid, -1.0), one_port(grid, 0.0)};
    EXPECT_EQ(code_of([&] { solve_one_port_sol(measured, defs); }), Errc::DegenerateStandards);
}

TEST(Solr, CorrectsRandomDut)
{
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const Simulation sim = simulate_measurements(base_scenario(seed));
        const SolrResult r = solve_solr(solr_input(sim));
        EXPECT_LT(max_abs_diff(correct_multiport(r.model, sim.raw_dut), sim.dut_truth), 1e-9) << seed;
        EXPECT_LT(r.thru_reciprocity, 1e-9);
        EXPECT_EQ(r.signs.size(), sim.grid.size());
        for (const auto& s : r.signs)
            EXPECT_LT(std::abs(s.deviation), std::abs(s.alt_deviation));
    }
}

TEST(Solr, IdentityBoxesGiveIdentityTerms)
{
    Scenario scn = base_scenario(7, 21);
    scn.fixture = false;
    scn.boxes = {BoxSpec{BoxMode::Identity, "", {}}, BoxSpec{BoxMode::Identity, "", {}}};
    const Simulation sim = simulate_measurements(scn);
    const SolrResult r = solve_solr(solr_input(sim));
    for (std::size_t k = 0; k < sim.grid.size(); ++k) {
        for (const auto& b : r.model.boxes()) {
            EXPECT_LT(std::abs(b.terms.e00[k]), 1e-12);
            EXPECT_LT(std::abs(b.terms.e11[k]), 1e-12);
            EXPECT_LT(std::abs(b.terms.tracking[k] - cplx(1.0)), 1e-12);
        }
        EXPECT_LT(std::abs(r.model.k_between(0, 1, k) - cplx(1.0)), 1e-12);
    }
}

TEST(Solr, IsolatorThruRejected)
{
    const Simulation sim = simulate_measurements(base_scenario(5, 21));
    SolrInput in = solr_input(sim);
    // a thru that only passes power one way
    for (std::size_t k = 0; k < sim.grid.size(); ++k)
        in.thru[k](0, 1) = 0.0;
    EXPECT_EQ(code_of([&] { solve_solr(in); }), Errc::LowTransmission);
}

TEST(Solr, QuarterPeriodDelayErrorIsAmbiguous)
{
    // both roots then miss the predicted phase by π/2 at the first point
    const Simulation sim = simulate_measurements(base_scenario(6, 21));
    SolrInput in = solr_input(sim);
    in.delay_estimate += 1.0 / (4.0 * sim.grid[0]);
    EXPECT_EQ(code_of([&] { solve_solr(in); }), Errc::SignAmbiguous);
}

TEST(ThruSign, FlagsNegatedK)
{
    const Simulation sim = simulate_measurements(base_scenario(8, 101));
    const SolrInput in = solr_input(sim);
    const SolrResult r = solve_solr(in);
    const Network thru = correct_multiport(r.model, in.thru);
    EXPECT_TRUE(check_thru_sign(thru, in.delay_estimate).consistent);

    // whole sweep
    std::vector<KEdge> edges = r.model.edges();
    for (auto& v : edges[0].k)
        v = -v;
    const MultiPortCalModel whole(r.model.boxes(), edges, r.model.port_names());
    const SignCheck c1 = check_thru_sign(correct_multiport(whole, in.thru), in.delay_estimate);
    EXPECT_FALSE(c1.consistent);
    EXPECT_EQ(c1.first_bad, 0u);

    // from the middle on
    edges = r.model.edges();
    for (std::size_t k = 50; k < edges[0].k.size(); ++k)
        edges[0].k[k] = -edges[0].k[k];
    const MultiPortCalModel half(r.model.boxes(), edges, r.model.port_names());
    const SignCheck c2 = check_thru_sign(correct_multiport(half, in.thru), in.delay_estimate);
    EXPECT_FALSE(c2.consistent);
    EXPECT_EQ(c2.first_bad, 50u);
}

TEST(Mtrl, GammaMatchesLineModel)
{
    const Simulation sim = simulate_measurements(base_scenario(11, 201));
    const MtrlResult r = solve_mtrl(mtrl_input(sim));
    const LineModel& line = sim.scenario.pack.lines.front().line;
    for (std::size_t k = 0; k < sim.grid.size(); ++k) {
        if (r.gamma.degenerate[k])
            continue;
        const cplx g = line.gamma(sim.grid[k]);
        ASSERT_LT(std::abs(r.gamma.gamma[k] - g) / std::abs(g), 1e-6) << sim.grid[k];
    }
    EXPECT_LT(max_abs_diff(correct_multiport(r.model, sim.raw_dut), sim.dut_truth), 1e-9);
}

TEST(Mtrl, DegenerateBandsMatchPrediction)
{
    const Simulation sim = simulate_measurements(base_scenario(12, 201));
    const MtrlInput in = mtrl_input(sim);
    const MtrlResult r = solve_mtrl(in);
    const LineModel& line = sim.scenario.pack.lines.front().line;
    std::vector<double> lengths{in.thru_length};
    for (const auto& l : in.lines)
        lengths.push_back(l.length);
    for (std::size_t k = 0; k < sim.grid.size(); ++k) {
        const double beta = line.gamma(sim.grid[k]).imag();
        bool all_close = true;
        for (std::size_t i = 0; i < lengths.size(); ++i)
            for (std::size_t j = i + 1; j < lengths.size(); ++j) {
                const double phi = beta * std::abs(lengths[j] - lengths[i]);
                const double off = std::abs(phi - kPi * std::round(phi / kPi));
                all_close = all_close && off < in.degenerate_tol;
            }
        EXPECT_EQ(r.gamma.degenerate[k], all_close) << sim.grid[k];
    }
    EXPECT_FALSE(r.gamma.degenerate_bands().empty());
}

TEST(Mtrl, ClassicalTrlAgrees)
{
    const Simulation sim = simulate_measurements(base_scenario(13, 101));
    MtrlInput in = mtrl_input(sim);
    // the 550 µm line alone; it is degenerate only near 136 GHz
    in.lines = {in.lines[1]};
    in.degenerate_tol = kPi / 36.0;
    const MtrlResult trl = solve_trl(in);
    const MtrlResult m = solve_mtrl(in);
    for (std::size_t k = 0; k < sim.grid.size(); ++k) {
        if (trl.gamma.degenerate[k])
            continue;
        EXPECT_LT(std::abs(trl.gamma.gamma[k] - m.gamma.gamma[k]) / std::abs(m.gamma.gamma[k]), 1e-9);
    }
    EXPECT_THROW(solve_trl(mtrl_input(sim)), Error);
}

TEST(Mtrl, ReflectRecovered)
{
    const Simulation sim = simulate_measurements(base_scenario(14, 51));
    const MtrlResult r = solve_mtrl(mtrl_input(sim));
    EXPECT_LT(max_abs_diff(r.reflect_gamma, sim.definitions.short_circuit), 1e-9);
}

TEST(Mtrl, AllPairsDegenerate)
{
    // a single 750 µm line near 100 GHz is a half wavelength over the whole sweep
    Scenario scn = base_scenario(15, 11);
    scn.start_hz = 99.5e9;
    scn.stop_hz = 100.5e9;
    const Simulation sim = simulate_measurements(scn);
    MtrlInput in = mtrl_input(sim);
    const LineModel& l = scn.pack.lines.front().line;
    LineModel half = l;
    half.length = kSpeedOfLight / (2.0 * 100e9 * std::sqrt(l.eps_eff));
    const Network raw = embed_multiport(sim.truth, eval_line(half, sim.grid));
    in.lines = {{half.length, raw}};
    in.eps_eff_hint = l.eps_eff;
    EXPECT_EQ(code_of([&] { solve_mtrl(in); }), Errc::AllPairsDegenerate);
}

TEST(Characterize, RecoversPackDefinitions)
{
    const Simulation sim = simulate_measurements(base_scenario(16, 201));
    const MtrlResult r = solve_mtrl(mtrl_input(sim));
    const auto ch = characterize_standards(r.model, {{0, sim.raw_sol[0]}, {1, sim.raw_sol[1]}});
    EXPECT_LT(max_abs_diff(ch.definitions.open_circuit, sim.definitions.open_circuit), 1e-8);
    EXPECT_LT(max_abs_diff(ch.definitions.short_circuit, sim.definitions.short_circuit), 1e-8);
    EXPECT_LT(max_abs_diff(ch.definitions.load, sim.definitions.load), 1e-8);
    EXPECT_NEAR(ch.open_fit.model.coeffs[0], 5e-15, 1e-18);
    EXPECT_NEAR(ch.short_fit.model.coeffs[0], 2e-12, 1e-16);
    for (const double s : ch.port_spread)
        EXPECT_LT(s, 1e-8);
}

TEST(FourPort, DisconnectedPairs)
{
    const auto grid = FrequencyGrid::linear(1e9, 10e9, 3);
    const auto id = MultiPortCalModel::identity(grid, 2);
    const MultiPortCalModel ne(id.boxes(), id.edges(), {"N", "E"});
    const MultiPortCalModel sw(id.boxes(), id.edges(), {"S", "W"});
    EXPECT_EQ(code_of([&] { build_fourport_cal({ne, sw}); }), Errc::DisconnectedTree);
}

TEST(FourPort, InconsistentSharedPort)
{
    const auto grid = FrequencyGrid::linear(1e9, 10e9, 3);
    const auto id = MultiPortCalModel::identity(grid, 2);
    const MultiPortCalModel ne(id.boxes(), id.edges(), {"N", "E"});
    auto boxes = id.boxes();
    boxes[0].terms.e00[1] = 0.01;
    const MultiPortCalModel es(boxes, id.edges(), {"E", "S"});
    EXPECT_EQ(code_of([&] { build_fourport_cal({ne, es}); }), Errc::InconsistentSharedPort);
}

TEST(FourPort, ChainCorrectsFourPortDut)
{
    Scenario scn = base_scenario(17, 51);
    scn.ports = {"N", "E", "S", "W"};
    scn.pairs = {{0, 1, "arc"}, {1, 2, "arc"}, {2, 3, "arc"}};
    scn.boxes.assign(4, BoxSpec{});
    scn.mtrl = false;
    const Simulation sim = simulate_measurements(scn);
    std::vector<MultiPortCalModel> pairwise;
    for (std::size_t p = 0; p < scn.pairs.size(); ++p)
        pairwise.push_back(solve_solr(solr_input(sim, p)).model);
    const MultiPortCalModel model = build_fourport_cal(pairwise);
    EXPECT_EQ(model.port_names(), scn.ports);
    EXPECT_LT(max_abs_diff(correct_multiport(model, sim.raw_dut), sim.dut_truth), 1e-9);
}

TEST(ShiftReferencePlane, MatchesCascadedDut)
{
    const auto grid = FrequencyGrid::linear(1e9, 170e9, 31);
    Rng rng(18);
    std::vector<PortErrorBox> boxes{PortErrorBox::from_network(random_passive_box(grid, rng)),
                                    PortErrorBox::from_network(random_passive_box(grid, rng))};
    KEdge e{0, 1, {}};
    for (std::size_t k = 0; k < grid.size(); ++k)
        e.k.push_back(std::polar(rng.uniform(0.5, 2.0), rng.uniform(-kPi, kPi)));
    const MultiPortCalModel model(boxes, {e});
    LineModel line;
    line.length = 100e-6;
    line.eps_eff = 4.0;
    line.alpha_c = 5.0;
    const Network section = eval_line(line, grid);
    const Network dut = random_passive_dut(grid, 2, rng);
    const MultiPortCalModel shifted = shift_reference_plane(model, 0, section);
    EXPECT_LT(max_abs_diff(embed_multiport(shifted, dut), embed_multiport(model, cascade(section, dut))), 1e-13);
}
