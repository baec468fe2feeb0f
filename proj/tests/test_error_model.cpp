#include "solrcal/error.hpp"
#include "solrcal/error_model.hpp"
#include "solrcal/harness.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <functional>

using namespace solrcal;

namespace {

FrequencyGrid small_grid()
{
    return FrequencyGrid::linear(1e9, 170e9, 41);
}

OnePortTerms constant_terms(const FrequencyGrid& grid, cplx e00, cplx e11, cplx tr)
{
    OnePortTerms t;
    t.grid = grid;
    t.e00.assign(grid.size(), e00);
    t.e11.assign(grid.size(), e11);
    t.tracking.assign(grid.size(), tr);
    return t;
}

MultiPortCalModel random_model(const FrequencyGrid& grid, std::size_t n, Rng& rng)
{
    std::vector<PortErrorBox> boxes;
    for (std::size_t p = 0; p < n; ++p)
        boxes.push_back(PortErrorBox::from_network(random_passive_box(grid, rng)));
    std::vector<KEdge> edges;
    for (std::size_t p = 1; p < n; ++p) {
        KEdge e{0, p, {}};
        for (std::size_t k = 0; k < grid.size(); ++k)
            e.k.push_back(std::polar(rng.uniform(0.5, 2.0), rng.uniform(-kPi, kPi)));
        edges.push_back(e);
    }
    return MultiPortCalModel(boxes, edges);
}

Errc code_of(const std::function<void()>& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return Errc::Io;
}

} // namespace

TEST(EmbedOnePort, KnownValues)
{
    const auto grid = FrequencyGrid(std::vector<double>{1e9, 2e9, 3e9});
    const auto terms = constant_terms(grid, 0.1, 0.2, 0.9);
    const std::vector<cplx> g{0.0, 1.0, -1.0};
    const Network m = embed_oneport(terms, Network::one_port(grid, g));
    EXPECT_NEAR(std::abs(m.at(0, 0, 0) - cplx(0.1)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(m.at(1, 0, 0) - cplx(1.225)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(m.at(2, 0, 0) - cplx(-0.65)), 0.0, 1e-15);
}

TEST(EmbedOnePort, CorrectInvertsEmbed)
{
    const auto grid = small_grid();
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const auto box = PortErrorBox::from_network(random_passive_box(grid, rng));
        std::vector<cplx> g(grid.size());
        for (auto& v : g)
            v = std::polar(rng.uniform(0.0, 1.0), rng.uniform(-kPi, kPi));
        const Network dut = Network::one_port(grid, g);
        const Network back = correct_oneport(box.terms, embed_oneport(box.terms, dut));
        ASSERT_LT(max_abs_diff(back, dut), 1e-12);
    }
}

TEST(EmbedOnePort, PoleIsReported)
{
    const auto grid = FrequencyGrid(std::vector<double>{1e9});
    const auto terms = constant_terms(grid, 0.0, 0.5, 0.9);
    const std::vector<cplx> g{2.0};
    EXPECT_EQ(code_of([&] { embed_oneport(terms, Network::one_port(grid, g)); }), Errc::PoleHit);
}

TEST(ContinuousSqrt, FollowsBranch)
{
    std::vector<cplx> v;
    for (int i = 0; i <= 40; ++i)
        v.push_back(std::polar(1.0, 2.0 * kPi * i / 40.0));
    const auto r = continuous_sqrt(v);
    for (std::size_t i = 0; i < v.size(); ++i) {
        EXPECT_NEAR(std::abs(r[i] * r[i] - v[i]), 0.0, 1e-14);
        if (i > 0)
            EXPECT_LT(std::abs(r[i] - r[i - 1]), 0.5);
    }
    // one turn of the input ends on the other branch, where the principal root would be +1
    EXPECT_NEAR(std::abs(r.back() - cplx(-1.0)), 0.0, 1e-12);
}

TEST(PortErrorBox, NetworkRoundTrip)
{
    const auto grid = small_grid();
    Rng rng(8);
    const Network box = random_passive_box(grid, rng);
    const Network back = PortErrorBox::from_network(box).as_network();
    EXPECT_LT(max_abs_diff(box, back), 1e-14);
}

TEST(MultiPort, EmbedCorrectRoundTrip)
{
    const auto grid = small_grid();
    Rng rng(21);
    for (const std::size_t n : {2u, 3u, 4u}) {
        const auto model = random_model(grid, n, rng);
        const Network dut = random_passive_dut(grid, n, rng);
        const Network back = correct_multiport(model, embed_multiport(model, dut));
        EXPECT_LT(max_abs_diff(back, dut), 1e-11) << n;
    }
}

TEST(MultiPort, TwoPortMatchesCascadeOfBoxes)
{
    // embed_multiport on 2 ports with k = 1 and reciprocal splits is the
    // physical cascade box_a -> dut -> flipped box_b
    const auto grid = small_grid();
    Rng rng(3);
    const Network box_a = random_passive_box(grid, rng);
    const Network box_b = random_passive_box(grid, rng);
    const Network dut = random_passive_dut(grid, 2, rng);
    KEdge edge{0, 1, std::vector<cplx>(grid.size(), cplx(1.0))};
    const MultiPortCalModel model({PortErrorBox::from_network(box_a), PortErrorBox::from_network(box_b)}, {edge});
    const Network direct = cascade(cascade(box_a, dut), flip_ports(box_b));
    EXPECT_LT(max_abs_diff(embed_multiport(model, dut), direct), 1e-13);
}

TEST(MultiPort, CanonicalKeepsMeasurementMap)
{
    const auto grid = small_grid();
    Rng rng(13);
    const auto model = random_model(grid, 3, rng);
    const Network dut = random_passive_dut(grid, 3, rng);
    EXPECT_LT(max_abs_diff(embed_multiport(model, dut), embed_multiport(model.canonical(), dut)), 1e-13);
}

TEST(MultiPort, RestrictToMatchesSelectPorts)
{
    const auto grid = small_grid();
    Rng rng(17);
    const auto model = random_model(grid, 4, rng);
    // a block-diagonal DUT keeps ports 1 and 3 isolated from the others
    const Network sub_dut = random_passive_dut(grid, 2, rng);
    Network full(grid, 4);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        full[k].setZero();
        full[k](3, 3) = sub_dut[k](0, 0);
        full[k](3, 1) = sub_dut[k](0, 1);
        full[k](1, 3) = sub_dut[k](1, 0);
        full[k](1, 1) = sub_dut[k](1, 1);
    }
    const std::vector<std::size_t> idx{3, 1};
    const Network expect = select_ports(embed_multiport(model, full), idx);
    EXPECT_LT(max_abs_diff(embed_multiport(model.restrict_to(idx), sub_dut), expect), 1e-13);
}

TEST(MultiPort, DisconnectedTree)
{
    const auto grid = small_grid();
    std::vector<PortErrorBox> boxes(4, PortErrorBox(OnePortTerms::identity(grid)));
    const std::vector<cplx> ones(grid.size(), cplx(1.0));
    EXPECT_EQ(code_of([&] { MultiPortCalModel(boxes, {{0, 1, ones}, {2, 3, ones}}); }), Errc::DisconnectedTree);
}

TEST(MultiPort, RedundantPairChecked)
{
    const auto grid = small_grid();
    std::vector<PortErrorBox> boxes(3, PortErrorBox(OnePortTerms::identity(grid)));
    const std::vector<cplx> two(grid.size(), cplx(2.0));
    const std::vector<cplx> three(grid.size(), cplx(3.0));
    const std::vector<cplx> six(grid.size(), cplx(6.0));
    const MultiPortCalModel ok(boxes, {{0, 1, two}, {1, 2, three}, {0, 2, six}});
    EXPECT_LT(ok.k_consistency_residual(), 1e-15);
    EXPECT_NEAR(std::abs(ok.k_between(2, 0, 0) - cplx(1.0 / 6.0)), 0.0, 1e-15);
    EXPECT_EQ(code_of([&] { MultiPortCalModel(boxes, {{0, 1, two}, {1, 2, three}, {0, 2, two}}); }),
              Errc::InconsistentK);
}

TEST(MultiPort, SingularCorrection)
{
    const auto grid = FrequencyGrid(std::vector<double>{1e9});
    const auto terms = constant_terms(grid, 0.0, 1.0, 1.0);
    const std::vector<cplx> ones(1, cplx(1.0));
    const MultiPortCalModel model({PortErrorBox(terms), PortErrorBox(terms)}, {{0, 1, ones}});
    // X = M here, and I + E11·X is singular for X = diag(-1, 0.5)
    CMatrix m(2, 2);
    m << -1.0, 0.0, 0.0, 0.5;
    EXPECT_EQ(code_of([&] { correct_multiport(model, Network::constant(grid, m)); }), Errc::SingularCorrection);
}

TEST(CalModelText, RoundTrip)
{
    const auto grid = small_grid();
    Rng rng(99);
    const auto model = random_model(grid, 3, rng);
    const std::string text = write_cal_model(model);
    const auto back = parse_cal_model(text);
    ASSERT_EQ(back.n_ports(), 3u);
    EXPECT_EQ(back.grid(), grid);
    const Network dut = random_passive_dut(grid, 3, rng);
    EXPECT_LT(max_abs_diff(embed_multiport(model, dut), embed_multiport(back, dut)), 1e-13);
    EXPECT_EQ(write_cal_model(back), text);
}

TEST(CalModelText, ParseErrorsCarryLine)
{
    try {
        parse_cal_model("! solrcal cal-model v1\n# ports 1 2\n# z_ref 50\n# pairs 1-2\n1e9 0 0\n");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(errc_category(e.code()), ErrorCategory::Parse);
        ASSERT_TRUE(e.line().has_value());
        EXPECT_EQ(*e.line(), 5);
    }
}
