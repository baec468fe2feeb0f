#include "solrcal/cal_solvers.hpp"

#include "solrcal/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace solrcal {

namespace {

double wrap_phase(double x)
{
    return std::remainder(x, 2.0 * kPi);
}

std::string fmt(double v)
{
    std::ostringstream ss;
    ss.precision(6);
    ss << v;
    return ss.str();
}

std::string fmt(cplx v)
{
    return "(" + fmt(v.real()) + (v.imag() < 0 ? " - j" : " + j") + fmt(std::abs(v.imag())) + ")";
}

void require_one_port(const Network& n, const FrequencyGrid& grid, const std::string& what)
{
    if (n.n_ports() != 1)
        throw Error(Errc::InvalidNetwork, what + " must be a 1-port network");
    if (!(n.grid() == grid))
        throw Error(Errc::GridMismatch, what + " is on a different frequency grid");
}

void require_two_port(const Network& n, const FrequencyGrid& grid, const std::string& what)
{
    if (n.n_ports() != 2)
        throw Error(Errc::InvalidNetwork, what + " must be a 2-port network");
    if (!(n.grid() == grid))
        throw Error(Errc::GridMismatch, what + " is on a different frequency grid");
}

CMatrix2 box_matrix(const PortErrorBox& b, std::size_t k)
{
    CMatrix2 m;
    m << b.terms.e00[k], b.terms.tracking[k] / b.split[k], b.split[k], b.terms.e11[k];
    return m;
}

// The same box seen with the instrument on port 2.
CMatrix2 box_matrix_flipped(const PortErrorBox& b, std::size_t k)
{
    CMatrix2 m;
    m << b.terms.e11[k], b.terms.tracking[k] / b.split[k], b.split[k], b.terms.e00[k];
    return m;
}

CMatrix2 point2(const Network& n, std::size_t k)
{
    return n[k];
}

CMatrix2 flip2(const CMatrix2& s)
{
    CMatrix2 f;
    f << s(1, 1), s(1, 0), s(0, 1), s(0, 0);
    return f;
}

} // namespace

// SOL --------------------------------------------------------------------------

OnePortTerms solve_one_port_sol(const StandardTriple& measured, const StandardTriple& definitions)
{
    const FrequencyGrid& grid = measured.short_circuit.grid();
    require_one_port(measured.short_circuit, grid, "measured short");
    require_one_port(measured.open_circuit, grid, "measured open");
    require_one_port(measured.load, grid, "measured load");
    require_one_port(definitions.short_circuit, grid, "short definition");
    require_one_port(definitions.open_circuit, grid, "open definition");
    require_one_port(definitions.load, grid, "load definition");

    OnePortTerms t;
    t.grid = grid;
    const std::size_t n = grid.size();
    t.e00.resize(n);
    t.e11.resize(n);
    t.tracking.resize(n);
    const std::array<const Network*, 3> meas{&measured.short_circuit, &measured.open_circuit, &measured.load};
    const std::array<const Network*, 3> defs{&definitions.short_circuit, &definitions.open_circuit,
                                             &definitions.load};
    for (std::size_t k = 0; k < n; ++k) {
        std::array<cplx, 3> g{}, gm{};
        for (std::size_t i = 0; i < 3; ++i) {
            g[i] = defs[i]->at(k, 0, 0);
            gm[i] = meas[i]->at(k, 0, 0);
        }
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = i + 1; j < 3; ++j)
                if (!(std::abs(g[i] - g[j]) > 1e-6))
                    throw error_at(Errc::DegenerateStandards, grid[k],
                                   "standard definitions are not distinct (|ΔΓ| = " + fmt(std::abs(g[i] - g[j])) + ")");
        Eigen::Matrix3cd a;
        Eigen::Vector3cd rhs;
        for (int i = 0; i < 3; ++i) {
            const auto iu = static_cast<std::size_t>(i);
            a(i, 0) = 1.0;
            a(i, 1) = g[iu] * gm[iu];
            a(i, 2) = -g[iu];
            rhs(i) = gm[iu];
        }
        Eigen::PartialPivLU<Eigen::Matrix3cd> lu(a);
        if (!(lu.rcond() > 1e-13))
            throw error_at(Errc::SingularSystem, grid[k], "SOL system is singular");
        const Eigen::Vector3cd x = lu.solve(rhs);
        t.e00[k] = x(0);
        t.e11[k] = x(1);
        t.tracking[k] = x(0) * x(1) - x(2);
        if (!(std::abs(t.tracking[k]) > 0.0) || !std::isfinite(std::abs(t.tracking[k])))
            throw error_at(Errc::SingularSystem, grid[k], "recovered reflection tracking is zero");
    }
    return t;
}

// SOLR -------------------------------------------------------------------------

SolrResult solve_solr(const SolrInput& input)
{
    const OnePortTerms terms_a = solve_one_port_sol(input.port_a.measured, input.port_a.definitions);
    const OnePortTerms terms_b = solve_one_port_sol(input.port_b.measured, input.port_b.definitions);
    const FrequencyGrid& grid = terms_a.grid;
    if (!(terms_b.grid == grid))
        throw Error(Errc::GridMismatch, "ports " + input.port_a.name + " and " + input.port_b.name +
                                            " are on different grids");
    require_two_port(input.thru, grid, "thru " + input.port_a.name + "-" + input.port_b.name);

    const PortErrorBox box_a(terms_a);
    const PortErrorBox box_b(terms_b);
    const double tau = input.delay_estimate;

    SolrResult result;
    std::vector<cplx> kv(grid.size());
    double prev_phase = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const CMatrix2 m = point2(input.thru, k);
        const double s21 = std::abs(m(1, 0));
        const double s12 = std::abs(m(0, 1));
        if (!(s21 >= tol::kMinTransmission && s12 >= tol::kMinTransmission))
            throw error_at(Errc::LowTransmission, grid[k],
                           "raw thru transmission too low (|S21| = " + fmt(s21) + ", |S12| = " + fmt(s12) +
                               "); the thru must be reciprocal with low loss");
        const CMatrix2 ta = s_to_t_point(box_matrix(box_a, k), grid[k]);
        const CMatrix2 tb = s_to_t_point(box_matrix_flipped(box_b, k), grid[k]);
        const CMatrix2 tm = s_to_t_point(m, grid[k]);
        const CMatrix2 tx = ta.inverse() * tm * tb.inverse();
        const cplx det = tx.determinant();
        if (!(std::abs(det) > 0.0))
            throw error_at(Errc::SingularSystem, grid[k], "de-embedded thru has zero determinant");
        const cplx k_root = std::sqrt(1.0 / det);

        // S21 of the thru for +k_root; the other root negates it.
        const cplx s21_plus = 1.0 / (k_root * tx(0, 0));
        const double predicted = k == 0 ? -2.0 * kPi * grid[0] * tau
                                        : prev_phase - 2.0 * kPi * (grid[k] - grid[k - 1]) * tau;
        const double dev_plus = wrap_phase(std::arg(s21_plus) - predicted);
        const double dev_minus = wrap_phase(std::arg(-s21_plus) - predicted);
        const bool plus = std::abs(dev_plus) <= std::abs(dev_minus);
        SignDecision d;
        d.hz = grid[k];
        d.k = plus ? k_root : -k_root;
        d.deviation = plus ? dev_plus : dev_minus;
        d.alt_deviation = plus ? dev_minus : dev_plus;
        if (std::abs(d.deviation) > kPi / 2.0 - kSignMargin)
            throw error_at(Errc::SignAmbiguous, grid[k],
                           "cannot resolve the sign of k between " + input.port_a.name + " and " +
                               input.port_b.name + ": candidates " + fmt(k_root) + " (phase miss " +
                               fmt(dev_plus) + " rad) and " + fmt(-k_root) + " (phase miss " + fmt(dev_minus) +
                               " rad); use a finer grid or a better delay estimate");
        prev_phase = predicted + d.deviation;
        kv[k] = d.k;
        result.signs.push_back(d);
    }

    result.model = MultiPortCalModel({box_a, box_b}, {KEdge{0, 1, std::move(kv)}},
                                     {input.port_a.name, input.port_b.name}, input.thru.z_ref());
    const Network corrected = correct_multiport(result.model, input.thru);
    for (const double r : reciprocity_error(corrected))
        result.thru_reciprocity = std::max(result.thru_reciprocity, r);
    return result;
}

SignCheck check_thru_sign(const Network& corrected_thru, double delay_estimate)
{
    if (corrected_thru.n_ports() != 2)
        throw Error(Errc::InvalidNetwork, "check_thru_sign needs a 2-port network");
    const FrequencyGrid& grid = corrected_thru.grid();
    SignCheck check;
    double prev_phase = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double predicted = k == 0 ? -2.0 * kPi * grid[0] * delay_estimate
                                        : prev_phase - 2.0 * kPi * (grid[k] - grid[k - 1]) * delay_estimate;
        const double dev = wrap_phase(std::arg(corrected_thru.at(k, 1, 0)) - predicted);
        check.max_deviation = std::max(check.max_deviation, std::abs(dev));
        if (std::abs(dev) >= kPi / 2.0 && check.consistent) {
            check.consistent = false;
            check.first_bad = k;
        }
        prev_phase = predicted + dev;
    }
    return check;
}

// Multiline TRL ---------------------------------------------------------------------

std::vector<std::pair<double, double>> GammaEstimate::degenerate_bands() const
{
    std::vector<std::pair<double, double>> bands;
    for (std::size_t k = 0; k < degenerate.size(); ++k) {
        if (!degenerate[k])
            continue;
        if (k > 0 && degenerate[k - 1])
            bands.back().second = grid[k];
        else
            bands.emplace_back(grid[k], grid[k]);
    }
    return bands;
}

namespace {

struct LineStandard {
    double d = 0.0; // length beyond the thru
    const Network* net = nullptr;
};

struct LinePair {
    std::size_t lo = 0;
    std::size_t hi = 0;
    double delta = 0.0;
};

// Eigen-decomposition of one pair at one frequency, for one port orientation.
struct PairRoots {
    cplx lambda_a;
    cplx lambda_b;
    cplx a;     // v(1)/v(0) of the lambda_a vector
    cplx c;     // v(0)/v(1) of the lambda_b vector
    cplx alt_a; // v(1)/v(0) of the lambda_b vector
    cplx alt_c; // v(0)/v(1) of the lambda_a vector
    bool ok = true;
};

PairRoots eigen_roots(const CMatrix2& p)
{
    Eigen::ComplexEigenSolver<CMatrix2> es(p);
    PairRoots r;
    if (es.info() != Eigen::Success) {
        r.ok = false;
        return r;
    }
    const auto& v = es.eigenvectors();
    r.lambda_a = es.eigenvalues()(0);
    r.lambda_b = es.eigenvalues()(1);
    r.a = v(1, 0) / v(0, 0);
    r.c = v(0, 1) / v(1, 1);
    r.alt_a = v(1, 1) / v(0, 1);
    r.alt_c = v(0, 0) / v(1, 0);
    return r;
}

// Smaller-magnitude root of q2·x² + q1·x + q0 = 0.
cplx small_root(cplx q2, cplx q1, cplx q0)
{
    if (std::abs(q2) == 0.0)
        return -q0 / q1;
    const cplx disc = std::sqrt(q1 * q1 - 4.0 * q2 * q0);
    // Pick the sign that avoids cancellation for the large root, then the small
    // root follows from the product of roots.
    const cplx s = std::abs(q1 + disc) >= std::abs(q1 - disc) ? q1 + disc : q1 - disc;
    if (std::abs(s) == 0.0)
        return 0.0;
    return -2.0 * q0 / s;
}

// Classical TRL roots: a from P12·x² + (P11 - P22)·x - P21 = 0 and c = 1/b
// from the reciprocal quadratic, both the smaller-magnitude root.
PairRoots quadratic_roots(const CMatrix2& p)
{
    PairRoots r;
    r.a = small_root(p(0, 1), p(0, 0) - p(1, 1), -p(1, 0));
    r.c = small_root(p(1, 0), p(1, 1) - p(0, 0), -p(0, 1));
    r.lambda_a = p(0, 0) + p(0, 1) * r.a;
    r.lambda_b = p(1, 0) * r.c + p(1, 1);
    return r;
}

// Candidate γ from an eigenvalue ratio, unwrapped toward the prior.
cplx unwrap_toward(cplx raw, double delta, cplx prior)
{
    const double step = kPi / delta;
    const double n = std::round((prior.imag() - raw.imag()) / step);
    return raw + cplx(0.0, n * step);
}

struct OrientationRoots {
    cplx a;
    cplx c;
};

MtrlResult mtrl_core(const MtrlInput& in, bool classical)
{
    const FrequencyGrid& grid = in.thru.grid();
    require_two_port(in.thru, grid, "mTRL thru");
    if (in.lines.empty())
        throw Error(Errc::InvalidArgument, "mTRL needs at least one line besides the thru");
    if (classical && in.lines.size() != 1)
        throw Error(Errc::InvalidArgument, "classical TRL takes exactly one line");
    require_one_port(in.reflect_a, grid, "reflect at port " + in.name_a);
    require_one_port(in.reflect_b, grid, "reflect at port " + in.name_b);
    if (!(in.degenerate_tol > 0.0 && in.degenerate_tol < kPi / 2.0))
        throw Error(Errc::InvalidArgument, "degenerate tolerance must lie in (0, π/2)");
    for (std::size_t k = 0; k < grid.size(); ++k)
        if (!(grid[k] > 0.0))
            throw Error(Errc::InvalidGrid, "mTRL needs strictly positive frequencies");

    std::vector<LineStandard> stds{{0.0, &in.thru}};
    for (std::size_t i = 0; i < in.lines.size(); ++i) {
        require_two_port(in.lines[i].measured, grid, "line " + std::to_string(i + 1));
        stds.push_back({in.lines[i].length - in.thru_length, &in.lines[i].measured});
    }
    std::vector<LinePair> pairs;
    for (std::size_t i = 0; i < stds.size(); ++i)
        for (std::size_t j = i + 1; j < stds.size(); ++j) {
            LinePair p{i, j, stds[j].d - stds[i].d};
            if (p.delta < 0) {
                std::swap(p.lo, p.hi);
                p.delta = -p.delta;
            }
            if (!(p.delta > 1e-12))
                throw Error(Errc::InvalidArgument, "line lengths must be distinct from each other and the thru");
            pairs.push_back(p);
        }
    // Shortest pair first; it seeds the branch when no hint is given.
    std::stable_sort(pairs.begin(), pairs.end(), [](const LinePair& x, const LinePair& y) { return x.delta < y.delta; });

    const std::size_t n = grid.size();
    const std::size_t np = pairs.size();
    MtrlResult res;
    GammaEstimate& ge = res.gamma;
    ge.grid = grid;
    ge.gamma.resize(n);
    ge.residual.resize(n);
    ge.degenerate.resize(n);
    ge.pairs_used.resize(n);

    std::vector<OnePortTerms> terms(2);
    for (auto& t : terms) {
        t.grid = grid;
        t.e00.resize(n);
        t.e11.resize(n);
        t.tracking.resize(n);
    }
    std::vector<cplx> reflect(n);

    const double sin_tol = std::sin(in.degenerate_tol);
    cplx prior;
    bool have_prior = false;
    if (in.eps_eff_hint) {
        prior = cplx(0.0, 2.0 * kPi * grid[0] * std::sqrt(*in.eps_eff_hint) / kSpeedOfLight);
        have_prior = true;
    }

    std::vector<PairRoots> roots1(np), roots2(np);
    std::vector<cplx> gp(np);
    std::vector<double> w(np);
    std::vector<bool> flip(np);

    for (std::size_t k = 0; k < n; ++k) {
        const double hz = grid[k];
        if (k > 0) {
            const cplx g = ge.gamma[k - 1];
            prior = cplx(g.real() * std::sqrt(hz / grid[k - 1]), g.imag() * hz / grid[k - 1]);
        }

        // Measurement T-matrices in both port orientations.
        std::vector<CMatrix2> t1(stds.size()), t2(stds.size());
        for (std::size_t s = 0; s < stds.size(); ++s) {
            const CMatrix2 m = point2(*stds[s].net, k);
            t1[s] = s_to_t_point(m, hz);
            t2[s] = s_to_t_point(flip2(m), hz);
        }
        for (std::size_t p = 0; p < np; ++p) {
            const CMatrix2 p1 = t1[pairs[p].hi] * t1[pairs[p].lo].inverse();
            const CMatrix2 p2 = t2[pairs[p].hi] * t2[pairs[p].lo].inverse();
            roots1[p] = classical ? quadratic_roots(p1) : eigen_roots(p1);
            roots2[p] = classical ? quadratic_roots(p2) : eigen_roots(p2);
            if (!roots1[p].ok || !roots2[p].ok)
                throw error_at(Errc::SingularSystem, hz, "line-pair eigenproblem failed");
            if (!(std::abs(roots1[p].lambda_b) > 0.0))
                throw error_at(Errc::SingularSystem, hz, "line-pair eigenvalue is zero");
        }

        if (!have_prior) {
            // Principal value of the shortest pair, oriented to β > 0.
            const cplx raw = std::log(roots1[0].lambda_a / roots1[0].lambda_b) / (2.0 * pairs[0].delta);
            prior = raw.imag() >= 0.0 ? raw : -raw;
            have_prior = true;
        }

        for (std::size_t p = 0; p < np; ++p) {
            const double delta = pairs[p].delta;
            const cplx raw = std::log(roots1[p].lambda_a / roots1[p].lambda_b) / (2.0 * delta);
            if (classical) {
                gp[p] = unwrap_toward(raw, delta, prior);
                flip[p] = false;
            } else {
                const cplx plus = unwrap_toward(raw, delta, prior);
                const cplx minus = unwrap_toward(-raw, delta, prior);
                flip[p] = std::abs(minus - prior) < std::abs(plus - prior);
                gp[p] = flip[p] ? minus : plus;
            }
            const double s = std::sin(gp[p].imag() * delta);
            w[p] = s * s;
        }

        std::vector<std::size_t> used;
        for (std::size_t p = 0; p < np; ++p)
            if (std::abs(std::sin(gp[p].imag() * pairs[p].delta)) >= sin_tol)
                used.push_back(p);
        ge.degenerate[k] = used.empty();
        if (used.empty())
            used.push_back(static_cast<std::size_t>(std::max_element(w.begin(), w.end()) - w.begin()));
        ge.pairs_used[k] = ge.degenerate[k] ? 0 : used.size();

        cplx num = 0.0;
        double den = 0.0;
        double wsum = 0.0;
        for (const auto p : used) {
            const double wp = std::max(w[p], 1e-300);
            const double d2 = pairs[p].delta * pairs[p].delta;
            num += wp * d2 * gp[p];
            den += wp * d2;
            wsum += wp;
        }
        const cplx gamma = num / den;
        double r2 = 0.0;
        for (const auto p : used) {
            const double wp = std::max(w[p], 1e-300);
            const cplx dev = pairs[p].delta * (gp[p] - gamma);
            r2 += wp * std::norm(dev);
            if (std::abs(dev.imag()) > kPi / 4.0)
                throw error_at(Errc::BranchTrackingLost, hz,
                               "line pair of Δl = " + fmt(pairs[p].delta * 1e6) + " µm disagrees with the combined γ by " +
                                   fmt(dev.imag()) + " rad");
        }
        ge.gamma[k] = gamma;
        ge.residual[k] = std::sqrt(r2 / wsum);

        // Error-box roots, weighted over the same pairs.
        for (int port = 0; port < 2; ++port) {
            const auto& roots = port == 0 ? roots1 : roots2;
            cplx a_sum = 0.0, c_sum = 0.0;
            double wt = 0.0;
            for (const auto p : used) {
                const PairRoots& r = roots[p];
                cplx a = r.a, c = r.c;
                if (!classical) {
                    // Assign the eigenvector pair by which eigenvalue is exp(+γΔ).
                    const cplx e = std::exp(gamma * pairs[p].delta);
                    if (std::abs(r.lambda_b - e) < std::abs(r.lambda_a - e)) {
                        a = r.alt_a;
                        c = r.alt_c;
                    }
                }
                if (!std::isfinite(std::abs(a)) || !std::isfinite(std::abs(c)))
                    throw error_at(Errc::SingularSystem, hz, "line-pair eigenvectors are degenerate");
                const double wp = std::max(w[p], 1e-300);
                a_sum += wp * a;
                c_sum += wp * c;
                wt += wp;
            }
            const cplx a = a_sum / wt;
            const cplx c = c_sum / wt;
            terms[static_cast<std::size_t>(port)].e00[k] = a;
            // e11 and tracking are filled below once the box scales are known;
            // stash c in e11 for now.
            terms[static_cast<std::size_t>(port)].e11[k] = c;
        }

        // With N_i = [[1, c_i], [a_i, 1]], the thru gives
        // N1^-1·T_thru·(J·N2·J) ∝ diag(1/w2, w1).
        const cplx a1 = terms[0].e00[k], c1 = terms[0].e11[k];
        const cplx a2 = terms[1].e00[k], c2 = terms[1].e11[k];
        CMatrix2 n1, jn2j;
        n1 << 1.0, c1, a1, 1.0;
        jn2j << 1.0, a2, c2, 1.0;
        const CMatrix2 q = n1.inverse() * t1[0] * jn2j;
        const cplx w12 = q(1, 1) / q(0, 0);

        const cplx gm1 = in.reflect_a.at(k, 0, 0);
        const cplx gm2 = in.reflect_b.at(k, 0, 0);
        const cplx y1 = (gm1 - a1) / (1.0 - c1 * gm1);
        const cplx y2 = (gm2 - a2) / (1.0 - c2 * gm2);
        if (!(std::abs(y2) > 0.0) || !std::isfinite(std::abs(y1 / y2)))
            throw error_at(Errc::SingularSystem, hz, "reflect measurement does not constrain the error boxes");
        cplx w1 = std::sqrt(w12 * y1 / y2);
        const cplx target = in.reflect_hint == ReflectHint::ShortLike ? cplx(-1.0) : cplx(1.0);
        if (std::abs(-y1 / w1 - target) < std::abs(y1 / w1 - target))
            w1 = -w1;
        const cplx w2 = w12 / w1;
        reflect[k] = 0.5 * (y1 / w1 + y2 / w2);

        terms[0].e11[k] = -c1 * w1;
        terms[0].tracking[k] = w1 * (1.0 - a1 * c1);
        terms[1].e11[k] = -c2 * w2;
        terms[1].tracking[k] = w2 * (1.0 - a2 * c2);
        for (const auto& t : terms)
            if (!(std::abs(t.tracking[k]) > 0.0) || !std::isfinite(std::abs(t.tracking[k])))
                throw error_at(Errc::SingularSystem, hz, "recovered reflection tracking is degenerate");
    }

    if (std::all_of(ge.degenerate.begin(), ge.degenerate.end(), [](bool b) { return b; })) {
        throw Error(Errc::AllPairsDegenerate, "every line pair is within " + fmt(in.degenerate_tol * 180.0 / kPi) +
                                                  "° of a half-wavelength multiple over the whole band " +
                                                  fmt(grid.front()) + " - " + fmt(grid.back()) + " Hz");
    }

    const PortErrorBox box_a(terms[0]);
    const PortErrorBox box_b(terms[1]);
    std::vector<cplx> kv(n);
    for (std::size_t k = 0; k < n; ++k) {
        const CMatrix2 ta = s_to_t_point(box_matrix(box_a, k), grid[k]);
        const CMatrix2 tb = s_to_t_point(box_matrix_flipped(box_b, k), grid[k]);
        const CMatrix2 tx = ta.inverse() * s_to_t_point(point2(in.thru, k), grid[k]) * tb.inverse();
        kv[k] = 2.0 / (tx(0, 0) + tx(1, 1));
    }
    res.model = MultiPortCalModel({box_a, box_b}, {KEdge{0, 1, std::move(kv)}}, {in.name_a, in.name_b},
                                  in.thru.z_ref());
    res.reflect_gamma = Network::one_port(grid, reflect, in.thru.z_ref());
    return res;
}

} // namespace

MtrlResult solve_mtrl(const MtrlInput& input)
{
    return mtrl_core(input, false);
}

MtrlResult solve_trl(const MtrlInput& input)
{
    return mtrl_core(input, true);
}

// Characterization ----------------------------------------------------------------

CharacterizedStandards characterize_standards(const MultiPortCalModel& model,
                                              const std::vector<CharacterizeInput>& raw)
{
    if (raw.empty())
        throw Error(Errc::InvalidArgument, "characterize_standards needs raw standards from at least one port");
    const FrequencyGrid& grid = model.grid();
    const std::size_t n = grid.size();
    std::array<std::vector<cplx>, 3> sum;
    std::array<std::vector<cplx>, 3> first;
    CharacterizedStandards out;
    for (auto& s : sum)
        s.assign(n, 0.0);
    for (std::size_t r = 0; r < raw.size(); ++r) {
        if (raw[r].port >= model.n_ports())
            throw Error(Errc::InvalidArgument, "characterize_standards: port index out of range");
        const OnePortTerms& terms = model.boxes()[raw[r].port].terms;
        const std::array<const Network*, 3> nets{&raw[r].raw.short_circuit, &raw[r].raw.open_circuit,
                                                 &raw[r].raw.load};
        for (std::size_t s = 0; s < 3; ++s) {
            const auto g = correct_oneport(terms, *nets[s]).trace(0, 0);
            for (std::size_t k = 0; k < n; ++k) {
                sum[s][k] += g[k];
                if (r > 0)
                    out.port_spread[s] = std::max(out.port_spread[s], std::abs(g[k] - first[s][k]));
            }
            if (r == 0)
                first[s] = g;
        }
    }
    const double z_ref = model.z_ref();
    for (auto& s : sum)
        for (auto& v : s)
            v /= static_cast<double>(raw.size());
    out.definitions.short_circuit = Network::one_port(grid, sum[0], z_ref);
    out.definitions.open_circuit = Network::one_port(grid, sum[1], z_ref);
    out.definitions.load = Network::one_port(grid, sum[2], z_ref);
    out.load_gamma = out.definitions.load;
    out.open_fit = fit_reflect_poly(ReflectKind::Open, out.definitions.open_circuit);
    out.short_fit = fit_reflect_poly(ReflectKind::Short, out.definitions.short_circuit);
    return out;
}

// Assembly ----------------------------------------------------------------------

namespace {

bool close_enough(cplx x, cplx y)
{
    return std::abs(x - y) <= kSharedPortTol * std::max({std::abs(x), std::abs(y), 1.0});
}

} // namespace

MultiPortCalModel build_fourport_cal(const std::vector<MultiPortCalModel>& pairwise,
                                     const std::vector<std::string>& port_order)
{
    if (pairwise.empty())
        throw Error(Errc::DisconnectedTree, "no port pairs given");
    std::vector<std::string> names = port_order;
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < names.size(); ++i)
        if (!index.emplace(names[i], i).second)
            throw Error(Errc::InvalidArgument, "port '" + names[i] + "' listed twice");
    const bool fixed_order = !names.empty();

    const FrequencyGrid& grid = pairwise.front().grid();
    const double z_ref = pairwise.front().z_ref();
    std::vector<std::optional<PortErrorBox>> boxes(names.size());
    std::vector<KEdge> edges;

    for (const auto& m : pairwise) {
        if (!(m.grid() == grid))
            throw Error(Errc::GridMismatch, "pair models are on different grids");
        std::vector<std::size_t> global(m.n_ports());
        for (std::size_t p = 0; p < m.n_ports(); ++p) {
            const std::string& name = m.port_names()[p];
            auto it = index.find(name);
            if (it == index.end()) {
                if (fixed_order)
                    throw Error(Errc::InvalidArgument, "pair uses port '" + name + "' missing from the port order");
                it = index.emplace(name, names.size()).first;
                names.push_back(name);
                boxes.emplace_back();
            }
            global[p] = it->second;
            const PortErrorBox& b = m.boxes()[p];
            auto& slot = boxes[it->second];
            if (!slot) {
                slot = b;
                continue;
            }
            for (std::size_t k = 0; k < grid.size(); ++k) {
                if (!close_enough(b.terms.e00[k], slot->terms.e00[k]) ||
                    !close_enough(b.terms.e11[k], slot->terms.e11[k]) ||
                    !close_enough(b.terms.tracking[k], slot->terms.tracking[k]))
                    throw error_at(Errc::InconsistentSharedPort, grid[k],
                                   "one-port terms of port " + name + " differ between pairs");
            }
        }
        // k of this model relative to its first port, rescaled to the splits
        // kept for the merged model.
        for (std::size_t p = 1; p < m.n_ports(); ++p) {
            const std::size_t gi = global[0], gj = global[p];
            KEdge e{gi, gj, std::vector<cplx>(grid.size())};
            for (std::size_t k = 0; k < grid.size(); ++k) {
                const cplx ri = boxes[gi]->split[k] / m.boxes()[0].split[k];
                const cplx rj = boxes[gj]->split[k] / m.boxes()[p].split[k];
                e.k[k] = m.k_between(0, p, k) * rj / ri;
            }
            edges.push_back(std::move(e));
        }
    }
    std::vector<PortErrorBox> merged;
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        if (!boxes[i])
            throw Error(Errc::DisconnectedTree, "port " + names[i] + " is not covered by any pair");
        merged.push_back(*boxes[i]);
    }
    return MultiPortCalModel(std::move(merged), std::move(edges), std::move(names), z_ref);
}

MultiPortCalModel shift_reference_plane(const MultiPortCalModel& model, std::size_t port, const Network& section)
{
    if (port >= model.n_ports())
        throw Error(Errc::InvalidArgument, "shift_reference_plane: port index out of range");
    std::vector<PortErrorBox> boxes = model.boxes();
    const Network box = boxes[port].as_network(model.z_ref());
    require_same_grid(box, section, "shift_reference_plane");
    boxes[port] = PortErrorBox::from_network(cascade(box, section));
    return MultiPortCalModel(std::move(boxes), model.edges(), model.port_names(), model.z_ref());
}

} // namespace solrcal
