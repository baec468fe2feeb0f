#include "solrcal/sparams.hpp"

#include "solrcal/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

namespace solrcal {

FrequencyGrid::FrequencyGrid(std::vector<double> points) : points_(std::move(points))
{
    if (points_.empty())
        throw Error(Errc::InvalidGrid, "frequency grid is empty");
    for (std::size_t i = 0; i < points_.size(); ++i) {
        const double f = points_[i];
        if (!std::isfinite(f))
            throw Error(Errc::InvalidGrid, "non-finite frequency at index " + std::to_string(i));
        if (f < 0.0 || (f == 0.0 && i != 0))
            throw Error(Errc::InvalidGrid, "frequency must be > 0 (DC allowed only first), index " + std::to_string(i));
        if (i > 0 && !(f > points_[i - 1]))
            throw Error(Errc::InvalidGrid, "frequency grid not strictly increasing at index " + std::to_string(i));
    }
}

FrequencyGrid FrequencyGrid::linear(double start_hz, double stop_hz, std::size_t count)
{
    if (count == 0)
        throw Error(Errc::InvalidGrid, "frequency grid needs at least one point");
    std::vector<double> pts(count);
    if (count == 1) {
        pts[0] = start_hz;
    } else {
        const double step = (stop_hz - start_hz) / static_cast<double>(count - 1);
        for (std::size_t i = 0; i < count; ++i)
            pts[i] = start_hz + step * static_cast<double>(i);
        pts.back() = stop_hz;
    }
    return FrequencyGrid(std::move(pts));
}

bool FrequencyGrid::operator==(const FrequencyGrid& other) const
{
    return points_.size() == other.points_.size() &&
           (points_.empty() ||
            std::memcmp(points_.data(), other.points_.data(), points_.size() * sizeof(double)) == 0);
}

Network::Network(FrequencyGrid grid, std::size_t n_ports, double z_ref)
    : grid_(std::move(grid)), n_ports_(n_ports),
      s_(grid_.size(), CMatrix::Zero(static_cast<Eigen::Index>(n_ports), static_cast<Eigen::Index>(n_ports))),
      z_ref_(z_ref)
{
    if (n_ports == 0)
        throw Error(Errc::InvalidNetwork, "network needs at least one port");
    if (!(z_ref > 0.0))
        throw Error(Errc::InvalidNetwork, "reference impedance must be positive");
}

Network::Network(FrequencyGrid grid, std::vector<CMatrix> s, double z_ref)
    : grid_(std::move(grid)), n_ports_(s.empty() ? 0 : static_cast<std::size_t>(s.front().rows())),
      s_(std::move(s)), z_ref_(z_ref)
{
    if (s_.size() != grid_.size())
        throw Error(Errc::InvalidNetwork, "matrix count does not match grid size");
    if (n_ports_ == 0)
        throw Error(Errc::InvalidNetwork, "network needs at least one port");
    if (!(z_ref > 0.0))
        throw Error(Errc::InvalidNetwork, "reference impedance must be positive");
    validate();
}

Network Network::one_port(FrequencyGrid grid, std::span<const cplx> gamma, double z_ref)
{
    if (gamma.size() != grid.size())
        throw Error(Errc::InvalidNetwork, "reflection count does not match grid size");
    std::vector<CMatrix> s;
    s.reserve(gamma.size());
    for (const cplx g : gamma)
        s.push_back(CMatrix::Constant(1, 1, g));
    return Network(std::move(grid), std::move(s), z_ref);
}

Network Network::constant(FrequencyGrid grid, const CMatrix& m, double z_ref)
{
    std::vector<CMatrix> s(grid.size(), m);
    return Network(std::move(grid), std::move(s), z_ref);
}

std::vector<cplx> Network::trace(std::size_t row, std::size_t col) const
{
    std::vector<cplx> out(s_.size());
    for (std::size_t k = 0; k < s_.size(); ++k)
        out[k] = s_[k](static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col));
    return out;
}

void Network::validate() const
{
    const auto n = static_cast<Eigen::Index>(n_ports_);
    for (std::size_t k = 0; k < s_.size(); ++k) {
        if (s_[k].rows() != n || s_[k].cols() != n)
            throw error_at(Errc::InvalidNetwork, grid_[k], "matrix dimension differs from port count");
        if (!s_[k].allFinite())
            throw error_at(Errc::InvalidNetwork, grid_[k], "non-finite S-parameter");
    }
}

TwoPortT::TwoPortT(FrequencyGrid grid, std::vector<CMatrix2> t) : grid_(std::move(grid)), t_(std::move(t))
{
    if (t_.size() != grid_.size())
        throw Error(Errc::InvalidNetwork, "T-matrix count does not match grid size");
}

CMatrix2 s_to_t_point(const CMatrix2& s, double hz)
{
    const cplx s21 = s(1, 0);
    if (std::abs(s21) == 0.0)
        throw error_at(Errc::ZeroTransmission, hz, "S21 = 0, T-parameters undefined");
    const cplx det = s(0, 0) * s(1, 1) - s(0, 1) * s(1, 0);
    CMatrix2 t;
    t << 1.0, -s(1, 1), s(0, 0), -det;
    return t / s21;
}

CMatrix2 t_to_s_point(const CMatrix2& t, double hz)
{
    const cplx t11 = t(0, 0);
    if (std::abs(t11) == 0.0)
        throw error_at(Errc::SingularT, hz, "T11 = 0, no S-parameter equivalent");
    CMatrix2 s;
    s(0, 0) = t(1, 0) / t11;
    s(1, 0) = 1.0 / t11;
    s(0, 1) = t.determinant() / t11;
    s(1, 1) = -t(0, 1) / t11;
    return s;
}

TwoPortT s_to_t(const Network& net)
{
    if (net.n_ports() != 2)
        throw Error(Errc::InvalidNetwork, "s_to_t needs a 2-port");
    std::vector<CMatrix2> t(net.size());
    for (std::size_t k = 0; k < net.size(); ++k)
        t[k] = s_to_t_point(net[k], net.frequency(k));
    return TwoPortT(net.grid(), std::move(t));
}

Network t_to_s(const TwoPortT& t, double z_ref)
{
    std::vector<CMatrix> s(t.size());
    for (std::size_t k = 0; k < t.size(); ++k)
        s[k] = t_to_s_point(t[k], t.grid()[k]);
    return Network(t.grid(), std::move(s), z_ref);
}

CMatrix2 cascade_point(const CMatrix2& a, const CMatrix2& b, double hz)
{
    const cplx loop = 1.0 - a(1, 1) * b(0, 0);
    if (std::abs(loop) < tol::kExact)
        throw error_at(Errc::SingularCascade, hz, "1 - S22(a)·S11(b) vanishes");
    CMatrix2 s;
    s(0, 0) = a(0, 0) + a(0, 1) * b(0, 0) * a(1, 0) / loop;
    s(1, 0) = a(1, 0) * b(1, 0) / loop;
    s(0, 1) = a(0, 1) * b(0, 1) / loop;
    s(1, 1) = b(1, 1) + b(1, 0) * a(1, 1) * b(0, 1) / loop;
    return s;
}

void require_same_grid(const Network& a, const Network& b, const char* what)
{
    if (!(a.grid() == b.grid()))
        throw Error(Errc::GridMismatch, std::string(what) + ": frequency grids differ");
    if (a.z_ref() != b.z_ref())
        throw Error(Errc::GridMismatch, std::string(what) + ": reference impedances differ");
}

Network cascade(const Network& a, const Network& b)
{
    require_same_grid(a, b, "cascade");
    if (a.n_ports() != 2 || b.n_ports() != 2)
        throw Error(Errc::InvalidNetwork, "cascade needs two 2-ports");
    std::vector<CMatrix> s(a.size());
    for (std::size_t k = 0; k < a.size(); ++k)
        s[k] = cascade_point(a[k], b[k], a.frequency(k));
    return Network(a.grid(), std::move(s), a.z_ref());
}

Network terminate(const Network& two_port, const Network& load)
{
    if (load.n_ports() != 1)
        throw Error(Errc::InvalidNetwork, "terminate needs a 1-port load");
    Network as_two_port(load.grid(), 2, load.z_ref());
    for (std::size_t k = 0; k < load.size(); ++k)
        as_two_port[k](0, 0) = load[k](0, 0);
    const Network joined = cascade(two_port, as_two_port);
    std::vector<CMatrix> s(joined.size());
    for (std::size_t k = 0; k < joined.size(); ++k)
        s[k] = CMatrix::Constant(1, 1, joined[k](0, 0));
    return Network(joined.grid(), std::move(s), joined.z_ref());
}

Network flip_ports(const Network& two_port)
{
    if (two_port.n_ports() != 2)
        throw Error(Errc::InvalidNetwork, "flip_ports needs a 2-port");
    Network out = two_port;
    for (std::size_t k = 0; k < out.size(); ++k) {
        const CMatrix& m = two_port[k];
        out[k] << m(1, 1), m(1, 0), m(0, 1), m(0, 0);
    }
    return out;
}

std::vector<double> reciprocity_error(const Network& net)
{
    std::vector<double> out(net.size(), 0.0);
    const auto n = static_cast<Eigen::Index>(net.n_ports());
    for (std::size_t k = 0; k < net.size(); ++k) {
        double worst = 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = i + 1; j < n; ++j)
                worst = std::max(worst, std::abs(net[k](i, j) - net[k](j, i)));
        out[k] = worst;
    }
    return out;
}

std::vector<double> passivity_margin(const Network& net)
{
    std::vector<double> out(net.size());
    for (std::size_t k = 0; k < net.size(); ++k) {
        Eigen::JacobiSVD<CMatrix> svd(net[k]);
        out[k] = 1.0 - svd.singularValues()(0);
    }
    return out;
}

double max_abs_diff(const Network& a, const Network& b)
{
    require_same_grid(a, b, "max_abs_diff");
    if (a.n_ports() != b.n_ports())
        throw Error(Errc::InvalidNetwork, "max_abs_diff: port counts differ");
    double worst = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k)
        worst = std::max(worst, (a[k] - b[k]).cwiseAbs().maxCoeff());
    return worst;
}

Network select_ports(const Network& net, std::span<const std::size_t> ports)
{
    if (ports.empty())
        throw Error(Errc::InvalidNetwork, "select_ports: empty port list");
    for (const std::size_t p : ports)
        if (p >= net.n_ports())
            throw Error(Errc::InvalidNetwork, "select_ports: port index out of range");
    const auto m = static_cast<Eigen::Index>(ports.size());
    std::vector<CMatrix> s(net.size(), CMatrix(m, m));
    for (std::size_t k = 0; k < net.size(); ++k)
        for (Eigen::Index i = 0; i < m; ++i)
            for (Eigen::Index j = 0; j < m; ++j)
                s[k](i, j) = net[k](static_cast<Eigen::Index>(ports[static_cast<std::size_t>(i)]),
                                    static_cast<Eigen::Index>(ports[static_cast<std::size_t>(j)]));
    return Network(net.grid(), std::move(s), net.z_ref());
}

} // namespace solrcal
