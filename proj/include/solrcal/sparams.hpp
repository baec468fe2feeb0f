#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace solrcal {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CMatrix2 = Eigen::Matrix2cd;

inline constexpr double kSpeedOfLight = 299792458.0;
inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kDefaultZref = 50.0;

/// Default numerical tolerances. Tests may pass tighter or looser values
/// where an operation exposes a tolerance parameter.
namespace tol {
inline constexpr double kRoundTrip = 1e-10;
inline constexpr double kExact = 1e-12;
inline constexpr double kMinTransmission = 1e-6;
} // namespace tol

/// Strictly increasing sweep in Hz. Only the first point may be 0 (DC).
class FrequencyGrid {
public:
    FrequencyGrid() = default;
    explicit FrequencyGrid(std::vector<double> points);

    static FrequencyGrid linear(double start_hz, double stop_hz, std::size_t count);

    std::size_t size() const noexcept { return points_.size(); }
    bool empty() const noexcept { return points_.empty(); }
    double operator[](std::size_t i) const { return points_[i]; }
    double front() const { return points_.front(); }
    double back() const { return points_.back(); }
    std::span<const double> points() const noexcept { return points_; }

    /// Bitwise equality of every point.
    bool operator==(const FrequencyGrid& other) const;

private:
    std::vector<double> points_;
};

/// n-port scattering parameters on a frequency grid, linear complex values,
/// single real reference impedance.
class Network {
public:
    Network() = default;
    Network(FrequencyGrid grid, std::size_t n_ports, double z_ref = kDefaultZref);
    Network(FrequencyGrid grid, std::vector<CMatrix> s, double z_ref = kDefaultZref);

    /// 1-port network from a list of reflection coefficients.
    static Network one_port(FrequencyGrid grid, std::span<const cplx> gamma, double z_ref = kDefaultZref);
    /// The same matrix at every grid point.
    static Network constant(FrequencyGrid grid, const CMatrix& s, double z_ref = kDefaultZref);

    const FrequencyGrid& grid() const noexcept { return grid_; }
    std::size_t n_ports() const noexcept { return n_ports_; }
    std::size_t size() const noexcept { return s_.size(); }
    double z_ref() const noexcept { return z_ref_; }
    double frequency(std::size_t k) const { return grid_[k]; }

    const CMatrix& operator[](std::size_t k) const { return s_[k]; }
    CMatrix& operator[](std::size_t k) { return s_[k]; }
    const std::vector<CMatrix>& matrices() const noexcept { return s_; }

    /// S_(row,col) at point k, zero-based port indices.
    cplx at(std::size_t k, std::size_t row, std::size_t col) const { return s_[k](row, col); }
    /// Trace of one parameter across the sweep.
    std::vector<cplx> trace(std::size_t row, std::size_t col) const;

    /// Throws InvalidNetwork on NaN/Inf entries or a wrong matrix size.
    void validate() const;

private:
    FrequencyGrid grid_;
    std::size_t n_ports_ = 0;
    std::vector<CMatrix> s_;
    double z_ref_ = kDefaultZref;
};

/// Cascade (transfer) parameters of a 2-port.
///
/// Convention, used by every cascade-matrix computation in this library:
///
///     [a1]       [b2]
///     [b1] = T · [a2]
///
/// so that the physical cascade A -> B is the matrix product T_A · T_B and
///
///     T = 1/S21 · [ 1     -S22        ]
///                 [ S11   -(S11·S22 - S12·S21) ]
///
/// An ideal thru maps to the identity and a matched line of electrical length
/// θ to diag(exp(jθ), exp(-jθ)).
class TwoPortT {
public:
    TwoPortT() = default;
    TwoPortT(FrequencyGrid grid, std::vector<CMatrix2> t);

    const FrequencyGrid& grid() const noexcept { return grid_; }
    std::size_t size() const noexcept { return t_.size(); }
    const CMatrix2& operator[](std::size_t k) const { return t_[k]; }
    CMatrix2& operator[](std::size_t k) { return t_[k]; }

private:
    FrequencyGrid grid_;
    std::vector<CMatrix2> t_;
};

// Single-point conversions. s_to_t_point throws ZeroTransmission and
// t_to_s_point throws SingularT; the frequency argument only labels errors.
CMatrix2 s_to_t_point(const CMatrix2& s, double hz = 0.0);
CMatrix2 t_to_s_point(const CMatrix2& t, double hz = 0.0);

TwoPortT s_to_t(const Network& net);
Network t_to_s(const TwoPortT& t, double z_ref = kDefaultZref);

/// a's port 2 joined to b's port 1. Works for zero-transmission inputs, so a
/// 1-port load can be attached as the 2-port [[Γ, 0], [0, 0]].
Network cascade(const Network& a, const Network& b);
CMatrix2 cascade_point(const CMatrix2& a, const CMatrix2& b, double hz = 0.0);

/// Reflection seen at port 1 of `two_port` when port 2 is terminated by `load`.
Network terminate(const Network& two_port, const Network& load);

/// Swap ports 1 and 2 of a 2-port.
Network flip_ports(const Network& two_port);

/// Per frequency, max over i<j of |S_ij - S_ji|.
std::vector<double> reciprocity_error(const Network& net);
/// Per frequency, 1 - largest singular value of S.
std::vector<double> passivity_margin(const Network& net);

/// Largest entrywise |a - b| over the whole sweep. Grids must match.
double max_abs_diff(const Network& a, const Network& b);

/// Throws GridMismatch unless both grids and reference impedances match.
void require_same_grid(const Network& a, const Network& b, const char* what);

/// Sub-network on a subset of ports, in the given order.
Network select_ports(const Network& net, std::span<const std::size_t> ports);

} // namespace solrcal
