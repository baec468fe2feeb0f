#pragma once

#include "solrcal/sparams.hpp"

#include <string>
#include <vector>

namespace solrcal {

/// Three-term one-port error model per frequency point:
/// Γ_m = e00 + tracking·Γ / (1 - e11·Γ).
struct OnePortTerms {
    FrequencyGrid grid;
    std::vector<cplx> e00;      ///< directivity
    std::vector<cplx> e11;      ///< source match
    std::vector<cplx> tracking; ///< reflection tracking e01·e10

    static OnePortTerms identity(const FrequencyGrid& grid);
    std::size_t size() const noexcept { return e00.size(); }
    /// Throws InvalidNetwork on size mismatch, SingularSystem on zero tracking.
    void validate() const;
};

/// √tracking on the principal branch at the first point, then the branch
/// closest to the previous point for every following point.
std::vector<cplx> continuous_sqrt(const std::vector<cplx>& values);

/// One port's error box. The box, seen as a 2-port with port 1 at the
/// instrument and port 2 at the DUT, is
///
///     S = [ e00                  tracking / split ]
///         [ split                e11              ]
///
/// so split is the instrument-to-DUT transmission. The default split is the
/// reciprocal one, continuous_sqrt(tracking).
struct PortErrorBox {
    OnePortTerms terms;
    std::vector<cplx> split;

    PortErrorBox() = default;
    explicit PortErrorBox(OnePortTerms t);
    PortErrorBox(OnePortTerms t, std::vector<cplx> explicit_split);

    /// Box as a 2-port, port 1 at the instrument.
    Network as_network(double z_ref = kDefaultZref) const;
    /// Inverse of as_network for any 2-port with nonzero S21.
    static PortErrorBox from_network(const Network& box);
};

/// Transmission-tracking ratio between ports i and j. With per-port gauge
/// factors g, the incident and outgoing tracking at port p are split_p·g_p and
/// tracking_p / (split_p·g_p), and k = g_i / g_j.
struct KEdge {
    std::size_t i = 0;
    std::size_t j = 0;
    std::vector<cplx> k;
};

/// Relative tolerance applied to redundant k pairs.
inline constexpr double kKConsistencyTol = 1e-6;

/// Eight-term model and its n-port generalization: one error box per port and
/// k on a set of port pairs that connects every port. Pairs beyond a
/// spanning tree are checked against the tree composition; the tree wins.
class MultiPortCalModel {
public:
    MultiPortCalModel() = default;
    MultiPortCalModel(std::vector<PortErrorBox> boxes, std::vector<KEdge> edges,
                      std::vector<std::string> port_names = {}, double z_ref = kDefaultZref);

    static MultiPortCalModel identity(const FrequencyGrid& grid, std::size_t n_ports);

    std::size_t n_ports() const noexcept { return boxes_.size(); }
    const FrequencyGrid& grid() const { return boxes_.front().terms.grid; }
    double z_ref() const noexcept { return z_ref_; }
    const std::vector<PortErrorBox>& boxes() const noexcept { return boxes_; }
    const std::vector<KEdge>& edges() const noexcept { return edges_; }
    const std::vector<std::string>& port_names() const noexcept { return port_names_; }

    /// Largest relative disagreement of a redundant pair with the tree.
    double k_consistency_residual() const noexcept { return k_residual_; }

    /// Per-port gauge factors g_p (g_0 = 1) at point k.
    const std::vector<cplx>& gauges(std::size_t k) const { return gauges_[k]; }
    /// k between any two ports, composed along the spanning tree.
    cplx k_between(std::size_t i, std::size_t j, std::size_t k) const;

    /// Instrument-to-DUT and DUT-to-instrument tracking of a port at point k.
    cplx incident(std::size_t port, std::size_t k) const;
    cplx outgoing(std::size_t port, std::size_t k) const;

    /// Sub-model on the listed ports, in that order, with k chained from the
    /// first listed port.
    MultiPortCalModel restrict_to(const std::vector<std::size_t>& ports) const;

    /// Same model with every box on its default split and k adjusted to
    /// match, so the measurement map is unchanged.
    MultiPortCalModel canonical() const;

    std::size_t port_index(const std::string& name) const;

private:
    std::vector<PortErrorBox> boxes_;
    std::vector<KEdge> edges_;
    std::vector<std::string> port_names_;
    double z_ref_ = kDefaultZref;
    std::vector<std::vector<cplx>> gauges_;
    double k_residual_ = 0.0;
};

Network embed_oneport(const OnePortTerms& terms, const Network& gamma);
Network correct_oneport(const OnePortTerms& terms, const Network& gamma_m);

/// M = E00 + E_out·S·(I - E11·S)^-1·E_in per frequency.
Network embed_multiport(const MultiPortCalModel& model, const Network& dut);
/// Solves S = X·(E_in + E11·X)^-1 with X = E_out^-1·(M - E00).
Network correct_multiport(const MultiPortCalModel& model, const Network& measured);

/// Text form of a model: one row per frequency with e00, e11, tracking of
/// each port followed by k of each pair, all as real/imaginary pairs.
std::string write_cal_model(const MultiPortCalModel& model);
MultiPortCalModel parse_cal_model(std::string_view text);

MultiPortCalModel read_cal_model_file(const std::string& path);
void write_cal_model_file(const std::string& path, const MultiPortCalModel& model);

} // namespace solrcal
