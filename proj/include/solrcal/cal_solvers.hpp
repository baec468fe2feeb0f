#pragma once

#include "solrcal/error_model.hpp"
#include "solrcal/standards.hpp"

#include <optional>
#include <string>
#include <vector>

namespace solrcal {

/// Short, Open and Load as three 1-port networks on one grid.
struct StandardTriple {
    Network short_circuit;
    Network open_circuit;
    Network load;
};

/// Exact three-standard solve of the one-port error model.
OnePortTerms solve_one_port_sol(const StandardTriple& measured, const StandardTriple& definitions);

// SOLR ----------------------------------------------------------------------

struct SolrPort {
    std::string name;
    StandardTriple measured;
    /// Evaluated definitions at the calibration reference plane.
    StandardTriple definitions;
};

struct SolrInput {
    SolrPort port_a;
    SolrPort port_b;
    /// Raw reciprocal thru, port 1 = port_a.
    Network thru;
    /// Coarse one-way delay of the thru in seconds.
    double delay_estimate = 0.0;
};

/// Per-frequency record of the k sign choice.
struct SignDecision {
    double hz = 0.0;
    cplx k;                     ///< chosen root
    double deviation = 0.0;     ///< wrapped phase miss of the chosen root (rad)
    double alt_deviation = 0.0; ///< same for the rejected root
};

/// Phase margin kept away from the ±π/2 decision boundary.
inline constexpr double kSignMargin = kPi / 8.0;

struct SolrResult {
    MultiPortCalModel model; ///< 2 ports, port_a then port_b
    std::vector<SignDecision> signs;
    double thru_reciprocity = 0.0; ///< max reciprocity_error of the corrected thru
};

SolrResult solve_solr(const SolrInput& input);

struct SignCheck {
    bool consistent = true;
    std::optional<std::size_t> first_bad; ///< first offending grid index
    double max_deviation = 0.0;           ///< rad
};

/// Checks the S21 phase of a corrected thru against the delay estimate using
/// the same continuity scan as solve_solr. A wrong k sign, over the whole
/// sweep or from some point on, shows up as a π jump.
SignCheck check_thru_sign(const Network& corrected_thru, double delay_estimate);

// Multiline TRL ----------------------------------------------------------------

enum class ReflectHint { ShortLike, OpenLike };

struct MtrlLine {
    double length = 0.0; ///< physical length in meters
    Network measured;    ///< raw 2-port
};

/// Default phase-separation tolerance for a line pair: 20 degrees.
inline constexpr double kDegenerateTol = kPi / 9.0;

struct MtrlInput {
    std::string name_a = "1";
    std::string name_b = "2";
    Network thru;
    double thru_length = 0.0;
    std::vector<MtrlLine> lines;
    Network reflect_a;
    Network reflect_b;
    ReflectHint reflect_hint = ReflectHint::ShortLike;
    /// Needed when the first grid point is too high for an unambiguous seed.
    std::optional<double> eps_eff_hint;
    double degenerate_tol = kDegenerateTol;
};

struct GammaEstimate {
    FrequencyGrid grid;
    std::vector<cplx> gamma;      ///< Np/m + j rad/m
    std::vector<double> residual; ///< weighted spread of the pair estimates, 1/m
    std::vector<bool> degenerate; ///< every pair within tolerance of nπ
    std::vector<std::size_t> pairs_used;

    /// Contiguous flagged regions as (first Hz, last Hz).
    std::vector<std::pair<double, double>> degenerate_bands() const;
};

struct MtrlResult {
    GammaEstimate gamma;
    MultiPortCalModel model; ///< reference plane at the thru center
    Network reflect_gamma;   ///< reflect standard recovered at each frequency
};

MtrlResult solve_mtrl(const MtrlInput& input);

/// Classical TRL: thru, one line, reflect. Root selection by the quadratic
/// form instead of an eigen solver.
MtrlResult solve_trl(const MtrlInput& input);

// Standard characterization -------------------------------------------------------

struct CharacterizeInput {
    std::size_t port = 0; ///< index into the calibration model
    StandardTriple raw;
};

struct CharacterizedStandards {
    StandardTriple definitions; ///< de-embedded, averaged over the given ports
    ReflectFit open_fit;
    ReflectFit short_fit;
    Network load_gamma;
    /// Largest disagreement between ports for each standard (S, O, L).
    std::array<double, 3> port_spread{};
};

CharacterizedStandards characterize_standards(const MultiPortCalModel& model,
                                              const std::vector<CharacterizeInput>& raw);

// Multiport assembly ---------------------------------------------------------

/// Relative tolerance for shared-port term agreement.
inline constexpr double kSharedPortTol = 1e-6;

/// Merges 2-port models into one model. Ports are identified by name and
/// numbered in first-seen order unless port_order is given.
MultiPortCalModel build_fourport_cal(const std::vector<MultiPortCalModel>& pairwise,
                                     const std::vector<std::string>& port_order = {});

/// Moves the reference plane of one port through a 2-port section whose
/// port 1 faces the instrument.
MultiPortCalModel shift_reference_plane(const MultiPortCalModel& model, std::size_t port, const Network& section);

} // namespace solrcal
