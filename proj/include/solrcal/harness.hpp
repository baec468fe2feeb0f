#pragma once

#include "solrcal/cal_solvers.hpp"
#include "solrcal/config.hpp"
#include "solrcal/pack.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace solrcal {

/// mt19937_64 with explicitly defined transforms so streams are identical
/// across standard libraries: uniform = (x >> 11)·2^-53, normal by
/// Box-Muller on (1 - u1, u2) with the sine value kept for the next call.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal();
    /// Complex Gaussian with E|z|² = sigma².
    cplx complex_normal(double sigma);

private:
    std::mt19937_64 eng_;
    std::optional<double> spare_;
};

struct BoxBounds {
    double e00_max = 0.3;
    double e11_max = 0.3;
    double tracking_min = 0.5;
    double tracking_max = 1.0;
    /// Negate the transmission of the box with probability 1/2.
    bool random_sign = true;
};

/// Smooth random reciprocal error box, port 1 at the instrument. Magnitudes
/// follow cubic Chebyshev profiles inside the bounds, phases cubic
/// polynomials; the transmission is scaled by 0.95 until the box is passive.
Network random_passive_box(const FrequencyGrid& grid, Rng& rng, const BoxBounds& bounds = {});

/// Smooth random reciprocal n-port scaled to a largest singular value of at
/// most 0.95 at every point.
Network random_passive_dut(const FrequencyGrid& grid, std::size_t n_ports, Rng& rng);

/// Adds complex Gaussian noise with E|n|² = 10^(noise_db/10) to every entry.
void add_noise(Network& net, double noise_db, Rng& rng);

enum class BoxMode { RandomPassive, Identity, File };

struct BoxSpec {
    BoxMode mode = BoxMode::RandomPassive;
    std::string file; ///< 2-port Touchstone, port 1 at the instrument
    BoxBounds bounds;
};

enum class DutKind { Diagonal, Random, None };

struct ScenarioPair {
    std::size_t a = 0;
    std::size_t b = 1;
    std::string thru = "arc";
};

struct Scenario {
    std::uint64_t seed = 42;
    double start_hz = 1e9;
    double stop_hz = 170e9;
    std::size_t points = 201;
    StandardPack pack;
    std::string pack_ref = "nyu28-pack";
    std::vector<std::string> ports{"1", "2"};
    std::vector<ScenarioPair> pairs{ScenarioPair{}};
    std::vector<BoxSpec> boxes{BoxSpec{}, BoxSpec{}};
    std::optional<double> noise_db;
    DutKind dut = DutKind::Diagonal;
    /// Put the pack fixture (pad + feed) between each box and the standards.
    bool fixture = true;
    /// Also generate the mTRL line set on the first pair.
    bool mtrl = true;

    FrequencyGrid grid() const;
    void validate() const;
};

/// Reads [scenario] and optional [boxes] / [box.NAME] sections.
Scenario parse_scenario(const Config& cfg);

struct SimulatedLine {
    std::string name;
    double length = 0.0;
    Network raw;
};

struct Simulation {
    Scenario scenario;
    FrequencyGrid grid;
    /// Instrument-to-standard-plane model, fixture included.
    MultiPortCalModel truth;
    std::vector<Network> truth_boxes;
    StandardTriple definitions;
    std::vector<StandardTriple> raw_sol; ///< per port
    std::vector<Network> thru_models;    ///< per pair
    std::vector<Network> raw_thrus;      ///< per pair
    Network dut_truth;
    Network raw_dut;
    // mTRL set on the first pair
    Network mtrl_thru_model;
    Network raw_mtrl_thru;
    std::vector<SimulatedLine> raw_lines;
};

/// Draw order: boxes per port, then the DUT, then noise in output order
/// (S/O/L per port, thrus, DUT, mTRL thru, lines).
Simulation simulate_measurements(const Scenario& scn);

/// Writes raw/, truth/, manifest.json and ready-to-run solr.ini / mtrl.ini
/// session files under out_dir. Returns the written paths relative to out_dir.
std::vector<std::string> write_simulation(const Simulation& sim, const std::string& out_dir);

} // namespace solrcal
