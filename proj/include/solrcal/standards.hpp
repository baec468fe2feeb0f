#pragma once

#include "solrcal/sparams.hpp"

#include <array>
#include <optional>
#include <string>

namespace solrcal {

enum class ReflectKind { Open, Short };

/// Open or short definition with a cubic capacitance/inductance polynomial in
/// frequency (Hz). Coefficients are SI: F, F/Hz, F/Hz², F/Hz³ for an open and
/// H, H/Hz, ... for a short.
struct ReflectPoly {
    ReflectKind kind = ReflectKind::Open;
    std::array<double, 4> coeffs{};
    double offset_delay = 0.0; ///< one-way, seconds
    double offset_loss = 0.0;  ///< ohm/s; must be 0 for now

    double reactive_value(double hz) const;
};

/// Low-loss line in front of the load resistor. Loss is nepers/m at 1 GHz
/// scaling as sqrt(f).
struct TuneLine {
    double length = 45e-6;
    double delay = 0.0;
    double z0 = kDefaultZref;
    double loss = 0.0;
};

struct LoadModel {
    double r_dc = 50.0;
    double l_series = 0.0;
    std::optional<TuneLine> tune_line;
};

/// Microstrip-like line with a real characteristic impedance.
/// α(f) = alpha_c·sqrt(f/1 GHz) + alpha_d·(f/1 GHz), β(f) = 2πf·sqrt(eps_eff)/c0.
struct LineModel {
    double length = 0.0;
    double z0 = kDefaultZref;
    double eps_eff = 1.0;
    double alpha_c = 0.0;
    double alpha_d = 0.0;

    cplx gamma(double hz) const;
};

/// Probe pad (shunt capacitance at port 1) followed by the feed line.
struct FixtureModel {
    double pad_c = 0.0;
    LineModel feed;
};

Network eval_reflect(const ReflectPoly& model, const FrequencyGrid& grid, double z_ref = kDefaultZref);
Network eval_load(const LoadModel& model, const FrequencyGrid& grid, double z_ref = kDefaultZref);
Network eval_line(const LineModel& model, const FrequencyGrid& grid, double z_ref = kDefaultZref);
Network eval_shunt_capacitor(double capacitance, const FrequencyGrid& grid, double z_ref = kDefaultZref);
Network eval_fixture(const FixtureModel& model, const FrequencyGrid& grid, double z_ref = kDefaultZref);

/// The tuning line of a load expressed as a LineModel.
LineModel tune_line_model(const TuneLine& tune);

struct ReflectFit {
    ReflectPoly model;
    double max_residual = 0.0;      ///< max |Γ_model - Γ_data| over the grid
    double condition_estimate = 0.0; ///< of the column-scaled normal equations
};

/// Condition bound above which fit_reflect_poly refuses to return a model.
inline constexpr double kFitConditionLimit = 1e12;

/// Least-squares fit of the four polynomial coefficients to measured
/// reflection data. offset_delay of the result is 0.
ReflectFit fit_reflect_poly(ReflectKind kind, const Network& gamma);

enum class ThresholdQuantity { S11Below, S21Reciprocity };

struct ThresholdReport {
    /// Number of leading grid points that satisfy the criterion.
    std::size_t valid_points = 0;
    bool full_grid = false;
    /// Largest frequency f* with the criterion holding at every point <= f*;
    /// empty when the first point already fails.
    std::optional<double> valid_up_to;
    /// threshold_db minus the measured level; positive means inside the limit.
    std::vector<double> margin_db;
    std::vector<double> level_db;
};

ThresholdReport threshold_report(const Network& net, double threshold_db, ThresholdQuantity quantity);

double to_db20(double magnitude);

} // namespace solrcal
