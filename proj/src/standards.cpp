#include "solrcal/standards.hpp"

#include "solrcal/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace solrcal {

double ReflectPoly::reactive_value(double hz) const
{
    return coeffs[0] + hz * (coeffs[1] + hz * (coeffs[2] + hz * coeffs[3]));
}

cplx LineModel::gamma(double hz) const
{
    const double x = hz / 1e9;
    const double alpha = alpha_c * std::sqrt(x) + alpha_d * x;
    const double beta = 2.0 * kPi * hz * std::sqrt(eps_eff) / kSpeedOfLight;
    return {alpha, beta};
}

namespace {

cplx reflect_gamma(ReflectKind kind, double reactive, double omega, double z_ref)
{
    if (kind == ReflectKind::Open) {
        const cplx jx(0.0, omega * reactive * z_ref);
        return (1.0 - jx) / (1.0 + jx);
    }
    const cplx jwl(0.0, omega * reactive);
    return (jwl - z_ref) / (jwl + z_ref);
}

// dΓ/d(reactive value) for the two reflect kinds.
cplx reflect_derivative(ReflectKind kind, double reactive, double omega, double z_ref)
{
    if (kind == ReflectKind::Open) {
        const cplx jx(0.0, omega * reactive * z_ref);
        return cplx(0.0, -2.0 * omega * z_ref) / ((1.0 + jx) * (1.0 + jx));
    }
    const cplx d = cplx(0.0, omega * reactive) + z_ref;
    return cplx(0.0, 2.0 * omega * z_ref) / (d * d);
}

} // namespace

Network eval_reflect(const ReflectPoly& model, const FrequencyGrid& grid, double z_ref)
{
    if (model.offset_loss != 0.0)
        throw Error(Errc::Unsupported, "offset_loss must be 0 for reflect definitions");
    std::vector<cplx> g(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double omega = 2.0 * kPi * grid[k];
        cplx gamma = reflect_gamma(model.kind, model.reactive_value(grid[k]), omega, z_ref);
        if (model.offset_delay != 0.0)
            gamma *= std::polar(1.0, -2.0 * omega * model.offset_delay);
        if (!(std::abs(gamma) <= 1.0 + 1e-9))
            throw error_at(Errc::NonPhysical, grid[k], "reflect definition has |Γ| > 1");
        g[k] = gamma;
    }
    return Network::one_port(grid, g, z_ref);
}

LineModel tune_line_model(const TuneLine& tune)
{
    if (!(tune.length > 0.0))
        throw Error(Errc::InvalidArgument, "tuning line length must be positive");
    LineModel line;
    line.length = tune.length;
    line.z0 = tune.z0;
    const double v = tune.delay > 0.0 ? kSpeedOfLight * tune.delay / tune.length : 1.0;
    line.eps_eff = v * v;
    line.alpha_c = tune.loss;
    return line;
}

Network eval_load(const LoadModel& model, const FrequencyGrid& grid, double z_ref)
{
    if (!(model.r_dc > 0.0))
        throw Error(Errc::InvalidArgument, "load r_dc must be positive");
    std::vector<cplx> g(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const cplx z(model.r_dc, 2.0 * kPi * grid[k] * model.l_series);
        g[k] = (z - z_ref) / (z + z_ref);
    }
    Network load = Network::one_port(grid, g, z_ref);
    if (!model.tune_line)
        return load;
    return terminate(eval_line(tune_line_model(*model.tune_line), grid, z_ref), load);
}

Network eval_line(const LineModel& model, const FrequencyGrid& grid, double z_ref)
{
    Network net(grid, 2, z_ref);
    const double g0 = (model.z0 - z_ref) / (model.z0 + z_ref);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const cplx p = std::exp(-model.gamma(grid[k]) * model.length);
        const cplx denom = 1.0 - g0 * g0 * p * p;
        const cplx s11 = g0 * (1.0 - p * p) / denom;
        const cplx s21 = p * (1.0 - g0 * g0) / denom;
        net[k] << s11, s21, s21, s11;
    }
    return net;
}

Network eval_shunt_capacitor(double capacitance, const FrequencyGrid& grid, double z_ref)
{
    Network net(grid, 2, z_ref);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const cplx yz(0.0, 2.0 * kPi * grid[k] * capacitance * z_ref);
        const cplx s11 = -yz / (2.0 + yz);
        const cplx s21 = 2.0 / (2.0 + yz);
        net[k] << s11, s21, s21, s11;
    }
    return net;
}

Network eval_fixture(const FixtureModel& model, const FrequencyGrid& grid, double z_ref)
{
    const Network feed = eval_line(model.feed, grid, z_ref);
    if (model.pad_c == 0.0)
        return feed;
    return cascade(eval_shunt_capacitor(model.pad_c, grid, z_ref), feed);
}

ReflectFit fit_reflect_poly(ReflectKind kind, const Network& gamma)
{
    if (gamma.n_ports() != 1)
        throw Error(Errc::InvalidArgument, "fit_reflect_poly needs a 1-port network");
    const std::size_t n = gamma.size();
    if (n < 8)
        throw Error(Errc::InvalidArgument, "fit_reflect_poly needs at least 8 frequency points");
    const double z_ref = gamma.z_ref();
    const auto& grid = gamma.grid();
    for (std::size_t k = 0; k < n; ++k) {
        const double mag = std::abs(gamma.at(k, 0, 0));
        if (!(mag > 0.2 && mag < 1.2))
            throw error_at(Errc::InvalidArgument, grid[k], "|Γ| outside (0.2, 1.2), not an open/short");
    }

    // Unknowns are dimensionless: the top frequency scales each power of f and
    // the reactance at that frequency scales the value itself.
    const double f_scale = grid.back();
    const double omega_top = 2.0 * kPi * f_scale;
    const double value_scale = kind == ReflectKind::Open ? 1.0 / (omega_top * z_ref) : z_ref / omega_top;
    auto basis = [&](double hz, int order) { return value_scale * std::pow(hz / f_scale, order); };

    // Starting point: pointwise reactive values, fitted linearly.
    Eigen::MatrixXd v(static_cast<Eigen::Index>(n), 4);
    Eigen::VectorXd samples(static_cast<Eigen::Index>(n));
    Eigen::Index rows_used = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const double omega = 2.0 * kPi * grid[k];
        if (omega == 0.0)
            continue;
        const cplx g = gamma.at(k, 0, 0);
        cplx value;
        if (kind == ReflectKind::Open)
            value = (1.0 - g) / ((1.0 + g) * cplx(0.0, omega * z_ref));
        else
            value = z_ref * (1.0 + g) / ((1.0 - g) * cplx(0.0, omega));
        if (!std::isfinite(value.real()))
            continue;
        for (int j = 0; j < 4; ++j)
            v(rows_used, j) = basis(grid[k], j);
        samples(rows_used) = value.real();
        ++rows_used;
    }
    Eigen::Vector4d x = Eigen::Vector4d::Zero();
    if (rows_used >= 4)
        x = v.topRows(rows_used).colPivHouseholderQr().solve(samples.head(rows_used));

    auto coeffs_of = [&](const Eigen::Vector4d& p) {
        std::array<double, 4> c{};
        for (int j = 0; j < 4; ++j)
            c[static_cast<std::size_t>(j)] = p(j) * value_scale / std::pow(f_scale, j);
        return c;
    };

    // Gauss-Newton on the stacked real/imaginary residual Σ|Γ_model - Γ_data|².
    Eigen::MatrixXd jac(static_cast<Eigen::Index>(2 * n), 4);
    Eigen::VectorXd res(static_cast<Eigen::Index>(2 * n));
    auto linearize = [&](const Eigen::Vector4d& p) {
        ReflectPoly poly{kind, coeffs_of(p), 0.0, 0.0};
        for (std::size_t k = 0; k < n; ++k) {
            const double omega = 2.0 * kPi * grid[k];
            const double reactive = poly.reactive_value(grid[k]);
            const cplx r = reflect_gamma(kind, reactive, omega, z_ref) - gamma.at(k, 0, 0);
            const cplx d = reflect_derivative(kind, reactive, omega, z_ref);
            const auto re = static_cast<Eigen::Index>(2 * k);
            res(re) = r.real();
            res(re + 1) = r.imag();
            for (int j = 0; j < 4; ++j) {
                const double b = basis(grid[k], j);
                jac(re, j) = d.real() * b;
                jac(re + 1, j) = d.imag() * b;
            }
        }
    };

    double cond = 0.0;
    for (int iter = 0; iter < 60; ++iter) {
        linearize(x);
        Eigen::Vector4d col_norm = jac.colwise().norm().transpose();
        for (int j = 0; j < 4; ++j)
            if (col_norm(j) == 0.0)
                col_norm(j) = 1.0;
        const Eigen::MatrixXd scaled = jac * col_norm.cwiseInverse().asDiagonal();
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(scaled, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const auto& sv = svd.singularValues();
        const double ratio = sv(3) > 0.0 ? sv(0) / sv(3) : std::numeric_limits<double>::infinity();
        cond = ratio * ratio;
        if (!(cond <= kFitConditionLimit))
            throw Error(Errc::IllConditioned, "normal equations condition estimate " + std::to_string(cond) +
                                                  " exceeds limit; grid does not constrain a cubic");
        const Eigen::Vector4d step = col_norm.cwiseInverse().asDiagonal() * svd.solve(-res);
        x += step;
        if (step.norm() <= 1e-14 * (x.norm() + 1e-9))
            break;
    }

    ReflectFit fit;
    fit.model = ReflectPoly{kind, coeffs_of(x), 0.0, 0.0};
    fit.condition_estimate = cond;
    const Network model = eval_reflect(fit.model, grid, z_ref);
    for (std::size_t k = 0; k < n; ++k)
        fit.max_residual = std::max(fit.max_residual, std::abs(model.at(k, 0, 0) - gamma.at(k, 0, 0)));
    return fit;
}

double to_db20(double magnitude)
{
    if (magnitude <= 0.0)
        return -std::numeric_limits<double>::infinity();
    return 20.0 * std::log10(magnitude);
}

ThresholdReport threshold_report(const Network& net, double threshold_db, ThresholdQuantity quantity)
{
    ThresholdReport rep;
    std::vector<double> level(net.size());
    if (quantity == ThresholdQuantity::S11Below) {
        if (!(threshold_db < 0.0))
            throw Error(Errc::InvalidArgument, "s11_below threshold must be negative dB");
        for (std::size_t k = 0; k < net.size(); ++k)
            level[k] = to_db20(std::abs(net.at(k, 0, 0)));
    } else {
        if (net.n_ports() < 2)
            throw Error(Errc::InvalidArgument, "reciprocity threshold needs at least 2 ports");
        const auto err = reciprocity_error(net);
        for (std::size_t k = 0; k < net.size(); ++k)
            level[k] = to_db20(err[k]);
    }
    rep.level_db = level;
    rep.margin_db.resize(net.size());
    bool still_valid = true;
    for (std::size_t k = 0; k < net.size(); ++k) {
        rep.margin_db[k] = threshold_db - level[k];
        if (still_valid && level[k] < threshold_db) {
            rep.valid_points = k + 1;
            rep.valid_up_to = net.frequency(k);
        } else {
            still_valid = false;
        }
    }
    rep.full_grid = rep.valid_points == net.size();
    return rep;
}

} // namespace solrcal
