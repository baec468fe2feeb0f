#include "solrcal/error_model.hpp"

#include "solrcal/error.hpp"
#include "text_util.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>

namespace solrcal {

OnePortTerms OnePortTerms::identity(const FrequencyGrid& grid)
{
    OnePortTerms t;
    t.grid = grid;
    t.e00.assign(grid.size(), 0.0);
    t.e11.assign(grid.size(), 0.0);
    t.tracking.assign(grid.size(), 1.0);
    return t;
}

void OnePortTerms::validate() const
{
    if (e00.size() != grid.size() || e11.size() != grid.size() || tracking.size() != grid.size())
        throw Error(Errc::InvalidNetwork, "one-port terms do not match their grid");
    for (std::size_t k = 0; k < tracking.size(); ++k)
        if (std::abs(tracking[k]) == 0.0 || !std::isfinite(std::abs(tracking[k])))
            throw error_at(Errc::SingularSystem, grid[k], "reflection tracking is zero");
}

std::vector<cplx> continuous_sqrt(const std::vector<cplx>& values)
{
    std::vector<cplx> out(values.size());
    for (std::size_t k = 0; k < values.size(); ++k) {
        cplx r = std::sqrt(values[k]);
        if (k > 0 && std::abs(r - out[k - 1]) > std::abs(r + out[k - 1]))
            r = -r;
        out[k] = r;
    }
    return out;
}

PortErrorBox::PortErrorBox(OnePortTerms t) : terms(std::move(t)), split(continuous_sqrt(terms.tracking))
{
    terms.validate();
}

PortErrorBox::PortErrorBox(OnePortTerms t, std::vector<cplx> explicit_split)
    : terms(std::move(t)), split(std::move(explicit_split))
{
    terms.validate();
    if (split.size() != terms.size())
        throw Error(Errc::InvalidNetwork, "split size does not match terms");
    for (std::size_t k = 0; k < split.size(); ++k)
        if (std::abs(split[k]) == 0.0)
            throw error_at(Errc::SingularSystem, terms.grid[k], "zero transmission split");
}

Network PortErrorBox::as_network(double z_ref) const
{
    Network net(terms.grid, 2, z_ref);
    for (std::size_t k = 0; k < terms.size(); ++k)
        net[k] << terms.e00[k], terms.tracking[k] / split[k], split[k], terms.e11[k];
    return net;
}

PortErrorBox PortErrorBox::from_network(const Network& box)
{
    if (box.n_ports() != 2)
        throw Error(Errc::InvalidNetwork, "error box must be a 2-port");
    OnePortTerms t;
    t.grid = box.grid();
    std::vector<cplx> split(box.size());
    for (std::size_t k = 0; k < box.size(); ++k) {
        t.e00.push_back(box.at(k, 0, 0));
        t.e11.push_back(box.at(k, 1, 1));
        t.tracking.push_back(box.at(k, 0, 1) * box.at(k, 1, 0));
        split[k] = box.at(k, 1, 0);
    }
    return PortErrorBox(std::move(t), std::move(split));
}

MultiPortCalModel::MultiPortCalModel(std::vector<PortErrorBox> boxes, std::vector<KEdge> edges,
                                     std::vector<std::string> port_names, double z_ref)
    : boxes_(std::move(boxes)), edges_(std::move(edges)), port_names_(std::move(port_names)), z_ref_(z_ref)
{
    const std::size_t n = boxes_.size();
    if (n == 0)
        throw Error(Errc::InvalidNetwork, "calibration model needs at least one port");
    const FrequencyGrid& g = boxes_.front().terms.grid;
    for (const auto& b : boxes_) {
        if (!(b.terms.grid == g))
            throw Error(Errc::GridMismatch, "error boxes are on different grids");
        if (b.split.size() != g.size())
            throw Error(Errc::InvalidNetwork, "error box split does not match grid");
    }
    if (port_names_.empty())
        for (std::size_t p = 0; p < n; ++p)
            port_names_.push_back(std::to_string(p + 1));
    if (port_names_.size() != n)
        throw Error(Errc::InvalidNetwork, "port name count differs from port count");
    for (const auto& e : edges_) {
        if (e.i >= n || e.j >= n || e.i == e.j)
            throw Error(Errc::InvalidNetwork, "k pair references an invalid port");
        if (e.k.size() != g.size())
            throw Error(Errc::InvalidNetwork, "k trace does not match grid");
    }

    // Spanning tree: earliest edges that join two components.
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
        while (parent[x] != x)
            x = parent[x] = parent[parent[x]];
        return x;
    };
    std::vector<bool> in_tree(edges_.size(), false);
    for (std::size_t e = 0; e < edges_.size(); ++e) {
        const auto a = find(edges_[e].i);
        const auto b = find(edges_[e].j);
        if (a != b) {
            parent[a] = b;
            in_tree[e] = true;
        }
    }
    for (std::size_t p = 1; p < n; ++p)
        if (find(p) != find(0))
            throw Error(Errc::DisconnectedTree, "port pairs do not connect port " + port_names_[p] + " to port " +
                                                    port_names_[0]);

    // Gauges by breadth-first walk of the tree from port 0.
    std::vector<std::vector<std::size_t>> adj(n);
    for (std::size_t e = 0; e < edges_.size(); ++e)
        if (in_tree[e]) {
            adj[edges_[e].i].push_back(e);
            adj[edges_[e].j].push_back(e);
        }
    gauges_.assign(g.size(), std::vector<cplx>(n, 1.0));
    std::vector<bool> seen(n, false);
    std::queue<std::size_t> todo;
    todo.push(0);
    seen[0] = true;
    while (!todo.empty()) {
        const std::size_t p = todo.front();
        todo.pop();
        for (const std::size_t e : adj[p]) {
            const KEdge& edge = edges_[e];
            const std::size_t q = edge.i == p ? edge.j : edge.i;
            if (seen[q])
                continue;
            for (std::size_t k = 0; k < g.size(); ++k) {
                if (std::abs(edge.k[k]) == 0.0)
                    throw error_at(Errc::SingularSystem, g[k], "k is zero");
                gauges_[k][q] = edge.i == p ? gauges_[k][p] / edge.k[k] : gauges_[k][p] * edge.k[k];
            }
            seen[q] = true;
            todo.push(q);
        }
    }

    for (std::size_t e = 0; e < edges_.size(); ++e) {
        if (in_tree[e])
            continue;
        const KEdge& edge = edges_[e];
        for (std::size_t k = 0; k < g.size(); ++k) {
            const cplx composed = gauges_[k][edge.i] / gauges_[k][edge.j];
            const double rel = std::abs(edge.k[k] - composed) / std::abs(composed);
            k_residual_ = std::max(k_residual_, rel);
            if (!(rel <= kKConsistencyTol))
                throw error_at(Errc::InconsistentK, g[k],
                               "redundant pair " + port_names_[edge.i] + "-" + port_names_[edge.j] +
                                   " disagrees with the spanning tree by " + std::to_string(rel));
        }
    }
}

MultiPortCalModel MultiPortCalModel::identity(const FrequencyGrid& grid, std::size_t n_ports)
{
    std::vector<PortErrorBox> boxes(n_ports, PortErrorBox(OnePortTerms::identity(grid)));
    std::vector<KEdge> edges;
    for (std::size_t p = 1; p < n_ports; ++p)
        edges.push_back({p - 1, p, std::vector<cplx>(grid.size(), 1.0)});
    return MultiPortCalModel(std::move(boxes), std::move(edges));
}

cplx MultiPortCalModel::k_between(std::size_t i, std::size_t j, std::size_t k) const
{
    return gauges_[k][i] / gauges_[k][j];
}

cplx MultiPortCalModel::incident(std::size_t port, std::size_t k) const
{
    return boxes_[port].split[k] * gauges_[k][port];
}

cplx MultiPortCalModel::outgoing(std::size_t port, std::size_t k) const
{
    return boxes_[port].terms.tracking[k] / (boxes_[port].split[k] * gauges_[k][port]);
}

MultiPortCalModel MultiPortCalModel::restrict_to(const std::vector<std::size_t>& ports) const
{
    if (ports.empty())
        throw Error(Errc::InvalidArgument, "restrict_to: empty port list");
    std::vector<PortErrorBox> boxes;
    std::vector<std::string> names;
    for (const auto p : ports) {
        if (p >= n_ports())
            throw Error(Errc::InvalidArgument, "restrict_to: port index out of range");
        boxes.push_back(boxes_[p]);
        names.push_back(port_names_[p]);
    }
    std::vector<KEdge> edges;
    for (std::size_t m = 1; m < ports.size(); ++m) {
        KEdge e{0, m, std::vector<cplx>(grid().size())};
        for (std::size_t k = 0; k < grid().size(); ++k)
            e.k[k] = k_between(ports[0], ports[m], k);
        edges.push_back(std::move(e));
    }
    return MultiPortCalModel(std::move(boxes), std::move(edges), std::move(names), z_ref_);
}

MultiPortCalModel MultiPortCalModel::canonical() const
{
    std::vector<PortErrorBox> boxes;
    std::vector<std::vector<cplx>> ratio(n_ports());
    for (std::size_t p = 0; p < n_ports(); ++p) {
        boxes.emplace_back(boxes_[p].terms);
        ratio[p].resize(grid().size());
        for (std::size_t k = 0; k < grid().size(); ++k)
            // complex x/x is not always exactly 1
            ratio[p][k] = boxes.back().split[k] == boxes_[p].split[k] ? cplx(1.0)
                                                                       : boxes.back().split[k] / boxes_[p].split[k];
    }
    std::vector<KEdge> edges = edges_;
    for (auto& e : edges)
        for (std::size_t k = 0; k < grid().size(); ++k)
            e.k[k] *= ratio[e.j][k] / ratio[e.i][k];
    return MultiPortCalModel(std::move(boxes), std::move(edges), port_names_, z_ref_);
}

std::size_t MultiPortCalModel::port_index(const std::string& name) const
{
    for (std::size_t p = 0; p < port_names_.size(); ++p)
        if (port_names_[p] == name)
            return p;
    throw Error(Errc::InvalidArgument, "unknown port '" + name + "'");
}

namespace {

void require_one_port_grid(const OnePortTerms& terms, const Network& net, const char* what)
{
    if (net.n_ports() != 1)
        throw Error(Errc::InvalidNetwork, std::string(what) + " needs a 1-port network");
    if (!(terms.grid == net.grid()))
        throw Error(Errc::GridMismatch, std::string(what) + ": terms and network grids differ");
}

void require_model_grid(const MultiPortCalModel& model, const Network& net, const char* what)
{
    if (net.n_ports() != model.n_ports())
        throw Error(Errc::InvalidNetwork, std::string(what) + ": port count differs from model");
    if (!(model.grid() == net.grid()))
        throw Error(Errc::GridMismatch, std::string(what) + ": model and network grids differ");
}

constexpr double kMinRcond = 1e-13;

} // namespace

Network embed_oneport(const OnePortTerms& terms, const Network& gamma)
{
    require_one_port_grid(terms, gamma, "embed_oneport");
    std::vector<cplx> out(gamma.size());
    for (std::size_t k = 0; k < gamma.size(); ++k) {
        const cplx g = gamma.at(k, 0, 0);
        const cplx denom = 1.0 - terms.e11[k] * g;
        if (std::abs(denom) < tol::kExact)
            throw error_at(Errc::PoleHit, gamma.frequency(k), "1 - e11·Γ vanishes");
        out[k] = terms.e00[k] + terms.tracking[k] * g / denom;
    }
    return Network::one_port(gamma.grid(), out, gamma.z_ref());
}

Network correct_oneport(const OnePortTerms& terms, const Network& gamma_m)
{
    require_one_port_grid(terms, gamma_m, "correct_oneport");
    std::vector<cplx> out(gamma_m.size());
    for (std::size_t k = 0; k < gamma_m.size(); ++k) {
        const cplx d = gamma_m.at(k, 0, 0) - terms.e00[k];
        const cplx denom = terms.tracking[k] + terms.e11[k] * d;
        if (std::abs(denom) < tol::kExact)
            throw error_at(Errc::SingularCorrection, gamma_m.frequency(k), "tracking + e11·(Γm - e00) vanishes");
        out[k] = d / denom;
    }
    return Network::one_port(gamma_m.grid(), out, gamma_m.z_ref());
}

Network embed_multiport(const MultiPortCalModel& model, const Network& dut)
{
    require_model_grid(model, dut, "embed_multiport");
    const auto n = static_cast<Eigen::Index>(model.n_ports());
    std::vector<CMatrix> out(dut.size());
    for (std::size_t k = 0; k < dut.size(); ++k) {
        Eigen::VectorXcd e00(n), e11(n), in(n), outg(n);
        for (Eigen::Index p = 0; p < n; ++p) {
            const auto pu = static_cast<std::size_t>(p);
            e00(p) = model.boxes()[pu].terms.e00[k];
            e11(p) = model.boxes()[pu].terms.e11[k];
            in(p) = model.incident(pu, k);
            outg(p) = model.outgoing(pu, k);
        }
        const CMatrix a = CMatrix::Identity(n, n) - e11.asDiagonal() * dut[k];
        Eigen::PartialPivLU<CMatrix> lu(a);
        if (!(lu.rcond() > kMinRcond))
            throw error_at(Errc::SingularEmbedding, dut.frequency(k),
                           "I - E11·S is singular (rcond " + std::to_string(lu.rcond()) + ")");
        const CMatrix inner = lu.solve(CMatrix(in.asDiagonal()));
        out[k] = CMatrix(e00.asDiagonal()) + outg.asDiagonal() * dut[k] * inner;
    }
    return Network(dut.grid(), std::move(out), dut.z_ref());
}

Network correct_multiport(const MultiPortCalModel& model, const Network& measured)
{
    require_model_grid(model, measured, "correct_multiport");
    const auto n = static_cast<Eigen::Index>(model.n_ports());
    std::vector<CMatrix> out(measured.size());
    for (std::size_t k = 0; k < measured.size(); ++k) {
        Eigen::VectorXcd e00(n), e11(n), in(n), outg(n);
        for (Eigen::Index p = 0; p < n; ++p) {
            const auto pu = static_cast<std::size_t>(p);
            e00(p) = model.boxes()[pu].terms.e00[k];
            e11(p) = model.boxes()[pu].terms.e11[k];
            in(p) = model.incident(pu, k);
            outg(p) = model.outgoing(pu, k);
        }
        const CMatrix x = outg.cwiseInverse().asDiagonal() * (measured[k] - CMatrix(e00.asDiagonal()));
        const CMatrix b = CMatrix(in.asDiagonal()) + e11.asDiagonal() * x;
        // S·B = X  <=>  Bᵀ·Sᵀ = Xᵀ
        Eigen::PartialPivLU<CMatrix> lu(b.transpose());
        if (!(lu.rcond() > kMinRcond))
            throw error_at(Errc::SingularCorrection, measured.frequency(k),
                           "correction matrix is singular (condition estimate " + std::to_string(1.0 / lu.rcond()) +
                               ")");
        out[k] = lu.solve(CMatrix(x.transpose())).transpose();
    }
    return Network(measured.grid(), std::move(out), measured.z_ref());
}

// Cal-model text format ------------------------------------------------------

std::string write_cal_model(const MultiPortCalModel& input)
{
    const MultiPortCalModel model = input.canonical();
    std::string out;
    out += "! solrcal cal-model v1\n";
    out += "! row: freq_hz, per port (e00 re im, e11 re im, tracking re im), per pair (k re im)\n";
    out += "! k(i-j) = g_i/g_j; incident tracking at port p = sqrt(tracking_p)*g_p, continuous branch\n";
    out += "# ports";
    for (const auto& name : model.port_names())
        out += " " + name;
    out += "\n# z_ref " + detail::shortest(model.z_ref()) + "\n# pairs";
    for (const auto& e : model.edges())
        out += " " + model.port_names()[e.i] + "-" + model.port_names()[e.j];
    out += "\n";
    auto pair = [&](cplx v) {
        out += ' ';
        out += detail::shortest(v.real());
        out += ' ';
        out += detail::shortest(v.imag());
    };
    for (std::size_t k = 0; k < model.grid().size(); ++k) {
        out += detail::shortest(model.grid()[k]);
        for (const auto& b : model.boxes()) {
            pair(b.terms.e00[k]);
            pair(b.terms.e11[k]);
            pair(b.terms.tracking[k]);
        }
        for (const auto& e : model.edges())
            pair(e.k[k]);
        out += '\n';
    }
    return out;
}

MultiPortCalModel parse_cal_model(std::string_view text)
{
    std::vector<std::string> names;
    std::vector<std::pair<std::string, std::string>> pair_names;
    double z_ref = kDefaultZref;
    bool have_ports = false;
    bool have_pairs = false;
    std::vector<double> freqs;
    std::vector<std::vector<double>> rows;

    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos)
            end = text.size();
        std::string_view line = detail::trim(text.substr(pos, end - pos));
        pos = end + 1;
        ++line_no;
        if (line.empty() || line.front() == '!')
            continue;
        const auto tokens = detail::split_ws(line.front() == '#' ? line.substr(1) : line);
        if (line.front() == '#') {
            if (tokens.empty())
                continue;
            if (tokens[0] == "ports") {
                for (std::size_t t = 1; t < tokens.size(); ++t)
                    names.emplace_back(tokens[t]);
                have_ports = true;
            } else if (tokens[0] == "z_ref") {
                if (tokens.size() != 2 || !detail::parse_double(tokens[1], z_ref))
                    throw Error(Errc::ConfigSyntax, "line " + std::to_string(line_no) + ": bad z_ref").at_line(line_no);
            } else if (tokens[0] == "pairs") {
                for (std::size_t t = 1; t < tokens.size(); ++t) {
                    const auto parts = detail::split(tokens[t], '-');
                    if (parts.size() != 2)
                        throw Error(Errc::ConfigSyntax, "line " + std::to_string(line_no) + ": bad pair '" +
                                                            std::string(tokens[t]) + "'")
                            .at_line(line_no);
                    pair_names.emplace_back(parts[0], parts[1]);
                }
                have_pairs = true;
            } else {
                throw Error(Errc::ConfigSyntax, "line " + std::to_string(line_no) + ": unknown header '" +
                                                    std::string(tokens[0]) + "'")
                    .at_line(line_no);
            }
            continue;
        }
        if (!have_ports || !have_pairs)
            throw Error(Errc::ConfigSyntax, "line " + std::to_string(line_no) + ": data before '# ports'/'# pairs'")
                .at_line(line_no);
        const std::size_t expected = 1 + 6 * names.size() + 2 * pair_names.size();
        if (tokens.size() != expected)
            throw Error(Errc::WrongValueCount, "line " + std::to_string(line_no) + ": expected " +
                                                   std::to_string(expected) + " values, got " +
                                                   std::to_string(tokens.size()))
                .at_line(line_no);
        std::vector<double> row(expected);
        for (std::size_t t = 0; t < expected; ++t)
            if (!detail::parse_double(tokens[t], row[t]))
                throw Error(Errc::WrongValueCount, "line " + std::to_string(line_no) + ": non-numeric value '" +
                                                       std::string(tokens[t]) + "'")
                    .at_line(line_no);
        freqs.push_back(row[0]);
        rows.push_back(std::move(row));
    }
    if (rows.empty())
        throw Error(Errc::EmptyFile, "cal model has no data rows");

    const FrequencyGrid grid(freqs);
    auto index_of = [&](const std::string& name) {
        const auto it = std::find(names.begin(), names.end(), name);
        if (it == names.end())
            throw Error(Errc::ConfigSyntax, "pair references unknown port '" + name + "'");
        return static_cast<std::size_t>(it - names.begin());
    };
    auto value = [&](std::size_t r, std::size_t col) { return cplx(rows[r][col], rows[r][col + 1]); };

    std::vector<PortErrorBox> boxes;
    for (std::size_t p = 0; p < names.size(); ++p) {
        OnePortTerms t;
        t.grid = grid;
        for (std::size_t r = 0; r < rows.size(); ++r) {
            const std::size_t base = 1 + 6 * p;
            t.e00.push_back(value(r, base));
            t.e11.push_back(value(r, base + 2));
            t.tracking.push_back(value(r, base + 4));
        }
        boxes.emplace_back(std::move(t));
    }
    std::vector<KEdge> edges;
    for (std::size_t e = 0; e < pair_names.size(); ++e) {
        KEdge edge{index_of(pair_names[e].first), index_of(pair_names[e].second), {}};
        for (std::size_t r = 0; r < rows.size(); ++r)
            edge.k.push_back(value(r, 1 + 6 * names.size() + 2 * e));
        edges.push_back(std::move(edge));
    }
    return MultiPortCalModel(std::move(boxes), std::move(edges), std::move(names), z_ref);
}

MultiPortCalModel read_cal_model_file(const std::string& path)
{
    try {
        return parse_cal_model(detail::read_file(path));
    } catch (const Error& e) {
        if (e.code() == Errc::Io)
            throw;
        Error wrapped(e.code(), path + ": " + e.message());
        if (e.line())
            wrapped.at_line(*e.line());
        throw wrapped;
    }
}

void write_cal_model_file(const std::string& path, const MultiPortCalModel& model)
{
    detail::write_file(path, write_cal_model(model));
}

} // namespace solrcal
