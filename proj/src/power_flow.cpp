#include "evplan/power_flow.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>

#include "evplan/text.hpp"

namespace evplan::power_flow {

namespace {

using cplx = std::complex<double>;

struct Topology {
    std::vector<std::size_t> order;        // buses, slack first, parents before children
    std::vector<std::size_t> parent_line;  // per bus; unused for slack
    std::vector<std::size_t> parent_bus;
};

Topology walk(const grid::Feeder& f) {
    try {
        grid::validate_feeder(f);
    } catch (const grid::FeederError& e) {
        throw PowerFlowError(std::string("feeder is not a radial tree: ") + e.what());
    }
    const std::size_t n = f.buses.size();
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj(n);  // (neighbour, line)
    for (std::size_t k = 0; k < f.lines.size(); ++k) {
        const std::size_t a = *f.find_bus(f.lines[k].from);
        const std::size_t b = *f.find_bus(f.lines[k].to);
        adj[a].emplace_back(b, k);
        adj[b].emplace_back(a, k);
    }
    Topology t;
    t.parent_line.assign(n, 0);
    t.parent_bus.assign(n, n);
    std::vector<bool> seen(n, false);
    const std::size_t slack = f.slack_index();
    t.order.push_back(slack);
    seen[slack] = true;
    for (std::size_t head = 0; head < t.order.size(); ++head) {
        const std::size_t u = t.order[head];
        for (const auto& [v, k] : adj[u]) {
            if (seen[v]) continue;
            seen[v] = true;
            t.parent_bus[v] = u;
            t.parent_line[v] = k;
            t.order.push_back(v);
        }
    }
    return t;
}

}  // namespace

PowerFlowResult solve_bfs(const grid::Feeder& f, const SolveOptions& options) {
    const Topology topo = walk(f);
    const std::size_t n = f.buses.size();
    const std::size_t slack = topo.order.front();
    const double kv = f.buses[slack].base_kv;
    for (const auto& b : f.buses) {
        if (b.base_kv != kv) throw PowerFlowError("all buses must share one voltage base (no transformers)");
    }
    const double v_base = kv * 1000.0 / std::sqrt(3.0);  // per-phase volts

    std::vector<cplx> load(n, 0.0);  // per-phase VA
    for (const auto& l : f.loads) load[*f.find_bus(l.bus)] += cplx(l.p_kw, l.q_kvar) * (1000.0 / 3.0);
    std::vector<cplx> z(f.lines.size());
    for (std::size_t k = 0; k < f.lines.size(); ++k) z[k] = cplx(f.lines[k].r_ohm, f.lines[k].x_ohm);

    std::vector<cplx> v(n, cplx(v_base, 0.0));
    std::vector<cplx> through(n, 0.0);  // power entering each bus from its parent line, receiving end
    std::vector<cplx> current(n, 0.0);  // current in each bus's parent line

    auto backward = [&] {
        std::vector<cplx> send(n, 0.0);  // sending-end power of each bus's parent line
        std::vector<cplx> downstream(n, 0.0);
        for (auto it = topo.order.rbegin(); it != topo.order.rend(); ++it) {
            const std::size_t b = *it;
            through[b] = load[b] + downstream[b];
            if (b == slack) continue;
            current[b] = std::conj(through[b] / v[b]);
            send[b] = through[b] + z[topo.parent_line[b]] * std::norm(current[b]);
            downstream[topo.parent_bus[b]] += send[b];
        }
    };

    PowerFlowResult r;
    for (std::size_t it = 0; it < options.max_iterations; ++it) {
        backward();
        double mismatch = 0.0;
        bool finite = true;
        for (std::size_t idx = 1; idx < topo.order.size(); ++idx) {
            const std::size_t b = topo.order[idx];
            const cplx updated = v[topo.parent_bus[b]] - z[topo.parent_line[b]] * current[b];
            mismatch = std::max(mismatch, std::abs(updated - v[b]) / v_base);
            if (!std::isfinite(updated.real()) || !std::isfinite(updated.imag()) || std::abs(updated) < 1e-6 * v_base) {
                finite = false;
            }
            v[b] = updated;
        }
        r.iterations = it + 1;
        r.last_mismatch_pu = mismatch;
        if (!finite) break;
        if (mismatch < options.tolerance_pu) {
            r.converged = true;
            break;
        }
    }

    // Final sweep so currents and losses are consistent with the reported voltages.
    if (r.converged) backward();

    r.v_pu.assign(n, 0.0);
    r.v_angle_rad.assign(n, 0.0);
    for (std::size_t b = 0; b < n; ++b) {
        r.v_pu[b] = b == slack ? 1.0 : std::abs(v[b]) / v_base;
        r.v_angle_rad[b] = b == slack ? 0.0 : std::arg(v[b]);
    }
    r.i_amps.assign(f.lines.size(), 0.0);
    cplx losses = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
        if (b == slack) continue;
        const std::size_t k = topo.parent_line[b];
        r.i_amps[k] = std::abs(current[b]);
        losses += z[k] * std::norm(current[b]);
    }
    r.losses_kw = 3.0 * losses.real() / 1000.0;
    r.losses_kvar = 3.0 * losses.imag() / 1000.0;
    r.slack_p_kw = 3.0 * through[slack].real() / 1000.0;
    r.slack_q_kvar = 3.0 * through[slack].imag() / 1000.0;
    return r;
}

grid::Feeder integrate_chargers(const grid::Feeder& feeder, const std::vector<StationLoad>& stations,
                                double kw_per_port, double power_factor) {
    if (!(kw_per_port >= 0.0)) throw grid::GridError("kw_per_port must be nonnegative");
    if (!(power_factor > 0.0 && power_factor <= 1.0)) throw grid::GridError("power factor must be in (0, 1]");
    const double q_ratio = std::tan(std::acos(power_factor));
    grid::Feeder out = feeder;
    for (const auto& s : stations) {
        if (!feeder.find_bus(s.bus)) throw grid::GridError("station assigned to unknown bus '" + s.bus + "'");
        if (!(s.ports > 0.0)) continue;
        const double kw = s.ports * kw_per_port;
        out.loads.push_back({s.bus, kw, kw * q_ratio});
    }
    return out;
}

std::vector<StationLoad> station_loads(const coverage::CoverageSolution& plan,
                                       const std::vector<std::string>& station_bus) {
    const std::size_t n1 = plan.open_new.size();
    const std::size_t n2 = plan.expand.size();
    if (station_bus.size() != n1 + n2) throw grid::GridError("one bus per station is required");
    std::vector<StationLoad> out;
    for (std::size_t j = 0; j < n1; ++j) {
        if (plan.open_new[j] > 0.5) out.push_back({station_bus[j], plan.ports_new[j]});
    }
    for (std::size_t j = 0; j < n2; ++j) {
        if (plan.expand[j] > 0.5) out.push_back({station_bus[n1 + j], plan.ports_existing[j]});
    }
    return out;
}

ValidationReport validate_grid(const grid::Feeder& feeder, const PowerFlowResult& pre, const PowerFlowResult& post,
                               double v_limit) {
    if (!pre.converged || !post.converged) throw PowerFlowError("grid validation needs converged power flows");
    const std::size_t nb = feeder.buses.size();
    const std::size_t nl = feeder.lines.size();
    if (pre.v_pu.size() != nb || post.v_pu.size() != nb || pre.i_amps.size() != nl || post.i_amps.size() != nl) {
        throw PowerFlowError("power-flow results do not match the feeder");
    }
    ValidationReport rep;
    rep.min_v_pu = nb ? post.v_pu.front() : 0.0;
    for (std::size_t b = 0; b < nb; ++b) {
        const auto& id = feeder.buses[b].id;
        rep.buses.push_back({id, pre.v_pu[b], post.v_pu[b]});
        rep.min_v_pu = std::min(rep.min_v_pu, post.v_pu[b]);
        if (post.v_pu[b] < v_limit) rep.buses_below_limit.push_back(id);
    }
    for (std::size_t k = 0; k < nl; ++k) {
        const auto& l = feeder.lines[k];
        rep.lines.push_back({l.id, l.from, l.to, l.ampacity_a, pre.i_amps[k], post.i_amps[k]});
        if (post.i_amps[k] > l.ampacity_a) rep.lines_over_ampacity.push_back(l.id);
    }
    return rep;
}

nlohmann::json to_json(const PowerFlowResult& r, const grid::Feeder& feeder) {
    nlohmann::json buses = nlohmann::json::array();
    for (std::size_t b = 0; b < r.v_pu.size(); ++b) {
        buses.push_back({{"bus", feeder.buses[b].id}, {"v_pu", r.v_pu[b]}, {"angle_rad", r.v_angle_rad[b]}});
    }
    nlohmann::json lines = nlohmann::json::array();
    for (std::size_t k = 0; k < r.i_amps.size(); ++k) {
        lines.push_back({{"line", feeder.lines[k].id}, {"i_a", r.i_amps[k]}});
    }
    return {{"converged", r.converged},     {"iterations", r.iterations},   {"last_mismatch_pu", r.last_mismatch_pu},
            {"losses_kw", r.losses_kw},     {"losses_kvar", r.losses_kvar}, {"slack_p_kw", r.slack_p_kw},
            {"slack_q_kvar", r.slack_q_kvar}, {"buses", buses},             {"lines", lines}};
}

nlohmann::json to_json(const ValidationReport& r) {
    return {{"min_v_pu", r.min_v_pu},
            {"buses_below_limit", r.buses_below_limit},
            {"lines_over_ampacity", r.lines_over_ampacity}};
}

std::string voltage_profile_csv(const ValidationReport& r) {
    using text::format_double;
    std::ostringstream out;
    out << "bus,pre_v_pu,post_v_pu\n";
    for (const auto& b : r.buses) out << b.bus << ',' << format_double(b.pre_v_pu) << ',' << format_double(b.post_v_pu) << '\n';
    return out.str();
}

std::string line_current_csv(const ValidationReport& r) {
    using text::format_double;
    std::ostringstream out;
    out << "line,from,to,ampacity_a,pre_i_a,post_i_a\n";
    for (const auto& l : r.lines) {
        out << l.line << ',' << l.from << ',' << l.to << ',' << format_double(l.ampacity_a) << ','
            << format_double(l.pre_i_a) << ',' << format_double(l.post_i_a) << '\n';
    }
    return out.str();
}

}  // namespace evplan::power_flow
