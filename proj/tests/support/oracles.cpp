#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>

#include <Eigen/Dense>

namespace oracle {

namespace {

using evplan::coverage::CoverageInstance;
using evplan::coverage::Matrix;

struct Edge {
    std::size_t to;
    double cap;
    double cost;
    std::size_t rev;
};

class MinCostFlow {
  public:
    explicit MinCostFlow(std::size_t n) : g_(n) {}

    void add(std::size_t a, std::size_t b, double cap, double cost) {
        g_[a].push_back({b, cap, cost, g_[b].size()});
        g_[b].push_back({a, 0.0, -cost, g_[a].size() - 1});
    }

    // Returns (flow, cost) pushed from s to t, up to `want`.
    std::pair<double, double> run(std::size_t s, std::size_t t, double want) {
        const double inf = std::numeric_limits<double>::infinity();
        double flow = 0.0;
        double cost = 0.0;
        while (flow < want - 1e-12) {
            std::vector<double> dist(g_.size(), inf);
            std::vector<std::pair<std::size_t, std::size_t>> prev(g_.size(), {SIZE_MAX, SIZE_MAX});
            dist[s] = 0.0;
            for (std::size_t round = 0; round < g_.size(); ++round) {
                bool changed = false;
                for (std::size_t u = 0; u < g_.size(); ++u) {
                    if (dist[u] == inf) continue;
                    for (std::size_t k = 0; k < g_[u].size(); ++k) {
                        const Edge& e = g_[u][k];
                        if (e.cap > 1e-12 && dist[u] + e.cost < dist[e.to] - 1e-12) {
                            dist[e.to] = dist[u] + e.cost;
                            prev[e.to] = {u, k};
                            changed = true;
                        }
                    }
                }
                if (!changed) break;
            }
            if (dist[t] == inf) break;
            double push = want - flow;
            for (std::size_t v = t; v != s; v = prev[v].first) push = std::min(push, g_[prev[v].first][prev[v].second].cap);
            for (std::size_t v = t; v != s; v = prev[v].first) {
                Edge& e = g_[prev[v].first][prev[v].second];
                e.cap -= push;
                g_[v][e.rev].cap += push;
            }
            flow += push;
            cost += push * dist[t];
        }
        return {flow, cost};
    }

  private:
    std::vector<std::vector<Edge>> g_;
};

double column_sum(const Matrix& m, std::size_t j) {
    double s = 0.0;
    for (std::size_t p = 0; p < m.rows; ++p) s += m(p, j);
    return s;
}

}  // namespace

std::optional<double> brute_force_objective(const CoverageInstance& inst) {
    const std::size_t n1 = inst.n_new();
    const std::size_t n2 = inst.n_existing;
    const std::size_t ns = n1 + n2;
    double total_demand = 0.0;
    for (const double d : inst.demand) total_demand += d;

    std::optional<double> best;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << ns); ++mask) {
        std::size_t opened = 0;
        for (std::size_t j = 0; j < n1; ++j) opened += (mask >> j) & 1U;
        if (opened > inst.max_new_stations) continue;

        double fixed = 0.0;
        for (std::size_t j = 0; j < ns; ++j) {
            if (!((mask >> j) & 1U)) continue;
            fixed += j < n1 ? inst.open_cost : inst.expand_cost;
            fixed += column_sum(inst.bus_distance, j) + column_sum(inst.voltage_priority, j);
        }

        // nodes: 0 source, 1..n1 demand points, then stations, then sink
        const std::size_t source = 0;
        const std::size_t sink = 1 + n1 + ns;
        MinCostFlow mcf(sink + 1);
        for (std::size_t i = 0; i < n1; ++i) mcf.add(source, 1 + i, inst.demand[i], 0.0);
        for (std::size_t j = 0; j < ns; ++j) {
            if (!((mask >> j) & 1U)) continue;
            const std::size_t node = 1 + n1 + j;
            mcf.add(node, sink, j < n1 ? inst.new_cap : inst.existing_cap, 0.0);
            for (std::size_t i = 0; i < n1; ++i) {
                const double d = j < n1 ? inst.dist_new(i, j) : inst.dist_existing(i, j - n1);
                mcf.add(1 + i, node, std::numeric_limits<double>::infinity(), d + inst.port_cost);
            }
        }
        const auto [flow, cost] = mcf.run(source, sink, total_demand);
        if (flow < total_demand - 1e-9) continue;
        const double obj = fixed + cost;
        if (!best || obj < *best) best = obj;
    }
    return best;
}

CoverageInstance random_instance(evplan::Rng& rng, std::size_t n_new, std::size_t n_existing, std::size_t n_buses) {
    CoverageInstance inst;
    const std::size_t ns = n_new + n_existing;
    std::vector<std::pair<double, double>> site(ns);
    for (auto& s : site) s = {rng.uniform(0.0, 10.0), rng.uniform(0.0, 10.0)};
    auto dist = [&](std::size_t a, std::size_t b) {
        return std::hypot(site[a].first - site[b].first, site[a].second - site[b].second);
    };
    for (std::size_t i = 0; i < n_new; ++i) inst.demand.push_back(static_cast<double>(rng.below(7)));
    inst.n_existing = n_existing;
    inst.n_buses = n_buses;
    inst.open_cost = rng.uniform(10.0, 60.0);
    inst.expand_cost = rng.uniform(1.0, inst.open_cost * 0.9);
    inst.port_cost = rng.uniform(0.0, 3.0);
    inst.dist_new = Matrix(n_new, n_new);
    inst.dist_existing = Matrix(n_new, n_existing);
    for (std::size_t i = 0; i < n_new; ++i) {
        for (std::size_t j = 0; j < n_new; ++j) inst.dist_new(i, j) = dist(i, j);
        for (std::size_t j = 0; j < n_existing; ++j) inst.dist_existing(i, j) = dist(i, n_new + j);
    }
    inst.bus_distance = Matrix(n_buses, ns);
    inst.voltage_priority = Matrix(n_buses, ns);
    for (auto& v : inst.bus_distance.data) v = rng.uniform(0.0, 5.0);
    for (auto& v : inst.voltage_priority.data) v = rng.bernoulli(0.5) ? rng.uniform(0.0, 0.1) : 0.0;
    inst.new_cap = static_cast<double>(4 + rng.below(9));
    inst.existing_cap = static_cast<double>(2 + rng.below(7));
    inst.max_new_stations = rng.below(n_new + 1);
    inst.big_m = std::max(inst.new_cap, inst.existing_cap);
    return inst;
}

NewtonResult newton_power_flow(const evplan::grid::Feeder& f, double tol, int max_iter) {
    using cplx = std::complex<double>;
    using CMat = Eigen::MatrixXcd;
    using CVec = Eigen::VectorXcd;
    const auto n = static_cast<Eigen::Index>(f.buses.size());
    const double kv = f.buses.front().base_kv;
    const double s_base_mva = 1.0;
    const double z_base = kv * kv / s_base_mva;

    CMat y = CMat::Zero(n, n);
    for (const auto& l : f.lines) {
        const auto a = static_cast<Eigen::Index>(*f.find_bus(l.from));
        const auto b = static_cast<Eigen::Index>(*f.find_bus(l.to));
        const cplx ys = 1.0 / (cplx(l.r_ohm, l.x_ohm) / z_base);
        y(a, a) += ys;
        y(b, b) += ys;
        y(a, b) -= ys;
        y(b, a) -= ys;
    }
    CVec s_spec = CVec::Zero(n);
    for (const auto& l : f.loads) {
        s_spec(static_cast<Eigen::Index>(*f.find_bus(l.bus))) -= cplx(l.p_kw, l.q_kvar) / (1000.0 * s_base_mva);
    }
    const auto slack = static_cast<Eigen::Index>(f.slack_index());
    std::vector<Eigen::Index> pq;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (i != slack) pq.push_back(i);
    }
    const auto m = static_cast<Eigen::Index>(pq.size());

    Eigen::VectorXd vm = Eigen::VectorXd::Ones(n);
    Eigen::VectorXd va = Eigen::VectorXd::Zero(n);
    NewtonResult out;
    for (int it = 0; it < max_iter; ++it) {
        CVec v(n);
        for (Eigen::Index i = 0; i < n; ++i) v(i) = std::polar(vm(i), va(i));
        const CVec ibus = y * v;
        const CVec s_calc = v.cwiseProduct(ibus.conjugate());
        Eigen::VectorXd mis(2 * m);
        for (Eigen::Index k = 0; k < m; ++k) {
            const cplx d = s_calc(pq[k]) - s_spec(pq[k]);
            mis(k) = d.real();
            mis(m + k) = d.imag();
        }
        if (mis.cwiseAbs().maxCoeff() < tol) {
            out.converged = true;
            break;
        }
        const CVec vnorm = v.cwiseQuotient(v.cwiseAbs().cast<cplx>());
        const CMat dva = cplx(0, 1) * v.asDiagonal() * (CMat(ibus.asDiagonal()) - y * v.asDiagonal()).conjugate();
        const CMat dvm = v.asDiagonal() * (y * vnorm.asDiagonal()).conjugate() +
                         CMat(ibus.conjugate().asDiagonal()) * vnorm.asDiagonal();
        Eigen::MatrixXd jac(2 * m, 2 * m);
        for (Eigen::Index r = 0; r < m; ++r) {
            for (Eigen::Index c = 0; c < m; ++c) {
                jac(r, c) = dva(pq[r], pq[c]).real();
                jac(r, m + c) = dvm(pq[r], pq[c]).real();
                jac(m + r, c) = dva(pq[r], pq[c]).imag();
                jac(m + r, m + c) = dvm(pq[r], pq[c]).imag();
            }
        }
        const Eigen::VectorXd dx = jac.partialPivLu().solve(-mis);
        for (Eigen::Index k = 0; k < m; ++k) {
            va(pq[k]) += dx(k);
            vm(pq[k]) += dx(m + k);
        }
    }
    out.v_pu.assign(vm.data(), vm.data() + n);
    out.angle_rad.assign(va.data(), va.data() + n);
    return out;
}

evplan::grid::Feeder random_feeder(evplan::Rng& rng, std::size_t n_buses, double max_load_kw) {
    evplan::grid::Feeder f;
    f.name = "random";
    std::vector<std::size_t> label(n_buses);
    for (std::size_t i = 0; i < n_buses; ++i) label[i] = i;
    rng.shuffle(label.begin() + 1, label.end());
    auto id = [&](std::size_t i) { return "n" + std::to_string(label[i]); };
    const double kv = 12.47;
    for (std::size_t i = 0; i < n_buses; ++i) {
        f.buses.push_back({id(i), rng.uniform(0.0, 5.0), rng.uniform(0.0, 5.0), kv, i == 0, {}});
    }
    for (std::size_t i = 1; i < n_buses; ++i) {
        const std::size_t parent = rng.below(i);
        const bool flip = rng.bernoulli(0.3);  // orientation must not matter
        f.lines.push_back({"l" + std::to_string(i), flip ? id(i) : id(parent), flip ? id(parent) : id(i),
                           rng.uniform(0.01, 0.5), rng.uniform(0.01, 0.6), 600.0});
        if (rng.bernoulli(0.8)) f.loads.push_back({id(i), rng.uniform(0.0, max_load_kw), rng.uniform(-0.2, 0.5) * max_load_kw});
    }
    std::reverse(f.buses.begin(), f.buses.end());  // slack is not first in file order
    return f;
}

}  // namespace oracle
