#pragma once

// Ground-truth full-network power flow. Stations are ideal fixed-phasor
// sources; train nodes carry a constant-power draw with their branch
// impedance folded into the admittance matrix (the scheduled node power
// compensates the shunt's own draw exactly, so the net train consumption is
// the constant complex power). Newton-Raphson on power mismatches in
// rectangular voltage coordinates, flat start from the no-load linear
// solution.
//
// Also hosts the bisection-based oracle FPAD (the power-flow baseline the
// closed-form method is verified and benchmarked against).

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ftpss/fpad.hpp"
#include "ftpss/model.hpp"
#include "ftpss/units.hpp"

namespace ftpss {

class PfDivergence : public DomainError {
public:
    using DomainError::DomainError;
};

namespace detail {

/// Gaussian elimination with partial pivoting, dense complex system.
inline std::vector<Complex> solve_dense_complex(std::vector<std::vector<Complex>> a,
                                                std::vector<Complex> b) {
    const std::size_t n = b.size();
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(a[i][k]) > std::abs(a[piv][k])) piv = i;
        if (std::abs(a[piv][k]) == 0.0)
            throw PfDivergence("singular network matrix");
        std::swap(a[k], a[piv]);
        std::swap(b[k], b[piv]);
        for (std::size_t i = k + 1; i < n; ++i) {
            const Complex m = a[i][k] / a[k][k];
            for (std::size_t j = k; j < n; ++j) a[i][j] -= m * a[k][j];
            b[i] -= m * b[k];
        }
    }
    std::vector<Complex> x(n);
    for (std::size_t i = n; i-- > 0;) {
        Complex s = b[i];
        for (std::size_t j = i + 1; j < n; ++j) s -= a[i][j] * x[j];
        x[i] = s / a[i][i];
    }
    return x;
}

/// Gaussian elimination with partial pivoting, dense real system.
inline std::vector<double> solve_dense_real(std::vector<std::vector<double>> a, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(a[i][k]) > std::abs(a[piv][k])) piv = i;
        if (std::abs(a[piv][k]) == 0.0)
            throw PfDivergence("singular Jacobian");
        std::swap(a[k], a[piv]);
        std::swap(b[k], b[piv]);
        for (std::size_t i = k + 1; i < n; ++i) {
            const double m = a[i][k] / a[k][k];
            for (std::size_t j = k; j < n; ++j) a[i][j] -= m * a[k][j];
            b[i] -= m * b[k];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t j = i + 1; j < n; ++j) s -= a[i][j] * x[j];
        x[i] = s / a[i][i];
    }
    return x;
}

} // namespace detail

/// Node/branch network with a dense admittance matrix. Train branch
/// impedances sit on the node diagonals; branch groups tag which ZSO a
/// series element belongs to so station powers can be split by side.
struct NetworkModel {
    struct Node {
        std::string name;
        bool is_station = false;
        bool is_ats = false;
        Complex v_fixed{0.0, 0.0};   ///< stations only
        Complex s_load_mva{0.0, 0.0};///< train consumption (P > 0 draws)
        Complex y_shunt{0.0, 0.0};   ///< train branch admittance 1/z_t
    };
    struct Branch {
        int from = 0;
        int to = 0;
        Complex z_ohm{0.0, 0.0};
        int group = 0;
    };

    std::vector<Node> nodes;
    std::vector<Branch> branches;
    std::vector<std::vector<Complex>> y;  ///< full admittance, shunts included
    std::vector<int> station_nodes;
    std::vector<int> train_nodes;

    void finalize() {
        const std::size_t n = nodes.size();
        y.assign(n, std::vector<Complex>(n, Complex{0.0, 0.0}));
        for (const auto& b : branches) {
            if (std::abs(b.z_ohm) == 0.0)
                throw DomainError("network: zero-impedance branch");
            const Complex yb = 1.0 / b.z_ohm;
            y[b.from][b.from] += yb;
            y[b.to][b.to] += yb;
            y[b.from][b.to] -= yb;
            y[b.to][b.from] -= yb;
        }
        station_nodes.clear();
        train_nodes.clear();
        for (std::size_t i = 0; i < n; ++i) {
            y[i][i] += nodes[i].y_shunt;
            (nodes[i].is_station ? station_nodes : train_nodes).push_back(static_cast<int>(i));
        }
        if (station_nodes.size() < 2)
            throw DomainError("network: needs at least two station nodes");
        check_connected();
    }

private:
    void check_connected() const {
        std::vector<char> seen(nodes.size(), 0);
        std::vector<int> stack{0};
        seen[0] = 1;
        while (!stack.empty()) {
            const int u = stack.back();
            stack.pop_back();
            for (const auto& b : branches) {
                const int v = b.from == u ? b.to : (b.to == u ? b.from : -1);
                if (v >= 0 && !seen[v]) {
                    seen[v] = 1;
                    stack.push_back(v);
                }
            }
        }
        for (char s : seen)
            if (!s) throw DomainError("network: disconnected graph");
    }
};

namespace detail {

struct NetworkBuilder {
    NetworkModel net;

    int add_station(std::string name, double u_kv, double angle_rad, bool is_ats = false) {
        NetworkModel::Node n;
        n.name = std::move(name);
        n.is_station = true;
        n.is_ats = is_ats;
        n.v_fixed = std::polar(u_kv, angle_rad);
        net.nodes.push_back(n);
        return static_cast<int>(net.nodes.size()) - 1;
    }

    int add_train(const TrainLoad& t, const std::string& prefix) {
        NetworkModel::Node n;
        n.name = prefix + t.id;
        n.s_load_mva = t.power.to_complex();
        n.y_shunt = 1.0 / t.z_t_ohm;
        net.nodes.push_back(n);
        return static_cast<int>(net.nodes.size()) - 1;
    }

    /// Ladder of one track between two existing station nodes.
    void add_chain(int left, int right, const MsoSpec& mso, int group, const std::string& prefix) {
        std::vector<TrainLoad> trains = mso.trains;
        std::sort(trains.begin(), trains.end(),
                  [](const TrainLoad& a, const TrainLoad& b) { return a.l1_km < b.l1_km; });
        int prev = left;
        double prev_pos = 0.0;
        for (const auto& t : trains) {
            const int node = add_train(t, prefix);
            net.branches.push_back({prev, node, segment_impedance(mso.z0, t.l1_km - prev_pos), group});
            prev = node;
            prev_pos = t.l1_km;
        }
        net.branches.push_back({prev, right, segment_impedance(mso.z0, mso.length_km - prev_pos), group});
    }
};

[[nodiscard]] inline double station_angle(const StationSpec& st, double delta_a_rad) {
    return st.kind == StationKind::ats ? delta_a_rad : 0.0;
}

} // namespace detail

/// Single-track section network (2 station nodes + one ladder).
[[nodiscard]] inline NetworkModel build_section_network(const MsoSpec& mso, double delta_a_deg,
                                                        int group = 0) {
    detail::NetworkBuilder b;
    const double d = deg_to_rad(delta_a_deg);
    const int left = b.add_station("S1", mso.left.u_n_kv, detail::station_angle(mso.left, d),
                                   mso.left.kind == StationKind::ats);
    const int right = b.add_station("S2", mso.right.u_n_kv, detail::station_angle(mso.right, d),
                                    mso.right.kind == StationKind::ats);
    b.add_chain(left, right, mso, group, "t:");
    b.net.finalize();
    return b.net;
}

/// Double-track ZSO network: two parallel ladders joined only at the
/// station busbars.
[[nodiscard]] inline NetworkModel build_zso_network(const ZsoSpec& zso, double delta_a_deg,
                                                    int group = 0) {
    detail::NetworkBuilder b;
    const double d = deg_to_rad(delta_a_deg);
    const int left = b.add_station("S1", zso.up.left.u_n_kv, detail::station_angle(zso.up.left, d),
                                   zso.up.left.kind == StationKind::ats);
    const int right = b.add_station("S2", zso.up.right.u_n_kv, detail::station_angle(zso.up.right, d),
                                    zso.up.right.kind == StationKind::ats);
    b.add_chain(left, right, zso.up, group, "up:");
    b.add_chain(left, right, zso.down, group, "down:");
    b.net.finalize();
    return b.net;
}

/// Whole cluster: N-TS1 -- zso1 -- A-TS -- zso2 -- N-TS2. Branch groups 1
/// and 2 tag the two ZSOs.
[[nodiscard]] inline NetworkModel build_tsc_network(const TscSpec& tsc, double delta_a_deg) {
    detail::NetworkBuilder b;
    const double d = deg_to_rad(delta_a_deg);
    const double u = tsc.u_n_kv();
    const int n1 = b.add_station("N-TS1", u, 0.0);
    const int a = b.add_station("A-TS", u, d, true);
    const int n2 = b.add_station("N-TS2", u, 0.0);
    b.add_chain(n1, a, tsc.zso1.up, 1, "z1up:");
    b.add_chain(n1, a, tsc.zso1.down, 1, "z1dn:");
    b.add_chain(a, n2, tsc.zso2.up, 2, "z2up:");
    b.add_chain(a, n2, tsc.zso2.down, 2, "z2dn:");
    b.net.finalize();
    return b.net;
}

/// Two adjacent clusters sharing the middle N-TS busbar (decoupling checks).
/// Groups 1..2 tag cluster A's ZSOs, 3..4 cluster B's.
[[nodiscard]] inline NetworkModel build_two_tsc_network(const TscSpec& tsc_a, const TscSpec& tsc_b,
                                                        double delta_a1_deg, double delta_a2_deg) {
    detail::NetworkBuilder b;
    const double u = tsc_a.u_n_kv();
    const int n1 = b.add_station("N-TS1", u, 0.0);
    const int a1 = b.add_station("A-TS1", u, deg_to_rad(delta_a1_deg), true);
    const int n2 = b.add_station("N-TS2", u, 0.0);
    const int a2 = b.add_station("A-TS2", tsc_b.u_n_kv(), deg_to_rad(delta_a2_deg), true);
    const int n3 = b.add_station("N-TS3", tsc_b.u_n_kv(), 0.0);
    b.add_chain(n1, a1, tsc_a.zso1.up, 1, "a.z1up:");
    b.add_chain(n1, a1, tsc_a.zso1.down, 1, "a.z1dn:");
    b.add_chain(a1, n2, tsc_a.zso2.up, 2, "a.z2up:");
    b.add_chain(a1, n2, tsc_a.zso2.down, 2, "a.z2dn:");
    b.add_chain(n2, a2, tsc_b.zso1.up, 3, "b.z1up:");
    b.add_chain(n2, a2, tsc_b.zso1.down, 3, "b.z1dn:");
    b.add_chain(a2, n3, tsc_b.zso2.up, 4, "b.z2up:");
    b.add_chain(a2, n3, tsc_b.zso2.down, 4, "b.z2dn:");
    b.net.finalize();
    return b.net;
}

/// Retarget the adjustable stations of an already-built network to a new
/// angle (admittance matrix reused across probes).
inline void set_ats_angle(NetworkModel& net, double delta_a_deg) {
    const double d = deg_to_rad(delta_a_deg);
    for (int s : net.station_nodes) {
        auto& node = net.nodes[s];
        if (node.is_ats) node.v_fixed = std::polar(std::abs(node.v_fixed), d);
    }
}

struct PfOptions {
    double tol_pu = 1e-10;  ///< per-node mismatch; summed balances stay under 1e-8
    int max_iter = 40;
};

struct PfSolution {
    std::vector<Complex> v;  ///< node voltages (kV)
    int iterations = 0;
    double max_mismatch_pu = 0.0;
};

/// Full-Jacobian Newton-Raphson on power mismatches at the train nodes.
[[nodiscard]] inline PfSolution solve_nr(const NetworkModel& net, const PerUnitBase& base,
                                         const PfOptions& opts = {}) {
    const std::size_t n = net.nodes.size();
    const auto& trains = net.train_nodes;
    const std::size_t m = trains.size();

    PfSolution sol;
    sol.v.assign(n, Complex{0.0, 0.0});
    for (int s : net.station_nodes) sol.v[s] = net.nodes[s].v_fixed;

    if (m > 0) {
        // Flat start: no-load linear solution (train shunts cancel against
        // their compensation, so the line-only system applies).
        std::vector<std::vector<Complex>> a(m, std::vector<Complex>(m));
        std::vector<Complex> rhs(m, Complex{0.0, 0.0});
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < m; ++j) a[i][j] = net.y[trains[i]][trains[j]];
            a[i][i] -= net.nodes[trains[i]].y_shunt;
            for (int s : net.station_nodes) rhs[i] -= net.y[trains[i]][s] * sol.v[s];
        }
        const auto v0 = detail::solve_dense_complex(std::move(a), std::move(rhs));
        for (std::size_t i = 0; i < m; ++i) sol.v[trains[i]] = v0[i];
    }

    for (int it = 0; it <= opts.max_iter; ++it) {
        // Node injection currents and mismatches.
        std::vector<Complex> inj(m);
        double worst = 0.0;
        std::vector<double> mis(2 * m);
        for (std::size_t i = 0; i < m; ++i) {
            const int ni = trains[i];
            Complex cur{0.0, 0.0};
            for (std::size_t j = 0; j < n; ++j) cur += net.y[ni][j] * sol.v[j];
            inj[i] = cur;
            const Complex vi = sol.v[ni];
            const double vsq = std::norm(vi);
            const Complex s_spec = -net.nodes[ni].s_load_mva + vsq * std::conj(net.nodes[ni].y_shunt);
            const Complex g = vi * std::conj(cur) - s_spec;  // calc - spec
            mis[2 * i] = g.real();
            mis[2 * i + 1] = g.imag();
            worst = std::max({worst, std::abs(g.real()), std::abs(g.imag())});
        }
        sol.max_mismatch_pu = base.to_pu_power(worst);
        sol.iterations = it;
        if (sol.max_mismatch_pu <= opts.tol_pu) return sol;
        if (it == opts.max_iter) break;

        // Jacobian of (S_calc - S_spec) w.r.t. (e, f) of each train node.
        std::vector<std::vector<double>> jac(2 * m, std::vector<double>(2 * m, 0.0));
        for (std::size_t i = 0; i < m; ++i) {
            const int ni = trains[i];
            const double ei = sol.v[ni].real(), fi = sol.v[ni].imag();
            const double ci = inj[i].real(), di = inj[i].imag();
            for (std::size_t j = 0; j < m; ++j) {
                const Complex yij = net.y[ni][trains[j]];
                const double gij = yij.real(), bij = yij.imag();
                const double dij = i == j ? 1.0 : 0.0;
                jac[2 * i][2 * j] = dij * ci + ei * gij + fi * bij;
                jac[2 * i][2 * j + 1] = dij * di - ei * bij + fi * gij;
                jac[2 * i + 1][2 * j] = -dij * di + fi * gij - ei * bij;
                jac[2 * i + 1][2 * j + 1] = dij * ci - fi * bij - ei * gij;
            }
            const Complex ysh = net.nodes[ni].y_shunt;
            jac[2 * i][2 * i] -= 2.0 * ei * ysh.real();
            jac[2 * i][2 * i + 1] -= 2.0 * fi * ysh.real();
            jac[2 * i + 1][2 * i] -= -2.0 * ei * ysh.imag();
            jac[2 * i + 1][2 * i + 1] -= -2.0 * fi * ysh.imag();
        }
        for (auto& r : mis) r = -r;
        const auto dx = detail::solve_dense_real(std::move(jac), std::move(mis));
        for (std::size_t i = 0; i < m; ++i)
            sol.v[trains[i]] += Complex{dx[2 * i], dx[2 * i + 1]};
    }
    throw PfDivergence("solve_nr: no convergence after " + std::to_string(opts.max_iter) +
                       " iterations (mismatch " + std::to_string(sol.max_mismatch_pu) + " p.u.)");
}

/// Complex power injected into the network by one node (MVA).
[[nodiscard]] inline Complex node_power(const NetworkModel& net, const PfSolution& sol, int node) {
    Complex cur{0.0, 0.0};
    for (std::size_t j = 0; j < net.nodes.size(); ++j) cur += net.y[node][j] * sol.v[j];
    return sol.v[node] * std::conj(cur);
}

/// Power a station feeds into the branches of one group (ZSO side split).
[[nodiscard]] inline Complex station_side_power(const NetworkModel& net, const PfSolution& sol,
                                                int node, int group) {
    Complex cur{0.0, 0.0};
    for (const auto& b : net.branches) {
        if (b.group != group) continue;
        if (b.from == node)
            cur += (sol.v[b.from] - sol.v[b.to]) / b.z_ohm;
        else if (b.to == node)
            cur += (sol.v[b.to] - sol.v[b.from]) / b.z_ohm;
    }
    return sol.v[node] * std::conj(cur);
}

/// Power balance report: station output equals train consumption plus
/// non-negative series losses.
struct PowerBalance {
    double dp_pu = 0.0;
    double dq_pu = 0.0;
    double loss_p_mw = 0.0;
    double loss_q_mvar = 0.0;

    [[nodiscard]] bool ok(double tol_pu = 1e-8) const {
        return std::abs(dp_pu) <= tol_pu && std::abs(dq_pu) <= tol_pu && loss_p_mw >= -1e-12;
    }
};

[[nodiscard]] inline PowerBalance conservation_check(const NetworkModel& net, const PfSolution& sol,
                                                     const PerUnitBase& base) {
    Complex stations{0.0, 0.0}, loads{0.0, 0.0}, losses{0.0, 0.0};
    for (int s : net.station_nodes) stations += node_power(net, sol, s);
    for (int t : net.train_nodes) loads += net.nodes[t].s_load_mva;
    for (const auto& b : net.branches) {
        const Complex cur = (sol.v[b.from] - sol.v[b.to]) / b.z_ohm;
        losses += std::norm(cur) * b.z_ohm;
    }
    const Complex res = stations - loads - losses;
    return {base.to_pu_power(res.real()), base.to_pu_power(res.imag()), losses.real(), losses.imag()};
}

/// Oracle view of one ZSO oriented like the closed-form model (station 1 =
/// N-TS, station 2 = A-TS), evaluated on the true two-track network.
class ZsoOracle {
public:
    ZsoOracle(ZsoSpec zso, PerUnitBase base, PfOptions opts = {})
        : zso_(std::move(zso)), base_(base), opts_(opts) {
        std::vector<Violation> v;
        detail_model_check(v);
        if (has_errors(v)) throw DomainError("ZsoOracle: invalid section");
        nts_left_ = zso_.up.left.kind == StationKind::nts;
    }

    struct Powers {
        Complex s1;  ///< N-TS (MVA)
        Complex s2;  ///< A-TS (MVA)
        PfSolution sol;
        NetworkModel net;
    };

    [[nodiscard]] Powers powers(double delta_a_deg) const {
        Powers out;
        out.net = build_zso_network(zso_, delta_a_deg);
        out.sol = solve_nr(out.net, base_, opts_);
        const Complex left = node_power(out.net, out.sol, 0);
        const Complex right = node_power(out.net, out.sol, 1);
        out.s1 = nts_left_ ? left : right;
        out.s2 = nts_left_ ? right : left;
        return out;
    }

    [[nodiscard]] const ZsoSpec& spec() const { return zso_; }
    [[nodiscard]] const PerUnitBase& base() const { return base_; }

private:
    void detail_model_check(std::vector<Violation>& v) const {
        ftpss::detail::check_zso(zso_, "zso", v);
    }

    ZsoSpec zso_;
    PerUnitBase base_;
    PfOptions opts_;
    bool nts_left_ = true;
};

/// Oracle view of a whole cluster on the full three-station network.
class TscOracle {
public:
    TscOracle(TscSpec tsc, PerUnitBase base, PfOptions opts = {})
        : tsc_(std::move(tsc)), base_(base), opts_(opts) {
        require_valid(tsc_);
    }

    struct Powers {
        Complex n1, n2;        ///< N-TS powers (MVA)
        Complex a_zso1, a_zso2;///< A-TS power split by side
        PfSolution sol;
        NetworkModel net;

        [[nodiscard]] Complex a_total() const { return a_zso1 + a_zso2; }
    };

    [[nodiscard]] Powers powers(double delta_a_deg) const {
        Powers out;
        out.net = build_tsc_network(tsc_, delta_a_deg);
        out.sol = solve_nr(out.net, base_, opts_);
        out.n1 = node_power(out.net, out.sol, 0);
        out.n2 = node_power(out.net, out.sol, 2);
        out.a_zso1 = station_side_power(out.net, out.sol, 1, 1);
        out.a_zso2 = station_side_power(out.net, out.sol, 1, 2);
        return out;
    }

    [[nodiscard]] const TscSpec& spec() const { return tsc_; }
    [[nodiscard]] const PerUnitBase& base() const { return base_; }

private:
    TscSpec tsc_;
    PerUnitBase base_;
    PfOptions opts_;
};

// ---------------------------------------------------------------------------
// Bisection-based oracle FPAD (power-flow baseline).
// ---------------------------------------------------------------------------

using OracleCurve = std::function<double(double)>;  ///< MW or MVar vs angle (deg)

struct OracleCritical {
    std::optional<double> zero_deg;
    double argmin_deg = 0.0;
    double argmin_value = 0.0;  ///< same units as the curve
};

namespace detail {

[[nodiscard]] inline double bisect_zero(const OracleCurve& curve, double a, double b, double fa,
                                        double res_deg, double value_tol = 0.0) {
    while (b - a > res_deg) {
        const double mid = 0.5 * (a + b);
        const double fm = curve(mid);
        if (fm == 0.0 || std::abs(fm) <= value_tol) return mid;
        if ((fa < 0.0) == (fm < 0.0)) {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    return 0.5 * (a + b);
}

} // namespace detail

/// Locate the curve zero a descent from 0 deg would reach (grid scan in the
/// downhill direction first, then the other side), or the |curve| minimizer
/// when no sign change exists. Resolution res_deg.
[[nodiscard]] inline OracleCritical oracle_find_critical(const OracleCurve& curve,
                                                         const AngleInterval& domain,
                                                         double coarse_deg = 0.25,
                                                         double res_deg = 0.001,
                                                         double value_tol = 0.0) {
    OracleCritical out;
    const double v0 = curve(0.0);
    if (v0 == 0.0) {
        out.zero_deg = 0.0;
        return out;
    }

    struct Sample {
        double x, v;
    };
    std::vector<Sample> samples{{0.0, v0}};

    const auto scan_dir = [&](double dir) -> std::optional<double> {
        double prev_x = 0.0, prev_v = v0;
        for (double x = dir * coarse_deg;; x += dir * coarse_deg) {
            const double xc = domain.clamp(x);
            const double v = curve(xc);
            samples.push_back({xc, v});
            if ((prev_v < 0.0) != (v < 0.0) || v == 0.0)
                return detail::bisect_zero(curve, std::min(prev_x, xc), std::max(prev_x, xc),
                                           curve(std::min(prev_x, xc)), res_deg, value_tol);
            prev_x = xc;
            prev_v = v;
            if (xc == domain.lo_deg || xc == domain.hi_deg) return std::nullopt;
        }
    };

    // Prefer the side a Newton step from zero would take.
    const double h = coarse_deg;
    const double slope = (curve(domain.clamp(h)) - curve(domain.clamp(-h))) / (domain.clamp(h) - domain.clamp(-h));
    const double preferred = slope != 0.0 ? (-v0 / slope >= 0.0 ? 1.0 : -1.0) : 1.0;

    if (auto z = scan_dir(preferred)) {
        out.zero_deg = z;
        return out;
    }
    if (auto z = scan_dir(-preferred)) {
        out.zero_deg = z;
        return out;
    }

    // No sign change on the coarse grid: refine around the best sample to
    // catch narrow dips, else report the minimizer.
    auto best = samples.front();
    for (const auto& s : samples)
        if (std::abs(s.v) < std::abs(best.v)) best = s;
    const double fine = std::max(res_deg * 10.0, coarse_deg / 50.0);
    double prev_x = domain.clamp(best.x - coarse_deg);
    double prev_v = curve(prev_x);
    auto refined = Sample{prev_x, prev_v};
    for (double x = prev_x + fine; x <= domain.clamp(best.x + coarse_deg) + 1e-12; x += fine) {
        const double xc = domain.clamp(x);
        const double v = curve(xc);
        if ((prev_v < 0.0) != (v < 0.0) || v == 0.0) {
            out.zero_deg = detail::bisect_zero(curve, prev_x, xc, prev_v, res_deg, value_tol);
            return out;
        }
        if (std::abs(v) < std::abs(refined.v)) refined = {xc, v};
        prev_x = xc;
        prev_v = v;
    }
    out.argmin_deg = refined.x;
    out.argmin_value = refined.v;
    return out;
}

namespace detail {

struct OracleScenario {
    double value_deg = 0.0;
    bool is_upper = false;
    BoundSource source = BoundSource::degenerate;
    bool dead_band = false;
    bool all_negative = false;
};

[[nodiscard]] inline OracleScenario oracle_classify(const OracleCritical& crit, const OracleCurve& other,
                                                    double test_shift, bool upper_when_nonneg,
                                                    BoundSource zero_source, const AngleInterval& domain,
                                                    bool q_family, double dead_band) {
    OracleScenario out;
    if (crit.zero_deg) {
        const double test = other(*crit.zero_deg) + test_shift;
        if (std::abs(test) <= dead_band) {
            out.dead_band = true;
            out.value_deg = *crit.zero_deg;
            return out;
        }
        out.is_upper = (test > 0.0) == upper_when_nonneg;
        out.value_deg = *crit.zero_deg;
        out.source = zero_source;
        return out;
    }
    if (crit.argmin_value < 0.0) {
        out.all_negative = true;
        return out;
    }
    if (q_family) {
        out.is_upper = crit.argmin_deg >= 0.0;
    } else {
        const double test = other(crit.argmin_deg) + test_shift;
        if (std::abs(test) <= dead_band) {
            out.dead_band = true;
            out.value_deg = crit.argmin_deg;
            return out;
        }
        out.is_upper = (test > 0.0) == upper_when_nonneg;
    }
    out.value_deg = out.is_upper ? domain.hi_deg : domain.lo_deg;
    out.source = out.is_upper ? BoundSource::domain_hi : BoundSource::domain_lo;
    return out;
}

[[nodiscard]] inline ComponentInterval oracle_assemble(const OracleScenario& s1, const OracleScenario& s2) {
    ComponentInterval out;
    if (s1.all_negative || s2.all_negative) {
        out.empty = true;
        return out;
    }
    if (s1.dead_band && s2.dead_band) {
        out.lo_deg = std::min(s1.value_deg, s2.value_deg);
        out.hi_deg = std::max(s1.value_deg, s2.value_deg);
        out.lo_src = out.hi_src = BoundSource::degenerate;
        return out;
    }
    if (s1.dead_band != s2.dead_band) {
        const OracleScenario& d = s1.dead_band ? s2 : s1;
        const OracleScenario& m = s1.dead_band ? s1 : s2;
        out.lo_deg = d.is_upper ? m.value_deg : d.value_deg;
        out.hi_deg = d.is_upper ? d.value_deg : m.value_deg;
        out.lo_src = d.is_upper ? BoundSource::degenerate : d.source;
        out.hi_src = d.is_upper ? d.source : BoundSource::degenerate;
        if (out.lo_deg > out.hi_deg) out.empty = true;
        return out;
    }
    if (s1.is_upper == s2.is_upper)
        throw DomainError("oracle fpad: scenario sign tests disagree");
    const OracleScenario& upper = s1.is_upper ? s1 : s2;
    const OracleScenario& lower = s1.is_upper ? s2 : s1;
    out.lo_deg = lower.value_deg;
    out.hi_deg = upper.value_deg;
    out.lo_src = lower.source;
    out.hi_src = upper.source;
    if (out.lo_deg > out.hi_deg) out.empty = true;
    return out;
}

} // namespace detail

struct OracleFpadOptions {
    double coarse_deg = 0.25;
    double res_deg = 0.001;
    double value_tol_mva = 1e-6;  ///< curve-value stop (1e-8 p.u. at 100 MVA)
    double dead_band_mva = 1e-7;  ///< sign-test dead band (1e-9 p.u. at 100 MVA)
};

/// Oracle FPAD of one section family (same assembly semantics as the
/// closed-form stage, every probe a full power flow). curves: {P1, P2, Q1,
/// Q2} as functions of the angle.
[[nodiscard]] inline MsoFpadResult oracle_section_fpad(const OracleCurve& p1, const OracleCurve& p2,
                                                       const OracleCurve& q1, const OracleCurve& q2,
                                                       const CirculationConstraint& constraint,
                                                       double alpha, const AngleInterval& domain,
                                                       const OracleFpadOptions& opts = {}) {
    MsoFpadResult out;
    out.alpha = alpha;

    const auto c1 = oracle_find_critical(p1, domain, opts.coarse_deg, opts.res_deg, opts.value_tol_mva);
    const auto c2 = oracle_find_critical(p2, domain, opts.coarse_deg, opts.res_deg, opts.value_tol_mva);
    const auto a1 = detail::oracle_classify(c1, p2, 0.0, true, BoundSource::apc_s1, domain, false,
                                            opts.dead_band_mva);
    const auto a2 = detail::oracle_classify(c2, p1, 0.0, false, BoundSource::apc_s2, domain, false,
                                            opts.dead_band_mva);
    out.apc = detail::oracle_assemble(a1, a2);

    double shift = 0.0, test_shift = 0.0;
    if (constraint.mode == ConstraintMode::relaxed) {
        shift = (constraint.state == SystemState::traction ? 1.0 : -1.0) * constraint.q_cir_max_mvar;
        test_shift = constraint.q_cir_max_mvar;
    }
    const OracleCurve q1s = [&q1, shift](double x) { return q1(x) + shift; };
    const OracleCurve q2s = [&q2, shift](double x) { return q2(x) + shift; };
    const auto k1 = oracle_find_critical(q1s, domain, opts.coarse_deg, opts.res_deg, opts.value_tol_mva);
    const auto k2 = oracle_find_critical(q2s, domain, opts.coarse_deg, opts.res_deg, opts.value_tol_mva);
    const auto r1 = detail::oracle_classify(k1, q2, test_shift, false, BoundSource::rpc_s1, domain, true,
                                            opts.dead_band_mva);
    const auto r2 = detail::oracle_classify(k2, q1, test_shift, true, BoundSource::rpc_s2, domain, true,
                                            opts.dead_band_mva);
    out.rpc = detail::oracle_assemble(r1, r2);

    if (out.apc.empty || out.rpc.empty) return out;
    const double lo = std::max(out.apc.lo_deg, out.rpc.lo_deg);
    const double hi = std::min(out.apc.hi_deg, out.rpc.hi_deg);
    if (lo > hi) return out;
    out.unmargined = AngleInterval{lo, hi};
    const double mlo = std::max(lo, alpha * lo);
    const double mhi = std::min(hi, alpha * hi);
    if (mlo > mhi) return out;
    out.interval = AngleInterval{mlo, mhi};
    return out;
}

[[nodiscard]] inline MsoFpadResult oracle_zso_fpad(const ZsoOracle& oracle,
                                                   const CirculationConstraint& constraint, double alpha,
                                                   const AngleInterval& domain,
                                                   const OracleFpadOptions& opts = {}) {
    const OracleCurve p1 = [&oracle](double x) { return oracle.powers(x).s1.real(); };
    const OracleCurve p2 = [&oracle](double x) { return oracle.powers(x).s2.real(); };
    const OracleCurve q1 = [&oracle](double x) { return oracle.powers(x).s1.imag(); };
    const OracleCurve q2 = [&oracle](double x) { return oracle.powers(x).s2.imag(); };
    return oracle_section_fpad(p1, p2, q1, q2, constraint, alpha, domain, opts);
}

/// Oracle FPAD of a whole cluster: per-ZSO oracle FPADs intersected.
[[nodiscard]] inline TscFpadResult oracle_tsc_fpad(const TscSpec& tsc, const PerUnitBase& base,
                                                   ConstraintMode mode,
                                                   const OracleFpadOptions& opts = {}) {
    TscFpadResult out;
    const auto trains = tsc.all_trains();
    out.state = detect_state(trains);
    CirculationConstraint constraint{mode, tsc.q_cir_max_mvar, out.state};

    const ZsoOracle o1(tsc.zso1, base);
    const ZsoOracle o2(tsc.zso2, base);
    out.zso1 = oracle_zso_fpad(o1, constraint, tsc.alpha_margin, tsc.delta_limits, opts);
    out.zso2 = oracle_zso_fpad(o2, constraint, tsc.alpha_margin, tsc.delta_limits, opts);
    if (!out.zso1.interval || !out.zso2.interval) return out;
    const double lo = std::max(out.zso1.interval->lo_deg, out.zso2.interval->lo_deg);
    const double hi = std::min(out.zso1.interval->hi_deg, out.zso2.interval->hi_deg);
    if (lo > hi) return out;
    out.interval = AngleInterval{lo, hi};
    return out;
}

} // namespace ftpss
