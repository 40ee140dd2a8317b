#pragma once

// Fixed-topology equivalent model of an MSO/ZSO. Each train branch is
// transformed into current-source-plus-impedance branches hung on the two
// station busbars; the section itself stays as a single series line. Station
// complex powers then become closed-form exponential polynomials of the A-TS
// phase angle, evaluable (with analytic derivatives) at any angle without a
// power-flow solve.
//
// Orientation convention: "station 1" is the phase-reference station (N-TS,
// angle 0) and "station 2" is the A-TS (angle delta_A). A ZSO whose A-TS sits
// on the left is mirrored (positions reflected) before building, so the same
// delta_A parameterizes both ZSOs of a cluster.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "ftpss/model.hpp"
#include "ftpss/units.hpp"

namespace ftpss {

/// Catenary voltage at a train's pantograph. Infeasible marks a negative
/// voltage-collapse discriminant, not a fault.
struct PantographState {
    double u_t_kv = 0.0;
    double delta_t_rad = 0.0;
    bool feasible = true;

    [[nodiscard]] Complex to_complex() const { return std::polar(u_t_kv, delta_t_rad); }
    [[nodiscard]] double delta_t_deg() const { return rad_to_deg(delta_t_rad); }
};

enum class BranchSide { station1, station2 };

/// Equivalent parallel branch (current source + impedance) at one station.
struct EquivalentBranch {
    Complex i_src_ka{0.0, 0.0};
    Complex z_par_ohm{0.0, 0.0};
    BranchSide side = BranchSide::station1;
};

/// Closed-form pantograph voltage for one train alone in its section.
///
/// Generalized in the line constants (R0, X0): with
///   beta = L1*L2*(R0*P + X0*Q) / (L * U_N^2)
/// the magnitude is (1/2 + sqrt(1/4 - beta))*U_N and the angle is
///   (L1/L)*delta_A - ((X0*P - R0*Q)/(R0*P + X0*Q))*(1/2 - sqrt(1/4 - beta)).
/// For Z0 = 0.15 + j0.55 ohm/km this reduces exactly to the 11P-3Q / 3P+11Q /
/// sqrt(5) constant form; the reduction is asserted in tests.
[[nodiscard]] inline PantographState pantograph_voltage(const MsoSpec& mso, const TrainLoad& train,
                                                        double delta_a_deg) {
    const double u_n = mso.left.u_n_kv;
    const double l1 = train.l1_km;
    const double l2 = mso.length_km - train.l1_km;
    const LineImpedance z0 = mso.train_z0();
    const double r0 = z0.r_ohm_per_km;
    const double x0 = z0.x_ohm_per_km;
    const double p = train.power.p_mw;
    const double q = train.power.q_mvar;

    const double den = r0 * p + x0 * q;
    const double beta = l1 * l2 * den / (mso.length_km * u_n * u_n);
    const double disc = 0.25 - beta;
    if (disc < 0.0) return {0.0, 0.0, false};

    const double root = std::sqrt(disc);
    const double u_t = (0.5 + root) * u_n;
    // Degenerate no-load direction (R0*P + X0*Q == 0): the load angle shift
    // is defined as zero.
    const double shift = den != 0.0 ? (x0 * p - r0 * q) / den * (0.5 - root) : 0.0;
    const double delta_t = (l1 / mso.length_km) * deg_to_rad(delta_a_deg) - shift;
    return {u_t, delta_t, true};
}

/// Exact pantograph voltage: solves the two-source circuit with a
/// constant-power train by damped fixed-point iteration on the node voltage
/// (Newton fallback). Test/verification oracle only.
[[nodiscard]] inline PantographState pantograph_voltage_exact(const MsoSpec& mso, const TrainLoad& train,
                                                              double delta_a_deg,
                                                              double tol_pu = 1e-10) {
    const double u_n = mso.left.u_n_kv;
    const double w = train.l1_km / mso.length_km;
    const Complex u1{u_n, 0.0};
    const Complex u2 = std::polar(u_n, deg_to_rad(delta_a_deg));
    const Complex v_th = (1.0 - w) * u1 + w * u2;
    const Complex z_th = segment_impedance(mso.train_z0(),
                                           train.l1_km * (mso.length_km - train.l1_km) / mso.length_km);
    const Complex s = train.power.to_complex();

    const auto residual = [&](Complex u) { return v_th - z_th * std::conj(s / u) - u; };

    Complex u = v_th;
    const double damping = 0.7;
    for (int it = 0; it < 400; ++it) {
        if (std::abs(u) < 1e-9 * u_n) break;
        const Complex r = residual(u);
        if (std::abs(r) <= tol_pu * u_n)
            return {std::abs(u), std::arg(u), true};
        u += damping * r;
    }

    // Newton fallback on (Re u, Im u) with numeric Jacobian.
    for (int it = 0; it < 60; ++it) {
        if (std::abs(u) < 1e-9 * u_n) break;
        const Complex r = residual(u);
        if (std::abs(r) <= tol_pu * u_n)
            return {std::abs(u), std::arg(u), true};
        const double h = 1e-7 * u_n;
        const Complex rx = (residual(u + Complex{h, 0.0}) - r) / h;
        const Complex ry = (residual(u + Complex{0.0, h}) - r) / h;
        const double a = rx.real(), b = ry.real(), c = rx.imag(), d = ry.imag();
        const double det = a * d - b * c;
        if (det == 0.0) break;
        const double dx = (-r.real() * d + r.imag() * b) / det;
        const double dy = (-a * r.imag() + c * r.real()) / det;
        u += Complex{dx, dy};
    }
    throw DomainError("pantograph_voltage_exact: fixed-point iteration diverged");
}

/// Train branch current source controlled by the pantograph voltage:
/// i_ts = (S/U)* - U/Z_t. Together with the Z_t shunt this draws exactly the
/// constant-power current.
[[nodiscard]] inline Complex train_current_source(const TrainLoad& train, Complex u_t_kv) {
    if (std::abs(u_t_kv) <= 0.0)
        throw DomainError("train_current_source: zero pantograph voltage");
    return std::conj(train.power.to_complex() / u_t_kv) - u_t_kv / train.z_t_ohm;
}

namespace detail {

struct BranchGeometry {
    Complex z1, z2, zt, d;  // d = z1*zt + z2*zt + z1*z2
};

[[nodiscard]] inline BranchGeometry branch_geometry(const MsoSpec& mso, const TrainLoad& train) {
    BranchGeometry g;
    g.z1 = segment_impedance(mso.train_z0(), train.l1_km);
    g.z2 = segment_impedance(mso.train_z0(), mso.length_km - train.l1_km);
    g.zt = train.z_t_ohm;
    g.d = g.z1 * g.zt + g.z2 * g.zt + g.z1 * g.z2;
    return g;
}

} // namespace detail

/// Equivalent branch of one train at the requested station, evaluated at a
/// fixed angle. Port currents of the equivalent circuit (series line plus
/// these branches) match the original circuit exactly for the frozen source.
[[nodiscard]] inline EquivalentBranch equivalent_branch(const MsoSpec& mso, const TrainLoad& train,
                                                        double delta_a_deg, BranchSide side) {
    const auto ps = pantograph_voltage(mso, train, delta_a_deg);
    if (!ps.feasible)
        throw DomainError("equivalent_branch: infeasible pantograph state");
    const Complex i_ts = train_current_source(train, ps.to_complex());

    const auto g = detail::branch_geometry(mso, train);
    const double u_n = mso.left.u_n_kv;
    const Complex u1{u_n, 0.0};
    const Complex u2 = std::polar(u_n, deg_to_rad(delta_a_deg));
    const Complex z_line = g.z1 + g.z2;

    EquivalentBranch out;
    out.side = side;
    if (side == BranchSide::station1) {
        out.i_src_ka = u2 / z_line + (g.z2 * g.zt / g.d) * (i_ts - u2 / g.z2);
        out.z_par_ohm = z_line * g.d / (g.z2 * g.z2);
    } else {
        out.i_src_ka = u1 / z_line + (g.z1 * g.zt / g.d) * (i_ts - u1 / g.z1);
        out.z_par_ohm = z_line * g.d / (g.z1 * g.z1);
    }
    return out;
}

/// Superpose per-train branches at one station: currents add, impedances
/// combine in parallel.
[[nodiscard]] inline EquivalentBranch aggregate_branches(std::span<const EquivalentBranch> branches) {
    if (branches.empty())
        throw DomainError("aggregate_branches: empty branch set");
    EquivalentBranch out;
    out.side = branches.front().side;
    Complex y_sum{0.0, 0.0};
    for (const auto& b : branches) {
        if (b.side != out.side)
            throw DomainError("aggregate_branches: mixed station sides");
        out.i_src_ka += b.i_src_ka;
        y_sum += 1.0 / b.z_par_ohm;
    }
    out.z_par_ohm = 1.0 / y_sum;
    return out;
}

/// Reduce a double-track ZSO to a single-section model: per-km impedance
/// halves, trains keep their own positions. The residual error of this
/// reduction is measured against the full two-track oracle, never assumed
/// zero.
[[nodiscard]] inline MsoSpec reduce_zso(const ZsoSpec& zso) {
    if (zso.up.length_km != zso.down.length_km)
        throw DomainError("reduce_zso: mismatched track lengths");
    MsoSpec out = zso.up;
    out.z0 = zso.up.z0.halved();
    out.branch_z0 = zso.up.z0;
    out.trains = zso.all_trains();
    return out;
}

/// Reflect a section end-for-end: stations swap, train positions mirror.
/// Used to express a ZSO whose A-TS is the left station in the standard
/// orientation (A-TS = station 2).
[[nodiscard]] inline MsoSpec mirror_section(const MsoSpec& mso) {
    MsoSpec out = mso;
    std::swap(out.left, out.right);
    for (auto& t : out.trains) t.l1_km = mso.length_km - t.l1_km;
    return out;
}

/// One term of the exponential-polynomial station power function:
/// contributes a * e^{j(b1*delta + b2)} + c to the station current bracket.
struct PowerFunctionTerm {
    Complex a{0.0, 0.0};
    double b1 = 0.0;
    double b2 = 0.0;
    Complex c{0.0, 0.0};
};

/// Station powers evaluated at one angle (MVA: real = MW, imag = MVar).
struct StationPowers {
    Complex s1;
    Complex s2;
};

/// Station complex powers as closed-form functions of the A-TS angle:
///   S1(d) = U_N * conj(B1(d)),        B1(d) = sum_i a_i e^{j(b1_i d + b2_i)} + c_i
///   S2(d) = U_N e^{jd} * conj(B2(d))
/// with exactly n_trains + 1 terms per station (the extra term carries the
/// direct line exchange). Coefficients are angle-independent; the functions
/// are valid across the whole adjustment range and are rebuilt from train
/// states each controller step.
struct PowerFunction {
    std::vector<PowerFunctionTerm> station1;
    std::vector<PowerFunctionTerm> station2;
    double u_n_kv = 27.5;
    int n_trains = 0;
    bool mirrored = false;  ///< true when built from a mirrored (A-TS-left) section

    [[nodiscard]] StationPowers evaluate(double delta_a_deg) const {
        const double d = deg_to_rad(delta_a_deg);
        Complex b1{0.0, 0.0}, b2{0.0, 0.0};
        for (const auto& t : station1) b1 += t.a * std::polar(1.0, t.b1 * d + t.b2) + t.c;
        for (const auto& t : station2) b2 += t.a * std::polar(1.0, t.b1 * d + t.b2) + t.c;
        const Complex rot = std::polar(1.0, d);
        return {u_n_kv * std::conj(b1), u_n_kv * rot * std::conj(b2)};
    }

    /// d(S1)/d(delta), d(S2)/d(delta) in MVA per radian.
    [[nodiscard]] StationPowers derivative(double delta_a_deg) const {
        const double d = deg_to_rad(delta_a_deg);
        const Complex j{0.0, 1.0};
        Complex b2{0.0, 0.0}, db1{0.0, 0.0}, db2{0.0, 0.0};
        for (const auto& t : station1) db1 += j * t.b1 * t.a * std::polar(1.0, t.b1 * d + t.b2);
        for (const auto& t : station2) {
            const Complex e = t.a * std::polar(1.0, t.b1 * d + t.b2);
            b2 += e + t.c;
            db2 += j * t.b1 * e;
        }
        const Complex rot = std::polar(1.0, d);
        return {u_n_kv * std::conj(db1), u_n_kv * rot * (j * std::conj(b2) + std::conj(db2))};
    }
};

namespace detail {

/// Station-port response of one track's passive ladder (series segments plus
/// the train branch impedances): port currents as linear functions of the two
/// station voltages and the per-train source currents. Solved once per build;
/// all coefficients are angle-independent.
struct LadderResponse {
    Complex a1_u1, a1_u2;          // I_1 = a1_u1*u1 + a1_u2*u2 + sum g1_k*i_ts_k
    Complex a2_u1, a2_u2;          // I_2 likewise
    std::vector<Complex> g1, g2;   // per train, in input order

    static LadderResponse solve(const LineImpedance& z0, double length_km,
                                std::span<const TrainLoad> trains) {
        const std::size_t n = trains.size();
        LadderResponse out;
        if (n == 0) {
            const Complex y = 1.0 / segment_impedance(z0, length_km);
            out.a1_u1 = y;
            out.a1_u2 = -y;
            out.a2_u1 = -y;
            out.a2_u2 = y;
            return out;
        }

        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return trains[a].l1_km < trains[b].l1_km; });

        std::vector<Complex> yseg(n + 1);
        double prev = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            yseg[i] = 1.0 / segment_impedance(z0, trains[order[i]].l1_km - prev);
            prev = trains[order[i]].l1_km;
        }
        yseg[n] = 1.0 / segment_impedance(z0, length_km - prev);

        // Interior nodal admittance matrix (tridiagonal + branch shunts).
        std::vector<std::vector<Complex>> a(n, std::vector<Complex>(n, Complex{0.0, 0.0}));
        for (std::size_t i = 0; i < n; ++i) {
            a[i][i] = yseg[i] + yseg[i + 1] + 1.0 / trains[order[i]].z_t_ohm;
            if (i + 1 < n) {
                a[i][i + 1] -= yseg[i + 1];
                a[i + 1][i] -= yseg[i + 1];
            }
        }

        // Gaussian elimination with the full multi-RHS set: unit responses
        // to u1, u2 and each source current.
        const std::size_t m = n + 2;
        std::vector<std::vector<Complex>> rhs(n, std::vector<Complex>(m, Complex{0.0, 0.0}));
        rhs[0][0] = yseg[0];        // per unit u1
        rhs[n - 1][1] = yseg[n];    // per unit u2
        for (std::size_t k = 0; k < n; ++k) rhs[k][2 + order[k]] = -1.0;  // i_ts draw

        for (std::size_t col = 0; col < n; ++col) {
            std::size_t piv = col;
            for (std::size_t r = col + 1; r < n; ++r)
                if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
            if (std::abs(a[piv][col]) == 0.0)
                throw DomainError("ladder reduction: singular track network");
            std::swap(a[col], a[piv]);
            std::swap(rhs[col], rhs[piv]);
            for (std::size_t r = col + 1; r < n; ++r) {
                const Complex f = a[r][col] / a[col][col];
                for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
                for (std::size_t c = 0; c < m; ++c) rhs[r][c] -= f * rhs[col][c];
            }
        }
        std::vector<std::vector<Complex>> v(n, std::vector<Complex>(m));
        for (std::size_t r = n; r-- > 0;) {
            for (std::size_t c = 0; c < m; ++c) {
                Complex s = rhs[r][c];
                for (std::size_t cc = r + 1; cc < n; ++cc) s -= a[r][cc] * v[cc][c];
                v[r][c] = s / a[r][r];
            }
        }

        // I_1 = (u1 - V_first) * yseg0, I_2 = (u2 - V_last) * ysegN.
        out.a1_u1 = (1.0 - v[0][0]) * yseg[0];
        out.a1_u2 = -v[0][1] * yseg[0];
        out.a2_u1 = -v[n - 1][0] * yseg[n];
        out.a2_u2 = (1.0 - v[n - 1][1]) * yseg[n];
        out.g1.resize(n);
        out.g2.resize(n);
        for (std::size_t k = 0; k < n; ++k) {
            out.g1[k] = -v[0][2 + k] * yseg[0];
            out.g2[k] = -v[n - 1][2 + k] * yseg[n];
        }
        return out;
    }
};

} // namespace detail

/// Build the station power functions for a single-section model (an MSO or a
/// reduced ZSO). Throws on an infeasible pantograph state.
///
/// Construction: the passive network (track segments plus train branch
/// impedances) is reduced exactly to its station ports per physical track;
/// the train current sources keep the closed-form angle structure
/// i_ts = M e^{j(w*delta + phi0)}. Pantograph phasors are the closed-form
/// values refined by a superposition pass so that co-track trains see each
/// other's voltage sag.
[[nodiscard]] inline PowerFunction build_power_function(const MsoSpec& section) {
    const double u_n = section.left.u_n_kv;
    const Complex z_line = segment_impedance(section.z0, section.length_km);

    PowerFunction pf;
    pf.u_n_kv = u_n;
    pf.n_trains = static_cast<int>(section.trains.size());
    pf.mirrored = section.left.kind == StationKind::ats;

    const std::size_t n = section.trains.size();

    // Pantograph phasors at the synchronized reference. Each train starts
    // from the closed-form single-train value and is then corrected by the
    // transfer-impedance sag of the other trains on its track.
    std::vector<Complex> u_base(n), u_ref(n);
    {
        std::vector<Complex> draw(n);
        for (std::size_t k = 0; k < n; ++k) {
            const auto ps = pantograph_voltage(section, section.trains[k], 0.0);
            if (!ps.feasible)
                throw DomainError("build_power_function: infeasible pantograph state for train '" +
                                  section.trains[k].id + "'");
            u_base[k] = u_ref[k] = ps.to_complex();
            draw[k] = std::conj(section.trains[k].power.to_complex() / u_ref[k]);
        }
        const bool per_track = section.branch_z0.has_value();
        const Complex z0_track = section.train_z0().per_km();
        for (int pass = 0; pass < 4 && n > 1; ++pass) {
            for (std::size_t k = 0; k < n; ++k) {
                Complex u = u_base[k];
                for (std::size_t j = 0; j < n; ++j) {
                    if (j == k) continue;
                    if (per_track && section.trains[j].track != section.trains[k].track) continue;
                    const double a = std::min(section.trains[k].l1_km, section.trains[j].l1_km);
                    const double b = std::max(section.trains[k].l1_km, section.trains[j].l1_km);
                    const Complex z_kj = z0_track * (a * (section.length_km - b) / section.length_km);
                    u -= z_kj * draw[j];
                }
                u_ref[k] = u;
            }
            for (std::size_t k = 0; k < n; ++k) {
                if (std::abs(u_ref[k]) <= 0.0)
                    throw DomainError("build_power_function: collapsed pantograph voltage");
                draw[k] = std::conj(section.trains[k].power.to_complex() / u_ref[k]);
            }
        }
    }

    // Group trains by physical track (a reduced double-track section keeps
    // per-track coupling; a plain section is one track).
    const bool per_track = section.branch_z0.has_value();
    std::vector<std::vector<std::size_t>> groups;
    if (per_track) {
        std::vector<std::size_t> up, down;
        for (std::size_t k = 0; k < n; ++k)
            (section.trains[k].track == Track::up ? up : down).push_back(k);
        if (!up.empty()) groups.push_back(std::move(up));
        if (!down.empty()) groups.push_back(std::move(down));
    } else if (n > 0) {
        groups.emplace_back();
        for (std::size_t k = 0; k < n; ++k) groups.back().push_back(k);
    }

    PowerFunctionTerm line1{Complex{0.0, 0.0}, 1.0, 0.0, Complex{0.0, 0.0}};
    PowerFunctionTerm line2{Complex{0.0, 0.0}, 1.0, 0.0, Complex{0.0, 0.0}};
    std::vector<PowerFunctionTerm> t1(n), t2(n);

    for (const auto& grp : groups) {
        std::vector<TrainLoad> track_trains;
        for (std::size_t k : grp) track_trains.push_back(section.trains[k]);
        const auto resp = detail::LadderResponse::solve(section.train_z0(), section.length_km,
                                                        track_trains);
        line1.c += u_n * resp.a1_u1;
        line1.a += u_n * resp.a1_u2;
        line2.c += u_n * resp.a2_u1;
        line2.a += u_n * resp.a2_u2;
        for (std::size_t i = 0; i < grp.size(); ++i) {
            const std::size_t k = grp[i];
            const auto& train = section.trains[k];
            const double u_t = std::abs(u_ref[k]);
            const double w = train.l1_km / section.length_km;
            const double phi0 = std::arg(u_ref[k]);
            const Complex m = std::conj(train.power.to_complex()) / u_t - u_t / train.z_t_ohm;
            t1[k] = {resp.g1[i] * m, w, phi0, Complex{0.0, 0.0}};
            t2[k] = {resp.g2[i] * m, w, phi0, Complex{0.0, 0.0}};
        }
    }

    // Any remaining no-load parallel path (e.g. the unoccupied track of a
    // reduced double-track section): total through admittance minus the
    // tracks already represented by ladders.
    {
        const Complex y_track = 1.0 / segment_impedance(section.train_z0(), section.length_km);
        const Complex y_rest = 1.0 / z_line - static_cast<double>(groups.size()) * y_track;
        line1.c += u_n * y_rest;
        line1.a += -u_n * y_rest;
        line2.c += -u_n * y_rest;
        line2.a += u_n * y_rest;
    }

    pf.station1.push_back(line1);
    pf.station2.push_back(line2);
    pf.station1.insert(pf.station1.end(), t1.begin(), t1.end());
    pf.station2.insert(pf.station2.end(), t2.begin(), t2.end());
    return pf;
}

/// Convenience wrappers mapping a TSC onto the two oriented single-section
/// models sharing one delta_A: zso1 is used as-is (A-TS right), zso2 is
/// mirrored so its A-TS also becomes station 2.
[[nodiscard]] inline MsoSpec tsc_zso1_model(const TscSpec& tsc) { return reduce_zso(tsc.zso1); }
[[nodiscard]] inline MsoSpec tsc_zso2_model(const TscSpec& tsc) { return mirror_section(reduce_zso(tsc.zso2)); }

/// Both power functions of a cluster plus the shared per-unit base; the unit
/// handed to the feasible-domain and dispatch stages.
struct TscPowerModel {
    PowerFunction zso1;
    PowerFunction zso2;
    PerUnitBase base;
};

[[nodiscard]] inline TscPowerModel build_tsc_power_model(const TscSpec& tsc, const PerUnitBase& base) {
    require_valid(tsc);
    if (!base.valid()) throw DomainError("build_tsc_power_model: invalid per-unit base");
    return {build_power_function(tsc_zso1_model(tsc)), build_power_function(tsc_zso2_model(tsc)), base};
}

} // namespace ftpss
