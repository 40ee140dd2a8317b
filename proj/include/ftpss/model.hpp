#pragma once

// Topology model of a traction station cluster (TSC): two phase-reference
// stations (N-TS) bracketing one adjustable-phase station (A-TS), joined by
// two double-track zone supply organizations (ZSO). Each ZSO is a pair of
// parallel single-track sections (MSO) sharing their end stations.
//
// All types are immutable value data; validation reports violations as data.

#include <optional>
#include <string>
#include <vector>

#include "ftpss/units.hpp"

namespace ftpss {

enum class Track { up, down };
enum class StationKind { nts, ats };

[[nodiscard]] inline const char* to_string(Track t) { return t == Track::up ? "up" : "down"; }
[[nodiscard]] inline const char* to_string(StationKind k) { return k == StationKind::nts ? "N-TS" : "A-TS"; }

/// One train: position along its section, complex power and branch impedance.
struct TrainLoad {
    std::string id;
    double l1_km = 0.0;        ///< distance to the left station
    ComplexPower power;        ///< P > 0 traction, P < 0 regenerative braking
    Complex z_t_ohm{1000.0, 0.0};
    Track track = Track::up;
};

struct StationSpec {
    StationKind kind = StationKind::nts;
    double u_n_kv = 27.5;
};

/// Minimum supply organization: two stations plus one single-track section.
/// A reduced double-track model reuses this shape with the through-line
/// impedance halved; branch_z0 then keeps the per-track impedance each train
/// actually sees (ideal station sources decouple the parallel tracks).
struct MsoSpec {
    double length_km = 40.0;
    LineImpedance z0;
    StationSpec left;   ///< station 1 (phase reference side when left is the N-TS)
    StationSpec right;  ///< station 2
    std::vector<TrainLoad> trains;
    std::optional<LineImpedance> branch_z0;  ///< per-train track impedance; z0 when unset

    [[nodiscard]] LineImpedance train_z0() const { return branch_z0.value_or(z0); }
};

/// Zone supply organization: two parallel MSOs sharing both end stations.
struct ZsoSpec {
    MsoSpec up;
    MsoSpec down;

    [[nodiscard]] double length_km() const { return up.length_km; }
    [[nodiscard]] std::vector<TrainLoad> all_trains() const {
        std::vector<TrainLoad> out = up.trains;
        out.insert(out.end(), down.trains.begin(), down.trains.end());
        return out;
    }
};

/// Closed angle interval in degrees.
struct AngleInterval {
    double lo_deg = 0.0;
    double hi_deg = 0.0;

    [[nodiscard]] bool valid() const { return lo_deg <= hi_deg; }
    [[nodiscard]] double width() const { return hi_deg - lo_deg; }
    [[nodiscard]] double midpoint() const { return 0.5 * (lo_deg + hi_deg); }
    [[nodiscard]] bool contains(double x_deg, double tol = 0.0) const {
        return x_deg >= lo_deg - tol && x_deg <= hi_deg + tol;
    }
    [[nodiscard]] double clamp(double x_deg) const {
        return x_deg < lo_deg ? lo_deg : (x_deg > hi_deg ? hi_deg : x_deg);
    }
};

/// Traction station cluster: zso1 spans N-TS1 <-> A-TS, zso2 spans A-TS <-> N-TS2.
struct TscSpec {
    ZsoSpec zso1;
    ZsoSpec zso2;
    AngleInterval delta_limits{-20.0, 20.0};  ///< allowable A-TS phase adjustment range
    double alpha_margin = 0.95;
    double q_cir_max_mvar = 0.2;

    [[nodiscard]] double u_n_kv() const { return zso1.up.right.u_n_kv; }
    [[nodiscard]] std::vector<TrainLoad> all_trains() const {
        auto out = zso1.all_trains();
        auto t2 = zso2.all_trains();
        out.insert(out.end(), t2.begin(), t2.end());
        return out;
    }
};

/// A single validation finding. Warnings do not stop downstream computation;
/// errors do.
struct Violation {
    std::string field;
    std::string rule;
    bool warning = false;
};

namespace detail {

inline void check_train(const TrainLoad& t, const MsoSpec& mso,
                        const std::string& where, std::vector<Violation>& out) {
    if (!(t.l1_km > 0.0 && t.l1_km < mso.length_km))
        out.push_back({where + ".l1_km", "train position must satisfy 0 < l1 < section length"});
    if (!t.power.finite())
        out.push_back({where + ".power", "train power must be finite"});
    const double z_section = std::abs(segment_impedance(mso.z0, mso.length_km));
    if (std::abs(t.z_t_ohm) < 10.0 * z_section)
        out.push_back({where + ".z_t_ohm",
                       "|z_t| below 10x the section series impedance; superposition validity degraded",
                       /*warning=*/true});
    if (std::abs(t.z_t_ohm) == 0.0)
        out.push_back({where + ".z_t_ohm", "train branch impedance must be nonzero"});
}

inline void check_mso(const MsoSpec& mso, const std::string& where, std::vector<Violation>& out) {
    if (!(mso.length_km > 0.0))
        out.push_back({where + ".length_km", "section length must be positive"});
    if (!mso.z0.valid())
        out.push_back({where + ".z0", "per-km impedance requires r > 0 and x > 0"});
    if (!(mso.left.u_n_kv > 0.0) || !(mso.right.u_n_kv > 0.0))
        out.push_back({where + ".stations", "nominal voltage must be positive"});
    if (mso.left.u_n_kv != mso.right.u_n_kv)
        out.push_back({where + ".stations", "both stations of a section must share U_N"});
    if (mso.left.kind == mso.right.kind)
        out.push_back({where + ".stations", "a section must join one N-TS and one A-TS"});
    for (std::size_t i = 0; i < mso.trains.size(); ++i)
        check_train(mso.trains[i], mso, where + ".trains[" + std::to_string(i) + "]", out);
}

inline void check_zso(const ZsoSpec& zso, const std::string& where, std::vector<Violation>& out) {
    check_mso(zso.up, where + ".up", out);
    check_mso(zso.down, where + ".down", out);
    if (zso.up.length_km != zso.down.length_km)
        out.push_back({where, "parallel tracks must have equal length"});
    if (zso.up.left.kind != zso.down.left.kind || zso.up.right.kind != zso.down.right.kind ||
        zso.up.left.u_n_kv != zso.down.left.u_n_kv || zso.up.right.u_n_kv != zso.down.right.u_n_kv)
        out.push_back({where, "parallel tracks must share both end stations"});
}

} // namespace detail

/// Validate every type invariant of a TSC. An empty result means the spec is
/// usable; entries with warning=true flag degraded model assumptions only.
[[nodiscard]] inline std::vector<Violation> validate_topology(const TscSpec& tsc) {
    std::vector<Violation> out;
    detail::check_zso(tsc.zso1, "zso1", out);
    detail::check_zso(tsc.zso2, "zso2", out);

    // zso1 runs N-TS -> A-TS, zso2 runs A-TS -> N-TS; the A-TS is shared.
    if (tsc.zso1.up.right.kind != StationKind::ats)
        out.push_back({"zso1", "right station of zso1 must be the A-TS"});
    if (tsc.zso2.up.left.kind != StationKind::ats)
        out.push_back({"zso2", "left station of zso2 must be the A-TS"});
    if (tsc.zso1.up.right.u_n_kv != tsc.zso2.up.left.u_n_kv)
        out.push_back({"zso1/zso2", "both ZSOs must share the same A-TS"});

    if (!tsc.delta_limits.valid())
        out.push_back({"delta_limits", "interval bounds out of order"});
    if (!(tsc.delta_limits.lo_deg <= 0.0 && tsc.delta_limits.hi_deg >= 0.0))
        out.push_back({"delta_limits", "adjustment range must contain 0"});
    if (tsc.delta_limits.lo_deg != -tsc.delta_limits.hi_deg)
        out.push_back({"delta_limits", "adjustment range must be symmetric about 0"});
    if (!(tsc.alpha_margin >= 0.0 && tsc.alpha_margin <= 1.0))
        out.push_back({"alpha_margin", "margin must lie in [0, 1]"});
    if (!(tsc.q_cir_max_mvar >= 0.0))
        out.push_back({"q_cir_max_mvar", "permissible circulation must be >= 0"});
    return out;
}

[[nodiscard]] inline bool has_errors(const std::vector<Violation>& violations) {
    for (const auto& v : violations)
        if (!v.warning) return true;
    return false;
}

/// Throw unless the TSC passes validation (warnings allowed).
inline void require_valid(const TscSpec& tsc) {
    auto v = validate_topology(tsc);
    if (has_errors(v)) {
        std::string msg = "invalid topology:";
        for (const auto& e : v)
            if (!e.warning) msg += " [" + e.field + ": " + e.rule + "]";
        throw DomainError(msg);
    }
}

} // namespace ftpss
