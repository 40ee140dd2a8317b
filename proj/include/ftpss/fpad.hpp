#pragma once

// Feasible phase angle domain (FPAD) computation for MSO/ZSO sections and
// whole clusters, under strict or relaxed power-circulation constraints.
//
// Each constraint family (active, reactive) contributes one interval built
// from two critical-angle scenarios: the angle where the station-1 curve
// crosses zero and the angle where the station-2 curve does. A scenario's
// bound role (upper vs lower) follows the sign of the *other* station's
// curve at the critical angle; when a curve has no zero inside the
// adjustment range, the matching range limit substitutes and the role
// follows the position of the curve's minimum. The final section domain is
// the intersection of both families scaled by the adjustment margin about
// zero; a cluster intersects its two section domains.

#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "ftpss/equivalent.hpp"
#include "ftpss/model.hpp"
#include "ftpss/trdp.hpp"
#include "ftpss/units.hpp"

namespace ftpss {

enum class SystemState { traction, braking };
enum class ConstraintMode { strict, relaxed };

[[nodiscard]] inline const char* to_string(SystemState s) {
    return s == SystemState::traction ? "traction" : "braking";
}
[[nodiscard]] inline const char* to_string(ConstraintMode m) {
    return m == ConstraintMode::strict ? "strict" : "relaxed";
}

/// Traction unless the aggregate train active power is negative (ties count
/// as traction).
[[nodiscard]] inline SystemState detect_state(std::span<const TrainLoad> trains) {
    double p = 0.0;
    for (const auto& t : trains) p += t.power.p_mw;
    return p >= 0.0 ? SystemState::traction : SystemState::braking;
}

struct CirculationConstraint {
    ConstraintMode mode = ConstraintMode::strict;
    double q_cir_max_mvar = 0.2;  ///< permissible reactive circulation (relaxed mode)
    SystemState state = SystemState::traction;
};

enum class BoundSource {
    apc_s1, apc_s2, rpc_s1, rpc_s2, domain_lo, domain_hi, degenerate
};

[[nodiscard]] inline const char* to_string(BoundSource s) {
    switch (s) {
        case BoundSource::apc_s1: return "apc_s1";
        case BoundSource::apc_s2: return "apc_s2";
        case BoundSource::rpc_s1: return "rpc_s1";
        case BoundSource::rpc_s2: return "rpc_s2";
        case BoundSource::domain_lo: return "domain_lo";
        case BoundSource::domain_hi: return "domain_hi";
        default: return "degenerate";
    }
}

/// One constraint family's interval with per-bound provenance.
struct ComponentInterval {
    double lo_deg = 0.0;
    double hi_deg = 0.0;
    BoundSource lo_src = BoundSource::degenerate;
    BoundSource hi_src = BoundSource::degenerate;
    bool empty = false;

    [[nodiscard]] AngleInterval interval() const { return {lo_deg, hi_deg}; }
};

/// Critical angle of one scenario: the zero of one station curve when it
/// exists, otherwise the |curve| minimizer and its value.
struct CriticalAngle {
    std::optional<double> zero_deg;
    double argmin_deg = 0.0;
    double argmin_value_pu = 0.0;
    SolveResult solve;
};

namespace detail {

inline constexpr double sign_dead_band_pu = 1e-9;

enum class StationCurve { p1, p2, q1, q2 };

/// Residual adapter: selected station quantity in p.u. with derivative per
/// degree, plus an optional constant shift.
struct CurveFn {
    const PowerFunction* pf;
    StationCurve which;
    double s_base;
    double shift_mva = 0.0;

    [[nodiscard]] double value(double x_deg) const {
        const auto s = pf->evaluate(x_deg);
        double v = 0.0;
        switch (which) {
            case StationCurve::p1: v = s.s1.real(); break;
            case StationCurve::p2: v = s.s2.real(); break;
            case StationCurve::q1: v = s.s1.imag(); break;
            case StationCurve::q2: v = s.s2.imag(); break;
        }
        return (v + shift_mva) / s_base;
    }

    [[nodiscard]] std::pair<double, double> operator()(double x_deg) const {
        const auto d = pf->derivative(x_deg);
        double g = 0.0;
        switch (which) {
            case StationCurve::p1: g = d.s1.real(); break;
            case StationCurve::p2: g = d.s2.real(); break;
            case StationCurve::q1: g = d.s1.imag(); break;
            case StationCurve::q2: g = d.s2.imag(); break;
        }
        return {value(x_deg), g * (pi / 180.0) / s_base};
    }
};

[[nodiscard]] inline CriticalAngle find_critical(const CurveFn& curve, const AngleInterval& domain) {
    SolverConfig cfg;
    cfg.domain = domain;
    const SolveResult r = solve_scalar(curve, cfg);
    if (!r.converged)
        throw DomainError("fpad: critical-angle solve did not converge");
    CriticalAngle out;
    out.solve = r;
    if (r.kind == SolveKind::root) {
        out.zero_deg = r.x_deg;
        out.argmin_deg = r.x_deg;
        out.argmin_value_pu = r.residual;
    } else {
        out.argmin_deg = r.x_deg;
        out.argmin_value_pu = r.residual;
    }
    return out;
}

struct ScenarioBound {
    double value_deg = 0.0;
    bool is_upper = false;
    BoundSource source = BoundSource::degenerate;
    bool test_in_dead_band = false;
    bool curve_all_negative = false;
};

/// Sign-test direction: whether a non-negative test value makes this
/// scenario's critical angle the *upper* bound.
struct RoleRule {
    bool upper_when_nonneg;
    BoundSource zero_source;
};

[[nodiscard]] inline ScenarioBound classify_scenario(const CriticalAngle& crit, const CurveFn& other,
                                                     double other_shift_test_pu, const RoleRule& rule,
                                                     const AngleInterval& domain, bool q_family) {
    ScenarioBound out;
    if (crit.zero_deg) {
        const double test = other.value(*crit.zero_deg) + other_shift_test_pu;
        if (std::abs(test) <= sign_dead_band_pu) {
            out.test_in_dead_band = true;
            out.value_deg = *crit.zero_deg;
            out.source = BoundSource::degenerate;
            return out;
        }
        out.is_upper = (test > 0.0) == rule.upper_when_nonneg;
        out.value_deg = *crit.zero_deg;
        out.source = rule.zero_source;
        return out;
    }

    if (crit.argmin_value_pu < 0.0) {
        // No zero and the curve sits below zero across the whole range: the
        // constraint excludes everything.
        out.curve_all_negative = true;
        return out;
    }

    if (q_family) {
        // Range-limit substitution: the minimum's position picks the side.
        out.is_upper = crit.argmin_deg >= 0.0;
    } else {
        const double test = other.value(crit.argmin_deg) + other_shift_test_pu;
        if (std::abs(test) <= sign_dead_band_pu) {
            out.test_in_dead_band = true;
            out.value_deg = crit.argmin_deg;
            out.source = BoundSource::degenerate;
            return out;
        }
        out.is_upper = (test > 0.0) == rule.upper_when_nonneg;
    }
    out.value_deg = out.is_upper ? domain.hi_deg : domain.lo_deg;
    out.source = out.is_upper ? BoundSource::domain_hi : BoundSource::domain_lo;
    return out;
}

[[nodiscard]] inline ComponentInterval assemble(const ScenarioBound& s1, const ScenarioBound& s2) {
    ComponentInterval out;
    if (s1.curve_all_negative || s2.curve_all_negative) {
        out.empty = true;
        return out;
    }
    if (s1.test_in_dead_band && s2.test_in_dead_band) {
        // Degenerate (no-load) case: the interval collapses onto the shared
        // critical angle.
        out.lo_deg = std::min(s1.value_deg, s2.value_deg);
        out.hi_deg = std::max(s1.value_deg, s2.value_deg);
        out.lo_src = out.hi_src = BoundSource::degenerate;
        return out;
    }
    if (s1.test_in_dead_band != s2.test_in_dead_band) {
        // One decisive scenario; the ambiguous one's critical angle caps the
        // other side.
        const ScenarioBound& decisive = s1.test_in_dead_band ? s2 : s1;
        const ScenarioBound& ambiguous = s1.test_in_dead_band ? s1 : s2;
        if (decisive.is_upper) {
            out.lo_deg = ambiguous.value_deg;
            out.hi_deg = decisive.value_deg;
            out.lo_src = BoundSource::degenerate;
            out.hi_src = decisive.source;
        } else {
            out.lo_deg = decisive.value_deg;
            out.hi_deg = ambiguous.value_deg;
            out.lo_src = decisive.source;
            out.hi_src = BoundSource::degenerate;
        }
        if (out.lo_deg > out.hi_deg) out.empty = true;
        return out;
    }
    if (s1.is_upper == s2.is_upper)
        throw DomainError("fpad: scenario sign tests disagree (both claim the same bound)");
    const ScenarioBound& upper = s1.is_upper ? s1 : s2;
    const ScenarioBound& lower = s1.is_upper ? s2 : s1;
    out.lo_deg = lower.value_deg;
    out.hi_deg = upper.value_deg;
    out.lo_src = lower.source;
    out.hi_src = upper.source;
    if (out.lo_deg > out.hi_deg) out.empty = true;
    return out;
}

} // namespace detail

/// Critical angles of the two active-power scenarios (P1 = 0, P2 = 0).
struct ApcCriticalAngles {
    CriticalAngle s1;  ///< zero of P1
    CriticalAngle s2;  ///< zero of P2
};

[[nodiscard]] inline ApcCriticalAngles critical_angles_apc(const PowerFunction& pf, const PerUnitBase& base,
                                                           const AngleInterval& domain) {
    detail::CurveFn p1{&pf, detail::StationCurve::p1, base.s_base_mva};
    detail::CurveFn p2{&pf, detail::StationCurve::p2, base.s_base_mva};
    return {detail::find_critical(p1, domain), detail::find_critical(p2, domain)};
}

/// FPAD component for active power circulation.
[[nodiscard]] inline ComponentInterval apc_interval(const PowerFunction& pf, const PerUnitBase& base,
                                                    const AngleInterval& domain) {
    detail::CurveFn p1{&pf, detail::StationCurve::p1, base.s_base_mva};
    detail::CurveFn p2{&pf, detail::StationCurve::p2, base.s_base_mva};
    const auto crit = critical_angles_apc(pf, base, domain);
    const auto s1 = detail::classify_scenario(crit.s1, p2, 0.0,
                                              {/*upper_when_nonneg=*/true, BoundSource::apc_s1},
                                              domain, /*q_family=*/false);
    const auto s2 = detail::classify_scenario(crit.s2, p1, 0.0,
                                              {/*upper_when_nonneg=*/false, BoundSource::apc_s2},
                                              domain, /*q_family=*/false);
    return detail::assemble(s1, s2);
}

/// FPAD component for reactive power circulation. Strict mode works on the
/// raw Q curves; relaxed mode shifts them by +/- q_cir_max (positive sign in
/// traction, negative in braking) before the zero search, and the branch
/// tests compare the other station against -q_cir_max.
[[nodiscard]] inline ComponentInterval rpc_interval(const PowerFunction& pf,
                                                    const CirculationConstraint& constraint,
                                                    const PerUnitBase& base, const AngleInterval& domain) {
    double shift_mva = 0.0;
    double test_shift_pu = 0.0;
    if (constraint.mode == ConstraintMode::relaxed) {
        const double sign = constraint.state == SystemState::traction ? 1.0 : -1.0;
        shift_mva = sign * constraint.q_cir_max_mvar;
        test_shift_pu = constraint.q_cir_max_mvar / base.s_base_mva;
    }
    detail::CurveFn q1{&pf, detail::StationCurve::q1, base.s_base_mva, shift_mva};
    detail::CurveFn q2{&pf, detail::StationCurve::q2, base.s_base_mva, shift_mva};
    const auto c1 = detail::find_critical(q1, domain);
    const auto c2 = detail::find_critical(q2, domain);
    // Branch tests use the unshifted other curve against -q_cir_max.
    detail::CurveFn q1_raw{&pf, detail::StationCurve::q1, base.s_base_mva};
    detail::CurveFn q2_raw{&pf, detail::StationCurve::q2, base.s_base_mva};
    const auto s1 = detail::classify_scenario(c1, q2_raw, test_shift_pu,
                                              {/*upper_when_nonneg=*/false, BoundSource::rpc_s1},
                                              domain, /*q_family=*/true);
    const auto s2 = detail::classify_scenario(c2, q1_raw, test_shift_pu,
                                              {/*upper_when_nonneg=*/true, BoundSource::rpc_s2},
                                              domain, /*q_family=*/true);
    return detail::assemble(s1, s2);
}

/// Section-level FPAD with per-bound diagnostics.
struct MsoFpadResult {
    std::optional<AngleInterval> interval;  ///< final (margin applied); nullopt = empty
    ComponentInterval apc;
    ComponentInterval rpc;
    std::optional<AngleInterval> unmargined;
    double alpha = 1.0;
};

/// Intersection of the APC and RPC intervals with the adjustment margin
/// applied: both bounds scale toward zero by alpha, then re-intersect with
/// the unscaled intersection.
[[nodiscard]] inline MsoFpadResult mso_fpad(const PowerFunction& pf, const CirculationConstraint& constraint,
                                            double alpha, const PerUnitBase& base,
                                            const AngleInterval& domain) {
    MsoFpadResult out;
    out.alpha = alpha;
    out.apc = apc_interval(pf, base, domain);
    out.rpc = rpc_interval(pf, constraint, base, domain);
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

/// Cluster-level FPAD with the per-ZSO results retained for diagnostics.
struct TscFpadResult {
    std::optional<AngleInterval> interval;
    MsoFpadResult zso1;
    MsoFpadResult zso2;
    SystemState state = SystemState::traction;
};

/// FPAD of a cluster from a prebuilt power model: per-ZSO section FPADs
/// (ZSO2 mirrored so the shared angle parameterizes both) intersected.
[[nodiscard]] inline TscFpadResult tsc_fpad(const TscSpec& tsc, const TscPowerModel& model,
                                            ConstraintMode mode) {
    TscFpadResult out;
    const auto trains = tsc.all_trains();
    out.state = detect_state(trains);
    CirculationConstraint constraint{mode, tsc.q_cir_max_mvar, out.state};

    out.zso1 = mso_fpad(model.zso1, constraint, tsc.alpha_margin, model.base, tsc.delta_limits);
    out.zso2 = mso_fpad(model.zso2, constraint, tsc.alpha_margin, model.base, tsc.delta_limits);
    if (!out.zso1.interval || !out.zso2.interval) return out;

    const double lo = std::max(out.zso1.interval->lo_deg, out.zso2.interval->lo_deg);
    const double hi = std::min(out.zso1.interval->hi_deg, out.zso2.interval->hi_deg);
    if (lo > hi) return out;
    out.interval = AngleInterval{lo, hi};
    return out;
}

[[nodiscard]] inline TscFpadResult tsc_fpad(const TscSpec& tsc, const PerUnitBase& base,
                                            ConstraintMode mode) {
    return tsc_fpad(tsc, build_tsc_power_model(tsc, base), mode);
}

} // namespace ftpss
