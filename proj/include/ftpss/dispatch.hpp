#pragma once

// Power-dispatch stage: the inter-station power distribution coefficient,
// its feasible range over the FPAD (FPDD), and the three reference-phase-
// angle modes. PDM tracks a set distribution coefficient, CPM holds the
// A-TS at a reference output, MCM rides the FPAD upper bound (maximum A-TS
// output in traction, minimum braking-energy absorption otherwise). Every
// returned angle lies inside the FPAD.

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <variant>

#include "ftpss/equivalent.hpp"
#include "ftpss/fpad.hpp"
#include "ftpss/trdp.hpp"
#include "ftpss/units.hpp"

namespace ftpss {

enum class DispatchScope { zso1, zso2, tsc };

[[nodiscard]] inline const char* to_string(DispatchScope s) {
    switch (s) {
        case DispatchScope::zso1: return "zso1";
        case DispatchScope::zso2: return "zso2";
        default: return "tsc";
    }
}

struct PdmMode {
    double k_target = 1.0;
    DispatchScope scope = DispatchScope::tsc;
};
struct CpmMode {
    double p_ref_mw = 0.0;
};
struct McmMode {};

using DispatchMode = std::variant<PdmMode, CpmMode, McmMode>;

[[nodiscard]] inline std::string mode_name(const DispatchMode& m) {
    if (std::holds_alternative<PdmMode>(m)) return "pdm";
    if (std::holds_alternative<CpmMode>(m)) return "cpm";
    return "mcm";
}

inline constexpr double kp_denominator_floor_pu = 1e-9;

namespace detail {

struct PQPair {
    double p2 = 0.0;  ///< A-TS active power (MW)
    double p1 = 0.0;  ///< N-TS active power (MW), summed over scope
    double dp2 = 0.0; ///< derivatives per radian
    double dp1 = 0.0;
};

[[nodiscard]] inline PQPair scope_powers(const TscPowerModel& model, DispatchScope scope,
                                         double delta_deg) {
    PQPair out;
    const auto add = [&](const PowerFunction& pf) {
        const auto s = pf.evaluate(delta_deg);
        const auto d = pf.derivative(delta_deg);
        out.p1 += s.s1.real();
        out.p2 += s.s2.real();
        out.dp1 += d.s1.real();
        out.dp2 += d.s2.real();
    };
    if (scope == DispatchScope::zso1 || scope == DispatchScope::tsc) add(model.zso1);
    if (scope == DispatchScope::zso2 || scope == DispatchScope::tsc) add(model.zso2);
    return out;
}

} // namespace detail

/// Power distribution coefficient at one angle: A-TS active power over the
/// N-TS active power of the scope (both N-TS for a cluster). Throws when the
/// denominator is numerically zero.
[[nodiscard]] inline double kp(const TscPowerModel& model, DispatchScope scope, double delta_deg) {
    const auto s = detail::scope_powers(model, scope, delta_deg);
    if (std::abs(s.p1) < kp_denominator_floor_pu * model.base.s_base_mva)
        throw DomainError("kp: N-TS active power numerically zero (undefined ratio)");
    return s.p2 / s.p1;
}

/// Feasible power dispatch domain: the distribution coefficient evaluated at
/// the FPAD bounds. Monotonicity of K over the FPAD maps bounds to bounds;
/// it is property-tested, not assumed silently. A bound where the ratio is
/// undefined is flagged open-ended.
struct Fpdd {
    double k_lo = 0.0;
    double k_hi = 0.0;
    bool lo_open = false;       ///< ratio undefined at the corresponding FPAD bound
    bool hi_open = false;
    bool increasing = true;     ///< K(fpad.lo) <= K(fpad.hi)
};

[[nodiscard]] inline Fpdd fpdd(const TscPowerModel& model, DispatchScope scope,
                               const AngleInterval& fpad) {
    Fpdd out;
    std::optional<double> k_at_lo, k_at_hi;
    try {
        k_at_lo = kp(model, scope, fpad.lo_deg);
    } catch (const DomainError&) {
        out.lo_open = true;
    }
    try {
        k_at_hi = kp(model, scope, fpad.hi_deg);
    } catch (const DomainError&) {
        out.hi_open = true;
    }
    const double a = k_at_lo.value_or(k_at_hi.value_or(0.0));
    const double b = k_at_hi.value_or(a);
    out.increasing = a <= b;
    out.k_lo = std::min(a, b);
    out.k_hi = std::max(a, b);
    return out;
}

/// Dispatch decision: the reference phase angle and how it was reached.
struct RpaDecision {
    double delta_a_deg = 0.0;
    bool clamped = false;
    double residual_pu = 0.0;
    int iterations = 0;
    bool degenerate_load = false;  ///< all-coasting hold at 0 deg
};

namespace detail {

[[nodiscard]] inline RpaDecision solve_rpa_root(const AngleInterval& fpad,
                                                const std::function<std::pair<double, double>(double)>& f) {
    SolverConfig cfg;
    cfg.domain = fpad;
    cfg.x0_deg = 0.0;
    const SolveResult r = solve_scalar(f, cfg);
    if (!r.converged)
        throw DomainError("rpa: solver did not converge");
    RpaDecision out;
    out.delta_a_deg = fpad.clamp(r.x_deg);
    out.residual_pu = r.residual;
    out.iterations = r.iterations;
    out.clamped = r.kind == SolveKind::clamped;
    if (r.kind == SolveKind::minimum) {
        // No root inside the domain: fall back to the bound with the smaller
        // residual and mark the decision clamped.
        const double f_lo = f(fpad.lo_deg).first;
        const double f_hi = f(fpad.hi_deg).first;
        out.delta_a_deg = std::abs(f_hi) <= std::abs(f_lo) ? fpad.hi_deg : fpad.lo_deg;
        out.residual_pu = std::abs(f_hi) <= std::abs(f_lo) ? f_hi : f_lo;
        out.clamped = true;
    }
    return out;
}

} // namespace detail

/// PDM: root of P2 - k * P1 over the FPAD; when the target leaves the FPDD
/// the matching FPAD bound is returned with clamped set.
[[nodiscard]] inline RpaDecision rpa_pdm(const TscPowerModel& model, const PdmMode& mode,
                                         const AngleInterval& fpad) {
    const double s_base = model.base.s_base_mva;

    const auto mid = detail::scope_powers(model, mode.scope, fpad.midpoint());
    const auto at0 = detail::scope_powers(model, mode.scope, fpad.clamp(0.0));
    if (std::abs(mid.p1) < kp_denominator_floor_pu * s_base &&
        std::abs(at0.p1) < kp_denominator_floor_pu * s_base) {
        RpaDecision out;
        out.delta_a_deg = fpad.clamp(0.0);
        out.degenerate_load = true;
        return out;
    }

    const Fpdd range = fpdd(model, mode.scope, fpad);
    if (!range.lo_open && !range.hi_open) {
        if (mode.k_target < range.k_lo || mode.k_target > range.k_hi) {
            RpaDecision out;
            const bool want_hi = (mode.k_target > range.k_hi) == range.increasing;
            out.delta_a_deg = want_hi ? fpad.hi_deg : fpad.lo_deg;
            out.clamped = true;
            const auto s = detail::scope_powers(model, mode.scope, out.delta_a_deg);
            out.residual_pu = (s.p2 - mode.k_target * s.p1) / s_base;
            return out;
        }
    }

    const auto residual = [&](double x) -> std::pair<double, double> {
        const auto s = detail::scope_powers(model, mode.scope, x);
        const double f = (s.p2 - mode.k_target * s.p1) / s_base;
        const double g = (s.dp2 - mode.k_target * s.dp1) * (pi / 180.0) / s_base;
        return {f, g};
    };
    return detail::solve_rpa_root(fpad, residual);
}

/// CPM: root of P2_total - P_ref over the FPAD, clamped to the bound whose
/// power is nearest when the reference is unreachable.
[[nodiscard]] inline RpaDecision rpa_cpm(const TscPowerModel& model, const CpmMode& mode,
                                         const AngleInterval& fpad) {
    const double s_base = model.base.s_base_mva;
    const auto p2_at = [&](double x) { return detail::scope_powers(model, DispatchScope::tsc, x).p2; };

    const double p_lo = p2_at(fpad.lo_deg);
    const double p_hi = p2_at(fpad.hi_deg);
    const double lo_end = std::min(p_lo, p_hi);
    const double hi_end = std::max(p_lo, p_hi);
    if (mode.p_ref_mw < lo_end || mode.p_ref_mw > hi_end) {
        RpaDecision out;
        const bool toward_hi = std::abs(p_hi - mode.p_ref_mw) <= std::abs(p_lo - mode.p_ref_mw);
        out.delta_a_deg = toward_hi ? fpad.hi_deg : fpad.lo_deg;
        out.clamped = true;
        out.residual_pu = (p2_at(out.delta_a_deg) - mode.p_ref_mw) / s_base;
        return out;
    }

    const auto residual = [&](double x) -> std::pair<double, double> {
        const auto s = detail::scope_powers(model, DispatchScope::tsc, x);
        return {(s.p2 - mode.p_ref_mw) / s_base, s.dp2 * (pi / 180.0) / s_base};
    };
    return detail::solve_rpa_root(fpad, residual);
}

/// MCM: ride the FPAD upper bound. In traction this maximizes A-TS output;
/// in braking it minimizes the braking energy the A-TS absorbs.
[[nodiscard]] inline RpaDecision rpa_mcm(const AngleInterval& fpad) {
    RpaDecision out;
    out.delta_a_deg = fpad.hi_deg;
    return out;
}

/// Dispatch entry point used by the simulator and the CLI.
[[nodiscard]] inline RpaDecision rpa(const TscPowerModel& model, const DispatchMode& mode,
                                     const AngleInterval& fpad) {
    if (const auto* p = std::get_if<PdmMode>(&mode)) return rpa_pdm(model, *p, fpad);
    if (const auto* c = std::get_if<CpmMode>(&mode)) return rpa_cpm(model, *c, fpad);
    return rpa_mcm(fpad);
}

} // namespace ftpss
