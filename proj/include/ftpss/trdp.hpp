#pragma once

// Scalar trust-region solver with dogleg step (TR-DP). Minimizes f(x)^2 for a
// residual f with analytic derivative over a box domain. Every root search
// and |f| minimization in the feasible-domain and dispatch stages runs
// through this solver.
//
// The Gauss-Newton model m(p) = (f + f'p)^2 is used. In one dimension the
// Cauchy point and the Newton point coincide whenever f' != 0, so the dogleg
// path degenerates to the Newton step clipped to the trust radius; the
// general dogleg bookkeeping is kept so the acceptance/radius logic matches
// the usual formulation. Iterates are projected into the domain and the
// radius shrinks on boundary contact.

#include <algorithm>
#include <cmath>
#include <utility>

#include "ftpss/model.hpp"
#include "ftpss/units.hpp"

namespace ftpss {

enum class SolveKind { root, minimum, clamped };

[[nodiscard]] inline const char* to_string(SolveKind k) {
    switch (k) {
        case SolveKind::root: return "root";
        case SolveKind::minimum: return "minimum";
        default: return "clamped";
    }
}

/// Outcome of a scalar solve. kind==root guarantees |residual| <= tol;
/// kind==minimum marks a local minimum of |f| with |f| > tol; kind==clamped
/// marks a domain-boundary minimum.
struct SolveResult {
    double x_deg = 0.0;
    double residual = 0.0;   ///< f at x, in the caller's residual units (p.u.)
    SolveKind kind = SolveKind::root;
    int iterations = 0;
    bool converged = true;
};

struct SolverConfig {
    double tol = 1e-8;          ///< residual tolerance for root classification
    double grad_tol = 1e-14;    ///< absolute |d(f^2)/dx| floor for minimum classification
    double grad_rel = 1e-4;     ///< relative flatness: |f'| <= grad_rel*|f| marks a minimum
                                ///< (the Newton point would sit ~1/grad_rel degrees away)
    int max_iter = 100;
    double radius_init_deg = 1.0;
    double radius_max_deg = 0.0;  ///< 0 -> half the domain width
    double radius_min_deg = 1e-11;
    double eta_accept = 0.1;
    double shrink = 0.25;
    double grow = 2.0;
    double x0_deg = 0.0;          ///< start point (projected into the domain)
    AngleInterval domain{-20.0, 20.0};
};

/// Solve f(x) = 0 (or find the minimum of |f|) on the configured domain.
/// F must be callable as std::pair<double,double> F(double x_deg) returning
/// (f, df/dx_deg).
template <typename F>
[[nodiscard]] SolveResult solve_scalar(F&& f, const SolverConfig& cfg) {
    const AngleInterval dom = cfg.domain;
    const double radius_max =
        cfg.radius_max_deg > 0.0 ? cfg.radius_max_deg : std::max(dom.width() / 2.0, cfg.radius_init_deg);

    double x = dom.clamp(cfg.x0_deg);
    auto [fv, fg] = f(x);
    double radius = std::min(cfg.radius_init_deg, radius_max);

    const auto on_boundary = [&](double v) {
        return v <= dom.lo_deg || v >= dom.hi_deg;
    };
    const auto stationary = [&](double val, double der) {
        return std::abs(2.0 * val * der) <= cfg.grad_tol ||
               std::abs(der) <= cfg.grad_rel * std::abs(val);
    };
    const auto classify = [&](double val, double der, double at, int it, bool ok) {
        SolveKind kind;
        if (std::abs(val) <= cfg.tol) kind = SolveKind::root;
        else if (on_boundary(at)) kind = SolveKind::clamped;
        else kind = SolveKind::minimum;
        bool converged = ok && (kind != SolveKind::minimum || stationary(val, der) ||
                                radius <= cfg.radius_min_deg);
        return SolveResult{at, val, kind, it, converged};
    };

    bool kicked = false;
    for (int it = 0; it < cfg.max_iter; ++it) {
        if (std::abs(fv) <= cfg.tol)
            return SolveResult{x, fv, SolveKind::root, it, true};

        if (stationary(fv, fg)) {
            if (!kicked) {
                // Stationary start (possibly a local maximum of |f|): probe
                // both sides once before concluding.
                kicked = true;
                const double xl = dom.clamp(x - radius);
                const double xr = dom.clamp(x + radius);
                auto [fl, gl] = f(xl);
                auto [fr, gr] = f(xr);
                if (fl * fl < fv * fv && fl * fl <= fr * fr) {
                    x = xl; fv = fl; fg = gl;
                    continue;
                }
                if (fr * fr < fv * fv) {
                    x = xr; fv = fr; fg = gr;
                    continue;
                }
            }
            return classify(fv, fg, x, it, true);
        }

        // Dogleg step. With a rank-one Gauss-Newton model the Cauchy point
        // equals the Newton point, so the clipped Newton step is the dogleg.
        // fg != 0 here: a vanishing derivative is caught by the stationarity
        // test above.
        const double p_newton = -fv / fg;
        const double step = std::clamp(p_newton, -radius, radius);

        const double x_trial = dom.clamp(x + step);
        const double p_eff = x_trial - x;
        const bool projected = std::abs(p_eff - step) > 0.0;

        if (p_eff == 0.0) {
            // Pinned against the boundary with the model pointing outside.
            return classify(fv, fg, x, it, true);
        }

        auto [ft, gt] = f(x_trial);
        const double actual = fv * fv - ft * ft;
        const double model_res = fv + fg * p_eff;
        const double predicted = fv * fv - model_res * model_res;
        const double rho = predicted > 0.0 ? actual / predicted : (actual > 0.0 ? 1.0 : -1.0);

        if (rho >= cfg.eta_accept && actual > 0.0) {
            x = x_trial;
            fv = ft;
            fg = gt;
        }

        if (rho < 0.25)
            radius = cfg.shrink * std::abs(p_eff);
        else if (rho > 0.75 && std::abs(p_eff) >= radius * (1.0 - 1e-12))
            radius = std::min(cfg.grow * radius, radius_max);
        if (projected)
            radius = std::min(radius, std::max(std::abs(p_eff), cfg.radius_min_deg));

        if (radius <= cfg.radius_min_deg)
            return classify(fv, fg, x, it + 1, true);
    }
    auto out = classify(fv, fg, x, cfg.max_iter, false);
    out.converged = false;
    return out;
}

/// arg min |f| over the domain: same machinery as solve_scalar with the
/// arg-min contract made explicit (result may be an interior zero, an
/// interior minimum or a clamped boundary point).
template <typename F>
[[nodiscard]] SolveResult minimize_abs(F&& f, const SolverConfig& cfg) {
    return solve_scalar(std::forward<F>(f), cfg);
}

} // namespace ftpss
