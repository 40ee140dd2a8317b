#pragma once

// Shared numeric foundations: complex phasors, power/impedance value types and
// the per-unit system. Convention used throughout the library: P in MW, Q in
// MVar, voltages in kV, currents in kA, lengths in km, impedances in ohm (or
// ohm/km). With these units MW * ohm = kV^2, so the closed-form voltage
// expressions stay dimensionally consistent without scale factors.
//
// Angles are radians everywhere inside the library; degrees appear only at
// external boundaries (files, CLI, logs) and in the *_deg fields of the
// boundary-facing result types.

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

namespace ftpss {

using Complex = std::complex<double>;

inline constexpr double pi = std::numbers::pi;

[[nodiscard]] inline double deg_to_rad(double deg) noexcept { return deg * pi / 180.0; }
[[nodiscard]] inline double rad_to_deg(double rad) noexcept { return rad * 180.0 / pi; }

/// Normalize an angle to (-pi, pi].
[[nodiscard]] inline double wrap_angle(double rad) noexcept {
    double a = std::remainder(rad, 2.0 * pi);
    if (a <= -pi) a += 2.0 * pi;
    return a;
}

/// Polar complex quantity (voltage in kV or current in kA).
/// Invariants: magnitude >= 0, angle normalized to (-pi, pi].
struct Phasor {
    double magnitude = 0.0;
    double angle_rad = 0.0;

    constexpr Phasor() = default;
    Phasor(double mag, double ang_rad) : magnitude(mag), angle_rad(wrap_angle(ang_rad)) {
        if (magnitude < 0.0) {
            magnitude = -magnitude;
            angle_rad = wrap_angle(angle_rad + pi);
        }
    }

    [[nodiscard]] static Phasor from_complex(Complex z) {
        return Phasor{std::abs(z), std::arg(z)};
    }

    [[nodiscard]] Complex to_complex() const {
        return std::polar(magnitude, angle_rad);
    }

    [[nodiscard]] double angle_deg() const { return rad_to_deg(angle_rad); }
};

/// Complex power in MW / MVar. Negative p is a regenerating (braking) load.
struct ComplexPower {
    double p_mw = 0.0;
    double q_mvar = 0.0;

    [[nodiscard]] Complex to_complex() const { return {p_mw, q_mvar}; }
    [[nodiscard]] static ComplexPower from_complex(Complex s) { return {s.real(), s.imag()}; }
    [[nodiscard]] double apparent_mva() const { return std::hypot(p_mw, q_mvar); }
    [[nodiscard]] bool finite() const { return std::isfinite(p_mw) && std::isfinite(q_mvar); }
};

/// Series impedance of the traction network per unit length (ohm/km).
struct LineImpedance {
    double r_ohm_per_km = 0.15;
    double x_ohm_per_km = 0.55;

    [[nodiscard]] Complex per_km() const { return {r_ohm_per_km, x_ohm_per_km}; }
    [[nodiscard]] bool valid() const {
        return r_ohm_per_km > 0.0 && x_ohm_per_km > 0.0 &&
               std::isfinite(r_ohm_per_km) && std::isfinite(x_ohm_per_km);
    }
    [[nodiscard]] LineImpedance halved() const {
        return {r_ohm_per_km / 2.0, x_ohm_per_km / 2.0};
    }
};

/// Total series impedance of a section of the given length.
[[nodiscard]] inline Complex segment_impedance(const LineImpedance& z0, double length_km) {
    if (length_km < 0.0 || !std::isfinite(length_km))
        throw std::invalid_argument("segment_impedance: negative or non-finite length");
    return z0.per_km() * length_km;
}

/// Per-unit base quantities. Defaults: 100 MVA system base, 27.5 kV catenary.
struct PerUnitBase {
    double s_base_mva = 100.0;
    double v_base_kv = 27.5;

    [[nodiscard]] bool valid() const {
        return s_base_mva > 0.0 && v_base_kv > 0.0 &&
               std::isfinite(s_base_mva) && std::isfinite(v_base_kv);
    }

    [[nodiscard]] double to_pu_power(double mw_or_mvar) const { return mw_or_mvar / s_base_mva; }
    [[nodiscard]] double from_pu_power(double pu) const { return pu * s_base_mva; }
    [[nodiscard]] Complex to_pu_power(Complex s_mva) const { return s_mva / s_base_mva; }
    [[nodiscard]] Complex from_pu_power(Complex s_pu) const { return s_pu * s_base_mva; }
    [[nodiscard]] double to_pu_voltage(double kv) const { return kv / v_base_kv; }
    [[nodiscard]] double from_pu_voltage(double pu) const { return pu * v_base_kv; }
};

/// Thrown when an operation is asked to proceed on data that violates a
/// domain rule (divergent solve, contradictory sign tests, empty domain).
class DomainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace ftpss
