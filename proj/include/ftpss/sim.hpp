#pragma once

// Time-stepped desk simulation of one cluster: a train schedule advances
// positions each step (quasi-static within the step), the controller
// pipeline runs (feasible domain -> dispatch domain -> reference angle), and
// station powers and energy are accounted. Per-step controller failures
// degrade to a hold of the previous angle rather than aborting the run.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ftpss/dispatch.hpp"
#include "ftpss/equivalent.hpp"
#include "ftpss/fpad.hpp"
#include "ftpss/model.hpp"

namespace ftpss {

enum class TravelDirection { forward, reverse };

/// Piecewise-constant power segment, keyed by absolute simulation time.
struct PowerSegment {
    double from_s = 0.0;
    ComplexPower power;
};

/// One scheduled train: entry time, section, direction, speed and power
/// profile. Position is measured from the section's left station.
struct TrainPlan {
    std::string id;
    int zso = 1;  ///< 1 or 2
    Track track = Track::up;
    double entry_time_s = 0.0;
    TravelDirection direction = TravelDirection::forward;
    double speed_kmh = 300.0;
    Complex z_t_ohm{1000.0, 0.0};
    std::vector<PowerSegment> profile;

    /// Position at absolute time t; empty when the train is outside the
    /// section (strictly before entry or at/past the far end).
    [[nodiscard]] std::optional<double> position_km(double t_s, double length_km) const {
        if (t_s < entry_time_s) return std::nullopt;
        const double run = speed_kmh * (t_s - entry_time_s) / 3600.0;
        const double l1 = direction == TravelDirection::forward ? run : length_km - run;
        if (l1 <= 0.0 || l1 >= length_km) return std::nullopt;
        return l1;
    }

    [[nodiscard]] ComplexPower power_at(double t_s) const {
        ComplexPower out;
        if (profile.empty()) return out;
        out = profile.front().power;
        for (const auto& seg : profile) {
            if (seg.from_s <= t_s) out = seg.power;
            else break;
        }
        return out;
    }
};

struct Schedule {
    std::vector<TrainPlan> trains;
};

struct ModeChange {
    double from_s = 0.0;
    DispatchMode mode = McmMode{};
};

struct SimConfig {
    double step_s = 1.0;
    double duration_s = 60.0;
    ConstraintMode constraint = ConstraintMode::strict;
    std::vector<ModeChange> modes;  ///< sorted by from_s; first entry covers t0
};

/// Everything recorded for one simulation step.
struct StepRecord {
    int step = 0;
    double time_s = 0.0;
    int n_trains = 0;
    SystemState state = SystemState::traction;
    std::string mode;
    Complex s_n1, s_a, s_n2;  ///< station powers (MVA) at the chosen angle
    double delta_a_deg = 0.0;
    bool fpad_empty = false;
    double fpad_lo_deg = 0.0, fpad_hi_deg = 0.0;
    bool fpdd_valid = false;
    double fpdd_k_lo = 0.0, fpdd_k_hi = 0.0;
    bool clamped = false;
    bool degenerate_load = false;
    bool apc_flag = false;     ///< station active powers of one ZSO disagree in sign
    double min_q_mvar = 0.0;   ///< smallest station-side reactive output
    int solver_iterations = 0;
    bool fail_safe = false;    ///< controller failed; previous angle held
    double t_fpad_us = 0.0, t_fpdd_us = 0.0, t_rpa_us = 0.0;
};

struct TrainEnergy {
    double consumed_mwh = 0.0;
    double regenerated_mwh = 0.0;
};

/// Trapezoidal energy totals per station plus per-train consumption split.
struct EnergyLedger {
    double n1_mwh = 0.0;
    double a_mwh = 0.0;
    double n2_mwh = 0.0;
    std::map<std::string, TrainEnergy> trains;
};

struct SimSummary {
    int steps = 0;
    int fail_safe_steps = 0;
    int clamped_steps = 0;
    int empty_fpad_steps = 0;
    double mean_fpad_us = 0.0, mean_fpdd_us = 0.0, mean_rpa_us = 0.0;
    double median_fpad_us = 0.0, median_fpdd_us = 0.0, median_rpa_us = 0.0;
};

struct SimResult {
    std::vector<StepRecord> records;
    EnergyLedger energy;
    SimSummary summary;
};

namespace detail {

[[nodiscard]] inline const DispatchMode& mode_at(const std::vector<ModeChange>& modes, double t_s) {
    if (modes.empty()) throw DomainError("sim: empty mode schedule");
    const ModeChange* out = &modes.front();
    for (const auto& m : modes)
        if (m.from_s <= t_s) out = &m;
    return out->mode;
}

[[nodiscard]] inline double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace detail

/// Populate a copy of the cluster topology with the trains active at t.
[[nodiscard]] inline TscSpec materialize_trains(const TscSpec& topo, const Schedule& schedule,
                                                double t_s) {
    TscSpec out = topo;
    out.zso1.up.trains.clear();
    out.zso1.down.trains.clear();
    out.zso2.up.trains.clear();
    out.zso2.down.trains.clear();
    for (const auto& plan : schedule.trains) {
        ZsoSpec& zso = plan.zso == 1 ? out.zso1 : out.zso2;
        const auto pos = plan.position_km(t_s, zso.length_km());
        if (!pos) continue;
        TrainLoad t{plan.id, *pos, plan.power_at(t_s), plan.z_t_ohm, plan.track};
        (plan.track == Track::up ? zso.up.trains : zso.down.trains).push_back(t);
    }
    return out;
}

/// One controller step at absolute time t. prev_delta_deg is the fail-safe
/// hold value.
[[nodiscard]] inline StepRecord sim_step(const TscSpec& topo, const Schedule& schedule,
                                         const SimConfig& cfg, const PerUnitBase& base, int step_index,
                                         double t_s, double prev_delta_deg) {
    using clock = std::chrono::steady_clock;
    const auto us_since = [](clock::time_point t0) {
        return std::chrono::duration<double, std::micro>(clock::now() - t0).count();
    };

    StepRecord rec;
    rec.step = step_index;
    rec.time_s = t_s;

    const TscSpec tsc = materialize_trains(topo, schedule, t_s);
    const auto trains = tsc.all_trains();
    rec.n_trains = static_cast<int>(trains.size());
    rec.state = detect_state(trains);
    const DispatchMode mode = detail::mode_at(cfg.modes, t_s);
    rec.mode = mode_name(mode);

    TscPowerModel model;
    try {
        model = build_tsc_power_model(tsc, base);

        const auto t0 = clock::now();
        const TscFpadResult fpad = tsc_fpad(tsc, model, cfg.constraint);
        rec.t_fpad_us = us_since(t0);

        if (!fpad.interval) {
            // Empty feasible domain: the controller holds the synchronized
            // reference.
            rec.fpad_empty = true;
            rec.delta_a_deg = 0.0;
        } else {
            rec.fpad_lo_deg = fpad.interval->lo_deg;
            rec.fpad_hi_deg = fpad.interval->hi_deg;

            const auto t1 = clock::now();
            try {
                const Fpdd range = fpdd(model, DispatchScope::tsc, *fpad.interval);
                rec.fpdd_valid = !range.lo_open && !range.hi_open;
                rec.fpdd_k_lo = range.k_lo;
                rec.fpdd_k_hi = range.k_hi;
            } catch (const DomainError&) {
                rec.fpdd_valid = false;
            }
            rec.t_fpdd_us = us_since(t1);

            const auto t2 = clock::now();
            const RpaDecision decision = rpa(model, mode, *fpad.interval);
            rec.t_rpa_us = us_since(t2);

            rec.delta_a_deg = decision.delta_a_deg;
            rec.clamped = decision.clamped;
            rec.degenerate_load = decision.degenerate_load;
            rec.solver_iterations = decision.iterations;
        }
    } catch (const DomainError&) {
        rec.fail_safe = true;
        rec.delta_a_deg = prev_delta_deg;
        try {
            model = build_tsc_power_model(tsc, base);
        } catch (const DomainError&) {
            return rec;  // model unavailable; powers stay zero
        }
    }

    const auto s1 = model.zso1.evaluate(rec.delta_a_deg);
    const auto s2 = model.zso2.evaluate(rec.delta_a_deg);
    rec.s_n1 = s1.s1;
    rec.s_n2 = s2.s1;
    rec.s_a = s1.s2 + s2.s2;

    const double band = 1e-9 * base.s_base_mva;
    const auto sign_differs = [band](double a, double b) {
        return (a > band && b < -band) || (a < -band && b > band);
    };
    rec.apc_flag = sign_differs(s1.s1.real(), s1.s2.real()) || sign_differs(s2.s1.real(), s2.s2.real());
    rec.min_q_mvar = std::min({s1.s1.imag(), s1.s2.imag(), s2.s1.imag(), s2.s2.imag()});
    return rec;
}

/// Deterministic replay of a whole scenario.
[[nodiscard]] inline SimResult run_simulation(const TscSpec& topo, const Schedule& schedule,
                                              const SimConfig& cfg, const PerUnitBase& base) {
    if (cfg.step_s <= 0.0) throw DomainError("sim: step must be positive");
    SimResult out;
    const int steps = static_cast<int>(std::floor(cfg.duration_s / cfg.step_s + 1e-9)) + 1;
    double prev_delta = 0.0;
    for (int k = 0; k < steps; ++k) {
        const double t = k * cfg.step_s;
        StepRecord rec = sim_step(topo, schedule, cfg, base, k, t, prev_delta);
        prev_delta = rec.delta_a_deg;
        out.records.push_back(std::move(rec));
    }

    // Trapezoidal energy accounting over the recorded step powers.
    const double h = cfg.step_s / 3600.0;
    for (std::size_t k = 1; k < out.records.size(); ++k) {
        const auto& a = out.records[k - 1];
        const auto& b = out.records[k];
        out.energy.n1_mwh += 0.5 * (a.s_n1.real() + b.s_n1.real()) * h;
        out.energy.a_mwh += 0.5 * (a.s_a.real() + b.s_a.real()) * h;
        out.energy.n2_mwh += 0.5 * (a.s_n2.real() + b.s_n2.real()) * h;
    }
    for (const auto& plan : schedule.trains) {
        TrainEnergy e;
        for (std::size_t k = 1; k < out.records.size(); ++k) {
            const auto p_at = [&](const StepRecord& r) {
                const int which = plan.zso;
                const double len = which == 1 ? topo.zso1.length_km() : topo.zso2.length_km();
                return plan.position_km(r.time_s, len) ? plan.power_at(r.time_s).p_mw : 0.0;
            };
            const double pa = p_at(out.records[k - 1]);
            const double pb = p_at(out.records[k]);
            const double de = 0.5 * (pa + pb) * h;
            (de >= 0.0 ? e.consumed_mwh : e.regenerated_mwh) += de;
        }
        out.energy.trains[plan.id] = e;
    }

    auto& s = out.summary;
    s.steps = steps;
    std::vector<double> t_fpad, t_fpdd, t_rpa;
    for (const auto& r : out.records) {
        s.fail_safe_steps += r.fail_safe;
        s.clamped_steps += r.clamped;
        s.empty_fpad_steps += r.fpad_empty;
        t_fpad.push_back(r.t_fpad_us);
        t_fpdd.push_back(r.t_fpdd_us);
        t_rpa.push_back(r.t_rpa_us);
        s.mean_fpad_us += r.t_fpad_us;
        s.mean_fpdd_us += r.t_fpdd_us;
        s.mean_rpa_us += r.t_rpa_us;
    }
    if (steps > 0) {
        s.mean_fpad_us /= steps;
        s.mean_fpdd_us /= steps;
        s.mean_rpa_us /= steps;
    }
    s.median_fpad_us = detail::median(t_fpad);
    s.median_fpdd_us = detail::median(t_fpdd);
    s.median_rpa_us = detail::median(t_rpa);
    return out;
}

// ---------------------------------------------------------------------------
// Record export: deterministic CSV (wall times excluded) + reader.
// ---------------------------------------------------------------------------

inline constexpr const char* records_csv_header =
    "step,time_s,n_trains,state,mode,p1_mw,q1_mvar,p2_mw,q2_mvar,p3_mw,q3_mvar,"
    "delta_a_deg,fpad_empty,fpad_lo_deg,fpad_hi_deg,fpdd_valid,fpdd_k_lo,fpdd_k_hi,"
    "clamped,degenerate_load,apc_flag,min_q_mvar,solver_iterations,fail_safe";

inline void write_records_csv(const std::vector<StepRecord>& records, std::ostream& os) {
    os << "# ftpss records v1\n" << records_csv_header << "\n";
    char buf[640];
    for (const auto& r : records) {
        std::snprintf(buf, sizeof buf,
                      "%d,%.10g,%d,%s,%s,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%d,%.10g,%.10g,%d,"
                      "%.10g,%.10g,%d,%d,%d,%.10g,%d,%d\n",
                      r.step, r.time_s, r.n_trains, to_string(r.state), r.mode.c_str(),
                      r.s_n1.real(), r.s_n1.imag(), r.s_a.real(), r.s_a.imag(), r.s_n2.real(),
                      r.s_n2.imag(), r.delta_a_deg, r.fpad_empty ? 1 : 0, r.fpad_lo_deg, r.fpad_hi_deg,
                      r.fpdd_valid ? 1 : 0, r.fpdd_k_lo, r.fpdd_k_hi, r.clamped ? 1 : 0,
                      r.degenerate_load ? 1 : 0, r.apc_flag ? 1 : 0, r.min_q_mvar,
                      r.solver_iterations, r.fail_safe ? 1 : 0);
        os << buf;
    }
}

inline void write_records_csv(const std::vector<StepRecord>& records, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for write: " + path);
    write_records_csv(records, os);
}

/// Parse a records CSV back (used by the round-trip tests and external
/// consumers of the documented schema).
[[nodiscard]] inline std::vector<StepRecord> read_records_csv(std::istream& is) {
    std::vector<StepRecord> out;
    std::string line;
    bool header_seen = false;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            if (line != records_csv_header)
                throw std::runtime_error("records csv: unexpected header");
            header_seen = true;
            continue;
        }
        std::stringstream ss(line);
        std::string f;
        std::vector<std::string> fields;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        if (fields.size() != 24) throw std::runtime_error("records csv: bad field count");
        StepRecord r;
        int i = 0;
        r.step = std::stoi(fields[i++]);
        r.time_s = std::stod(fields[i++]);
        r.n_trains = std::stoi(fields[i++]);
        r.state = fields[i++] == "traction" ? SystemState::traction : SystemState::braking;
        r.mode = fields[i++];
        const double p1 = std::stod(fields[i++]), q1 = std::stod(fields[i++]);
        const double p2 = std::stod(fields[i++]), q2 = std::stod(fields[i++]);
        const double p3 = std::stod(fields[i++]), q3 = std::stod(fields[i++]);
        r.s_n1 = {p1, q1};
        r.s_a = {p2, q2};
        r.s_n2 = {p3, q3};
        r.delta_a_deg = std::stod(fields[i++]);
        r.fpad_empty = fields[i++] == "1";
        r.fpad_lo_deg = std::stod(fields[i++]);
        r.fpad_hi_deg = std::stod(fields[i++]);
        r.fpdd_valid = fields[i++] == "1";
        r.fpdd_k_lo = std::stod(fields[i++]);
        r.fpdd_k_hi = std::stod(fields[i++]);
        r.clamped = fields[i++] == "1";
        r.degenerate_load = fields[i++] == "1";
        r.apc_flag = fields[i++] == "1";
        r.min_q_mvar = std::stod(fields[i++]);
        r.solver_iterations = std::stoi(fields[i++]);
        r.fail_safe = fields[i++] == "1";
        out.push_back(std::move(r));
    }
    return out;
}

[[nodiscard]] inline std::vector<StepRecord> read_records_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open: " + path);
    return read_records_csv(is);
}

} // namespace ftpss
