#pragma once

// Scenario document I/O. One JSON file describes the cluster topology, an
// optional static train snapshot (used by the one-shot CLI queries), an
// optional schedule plus simulation config, and the constraint mode. The
// schema is documented in docs/file-formats.md.

#include <fstream>
#include <optional>
#include <string>

#include <json.hpp>

#include "ftpss/dispatch.hpp"
#include "ftpss/model.hpp"
#include "ftpss/sim.hpp"

namespace ftpss {

class ScenarioError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Scenario {
    PerUnitBase base;
    TscSpec tsc;  ///< topology with the static snapshot trains placed
    ConstraintMode constraint = ConstraintMode::strict;
    Schedule schedule;
    SimConfig sim;
    bool has_schedule = false;
    bool has_sim = false;
};

namespace io_detail {

using nlohmann::json;

[[nodiscard]] inline Complex parse_impedance(const json& j, const std::string& where) {
    if (!j.is_object() || !j.contains("r") || !j.contains("x"))
        throw ScenarioError(where + ": expected {\"r\": ..., \"x\": ...}");
    return {j.at("r").get<double>(), j.at("x").get<double>()};
}

[[nodiscard]] inline Track parse_track(const json& j, const std::string& where) {
    const auto s = j.get<std::string>();
    if (s == "up") return Track::up;
    if (s == "down") return Track::down;
    throw ScenarioError(where + ": track must be \"up\" or \"down\"");
}

[[nodiscard]] inline TrainLoad parse_snapshot_train(const json& j, const std::string& where) {
    TrainLoad t;
    t.id = j.value("id", "train");
    if (!j.contains("l1_km")) throw ScenarioError(where + ": missing l1_km");
    t.l1_km = j.at("l1_km").get<double>();
    t.power = {j.value("p_mw", 0.0), j.value("q_mvar", 0.0)};
    t.z_t_ohm = j.contains("z_t_ohm") ? parse_impedance(j.at("z_t_ohm"), where + ".z_t_ohm")
                                      : Complex{1000.0, 0.0};
    t.track = j.contains("track") ? parse_track(j.at("track"), where) : Track::up;
    return t;
}

[[nodiscard]] inline DispatchMode parse_mode(const json& j, const std::string& where) {
    const auto name = j.value("mode", "");
    if (name == "pdm") {
        PdmMode m;
        if (!j.contains("k_target")) throw ScenarioError(where + ": pdm requires k_target");
        m.k_target = j.at("k_target").get<double>();
        const auto scope = j.value("scope", "tsc");
        if (scope == "tsc") m.scope = DispatchScope::tsc;
        else if (scope == "zso1") m.scope = DispatchScope::zso1;
        else if (scope == "zso2") m.scope = DispatchScope::zso2;
        else throw ScenarioError(where + ": scope must be tsc, zso1 or zso2");
        return m;
    }
    if (name == "cpm") {
        if (!j.contains("p_ref_mw")) throw ScenarioError(where + ": cpm requires p_ref_mw");
        return CpmMode{j.at("p_ref_mw").get<double>()};
    }
    if (name == "mcm") return McmMode{};
    throw ScenarioError(where + ": mode must be pdm, cpm or mcm");
}

} // namespace io_detail

[[nodiscard]] inline Scenario parse_scenario(const nlohmann::json& j) {
    using io_detail::json;
    Scenario sc;
    try {
        if (j.contains("base")) {
            sc.base.s_base_mva = j.at("base").value("s_base_mva", 100.0);
            sc.base.v_base_kv = j.at("base").value("v_base_kv", 27.5);
        }
        if (!sc.base.valid()) throw ScenarioError("base: values must be positive");

        if (!j.contains("topology")) throw ScenarioError("missing topology");
        const json& topo = j.at("topology");
        const double u_n = topo.value("u_n_kv", 27.5);
        const double length = topo.value("zso_length_km", 40.0);
        LineImpedance z0;
        if (topo.contains("z0_ohm_per_km")) {
            const Complex z = io_detail::parse_impedance(topo.at("z0_ohm_per_km"), "topology.z0_ohm_per_km");
            z0 = {z.real(), z.imag()};
        }

        MsoSpec proto;
        proto.length_km = length;
        proto.z0 = z0;
        proto.left = {StationKind::nts, u_n};
        proto.right = {StationKind::ats, u_n};
        sc.tsc.zso1.up = proto;
        sc.tsc.zso1.down = proto;
        proto.left = {StationKind::ats, u_n};
        proto.right = {StationKind::nts, u_n};
        sc.tsc.zso2.up = proto;
        sc.tsc.zso2.down = proto;

        if (topo.contains("delta_limits_deg")) {
            const auto& d = topo.at("delta_limits_deg");
            if (!d.is_array() || d.size() != 2)
                throw ScenarioError("topology.delta_limits_deg: expected [lo, hi]");
            sc.tsc.delta_limits = {d[0].get<double>(), d[1].get<double>()};
        }
        sc.tsc.alpha_margin = topo.value("alpha_margin", 0.95);
        sc.tsc.q_cir_max_mvar = topo.value("q_cir_max_mvar", 0.2);

        if (j.contains("constraint")) {
            const auto c = j.at("constraint").get<std::string>();
            if (c == "strict") sc.constraint = ConstraintMode::strict;
            else if (c == "relaxed") sc.constraint = ConstraintMode::relaxed;
            else throw ScenarioError("constraint: must be \"strict\" or \"relaxed\"");
        }

        if (j.contains("trains")) {
            int idx = 0;
            for (const auto& tj : j.at("trains")) {
                const std::string where = "trains[" + std::to_string(idx++) + "]";
                TrainLoad t = io_detail::parse_snapshot_train(tj, where);
                const int zso = tj.value("zso", 1);
                if (zso != 1 && zso != 2) throw ScenarioError(where + ": zso must be 1 or 2");
                ZsoSpec& z = zso == 1 ? sc.tsc.zso1 : sc.tsc.zso2;
                (t.track == Track::up ? z.up.trains : z.down.trains).push_back(t);
            }
        }

        if (j.contains("schedule")) {
            sc.has_schedule = true;
            int idx = 0;
            for (const auto& pj : j.at("schedule")) {
                const std::string where = "schedule[" + std::to_string(idx++) + "]";
                TrainPlan p;
                p.id = pj.value("id", "train" + std::to_string(idx));
                p.zso = pj.value("zso", 1);
                if (p.zso != 1 && p.zso != 2) throw ScenarioError(where + ": zso must be 1 or 2");
                p.track = pj.contains("track") ? io_detail::parse_track(pj.at("track"), where) : Track::up;
                p.entry_time_s = pj.value("entry_time_s", 0.0);
                const auto dir = pj.value("direction", "forward");
                if (dir == "forward") p.direction = TravelDirection::forward;
                else if (dir == "reverse") p.direction = TravelDirection::reverse;
                else throw ScenarioError(where + ": direction must be forward or reverse");
                p.speed_kmh = pj.value("speed_kmh", 300.0);
                if (!(p.speed_kmh > 0.0)) throw ScenarioError(where + ": speed must be positive");
                p.z_t_ohm = pj.contains("z_t_ohm")
                                ? io_detail::parse_impedance(pj.at("z_t_ohm"), where + ".z_t_ohm")
                                : Complex{1000.0, 0.0};
                if (!pj.contains("profile") || pj.at("profile").empty())
                    throw ScenarioError(where + ": profile requires at least one segment");
                double prev = -1e300;
                for (const auto& sj : pj.at("profile")) {
                    PowerSegment seg;
                    seg.from_s = sj.value("from_s", 0.0);
                    if (seg.from_s <= prev)
                        throw ScenarioError(where + ".profile: segments must be strictly increasing");
                    prev = seg.from_s;
                    seg.power = {sj.value("p_mw", 0.0), sj.value("q_mvar", 0.0)};
                    p.profile.push_back(seg);
                }
                sc.schedule.trains.push_back(std::move(p));
            }
        }

        if (j.contains("sim")) {
            sc.has_sim = true;
            const json& s = j.at("sim");
            sc.sim.step_s = s.value("step_s", 1.0);
            if (!(sc.sim.step_s > 0.0)) throw ScenarioError("sim.step_s: must be positive");
            sc.sim.duration_s = s.value("duration_s", 60.0);
            sc.sim.constraint = sc.constraint;
            if (!s.contains("modes") || s.at("modes").empty())
                throw ScenarioError("sim.modes: at least one mode entry required");
            double prev = -1e300;
            int idx = 0;
            for (const auto& mj : s.at("modes")) {
                const std::string where = "sim.modes[" + std::to_string(idx++) + "]";
                ModeChange mc;
                mc.from_s = mj.value("from_s", 0.0);
                if (mc.from_s <= prev) throw ScenarioError(where + ": from_s must increase");
                prev = mc.from_s;
                mc.mode = io_detail::parse_mode(mj, where);
                sc.sim.modes.push_back(std::move(mc));
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ScenarioError(std::string("scenario parse: ") + e.what());
    }

    const auto violations = validate_topology(sc.tsc);
    if (has_errors(violations)) {
        std::string msg = "scenario validation failed:";
        for (const auto& v : violations)
            if (!v.warning) msg += " [" + v.field + ": " + v.rule + "]";
        throw ScenarioError(msg);
    }
    return sc;
}

[[nodiscard]] inline Scenario load_scenario(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ScenarioError("cannot open scenario file: " + path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ScenarioError(std::string("scenario json: ") + e.what());
    }
    return parse_scenario(j);
}

/// PowerFunction coefficient dump (debugging aid exposed by the CLI).
[[nodiscard]] inline nlohmann::json power_function_json(const PowerFunction& pf) {
    nlohmann::json out;
    out["u_n_kv"] = pf.u_n_kv;
    out["n_trains"] = pf.n_trains;
    out["mirrored"] = pf.mirrored;
    const auto dump_terms = [](const std::vector<PowerFunctionTerm>& terms) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& t : terms) {
            arr.push_back({{"a_re", t.a.real()},
                           {"a_im", t.a.imag()},
                           {"b1", t.b1},
                           {"b2_rad", t.b2},
                           {"c_re", t.c.real()},
                           {"c_im", t.c.imag()}});
        }
        return arr;
    };
    out["station1"] = dump_terms(pf.station1);
    out["station2"] = dump_terms(pf.station2);
    return out;
}

} // namespace ftpss
