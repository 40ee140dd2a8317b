#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "ftpss/powerflow.hpp"
#include "ftpss/scenario_io.hpp"
#include "ftpss/sim.hpp"
#include "helpers.hpp"

using namespace ftpss;
using namespace ftpss::testing;

namespace {

const PerUnitBase pu_base;

std::string fixture(const char* name) {
    return std::string(FTPSS_FIXTURE_DIR) + "/" + name;
}

SimConfig basic_config(double duration = 10.0) {
    SimConfig cfg;
    cfg.step_s = 1.0;
    cfg.duration_s = duration;
    cfg.constraint = ConstraintMode::relaxed;
    cfg.modes.push_back({0.0, McmMode{}});
    return cfg;
}

} // namespace

TEST_CASE("train plan kinematics") {
    TrainPlan plan;
    plan.entry_time_s = 0.0;
    plan.speed_kmh = 300.0;
    plan.direction = TravelDirection::forward;
    SUBCASE("a 300 km/h train occupies a 40 km section for 480 s") {
        CHECK_FALSE(plan.position_km(0.0, 40.0).has_value());  // still at the portal
        CHECK(plan.position_km(1.0, 40.0).has_value());
        CHECK(plan.position_km(479.0, 40.0).has_value());
        CHECK_FALSE(plan.position_km(480.0, 40.0).has_value());
        CHECK(*plan.position_km(240.0, 40.0) == doctest::Approx(20.0));
    }
    SUBCASE("reverse direction mirrors the run") {
        plan.direction = TravelDirection::reverse;
        CHECK(*plan.position_km(120.0, 40.0) == doctest::Approx(30.0));
    }
    SUBCASE("piecewise power profile") {
        plan.profile = {{0.0, {4.0, 0.5}}, {100.0, {-4.0, 0.5}}};
        CHECK(plan.power_at(50.0).p_mw == 4.0);
        CHECK(plan.power_at(100.0).p_mw == -4.0);
        CHECK(plan.power_at(-10.0).p_mw == 4.0);  // before the first segment
    }
}

TEST_CASE("empty schedule runs with zero trains every step") {
    const TscSpec topo = make_tsc();
    const Schedule schedule;
    const auto result = run_simulation(topo, schedule, basic_config(), pu_base);
    REQUIRE(result.records.size() == 11);
    for (const auto& r : result.records) {
        CHECK(r.n_trains == 0);
        CHECK(r.delta_a_deg == 0.0);
        CHECK(std::abs(r.s_a) < 1e-9);
    }
}

TEST_CASE("symmetric load under distribution tracking holds the reference angle") {
    TscSpec topo = make_tsc();
    Schedule schedule;
    for (int z : {1, 2}) {
        TrainPlan p;
        p.id = "t" + std::to_string(z);
        p.zso = z;
        p.entry_time_s = -240.0;  // midway at t=0
        p.speed_kmh = 300.0;
        p.profile = {{-300.0, {4.0, 0.5}}};
        schedule.trains.push_back(p);
    }
    SimConfig cfg = basic_config(3.0);
    cfg.modes = {{0.0, PdmMode{1.0, DispatchScope::tsc}}};
    const auto result = run_simulation(topo, schedule, cfg, pu_base);
    for (const auto& r : result.records) {
        REQUIRE_FALSE(r.fail_safe);
        CHECK(std::abs(r.delta_a_deg) < 0.05);
    }
}

TEST_CASE("recorded angle lies in the recorded domain") {
    const Scenario sc = load_scenario(fixture("tsc_demo.json"));
    const auto result = run_simulation(sc.tsc, sc.schedule, sc.sim, sc.base);
    for (const auto& r : result.records) {
        if (r.fail_safe || r.fpad_empty) continue;
        CHECK(r.delta_a_deg >= r.fpad_lo_deg - 1e-12);
        CHECK(r.delta_a_deg <= r.fpad_hi_deg + 1e-12);
    }
    CHECK(result.summary.fail_safe_steps == 0);
}

TEST_CASE("strict runs show no circulation indicators") {
    Scenario sc = load_scenario(fixture("tsc_demo.json"));
    sc.sim.constraint = ConstraintMode::strict;
    const auto result = run_simulation(sc.tsc, sc.schedule, sc.sim, sc.base);
    for (const auto& r : result.records) {
        if (r.fail_safe) continue;
        CHECK_FALSE(r.apc_flag);
        CHECK(r.min_q_mvar >= -1e-4);
    }
}

TEST_CASE("relaxed runs stay within the circulation allowance") {
    const Scenario sc = load_scenario(fixture("tsc_demo.json"));
    const auto result = run_simulation(sc.tsc, sc.schedule, sc.sim, sc.base);
    for (const auto& r : result.records) {
        if (r.fail_safe) continue;
        CHECK_FALSE(r.apc_flag);
        CHECK(r.min_q_mvar >= -sc.tsc.q_cir_max_mvar - 1e-4);
    }
}

TEST_CASE("per-train energy split matches the schedule phases") {
    const Scenario sc = load_scenario(fixture("tsc_demo.json"));
    const auto result = run_simulation(sc.tsc, sc.schedule, sc.sim, sc.base);
    REQUIRE(result.energy.trains.size() == 4);
    for (const auto& [id, e] : result.energy.trains) {
        CHECK(e.consumed_mwh > 0.0);     // traction phases
        CHECK(e.regenerated_mwh < 0.0);  // the braking window, signed
    }
}

TEST_CASE("PDM window of the demo tracks the coefficient setpoint") {
    const Scenario sc = load_scenario(fixture("tsc_demo.json"));
    const auto result = run_simulation(sc.tsc, sc.schedule, sc.sim, sc.base);
    int pdm_steps = 0;
    for (const auto& r : result.records) {
        if (r.mode != "pdm" || r.fail_safe || r.fpad_empty || r.clamped) continue;
        ++pdm_steps;
        const double k = r.s_a.real() / (r.s_n1.real() + r.s_n2.real());
        CHECK(k == doctest::Approx(1.5).epsilon(1e-4));
    }
    CHECK(pdm_steps > 0);
}

TEST_CASE("recorded station energies replay against the power-flow oracle") {
    const Scenario sc = load_scenario(fixture("tsc_demo.json"));
    const auto result = run_simulation(sc.tsc, sc.schedule, sc.sim, sc.base);
    double a = 0.0, n1 = 0.0, n2 = 0.0;
    std::vector<Complex> oa(result.records.size()), on1(result.records.size()),
        on2(result.records.size());
    for (std::size_t k = 0; k < result.records.size(); ++k) {
        const auto& r = result.records[k];
        const TscSpec at = materialize_trains(sc.tsc, sc.schedule, r.time_s);
        const TscOracle oracle(at, sc.base);
        const auto o = oracle.powers(r.delta_a_deg);
        oa[k] = o.a_total();
        on1[k] = o.n1;
        on2[k] = o.n2;
    }
    const double h = sc.sim.step_s / 3600.0;
    for (std::size_t k = 1; k < result.records.size(); ++k) {
        a += 0.5 * (oa[k - 1].real() + oa[k].real()) * h;
        n1 += 0.5 * (on1[k - 1].real() + on1[k].real()) * h;
        n2 += 0.5 * (on2[k - 1].real() + on2[k].real()) * h;
    }
    // model-vs-oracle power error integrates to at most bound * duration
    const double tol_mwh = 2.0e-3 * sc.base.s_base_mva * sc.sim.duration_s / 3600.0;
    CHECK(std::abs(result.energy.a_mwh - a) <= tol_mwh);
    CHECK(std::abs(result.energy.n1_mwh - n1) <= tol_mwh);
    CHECK(std::abs(result.energy.n2_mwh - n2) <= tol_mwh);
}

TEST_CASE("empty run exports a header-only record file") {
    std::ostringstream os;
    write_records_csv({}, os);
    const std::string text = os.str();
    CHECK(text.find(records_csv_header) != std::string::npos);
    CHECK(std::count(text.begin(), text.end(), '\n') == 2);  // comment + header
    std::stringstream ss(text);
    CHECK(read_records_csv(ss).empty());
}

TEST_CASE("energy ledger equals the trapezoidal integral of the records") {
    const Scenario sc = load_scenario(fixture("tsc_demo.json"));
    const auto result = run_simulation(sc.tsc, sc.schedule, sc.sim, sc.base);
    double a = 0.0, n1 = 0.0, n2 = 0.0;
    const double h = sc.sim.step_s / 3600.0;
    for (std::size_t k = 1; k < result.records.size(); ++k) {
        a += 0.5 * (result.records[k - 1].s_a.real() + result.records[k].s_a.real()) * h;
        n1 += 0.5 * (result.records[k - 1].s_n1.real() + result.records[k].s_n1.real()) * h;
        n2 += 0.5 * (result.records[k - 1].s_n2.real() + result.records[k].s_n2.real()) * h;
    }
    CHECK(result.energy.a_mwh == doctest::Approx(a).epsilon(1e-9));
    CHECK(result.energy.n1_mwh == doctest::Approx(n1).epsilon(1e-9));
    CHECK(result.energy.n2_mwh == doctest::Approx(n2).epsilon(1e-9));
}

TEST_CASE("deterministic replay produces identical exports") {
    const Scenario sc = load_scenario(fixture("tsc_demo.json"));
    const auto a = run_simulation(sc.tsc, sc.schedule, sc.sim, sc.base);
    const auto b = run_simulation(sc.tsc, sc.schedule, sc.sim, sc.base);
    std::ostringstream csv_a, csv_b;
    write_records_csv(a.records, csv_a);
    write_records_csv(b.records, csv_b);
    CHECK(csv_a.str() == csv_b.str());
}

TEST_CASE("records survive a CSV round trip") {
    const Scenario sc = load_scenario(fixture("tsc_demo.json"));
    const auto result = run_simulation(sc.tsc, sc.schedule, sc.sim, sc.base);
    std::stringstream ss;
    write_records_csv(result.records, ss);
    const auto parsed = read_records_csv(ss);
    REQUIRE(parsed.size() == result.records.size());
    for (std::size_t i = 0; i < parsed.size(); ++i) {
        CHECK(parsed[i].step == result.records[i].step);
        CHECK(parsed[i].mode == result.records[i].mode);
        CHECK(parsed[i].delta_a_deg ==
              doctest::Approx(result.records[i].delta_a_deg).epsilon(1e-9));
        CHECK(parsed[i].s_a.real() == doctest::Approx(result.records[i].s_a.real()).epsilon(1e-9));
        CHECK(parsed[i].fail_safe == result.records[i].fail_safe);
    }
}

TEST_CASE("per-step failure degrades to a hold of the previous angle") {
    TscSpec topo = make_tsc();
    Schedule schedule;
    TrainPlan p;
    p.id = "mid";
    p.zso = 1;
    p.entry_time_s = -240.0;
    p.speed_kmh = 300.0;
    // an absurd power spike at t in [4, 6) drives the closed form past the
    // voltage-collapse discriminant
    p.profile = {{-300.0, {4.0, 0.5}}, {4.0, {300.0, 0.0}}, {6.0, {4.0, 0.5}}};
    schedule.trains.push_back(p);
    TrainPlan q = p;
    q.id = "other";
    q.zso = 2;
    q.profile = {{-300.0, {4.0, 0.5}}};
    schedule.trains.push_back(q);

    SimConfig cfg = basic_config(10.0);
    const auto result = run_simulation(topo, schedule, cfg, pu_base);
    bool saw_fail = false;
    double before = 0.0;
    for (std::size_t i = 0; i < result.records.size(); ++i) {
        const auto& r = result.records[i];
        if (r.fail_safe) {
            saw_fail = true;
            CHECK(r.delta_a_deg == before);
        } else {
            before = r.delta_a_deg;
        }
    }
    CHECK(saw_fail);
    CHECK(result.summary.fail_safe_steps >= 2);
}

TEST_CASE("scenario loading") {
    SUBCASE("fixture parses to the documented train counts") {
        const Scenario sc = load_scenario(fixture("tsc_demo.json"));
        CHECK(sc.schedule.trains.size() == 4);
        CHECK(sc.tsc.all_trains().size() == 4);
        CHECK(sc.has_sim);
        CHECK(sc.constraint == ConstraintMode::relaxed);
        REQUIRE(sc.sim.modes.size() == 3);
        CHECK(mode_name(sc.sim.modes[0].mode) == "pdm");
        CHECK(mode_name(sc.sim.modes[2].mode) == "mcm");
    }
    SUBCASE("missing files and malformed documents raise scenario errors") {
        CHECK_THROWS_AS((void)load_scenario("/nonexistent/file.json"), ScenarioError);
        CHECK_THROWS_AS((void)parse_scenario(nlohmann::json{{"base", {{"s_base_mva", 100.0}}}}),
                        ScenarioError);  // no topology
    }
    SUBCASE("out-of-range train positions fail validation at load") {
        nlohmann::json j = {{"topology", {{"zso_length_km", 40.0}}},
                            {"trains", {{{"id", "x"}, {"zso", 1}, {"l1_km", 45.0}}}}};
        CHECK_THROWS_AS((void)parse_scenario(j), ScenarioError);
    }
    SUBCASE("profile segments must increase") {
        nlohmann::json j = {
            {"topology", {{"zso_length_km", 40.0}}},
            {"schedule",
             {{{"id", "x"},
               {"zso", 1},
               {"entry_time_s", 0.0},
               {"profile", {{{"from_s", 10.0}, {"p_mw", 1.0}}, {{"from_s", 5.0}, {"p_mw", 2.0}}}}}}}};
        CHECK_THROWS_AS((void)parse_scenario(j), ScenarioError);
    }
}

TEST_CASE("power function coefficient dump is well formed") {
    TscSpec tsc = make_tsc();
    tsc.zso1.up.trains.push_back(make_train("a", 10.0, 4.0, 0.5));
    const auto model = build_tsc_power_model(tsc, pu_base);
    const auto j = power_function_json(model.zso1);
    CHECK(j.at("n_trains") == 1);
    CHECK(j.at("station1").size() == 2);
    CHECK(j.at("station2").size() == 2);
    CHECK_FALSE(j.at("mirrored").get<bool>());
}
