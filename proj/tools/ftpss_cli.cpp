// Command-line front end: feasible-domain queries, dispatch solves, scenario
// simulation, model-vs-oracle verification and benchmarking.
//
// Exit codes: 0 success, 1 usage/input error, 2 domain error (empty feasible
// domain, solver divergence). Errors are emitted as JSON on stderr.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string_view>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ftpss/ftpss.hpp"

namespace {

using nlohmann::json;
using namespace ftpss;

// FTPSS_LOG=debug enables progress notes on stderr.
bool log_enabled() {
    static const bool on = [] {
        const char* v = std::getenv("FTPSS_LOG");
        return v && (std::string_view(v) == "debug" || std::string_view(v) == "info");
    }();
    return on;
}

void log_note(const std::string& msg) {
    if (log_enabled()) std::cerr << "[ftpss] " << msg << "\n";
}

struct CommonOpts {
    std::string scenario_path;
    std::string constraint_override;
    double alpha_override = -1.0;
    double q_cir_override = -1.0;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--scenario", opts.scenario_path, "scenario JSON file")->required();
    cmd->add_option("--constraint", opts.constraint_override, "override constraint mode")
        ->check(CLI::IsMember({"strict", "relaxed"}));
    cmd->add_option("--alpha", opts.alpha_override, "override adjustment margin");
    cmd->add_option("--q-cir-max", opts.q_cir_override, "override permissible RPC (MVar)");
}

Scenario load_with_overrides(const CommonOpts& opts) {
    Scenario sc = load_scenario(opts.scenario_path);
    if (opts.constraint_override == "strict") sc.constraint = ConstraintMode::strict;
    if (opts.constraint_override == "relaxed") sc.constraint = ConstraintMode::relaxed;
    if (opts.alpha_override >= 0.0) sc.tsc.alpha_margin = opts.alpha_override;
    if (opts.q_cir_override >= 0.0) sc.tsc.q_cir_max_mvar = opts.q_cir_override;
    sc.sim.constraint = sc.constraint;
    log_note("scenario " + opts.scenario_path + ": " +
             std::to_string(sc.tsc.all_trains().size()) + " snapshot trains, " +
             std::to_string(sc.schedule.trains.size()) + " scheduled, constraint " +
             to_string(sc.constraint));
    return sc;
}

json interval_json(const std::optional<AngleInterval>& iv) {
    if (!iv) return nullptr;
    return json{{"lo_deg", iv->lo_deg}, {"hi_deg", iv->hi_deg}};
}

json component_json(const ComponentInterval& c) {
    return json{{"lo_deg", c.lo_deg},
                {"hi_deg", c.hi_deg},
                {"lo_binds", to_string(c.lo_src)},
                {"hi_binds", to_string(c.hi_src)},
                {"empty", c.empty}};
}

json mso_fpad_json(const MsoFpadResult& r) {
    return json{{"interval", interval_json(r.interval)},
                {"unmargined", interval_json(r.unmargined)},
                {"apc", component_json(r.apc)},
                {"rpc", component_json(r.rpc)},
                {"alpha", r.alpha}};
}

json tsc_fpad_json(const TscFpadResult& r) {
    return json{{"interval", interval_json(r.interval)},
                {"empty", !r.interval.has_value()},
                {"state", to_string(r.state)},
                {"zso1", mso_fpad_json(r.zso1)},
                {"zso2", mso_fpad_json(r.zso2)}};
}

int cmd_fpad(const CommonOpts& opts, const std::string& dump_path) {
    const Scenario sc = load_with_overrides(opts);
    const auto model = build_tsc_power_model(sc.tsc, sc.base);
    const auto result = tsc_fpad(sc.tsc, model, sc.constraint);

    if (!dump_path.empty()) {
        json dump{{"zso1", power_function_json(model.zso1)}, {"zso2", power_function_json(model.zso2)}};
        std::ofstream os(dump_path);
        os << dump.dump(2) << "\n";
    }

    std::cout << tsc_fpad_json(result).dump(2) << std::endl;
    if (!result.interval) {
        std::cerr << json{{"error", "empty feasible phase angle domain"}, {"kind", "domain"}}.dump()
                  << std::endl;
        return 2;
    }
    return 0;
}

int cmd_fpdd(const CommonOpts& opts, const std::string& scope_name) {
    const Scenario sc = load_with_overrides(opts);
    const auto model = build_tsc_power_model(sc.tsc, sc.base);
    const auto fp = tsc_fpad(sc.tsc, model, sc.constraint);
    if (!fp.interval) {
        std::cerr << json{{"error", "empty feasible phase angle domain"}, {"kind", "domain"}}.dump()
                  << std::endl;
        return 2;
    }
    DispatchScope scope = DispatchScope::tsc;
    if (scope_name == "zso1") scope = DispatchScope::zso1;
    if (scope_name == "zso2") scope = DispatchScope::zso2;
    const Fpdd range = fpdd(model, scope, *fp.interval);
    json out{{"scope", scope_name},
             {"k_lo", range.k_lo},
             {"k_hi", range.k_hi},
             {"lo_open", range.lo_open},
             {"hi_open", range.hi_open},
             {"increasing", range.increasing},
             {"fpad", interval_json(fp.interval)}};
    std::cout << out.dump(2) << std::endl;
    return 0;
}

int cmd_rpa(const CommonOpts& opts, const std::string& mode_name_arg, double k_target,
            const std::string& scope_name, double p_ref) {
    const Scenario sc = load_with_overrides(opts);
    const auto model = build_tsc_power_model(sc.tsc, sc.base);
    const auto fp = tsc_fpad(sc.tsc, model, sc.constraint);
    if (!fp.interval) {
        std::cerr << json{{"error", "empty feasible phase angle domain"}, {"kind", "domain"}}.dump()
                  << std::endl;
        return 2;
    }

    DispatchMode mode = McmMode{};
    if (mode_name_arg == "pdm") {
        PdmMode m;
        m.k_target = k_target;
        m.scope = scope_name == "zso1"   ? DispatchScope::zso1
                  : scope_name == "zso2" ? DispatchScope::zso2
                                         : DispatchScope::tsc;
        mode = m;
    } else if (mode_name_arg == "cpm") {
        mode = CpmMode{p_ref};
    }

    const RpaDecision d = rpa(model, mode, *fp.interval);
    const auto s1 = model.zso1.evaluate(d.delta_a_deg);
    const auto s2 = model.zso2.evaluate(d.delta_a_deg);
    json out{{"mode", mode_name_arg},
             {"delta_a_deg", d.delta_a_deg},
             {"clamped", d.clamped},
             {"degenerate_load", d.degenerate_load},
             {"residual_pu", d.residual_pu},
             {"iterations", d.iterations},
             {"fpad", interval_json(fp.interval)},
             {"achieved",
              {{"p1_mw", s1.s1.real()},
               {"p2_mw", s1.s2.real() + s2.s2.real()},
               {"p3_mw", s2.s1.real()},
               {"q1_mvar", s1.s1.imag()},
               {"q2_mvar", s1.s2.imag() + s2.s2.imag()},
               {"q3_mvar", s2.s1.imag()}}}};
    std::cout << out.dump(2) << std::endl;
    return 0;
}

int cmd_simulate(const CommonOpts& opts, const std::string& out_dir, const std::string& dump_path) {
    Scenario sc = load_with_overrides(opts);
    if (!sc.has_schedule || !sc.has_sim)
        throw ScenarioError("simulate requires \"schedule\" and \"sim\" sections");

    const SimResult result = run_simulation(sc.tsc, sc.schedule, sc.sim, sc.base);
    log_note("simulated " + std::to_string(result.summary.steps) + " steps");

    std::filesystem::create_directories(out_dir);
    write_records_csv(result.records, out_dir + "/records.csv");

    json trains = json::object();
    for (const auto& [id, e] : result.energy.trains)
        trains[id] = {{"consumed_mwh", e.consumed_mwh}, {"regenerated_mwh", e.regenerated_mwh}};
    json summary{
        {"steps", result.summary.steps},
        {"fail_safe_steps", result.summary.fail_safe_steps},
        {"clamped_steps", result.summary.clamped_steps},
        {"empty_fpad_steps", result.summary.empty_fpad_steps},
        {"energy_mwh",
         {{"n_ts1", result.energy.n1_mwh}, {"a_ts", result.energy.a_mwh}, {"n_ts2", result.energy.n2_mwh}}},
        {"train_energy", trains},
        {"timing_us",
         {{"fpad_mean", result.summary.mean_fpad_us},
          {"fpad_median", result.summary.median_fpad_us},
          {"fpdd_mean", result.summary.mean_fpdd_us},
          {"fpdd_median", result.summary.median_fpdd_us},
          {"rpa_mean", result.summary.mean_rpa_us},
          {"rpa_median", result.summary.median_rpa_us}}}};
    {
        std::ofstream os(out_dir + "/summary.json");
        os << summary.dump(2) << "\n";
    }

    if (!dump_path.empty()) {
        const TscSpec at0 = materialize_trains(sc.tsc, sc.schedule, 0.0);
        const auto model = build_tsc_power_model(at0, sc.base);
        json dump{{"zso1", power_function_json(model.zso1)}, {"zso2", power_function_json(model.zso2)}};
        std::ofstream os(dump_path);
        os << dump.dump(2) << "\n";
    }

    std::cout << summary.dump(2) << std::endl;
    return 0;
}

int cmd_verify(const CommonOpts& opts, int grid, const std::string& out_dir) {
    const Scenario sc = load_with_overrides(opts);
    const auto model = build_tsc_power_model(sc.tsc, sc.base);
    const TscOracle oracle(sc.tsc, sc.base);

    std::ofstream csv;
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        csv.open(out_dir + "/verify.csv");
        csv << "delta_deg,p1_model,q1_model,p2_model,q2_model,p3_model,q3_model,"
               "p1_oracle,q1_oracle,p2_oracle,q2_oracle,p3_oracle,q3_oracle,max_err_pu\n";
    }

    double max_err_pu = 0.0;
    double worst_balance = 0.0;
    int nr_iter_max = 0;
    const auto& dom = sc.tsc.delta_limits;
    for (int i = 0; i < grid; ++i) {
        const double d = dom.lo_deg + (dom.hi_deg - dom.lo_deg) * i / (grid - 1);
        const auto m1 = model.zso1.evaluate(d);
        const auto m2 = model.zso2.evaluate(d);
        const auto o = oracle.powers(d);
        const auto bal = conservation_check(o.net, o.sol, sc.base);
        worst_balance = std::max({worst_balance, std::abs(bal.dp_pu), std::abs(bal.dq_pu)});
        nr_iter_max = std::max(nr_iter_max, o.sol.iterations);
        const double err =
            std::max({std::abs(m1.s1 - o.n1), std::abs(m1.s2 - o.a_zso1), std::abs(m2.s2 - o.a_zso2),
                      std::abs(m2.s1 - o.n2)}) /
            sc.base.s_base_mva;
        max_err_pu = std::max(max_err_pu, err);
        if (csv.is_open()) {
            char buf[512];
            std::snprintf(buf, sizeof buf,
                          "%.6f,%.8f,%.8f,%.8f,%.8f,%.8f,%.8f,%.8f,%.8f,%.8f,%.8f,%.8f,%.8f,%.3e\n", d,
                          m1.s1.real(), m1.s1.imag(), m1.s2.real() + m2.s2.real(),
                          m1.s2.imag() + m2.s2.imag(), m2.s1.real(), m2.s1.imag(), o.n1.real(),
                          o.n1.imag(), o.a_total().real(), o.a_total().imag(), o.n2.real(), o.n2.imag(),
                          err);
            csv << buf;
        }
    }

    json out{{"grid", grid},
             {"max_station_power_error_pu", max_err_pu},
             {"worst_conservation_residual_pu", worst_balance},
             {"nr_iterations_max", nr_iter_max}};
    std::cout << out.dump(2) << std::endl;
    return 0;
}

struct TimingStats {
    double median_ms = 0.0, p10_ms = 0.0, p90_ms = 0.0;
};

template <typename F>
TimingStats time_stage(int reps, F&& fn) {
    std::vector<double> ms;
    ms.reserve(reps);
    for (int i = 0; i < reps; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
    }
    std::sort(ms.begin(), ms.end());
    TimingStats s;
    s.median_ms = ms[ms.size() / 2];
    s.p10_ms = ms[static_cast<std::size_t>(0.1 * (ms.size() - 1))];
    s.p90_ms = ms[static_cast<std::size_t>(0.9 * (ms.size() - 1))];
    return s;
}

json stats_json(const TimingStats& s) {
    return json{{"median_ms", s.median_ms}, {"p10_ms", s.p10_ms}, {"p90_ms", s.p90_ms}};
}

// Bisection at the benchmark tolerance (1e-8 p.u. on a 100 MVA base).
double powerflow_bisect_for_bench(const ftpss::OracleCurve& f, double a, double b, double fa) {
    const double tol_mva = 1e-6;
    for (int i = 0; i < 200 && b - a > 1e-9; ++i) {
        const double mid = 0.5 * (a + b);
        const double fm = f(mid);
        if (std::abs(fm) <= tol_mva) return mid;
        if ((fa < 0.0) == (fm < 0.0)) {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    return 0.5 * (a + b);
}

int cmd_bench(const CommonOpts& opts, int reps) {
    const Scenario sc = load_with_overrides(opts);
    const auto model = build_tsc_power_model(sc.tsc, sc.base);
    const auto fp = tsc_fpad(sc.tsc, model, sc.constraint);
    if (!fp.interval) {
        std::cerr << json{{"error", "empty feasible phase angle domain"}, {"kind", "domain"}}.dump()
                  << std::endl;
        return 2;
    }

    // Unclamped dispatch targets taken from the feasible midpoint.
    const double mid = fp.interval->midpoint();
    const double p_ref = detail::scope_powers(model, DispatchScope::tsc, mid).p2;
    volatile double sink = 0.0;

    const auto t_fpad_prop = time_stage(reps, [&] {
        const auto m = build_tsc_power_model(sc.tsc, sc.base);
        const auto r = tsc_fpad(sc.tsc, m, sc.constraint);
        sink = r.interval ? r.interval->hi_deg : 0.0;
    });
    const auto t_fpad_pf = time_stage(reps, [&] {
        const auto r = oracle_tsc_fpad(sc.tsc, sc.base, sc.constraint);
        sink = r.interval ? r.interval->hi_deg : 0.0;
    });

    const auto t_rpa_prop = time_stage(reps, [&] {
        const auto d = rpa_cpm(model, CpmMode{p_ref}, *fp.interval);
        sink = d.delta_a_deg;
    });
    const TscOracle oracle(sc.tsc, sc.base);
    const auto t_rpa_pf = time_stage(reps, [&] {
        const OracleCurve f = [&](double x) { return oracle.powers(x).a_total().real() - p_ref; };
        const double fa = f(fp.interval->lo_deg);
        sink = powerflow_bisect_for_bench(f, fp.interval->lo_deg, fp.interval->hi_deg, fa);
    });

    const auto t_fpdd_prop = time_stage(reps, [&] {
        const auto r = fpdd(model, DispatchScope::tsc, *fp.interval);
        sink = r.k_hi;
    });
    const auto t_fpdd_pf = time_stage(reps, [&] {
        const auto lo = oracle.powers(fp.interval->lo_deg);
        const auto hi = oracle.powers(fp.interval->hi_deg);
        sink = hi.a_total().real() / (hi.n1.real() + hi.n2.real()) -
               lo.a_total().real() / (lo.n1.real() + lo.n2.real());
    });

    json out{{"repetitions", reps},
             {"low_confidence", reps < 5},
             {"tolerance_pu", 1e-8},
             {"fpad_cs",
              {{"proposed", stats_json(t_fpad_prop)},
               {"power_flow", stats_json(t_fpad_pf)},
               {"speedup", t_fpad_pf.median_ms / t_fpad_prop.median_ms}}},
             {"rpa_cs",
              {{"proposed", stats_json(t_rpa_prop)},
               {"power_flow", stats_json(t_rpa_pf)},
               {"speedup", t_rpa_pf.median_ms / t_rpa_prop.median_ms}}},
             {"fpdd_cs",
              {{"proposed", stats_json(t_fpdd_prop)},
               {"power_flow", stats_json(t_fpdd_pf)},
               {"speedup", t_fpdd_pf.median_ms / t_fpdd_prop.median_ms}}}};
    std::cout << out.dump(2) << std::endl;
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Phase-angle dispatch engine for flexible traction power supply clusters"};
    app.require_subcommand(1);

    CommonOpts fpad_opts, fpdd_opts, rpa_opts, sim_opts, verify_opts, bench_opts;
    std::string dump_path, sim_dump_path, fpdd_scope = "tsc", rpa_mode, rpa_scope = "tsc";
    std::string sim_out = "run", verify_out;
    double rpa_k = 1.0, rpa_pref = 0.0;
    int verify_grid = 21, bench_reps = 31;

    auto* c_fpad = app.add_subcommand("fpad", "compute the feasible phase angle domain");
    add_common(c_fpad, fpad_opts);
    c_fpad->add_option("--dump-powerfunc", dump_path, "write power-function coefficients JSON");

    auto* c_fpdd = app.add_subcommand("fpdd", "compute the feasible power dispatch domain");
    add_common(c_fpdd, fpdd_opts);
    c_fpdd->add_option("--scope", fpdd_scope, "zso1, zso2 or tsc")
        ->check(CLI::IsMember({"zso1", "zso2", "tsc"}));

    auto* c_rpa = app.add_subcommand("rpa", "solve the reference phase angle for one dispatch mode");
    add_common(c_rpa, rpa_opts);
    c_rpa->add_option("--mode", rpa_mode, "pdm, cpm or mcm")
        ->required()
        ->check(CLI::IsMember({"pdm", "cpm", "mcm"}));
    c_rpa->add_option("--k", rpa_k, "PDM distribution coefficient target");
    c_rpa->add_option("--scope", rpa_scope, "PDM scope")->check(CLI::IsMember({"zso1", "zso2", "tsc"}));
    c_rpa->add_option("--p-ref", rpa_pref, "CPM reference power (MW)");

    auto* c_sim = app.add_subcommand("simulate", "run a scheduled scenario");
    add_common(c_sim, sim_opts);
    c_sim->add_option("--out", sim_out, "output directory (records.csv, summary.json)");
    c_sim->add_option("--dump-powerfunc", sim_dump_path, "write power-function coefficients JSON");

    auto* c_verify = app.add_subcommand("verify", "equivalent model vs power-flow oracle sweep");
    add_common(c_verify, verify_opts);
    c_verify->add_option("--grid", verify_grid, "number of sweep angles");
    c_verify->add_option("--out", verify_out, "directory for verify.csv");

    auto* c_bench = app.add_subcommand("bench", "time proposed stages against the power-flow baseline");
    add_common(c_bench, bench_opts);
    c_bench->add_option("--reps", bench_reps, "repetitions per stage");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (app.got_subcommand(c_fpad)) return cmd_fpad(fpad_opts, dump_path);
        if (app.got_subcommand(c_fpdd)) return cmd_fpdd(fpdd_opts, fpdd_scope);
        if (app.got_subcommand(c_rpa)) return cmd_rpa(rpa_opts, rpa_mode, rpa_k, rpa_scope, rpa_pref);
        if (app.got_subcommand(c_sim)) return cmd_simulate(sim_opts, sim_out, sim_dump_path);
        if (app.got_subcommand(c_verify)) return cmd_verify(verify_opts, verify_grid, verify_out);
        if (app.got_subcommand(c_bench)) return cmd_bench(bench_opts, bench_reps);
    } catch (const ftpss::ScenarioError& e) {
        std::cerr << nlohmann::json{{"error", e.what()}, {"kind", "usage"}}.dump() << std::endl;
        return 1;
    } catch (const ftpss::DomainError& e) {
        std::cerr << nlohmann::json{{"error", e.what()}, {"kind", "domain"}}.dump() << std::endl;
        return 2;
    } catch (const std::exception& e) {
        std::cerr << nlohmann::json{{"error", e.what()}, {"kind", "internal"}}.dump() << std::endl;
        return 2;
    }
    return 0;
}
