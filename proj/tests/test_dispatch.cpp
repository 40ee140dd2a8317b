#include <doctest.h>

#include <cmath>

#include "ftpss/dispatch.hpp"
#include "helpers.hpp"

using namespace ftpss;
using namespace ftpss::testing;

namespace {

const PerUnitBase base;

TscSpec demo_tsc() {
    TscSpec tsc = make_tsc();
    tsc.zso1.up.trains.push_back(make_train("u1", 12.0, 4.0, 0.5));
    tsc.zso1.down.trains.push_back(make_train("d1", 28.0, 4.0, 0.5, Track::down));
    tsc.zso2.up.trains.push_back(make_train("u2", 15.0, 4.0, 0.5));
    tsc.zso2.down.trains.push_back(make_train("d2", 25.0, 4.0, 0.5, Track::down));
    return tsc;
}

} // namespace

TEST_CASE("distribution coefficient basics") {
    SUBCASE("symmetric cluster splits evenly at zero angle") {
        TscSpec tsc = make_tsc();
        tsc.zso1.up.trains.push_back(make_train("a", 20.0, 4.0, 0.5));
        tsc.zso2.up.trains.push_back(make_train("b", 20.0, 4.0, 0.5));
        const auto model = build_tsc_power_model(tsc, base);
        CHECK(kp(model, DispatchScope::tsc, 0.0) == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(kp(model, DispatchScope::zso1, 0.0) == doctest::Approx(1.0).epsilon(1e-9));
    }
    SUBCASE("coefficient vanishes at the A-TS zero-power critical angle") {
        TscSpec tsc = make_tsc();
        tsc.zso1.up.trains.push_back(make_train("a", 20.0, 4.0, 0.5));
        tsc.zso2.up.trains.push_back(make_train("b", 20.0, 4.0, 0.5));
        const auto model = build_tsc_power_model(tsc, base);
        const auto crit = critical_angles_apc(model.zso1, base, {-20.0, 20.0});
        REQUIRE(crit.s2.zero_deg.has_value());
        CHECK(std::abs(kp(model, DispatchScope::zso1, *crit.s2.zero_deg)) < 1e-6);
    }
    SUBCASE("vanishing denominator is an undefined ratio") {
        const TscSpec tsc = make_tsc();  // no load: P1(0) = 0
        const auto model = build_tsc_power_model(tsc, base);
        CHECK_THROWS_AS((void)kp(model, DispatchScope::tsc, 0.0), DomainError);
    }
}

TEST_CASE("dispatch domain from the feasible angle domain") {
    const TscSpec tsc = demo_tsc();
    const auto model = build_tsc_power_model(tsc, base);
    const auto fp = tsc_fpad(tsc, model, ConstraintMode::strict);
    REQUIRE(fp.interval.has_value());

    SUBCASE("bounds map to bounds") {
        const Fpdd range = fpdd(model, DispatchScope::tsc, *fp.interval);
        CHECK(range.k_lo <= range.k_hi);
        CHECK(range.increasing);
        CHECK(range.k_lo == doctest::Approx(kp(model, DispatchScope::tsc, fp.interval->lo_deg)));
        CHECK(range.k_hi == doctest::Approx(kp(model, DispatchScope::tsc, fp.interval->hi_deg)));
    }
    SUBCASE("singleton domain collapses the coefficient range") {
        const AngleInterval point{1.0, 1.0};
        const Fpdd range = fpdd(model, DispatchScope::tsc, point);
        CHECK(range.k_lo == range.k_hi);
    }
    SUBCASE("coefficient range spans both sides of unity") {
        const Fpdd range = fpdd(model, DispatchScope::tsc, *fp.interval);
        CHECK(range.k_lo < 1.0);
        CHECK(range.k_hi > 1.0);
    }
    SUBCASE("relaxed range strictly contains the strict range") {
        const auto fr = tsc_fpad(tsc, model, ConstraintMode::relaxed);
        REQUIRE(fr.interval.has_value());
        const Fpdd rs = fpdd(model, DispatchScope::tsc, *fp.interval);
        const Fpdd rr = fpdd(model, DispatchScope::tsc, *fr.interval);
        CHECK(rr.k_lo < rs.k_lo);
        CHECK(rr.k_hi > rs.k_hi);
    }
}

TEST_CASE("distribution-mode dispatch") {
    const TscSpec tsc = demo_tsc();
    const auto model = build_tsc_power_model(tsc, base);
    const auto fp = tsc_fpad(tsc, model, ConstraintMode::strict);
    REQUIRE(fp.interval.has_value());
    const Fpdd range = fpdd(model, DispatchScope::tsc, *fp.interval);

    SUBCASE("target equal to the current ratio holds the current angle") {
        const double k0 = kp(model, DispatchScope::tsc, 0.0);
        const auto d = rpa_pdm(model, {k0, DispatchScope::tsc}, *fp.interval);
        CHECK_FALSE(d.clamped);
        CHECK(std::abs(d.delta_a_deg) < 1e-5);
    }
    SUBCASE("targets inside the dispatch domain are tracked to 1e-4") {
        for (double f : {0.15, 0.4, 0.6, 0.85}) {
            const double k = range.k_lo + f * (range.k_hi - range.k_lo);
            const auto d = rpa_pdm(model, {k, DispatchScope::tsc}, *fp.interval);
            CHECK_FALSE(d.clamped);
            CHECK(fp.interval->contains(d.delta_a_deg));
            CHECK(std::abs(kp(model, DispatchScope::tsc, d.delta_a_deg) - k) <= 1e-4);
        }
    }
    SUBCASE("out-of-domain target clamps to the matching bound") {
        const auto d = rpa_pdm(model, {range.k_hi + 1.0, DispatchScope::tsc}, *fp.interval);
        CHECK(d.clamped);
        CHECK(d.delta_a_deg == fp.interval->hi_deg);
        const auto d2 = rpa_pdm(model, {range.k_lo - 1.0, DispatchScope::tsc}, *fp.interval);
        CHECK(d2.clamped);
        CHECK(d2.delta_a_deg == fp.interval->lo_deg);
    }
    SUBCASE("per-section scopes solve too") {
        const Fpdd r1 = fpdd(model, DispatchScope::zso1, *fp.interval);
        const double k = 0.5 * (r1.k_lo + r1.k_hi);
        const auto d = rpa_pdm(model, {k, DispatchScope::zso1}, *fp.interval);
        CHECK(std::abs(kp(model, DispatchScope::zso1, d.delta_a_deg) - k) <= 1e-4);
    }
    SUBCASE("the tracking residual changes sign exactly once over the domain") {
        const double k = 0.5 * (range.k_lo + range.k_hi);
        int sign_changes = 0;
        double prev = 0.0;
        for (int i = 0; i <= 40; ++i) {
            const double x = fp.interval->lo_deg + fp.interval->width() * i / 40.0;
            const auto s = detail::scope_powers(model, DispatchScope::tsc, x);
            const double r = s.p2 - k * s.p1;
            if (i > 0 && (prev < 0.0) != (r < 0.0)) ++sign_changes;
            prev = r;
        }
        CHECK(sign_changes == 1);
    }
}

TEST_CASE("constant-power-mode dispatch") {
    const TscSpec tsc = demo_tsc();
    const auto model = build_tsc_power_model(tsc, base);
    const auto fp = tsc_fpad(tsc, model, ConstraintMode::relaxed);
    REQUIRE(fp.interval.has_value());

    const auto p2_at = [&](double x) { return detail::scope_powers(model, DispatchScope::tsc, x).p2; };

    SUBCASE("reference equal to the current output holds the angle") {
        const auto d = rpa_cpm(model, {p2_at(0.0)}, *fp.interval);
        CHECK_FALSE(d.clamped);
        CHECK(std::abs(d.delta_a_deg) < 1e-5);
    }
    SUBCASE("reachable references are met to 1e-6 pu") {
        const double lo = p2_at(fp.interval->lo_deg), hi = p2_at(fp.interval->hi_deg);
        for (double f : {0.1, 0.5, 0.9}) {
            const double p_ref = lo + f * (hi - lo);
            const auto d = rpa_cpm(model, {p_ref}, *fp.interval);
            CHECK_FALSE(d.clamped);
            CHECK(std::abs(p2_at(d.delta_a_deg) - p_ref) / base.s_base_mva <= 1e-6);
        }
    }
    SUBCASE("unreachable reference clamps with the achieved bound power") {
        const auto d = rpa_cpm(model, {50.0}, *fp.interval);
        CHECK(d.clamped);
        CHECK(d.delta_a_deg == fp.interval->hi_deg);
        CHECK(p2_at(d.delta_a_deg) < 50.0);
    }
}

TEST_CASE("maximum-consumption mode rides the upper bound") {
    const AngleInterval fp{-3.0, 7.0};
    const auto d = rpa_mcm(fp);
    CHECK(d.delta_a_deg == 7.0);

    SUBCASE("traction: no feasible angle yields more A-TS output") {
        const TscSpec tsc = demo_tsc();
        const auto model = build_tsc_power_model(tsc, base);
        const auto fpad_r = tsc_fpad(tsc, model, ConstraintMode::strict);
        REQUIRE(fpad_r.interval.has_value());
        const auto mcm = rpa_mcm(*fpad_r.interval);
        const double p_mcm = detail::scope_powers(model, DispatchScope::tsc, mcm.delta_a_deg).p2;
        for (int i = 0; i <= 20; ++i) {
            const double x = fpad_r.interval->lo_deg + fpad_r.interval->width() * i / 20.0;
            CHECK(p_mcm >= detail::scope_powers(model, DispatchScope::tsc, x).p2 - 1e-9);
        }
    }
    SUBCASE("braking: absorption is minimal over the domain") {
        TscSpec tsc = demo_tsc();
        for (ZsoSpec* z : {&tsc.zso1, &tsc.zso2}) {
            for (auto& t : z->up.trains) t.power.p_mw = -4.0;
            for (auto& t : z->down.trains) t.power.p_mw = -4.0;
        }
        const auto model = build_tsc_power_model(tsc, base);
        const auto fpad_r = tsc_fpad(tsc, model, ConstraintMode::relaxed);
        REQUIRE(fpad_r.interval.has_value());
        CHECK(fpad_r.state == SystemState::braking);
        const auto mcm = rpa_mcm(*fpad_r.interval);
        const double absorbed =
            std::abs(std::min(detail::scope_powers(model, DispatchScope::tsc, mcm.delta_a_deg).p2, 0.0));
        for (int i = 0; i <= 20; ++i) {
            const double x = fpad_r.interval->lo_deg + fpad_r.interval->width() * i / 20.0;
            const double other =
                std::abs(std::min(detail::scope_powers(model, DispatchScope::tsc, x).p2, 0.0));
            CHECK(absorbed <= other + 1e-9);
        }
    }
}

TEST_CASE("all-coasting load degenerates to a hold at zero") {
    TscSpec tsc = make_tsc();
    tsc.zso1.up.trains.push_back(make_train("a", 15.0, 0.0, 0.0));
    const auto model = build_tsc_power_model(tsc, base);
    const auto d = rpa_pdm(model, {1.5, DispatchScope::tsc}, AngleInterval{-1.0, 1.0});
    CHECK(d.degenerate_load);
    CHECK(d.delta_a_deg == 0.0);
}

TEST_CASE("every decision stays inside the feasible domain") {
    ScenarioSampler gen(5150);
    for (int s = 0; s < 30; ++s) {
        const TscSpec tsc = gen.tsc();
        const auto model = build_tsc_power_model(tsc, base);
        const auto fp = tsc_fpad(tsc, model, ConstraintMode::relaxed);
        if (!fp.interval) continue;
        for (const DispatchMode mode :
             {DispatchMode{PdmMode{1.3, DispatchScope::tsc}}, DispatchMode{CpmMode{6.0}},
              DispatchMode{McmMode{}}}) {
            const auto d = rpa(model, mode, *fp.interval);
            CHECK(fp.interval->contains(d.delta_a_deg, 1e-12));
        }
    }
}
