#include <doctest.h>

#include "ftpss/equivalent.hpp"
#include "ftpss/model.hpp"
#include "ftpss/powerflow.hpp"
#include "helpers.hpp"

using namespace ftpss;
using namespace ftpss::testing;

TEST_CASE("default cluster parameters validate cleanly") {
    TscSpec tsc = make_tsc();
    tsc.zso1.up.trains.push_back(make_train("a", 10.0, 4.0, 0.5));
    tsc.zso2.down.trains.push_back(make_train("b", 25.0, 4.0, 0.5, Track::down));
    const auto v = validate_topology(tsc);
    CHECK(v.empty());
    CHECK_FALSE(has_errors(v));
}

TEST_CASE("train outside the section is a violation") {
    TscSpec tsc = make_tsc();
    tsc.zso1.up.trains.push_back(make_train("a", 45.0, 4.0, 0.5));
    const auto v = validate_topology(tsc);
    REQUIRE_FALSE(v.empty());
    CHECK(has_errors(v));
    CHECK(v.front().field.find("l1_km") != std::string::npos);
}

TEST_CASE("small branch impedance degrades superposition validity as a warning") {
    TscSpec tsc = make_tsc();
    TrainLoad t = make_train("a", 10.0, 4.0, 0.5);
    t.z_t_ohm = {10.0, 0.0};  // |z_t| well below 10x |40 km * (0.15+j0.55)| ~ 228 ohm
    tsc.zso1.up.trains.push_back(t);
    const auto v = validate_topology(tsc);
    REQUIRE_FALSE(v.empty());
    CHECK(v.front().warning);
    CHECK_FALSE(has_errors(v));  // warnings do not block
}

TEST_CASE("delta limits must be symmetric and contain zero") {
    TscSpec tsc = make_tsc();
    tsc.delta_limits = {-10.0, 20.0};
    CHECK(has_errors(validate_topology(tsc)));
    tsc.delta_limits = {5.0, 20.0};
    CHECK(has_errors(validate_topology(tsc)));
    tsc.delta_limits = {-20.0, 20.0};
    CHECK_FALSE(has_errors(validate_topology(tsc)));
}

TEST_CASE("segment impedance") {
    const LineImpedance z0{0.15, 0.55};
    CHECK(segment_impedance(z0, 40.0) == Complex{6.0, 22.0});
    CHECK(segment_impedance(z0, 0.0) == Complex{0.0, 0.0});
    CHECK(segment_impedance(z0, 20.0) == Complex{3.0, 11.0});
    CHECK_THROWS_AS((void)segment_impedance(z0, -1.0), std::invalid_argument);
}

TEST_CASE("segment impedance is linear") {
    const LineImpedance z0{0.15, 0.55};
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> len(0.0, 60.0);
    for (int i = 0; i < 50; ++i) {
        const double a = len(rng), b = len(rng);
        const Complex lhs = segment_impedance(z0, a + b);
        const Complex rhs = segment_impedance(z0, a) + segment_impedance(z0, b);
        CHECK(std::abs(lhs - rhs) <= 1e-12 * std::abs(lhs));
    }
}

TEST_CASE("per-unit conversions") {
    const PerUnitBase base;
    CHECK(base.to_pu_power(4.0) == doctest::Approx(0.04).epsilon(1e-15));
    CHECK(base.from_pu_power(base.to_pu_power(0.5)) == 0.5);
    CHECK(base.to_pu_voltage(27.5) == 1.0);

    std::mt19937 rng(12);
    std::uniform_real_distribution<double> v(-1e3, 1e3);
    for (int i = 0; i < 100; ++i) {
        const double x = v(rng);
        CHECK(base.from_pu_power(base.to_pu_power(x)) == doctest::Approx(x).epsilon(1e-15));
        CHECK(base.from_pu_voltage(base.to_pu_voltage(x)) == doctest::Approx(x).epsilon(1e-15));
    }
}

TEST_CASE("phasor normalization") {
    const Phasor p{-2.0, 3.0 * pi};
    CHECK(p.magnitude == 2.0);
    CHECK(p.angle_rad == doctest::Approx(0.0).epsilon(1e-12));
    const Phasor q = Phasor::from_complex(Complex{0.0, -1.0});
    CHECK(q.angle_deg() == doctest::Approx(-90.0));
}

TEST_CASE("require_valid throws with field names") {
    TscSpec tsc = make_tsc();
    tsc.alpha_margin = 1.5;
    CHECK_THROWS_AS(require_valid(tsc), DomainError);
}

TEST_CASE("downstream operations refuse an invalid cluster") {
    TscSpec tsc = make_tsc();
    tsc.zso1.up.trains.push_back(make_train("oob", 45.0, 4.0, 0.5));
    const PerUnitBase base;
    CHECK_THROWS_AS((void)build_tsc_power_model(tsc, base), DomainError);
    CHECK_THROWS_AS(TscOracle(tsc, base), DomainError);
}
