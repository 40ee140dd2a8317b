#pragma once

// Shared scenario builders for the test suites.

#include <random>
#include <string>

#include "ftpss/model.hpp"

namespace ftpss::testing {

inline MsoSpec make_mso(double u_n = 27.5, double length = 40.0) {
    MsoSpec mso;
    mso.length_km = length;
    mso.left = {StationKind::nts, u_n};
    mso.right = {StationKind::ats, u_n};
    return mso;
}

inline TrainLoad make_train(const std::string& id, double l1, double p, double q,
                            Track track = Track::up) {
    return {id, l1, {p, q}, {1000.0, 0.0}, track};
}

/// Bare double-track cluster; zso1 runs N->A, zso2 runs A->N.
inline TscSpec make_tsc(double u_n = 27.5, double length = 40.0) {
    TscSpec tsc;
    MsoSpec p1 = make_mso(u_n, length);
    tsc.zso1.up = p1;
    tsc.zso1.down = p1;
    MsoSpec p2 = p1;
    p2.left = {StationKind::ats, u_n};
    p2.right = {StationKind::nts, u_n};
    tsc.zso2.up = p2;
    tsc.zso2.down = p2;
    return tsc;
}

/// Randomized scenario family: 1..4 trains, P in [-4.8, 4.8] MW, Q in
/// [0, 0.5] MVar, positions uniform, random section/track assignment.
struct ScenarioSampler {
    std::mt19937 rng;
    std::uniform_real_distribution<double> pos{1.0, 39.0};
    std::uniform_real_distribution<double> p{-4.8, 4.8};
    std::uniform_real_distribution<double> q{0.0, 0.5};
    std::uniform_int_distribution<int> count{1, 4};
    std::uniform_int_distribution<int> coin{0, 1};

    explicit ScenarioSampler(unsigned seed) : rng(seed) {}

    TrainLoad train(int i) {
        return make_train("t" + std::to_string(i), pos(rng), p(rng), q(rng),
                          coin(rng) ? Track::down : Track::up);
    }

    MsoSpec mso(bool traction_only = false) {
        MsoSpec out = make_mso();
        const int n = count(rng);
        for (int i = 0; i < n; ++i) {
            TrainLoad t = train(i);
            t.track = Track::up;
            if (traction_only) t.power.p_mw = std::abs(t.power.p_mw);
            out.trains.push_back(t);
        }
        return out;
    }

    ZsoSpec zso(bool traction_only = false) {
        ZsoSpec out;
        out.up = make_mso();
        out.down = make_mso();
        const int n = count(rng);
        for (int i = 0; i < n; ++i) {
            TrainLoad t = train(i);
            if (traction_only) t.power.p_mw = std::abs(t.power.p_mw);
            (t.track == Track::up ? out.up.trains : out.down.trains).push_back(t);
        }
        return out;
    }

    /// occupy_both forces at least one train into each ZSO (otherwise the
    /// unloaded section degenerates the cluster domain to {0}).
    TscSpec tsc(bool traction_only = false, bool occupy_both = false) {
        TscSpec out = make_tsc();
        int n = count(rng);
        if (occupy_both) n = std::max(n, 2);
        for (int i = 0; i < n; ++i) {
            TrainLoad t = train(i);
            if (traction_only) t.power.p_mw = std::abs(t.power.p_mw);
            ZsoSpec& z = occupy_both && i < 2 ? (i == 0 ? out.zso1 : out.zso2)
                                              : (coin(rng) ? out.zso2 : out.zso1);
            (t.track == Track::up ? z.up.trains : z.down.trains).push_back(t);
        }
        return out;
    }
};

} // namespace ftpss::testing
