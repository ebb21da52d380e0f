#include <cmath>

#include <gtest/gtest.h>

#include "droopsim/oracle.hpp"
#include "support.hpp"

using namespace droopsim;
using droopsim::testing::rel_err;
using droopsim::testing::two_dg;

namespace {

const LoadModel kLoad10{10e3, 5e3, 400};

Scenario grid_two_dg() {
    auto sc = two_dg();
    sc.mode = Mode::grid_connected;
    return sc;
}

/// Islanded pair with unequal lines so both interaction modes are excited.
Scenario asymmetric_pair() {
    auto sc = two_dg();
    sc.inverters[1] = droopsim::testing::two_dg_inverter(3.5);
    sc.inverters[1].p0_w = 4000;
    return sc;
}

}  // namespace

TEST(SteadyState, SingleInverterNoLoadIsSetpoint) {
    Scenario sc;
    InverterConfig inv = droopsim::testing::two_dg_inverter();
    inv.p0_w = inv.q0_var = 0.0;
    inv.delta0_rad = 0.0;
    inv.e0_peak_v = nominal_peak(400);
    sc.inverters = {inv};
    sc.load_schedule = {{0.0, {0, 0, 400}}};
    sc.calibrate = false;
    const auto ss = steady_state_solve(sc, sc.load_schedule[0].load);
    EXPECT_EQ(ss.inverters[0].delta_rad, 0.0);
    EXPECT_EQ(ss.inverters[0].e_peak_v, nominal_peak(400));
    EXPECT_NEAR(ss.inverters[0].p_w, 0.0, 1e-9);
    EXPECT_NEAR(ss.inverters[0].q_var, 0.0, 1e-9);
}

TEST(SteadyState, SymmetricTwoDg) {
    const auto sc = two_dg();
    const auto sp = resolve_setpoints(sc);
    const auto ss = steady_state_solve(sc, sp, kLoad10);
    EXPECT_LT(ss.residual, 1e-10);
    EXPECT_LE(rel_err(ss.inverters[0].p_w, ss.inverters[1].p_w), 1e-9);
    EXPECT_LE(rel_err(ss.inverters[0].q_var, ss.inverters[1].q_var), 1e-9);
    EXPECT_LE(std::abs(ss.inverters[0].delta_rad - ss.inverters[1].delta_rad), 1e-9);

    // Independent check: fresh network solve, load power from the bus voltage,
    // series losses from the line currents.
    const std::vector<VoltageCommand> cmds{{ss.inverters[0].delta_rad, ss.inverters[0].e_peak_v},
                                           {ss.inverters[1].delta_rad, ss.inverters[1].e_peak_v}};
    const auto sol = solve_scenario_network(sc, cmds, kLoad10, false);
    const double v = std::abs(sol.v_pcc);
    const double p_load = 3.0 * v * v * load_admittance(kLoad10).real();
    double losses = 0.0;
    for (std::size_t i = 0; i < 2; ++i) losses += 3.0 * std::norm(sol.currents[i]) * sc.inverters[i].line.r_ohm;
    EXPECT_LE(rel_err(ss.inverters[0].p_w + ss.inverters[1].p_w, p_load + losses), 1e-9);
    for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_LE(rel_err(ss.inverters[i].p_w, sol.s_out[i].p), 1e-9);
        EXPECT_LE(rel_err(ss.inverters[i].q_var, sol.s_out[i].q), 1e-9);
    }
    // Constant-impedance load at a sagged bus takes less than its rating.
    EXPECT_LT(ss.network.s_load.p, 10e3);
    EXPECT_GT(ss.network.s_load.p, 9.5e3);
}

TEST(SteadyState, ResubstitutionGivesZeroUpdate) {
    const auto sc = asymmetric_pair();
    const auto sp = resolve_setpoints(sc);
    const auto ss = steady_state_solve(sc, sp, kLoad10);
    const double v_meas = ss.v_pcc_ll_rms();
    for (std::size_t i = 0; i < 2; ++i) {
        const auto& g = sc.inverters[i].gains;
        const auto refs = restoration_refs(sp[i].f0_hz, v_meas, g, sp[i]);
        const auto v = droop_refs(refs, ss.inverters[i].p_w, ss.inverters[i].q_var, g, sp[i]);
        EXPECT_LT(std::abs(v.delta_ref - ss.inverters[i].delta_rad), 1e-10);
        EXPECT_LT(std::abs(v.e_ref - ss.inverters[i].e_peak_v), 1e-10);
    }
}

TEST(SteadyState, MonotoneLoadResponse) {
    const auto sc = two_dg();
    const auto sp = resolve_setpoints(sc);
    double prev = 0.0;
    for (double p = 2e3; p <= 30e3; p += 2e3) {
        const auto ss = steady_state_solve(sc, sp, {p, p / 2, 400});
        EXPECT_GT(ss.inverters[0].p_w, prev);
        prev = ss.inverters[0].p_w;
    }
}

TEST(SteadyState, DivergenceCarriesReport) {
    auto sc = grid_two_dg();
    for (auto& inv : sc.inverters) inv.gains.k_pdelta *= 5.0;
    const auto sp = resolve_setpoints(sc);
    try {
        steady_state_solve(sc, sp, kLoad10);
        FAIL() << "expected divergence";
    } catch (const DivergenceError& e) {
        EXPECT_FALSE(e.report().stable);
        EXPECT_GE(e.report().max_loop_gain(), 1.0);
    }
}

TEST(SteadyState, UnstableReportImpliesUndampedFailure) {
    for (Scenario sc : {grid_two_dg(), asymmetric_pair()}) {
        for (double scale : {1.0, 2.0, 4.0, 8.0}) {
            for (auto& inv : sc.inverters) inv.gains.k_pdelta = scale * 1e-5;
            const auto sp = resolve_setpoints(sc);
            const auto eq = locate_equilibrium(sc, sp, kLoad10);
            const auto rep = stability_margin(sc, sp, kLoad10, eq);
            if (rep.stable) continue;
            FixedPointOptions plain;
            plain.damping = 1.0;
            EXPECT_THROW(steady_state_solve(sc, sp, kLoad10, plain), DivergenceError) << "scale " << scale;
        }
    }
}

TEST(Calibration, ZeroTargetNoLoad) {
    auto sc = two_dg();
    sc.load_schedule = {{0.0, {0, 0, 400}}};
    const std::vector<PQ> targets{{0, 0}, {0, 0}};
    const auto cmds = calibrate_setpoints(sc, targets, sc.grid);
    for (const auto& c : cmds) {
        EXPECT_NEAR(c.delta_rad, 0.0, 1e-12);
        EXPECT_LE(rel_err(c.e_peak_v, nominal_peak(400)), 1e-12);
    }
}

TEST(Calibration, RoundTrip) {
    auto sc = asymmetric_pair();
    const std::vector<PQ> targets{{5000, 2500}, {4000, -1000}};
    const auto cmds = calibrate_setpoints(sc, targets, sc.grid);
    const auto sol = solve_scenario_network(sc, cmds, sc.load_schedule[0].load, true);
    for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_LE(rel_err(sol.s_out[i].p, targets[i].p), 1e-9);
        EXPECT_LE(rel_err(sol.s_out[i].q, targets[i].q), 1e-9);
    }
}

TEST(Calibration, TwoDgTargets) {
    const auto sc = two_dg();
    const std::vector<PQ> targets{{5000, 2500}, {5000, 2500}};
    const auto cmds = calibrate_setpoints(sc, targets, sc.grid);
    EXPECT_EQ(cmds[0].delta_rad, cmds[1].delta_rad);
    EXPECT_GT(cmds[0].delta_rad, 0.0);
    EXPECT_GT(cmds[0].e_peak_v, nominal_peak(400));
    const auto sol = solve_scenario_network(sc, cmds, sc.load_schedule[0].load, true);
    EXPECT_LE(rel_err(sol.s_out[0].p, 5000), 1e-9);
    EXPECT_LE(rel_err(sol.s_out[1].q, 2500), 1e-9);
}

TEST(Calibration, BeyondTransferLimit) {
    const auto sc = two_dg();
    const std::vector<PQ> targets{{5e6, 0}, {5000, 2500}};
    EXPECT_THROW(calibrate_setpoints(sc, targets, sc.grid), InfeasibleTarget);
}

TEST(Stability, NoAngleFeedback) {
    auto sc = grid_two_dg();
    const auto sp = resolve_setpoints(sc);
    const auto ss = steady_state_solve(sc, sp, kLoad10);
    for (auto& inv : sc.inverters) inv.gains.k_pdelta = 0.0;
    const auto rep = stability_margin(sc, sp, kLoad10, ss);
    for (double g : rep.loop_gain) EXPECT_EQ(g, 0.0);
    EXPECT_TRUE(rep.stable);
}

TEST(Stability, DefaultGainsNearDesignValue) {
    const auto sc = grid_two_dg();
    const auto sp = resolve_setpoints(sc);
    const auto ss = steady_state_solve(sc, sp, kLoad10);
    const auto rep = stability_margin(sc, sp, kLoad10, ss);
    for (double g : rep.loop_gain) EXPECT_NEAR(g, kDefaultLoopGain, 0.1 * kDefaultLoopGain);
    EXPECT_TRUE(rep.stable);
}

TEST(Stability, LinearInAngleGain) {
    auto sc = two_dg();
    const auto sp = resolve_setpoints(sc);
    const auto ss = steady_state_solve(sc, sp, kLoad10);
    const auto a = stability_margin(sc, sp, kLoad10, ss);
    for (auto& inv : sc.inverters) inv.gains.k_pdelta *= 2.0;
    const auto b = stability_margin(sc, sp, kLoad10, ss);
    for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(b.loop_gain[i], 2.0 * a.loop_gain[i], 1e-6);
}

TEST(Stability, SmallerReactanceRaisesGain) {
    auto sc = grid_two_dg();
    double prev = 0.0;
    for (double x : {4.0, 3.0, 2.5, 2.0, 1.5, 1.0}) {
        for (auto& inv : sc.inverters) inv.line.x_ohm = x;
        const auto sp = resolve_setpoints(sc);
        const auto ss = steady_state_solve(sc, sp, kLoad10);
        const double g = stability_margin(sc, sp, kLoad10, ss).max_loop_gain();
        EXPECT_GT(g, prev);
        prev = g;
    }
}
