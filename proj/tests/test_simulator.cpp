#include <cmath>

#include <gtest/gtest.h>

#include "droopsim/errors.hpp"
#include "droopsim/oracle.hpp"
#include "droopsim/simulator.hpp"
#include "support.hpp"

using namespace droopsim;
using droopsim::testing::rel_err;
using droopsim::testing::two_dg;

namespace {

Scenario constant_load(Scenario sc, double t_end) {
    sc.load_schedule.resize(1);
    sc.t_end_s = t_end;
    return sc;
}

std::vector<double> column(const TimeSeries& ts, std::size_t inv) {
    std::vector<double> out;
    for (const auto& r : ts.rows) out.push_back(r.inverters[inv].p_out_w);
    return out;
}

std::vector<double> times(const TimeSeries& ts) {
    std::vector<double> out;
    for (const auto& r : ts.rows) out.push_back(r.t_s);
    return out;
}

}  // namespace

TEST(Simulator, ZeroHorizonGivesSingleRow) {
    auto sc = two_dg();
    sc.t_end_s = 0.0;
    const auto ts = Simulator(sc).run();
    ASSERT_EQ(ts.rows.size(), 1u);
    EXPECT_EQ(ts.rows[0].t_s, 0.0);
    EXPECT_EQ(ts.n_inverters, 2u);
}

TEST(Simulator, TimeAdvancesByDt) {
    auto sc = two_dg();
    sc.t_end_s = 0.05;
    sc.log_decimation = 5;
    const auto ts = Simulator(sc).run();
    ASSERT_EQ(ts.rows.size(), 11u);
    for (std::size_t k = 0; k < ts.rows.size(); ++k) EXPECT_EQ(ts.rows[k].t_s, 5.0 * k * sc.dt_s);
}

TEST(Simulator, EquilibriumIsInvariant) {
    auto sc = constant_load(two_dg(), 0.5);
    sc.mode = Mode::grid_connected;
    const Simulator sim(sc);
    auto state = sim.initial_state();
    const auto s0 = state;
    for (int k = 0; k < 500; ++k) {
        state = sim.step(state);
        for (std::size_t i = 0; i < 2; ++i) {
            const auto& a = state.controllers[i];
            const auto& b = s0.controllers[i];
            EXPECT_NEAR(a.delta_ref, b.delta_ref, 1e-12);
            EXPECT_LE(rel_err(a.e_ref, b.e_ref), 1e-12);
            EXPECT_LE(rel_err(a.p_filt, b.p_filt), 1e-12);
            EXPECT_LE(rel_err(a.q_filt, b.q_filt), 1e-12);
        }
    }
}

TEST(Simulator, OneStepIsNetworkThenControllers) {
    auto sc = two_dg();
    const Simulator sim(sc);
    const auto s0 = sim.initial_state();
    const auto next = sim.step(s0);

    std::vector<VoltageCommand> cmds;
    for (const auto& c : s0.controllers) cmds.push_back({c.delta_ref, c.e_ref});
    const auto sol = solve_scenario_network(sc, cmds, sc.load_schedule[0].load, false);
    const double v = ln_to_ll(std::abs(sol.v_pcc));
    for (std::size_t i = 0; i < 2; ++i) {
        const auto expect = controller_step(s0.controllers[i], {sol.s_out[i].p, sol.s_out[i].q, v},
                                            sc.inverters[i].gains, sim.setpoints()[i], sc.dt_s, sc.filter_tau_s,
                                            Mode::islanded, {60.0, 400.0});
        EXPECT_EQ(next.controllers[i], expect);
    }
    EXPECT_EQ(next.t, sc.dt_s);
    EXPECT_EQ(next.v_pcc, sol.v_pcc);
}

TEST(Simulator, ColdStartZeroesFilters) {
    auto sc = two_dg();
    const auto sp = resolve_setpoints(sc);
    sc.calibrate = false;
    for (std::size_t i = 0; i < 2; ++i) {
        sc.inverters[i].delta0_rad = sp[i].delta0_rad;
        sc.inverters[i].e0_peak_v = sp[i].e0_peak_v;
    }
    const auto s = Simulator(sc).initial_state();
    for (const auto& c : s.controllers) {
        EXPECT_EQ(c.p_filt, 0.0);
        EXPECT_EQ(c.q_filt, 0.0);
        EXPECT_EQ(c.delta_ref, sp[0].delta0_rad);
    }
}

TEST(Simulator, Deterministic) {
    const auto sc = two_dg();
    const auto a = Simulator(sc).run();
    const auto b = Simulator(sc).run();
    ASSERT_EQ(a.rows.size(), b.rows.size());
    for (std::size_t k = 0; k < a.rows.size(); ++k) {
        EXPECT_EQ(a.rows[k].v_pcc_rms_ll_v, b.rows[k].v_pcc_rms_ll_v);
        for (std::size_t i = 0; i < 2; ++i) {
            EXPECT_EQ(a.rows[k].inverters[i].p_out_w, b.rows[k].inverters[i].p_out_w);
            EXPECT_EQ(a.rows[k].inverters[i].delta_ref_rad, b.rows[k].inverters[i].delta_ref_rad);
        }
    }
}

TEST(Simulator, SymmetricSharing) {
    const auto ts = Simulator(two_dg()).run();
    for (const auto& r : ts.rows) {
        const double p1 = r.inverters[0].p_out_w, p2 = r.inverters[1].p_out_w;
        EXPECT_LT(std::abs(p1 - p2), 1e-9 * (p1 + p2));
    }
}

TEST(Simulator, ConvergesToOracle) {
    auto sc = constant_load(two_dg(), 4.0);
    sc.inverters[1] = droopsim::testing::two_dg_inverter(3.5);
    sc.inverters[1].p0_w = 4000;
    const Simulator sim(sc);
    const auto ts = sim.run();
    const auto ss = steady_state_solve(sc, sim.setpoints(), sc.load_schedule[0].load);
    const auto& last = ts.rows.back();
    for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_LE(rel_err(last.inverters[i].delta_ref_rad, ss.inverters[i].delta_rad), 1e-6);
        EXPECT_LE(rel_err(last.inverters[i].e_ref_v, ss.inverters[i].e_peak_v), 1e-6);
        EXPECT_LE(rel_err(last.inverters[i].p_out_w, ss.inverters[i].p_w), 1e-6);
        EXPECT_LE(rel_err(last.inverters[i].q_out_var, ss.inverters[i].q_var), 1e-6);
    }
    // Per-step change dies out.
    const auto& prev = ts.rows[ts.rows.size() - 2];
    EXPECT_LT(std::abs(last.inverters[0].p_out_w - prev.inverters[0].p_out_w), 1e-6);
}

TEST(Simulator, HalvingDtKeepsSteadyState) {
    auto sc = constant_load(two_dg(), 3.0);
    sc.load_schedule[0].load = {20e3, 10e3, 400};
    const auto coarse = Simulator(sc).run().rows.back();
    sc.dt_s /= 2.0;
    const auto fine = Simulator(sc).run().rows.back();
    for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_LT(rel_err(coarse.inverters[i].p_out_w, fine.inverters[i].p_out_w), 1e-3);
        EXPECT_LT(rel_err(coarse.inverters[i].e_ref_v, fine.inverters[i].e_ref_v), 1e-3);
    }
    EXPECT_LT(rel_err(coarse.v_pcc_rms_ll_v, fine.v_pcc_rms_ll_v), 1e-3);
}

TEST(Simulator, TwoDgLoadStep) {
    const auto sc = two_dg();
    const auto ts = Simulator(sc).run();
    const auto& before = ts.rows[999];   // t = 0.999
    const auto& during = ts.rows[1999];  // t = 1.999
    for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_NEAR(before.inverters[i].p_out_w, 5e3, 0.05 * 5e3);
        EXPECT_NEAR(during.inverters[i].p_out_w, 10e3, 0.05 * 10e3);
    }
    EXPECT_LT(during.v_pcc_rms_ll_v, before.v_pcc_rms_ll_v);
    EXPECT_LT(during.load_p_w, 20e3);
}

TEST(Simulator, AbortCarriesTime) {
    auto sc = two_dg();
    const auto sp = resolve_setpoints(sc);
    sc.calibrate = false;
    for (std::size_t i = 0; i < 2; ++i) {
        sc.inverters[i].delta0_rad = sp[i].delta0_rad;
        sc.inverters[i].e0_peak_v = sp[i].e0_peak_v;
        sc.inverters[i].gains.k_qe = 1.0;  // drives the magnitude negative from a cold start
    }
    try {
        Simulator(sc).run();
        FAIL() << "expected abort";
    } catch (const SimulationAbort& e) {
        EXPECT_GE(e.time(), 0.0);
        EXPECT_LT(e.time(), 0.01);
        EXPECT_NE(std::string(e.what()).find("t="), std::string::npos);
    }
}

TEST(Simulator, SetpointCountMismatch) {
    EXPECT_THROW(Simulator(two_dg(), std::vector<Setpoints>(1)), InvalidParameter);
}

TEST(SettlingTime, StepResponse) {
    std::vector<double> t, v;
    for (int k = 0; k <= 100; ++k) {
        t.push_back(0.01 * k);
        v.push_back(1.0 - std::exp(-t.back() / 0.1));
    }
    // Band entry at 1 - e^{-t/0.1} = 0.98, i.e. t = 0.1 ln 50.
    EXPECT_NEAR(settling_time(t, v, 0.0, 2.0, 1.0, 0.02), 0.1 * std::log(50.0), 2e-3);
    EXPECT_EQ(settling_time(t, v, 0.5, 2.0, 1.0, 0.02), 0.0);
    EXPECT_LT(settling_time(t, v, 0.0, 2.0, 2.0, 0.02), 0.0);
}

TEST(SettlingTime, ScalesWithFilterConstant) {
    auto run_with = [](double tau) {
        auto sc = two_dg();
        sc.filter_tau_s = tau;
        const Simulator sim(sc);
        const auto ts = sim.run();
        const auto ss = steady_state_solve(sc, sim.setpoints(), sc.load_schedule[1].load);
        return settling_time(times(ts), column(ts, 0), 1.0, 2.0, ss.inverters[0].p_w, 0.02);
    };
    const double a = run_with(0.1), b = run_with(0.2);
    EXPECT_GT(a, 0.0);
    EXPECT_GE(b, 2.0 * a);
}
