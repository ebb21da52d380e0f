#include <gtest/gtest.h>

#include "droopsim/errors.hpp"
#include "droopsim/scenario.hpp"
#include "support.hpp"

using namespace droopsim;
using droopsim::testing::two_dg;

TEST(ApplyEvents, SingleEntry) {
    const std::vector<LoadEvent> s{{0.0, {1e3, 0, 400}}};
    EXPECT_EQ(apply_events(s, 0.0).p_w, 1e3);
    EXPECT_EQ(apply_events(s, 1e6).p_w, 1e3);
}

TEST(ApplyEvents, TwoDgWindow) {
    const auto sc = two_dg();
    const auto& l = apply_events(sc.load_schedule, 1.5);
    EXPECT_EQ(l.p_w, 20e3);
    EXPECT_EQ(l.q_var, 10e3);
    EXPECT_EQ(apply_events(sc.load_schedule, 0.999).p_w, 10e3);
    EXPECT_EQ(apply_events(sc.load_schedule, 2.5).p_w, 10e3);
}

TEST(ApplyEvents, ClosedLeftBoundary) {
    const auto sc = two_dg();
    EXPECT_EQ(apply_events(sc.load_schedule, 1.0).p_w, 20e3);
    EXPECT_EQ(apply_events(sc.load_schedule, 2.0).p_w, 10e3);
}

TEST(ApplyEvents, Errors) {
    EXPECT_THROW(apply_events({}, 0.0), InvalidParameter);
    const std::vector<LoadEvent> s{{0.5, {1e3, 0, 400}}};
    EXPECT_THROW(apply_events(s, 0.1), InvalidParameter);
}

TEST(Validate, TwoDgIsValid) { EXPECT_NO_THROW(validate(two_dg())); }

TEST(Validate, StructuralGuards) {
    auto sc = two_dg();
    sc.dt_s = 0.0;
    EXPECT_THROW(validate(sc), ConfigError);

    sc = two_dg();
    sc.dt_s = sc.filter_tau_s;
    EXPECT_THROW(validate(sc), ConfigError);

    sc = two_dg();
    sc.load_schedule[0].t_start_s = 0.1;
    EXPECT_THROW(validate(sc), ConfigError);

    sc = two_dg();
    sc.load_schedule[2].t_start_s = 1.0;
    EXPECT_THROW(validate(sc), ConfigError);

    sc = two_dg();
    sc.inverters.clear();
    EXPECT_THROW(validate(sc), ConfigError);
    sc.mode = Mode::grid_connected;
    EXPECT_NO_THROW(validate(sc));

    sc = two_dg();
    sc.log_decimation = 0;
    EXPECT_THROW(validate(sc), ConfigError);

    sc = two_dg();
    sc.calibrate = false;
    EXPECT_THROW(validate(sc), ConfigError);
}

TEST(Validate, ComponentGuards) {
    auto sc = two_dg();
    sc.inverters[1].line.x_ohm = 0.0;
    EXPECT_THROW(validate(sc), InvalidParameter);

    sc = two_dg();
    sc.inverters[0].gains.k_pdelta = -1.0;
    EXPECT_THROW(validate(sc), InvalidParameter);

    sc = two_dg();
    sc.load_schedule[1].load.v_ref_ll_v = 0.0;
    EXPECT_THROW(validate(sc), InvalidParameter);
}

TEST(ScenarioNetwork, GridSourceIsLast) {
    auto sc = two_dg();
    const std::vector<VoltageCommand> cmds{{0.0, nominal_peak(400)}, {0.0, nominal_peak(400)}};
    const auto sol = solve_scenario_network(sc, cmds, {0, 0, 400}, true);
    ASSERT_EQ(sol.s_out.size(), 3u);
    // Every source at nominal with no load: nothing flows anywhere.
    for (const auto& s : sol.s_out) {
        // The 0.01 ohm grid branch magnifies round-off.
        EXPECT_NEAR(s.p, 0.0, 1e-6);
        EXPECT_NEAR(s.q, 0.0, 1e-6);
    }
    EXPECT_NEAR(std::abs(sol.v_pcc), 400.0 / std::sqrt(3.0), 1e-9);
}
