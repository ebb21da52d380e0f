#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "droopsim/droop_control.hpp"
#include "droopsim/powerflow.hpp"
#include "droopsim/scenario.hpp"

namespace droopsim {

struct SimState {
    std::int64_t step_index = 0;
    double t = 0.0;  // step_index * dt
    std::vector<ControllerState> controllers;
    Phasor v_pcc;
    NetworkSolution last_solution;
};

struct InverterSample {
    double p_out_w = 0.0;
    double q_out_var = 0.0;
    double e_ref_v = 0.0;
    double delta_ref_rad = 0.0;
    double f_meas_hz = 0.0;
};

struct TimeSeriesRow {
    double t_s = 0.0;
    std::vector<InverterSample> inverters;
    double v_pcc_rms_ll_v = 0.0;
    double load_p_w = 0.0;
    double load_q_var = 0.0;
};

struct TimeSeries {
    std::size_t n_inverters = 0;
    std::vector<TimeSeriesRow> rows;
};

/// Fully resolved run configuration: scenario plus per-inverter setpoints.
class Simulator {
public:
    /// Resolves setpoints (calibrating when the scenario asks for it).
    explicit Simulator(Scenario sc);
    Simulator(Scenario sc, std::vector<Setpoints> setpoints);

    const Scenario& scenario() const { return sc_; }
    const std::vector<Setpoints>& setpoints() const { return setpoints_; }

    /// Warm start (filters at P0/Q0/V0) when the scenario calibrates, cold
    /// start (filters at zero) otherwise. Refs start at (delta0, E0).
    SimState initial_state() const;

    /// Network solution for the state's references and the load active at state.t.
    NetworkSolution solve(const SimState& state) const;

    /// Advance one step given the solution of `solve(state)`.
    SimState advance(const SimState& state, const NetworkSolution& sol) const;

    /// solve + advance. Throws SimulationAbort carrying t on failure.
    SimState step(const SimState& state) const;

    TimeSeries run() const;
    TimeSeries run(SimState initial) const;

    std::int64_t total_steps() const;

private:
    const LoadModel& load_at(std::int64_t step_index) const;

    Scenario sc_;
    std::vector<Setpoints> setpoints_;
    std::vector<std::int64_t> event_steps_;
};

/// Time at which a trace enters a +-band*|target| band around `target` for the
/// last time within [t_from, t_to). Crossings are linearly interpolated.
/// Returns the elapsed time since t_from (0 if never outside), or a negative
/// value if the trace is still outside the band at t_to.
double settling_time(std::span<const double> t, std::span<const double> values, double t_from, double t_to,
                     double target, double band);

}  // namespace droopsim
