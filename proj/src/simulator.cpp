#include "droopsim/simulator.hpp"

#include <cmath>
#include <string>

#include "droopsim/errors.hpp"
#include "droopsim/oracle.hpp"

namespace droopsim {

namespace {

void check_finite(double value, const char* what, std::size_t index, double t) {
    if (!std::isfinite(value)) {
        throw SimulationAbort(std::string("non-finite ") + what + " at source " + std::to_string(index + 1) +
                                  ", t=" + std::to_string(t) + " s",
                              t);
    }
}

}  // namespace

Simulator::Simulator(Scenario sc) : Simulator(sc, resolve_setpoints(sc)) {}

Simulator::Simulator(Scenario sc, std::vector<Setpoints> setpoints)
    : sc_(std::move(sc)), setpoints_(std::move(setpoints)) {
    validate(sc_);
    if (setpoints_.size() != sc_.inverters.size()) {
        throw InvalidParameter("one setpoint block per inverter required");
    }
    for (const auto& sp : setpoints_) sp.validate();
    // An event fires on the first step whose time reaches its start time.
    for (const auto& ev : sc_.load_schedule) {
        event_steps_.push_back(static_cast<std::int64_t>(std::ceil(ev.t_start_s / sc_.dt_s - 1e-9)));
    }
}

std::int64_t Simulator::total_steps() const { return std::llround(sc_.t_end_s / sc_.dt_s); }

const LoadModel& Simulator::load_at(std::int64_t step_index) const {
    std::size_t active = 0;
    for (std::size_t i = 0; i < event_steps_.size(); ++i) {
        if (event_steps_[i] <= step_index) active = i;
    }
    return sc_.load_schedule[active].load;
}

SimState Simulator::initial_state() const {
    SimState s;
    s.controllers.reserve(setpoints_.size());
    for (const auto& sp : setpoints_) {
        ControllerState c = equilibrium_state(sp);
        if (!sc_.calibrate) {
            c.p_filt = 0.0;
            c.q_filt = 0.0;
        }
        s.controllers.push_back(c);
    }
    return s;
}

NetworkSolution Simulator::solve(const SimState& state) const {
    std::vector<VoltageCommand> cmds;
    cmds.reserve(state.controllers.size());
    for (const auto& c : state.controllers) cmds.push_back({c.delta_ref, c.e_ref});
    try {
        return solve_scenario_network(sc_, cmds, load_at(state.step_index), has_grid(sc_));
    } catch (const Error& e) {
        throw SimulationAbort(std::string(e.what()) + " at t=" + std::to_string(state.t) + " s", state.t);
    }
}

SimState Simulator::advance(const SimState& state, const NetworkSolution& sol) const {
    SimState next;
    next.step_index = state.step_index + 1;
    next.t = static_cast<double>(next.step_index) * sc_.dt_s;
    next.v_pcc = sol.v_pcc;
    next.last_solution = sol;
    next.controllers.reserve(state.controllers.size());

    const double v_bus = ln_to_ll(std::abs(sol.v_pcc));
    const GridReference grid{sc_.frequency_hz, sc_.v_nominal_ll_v};
    for (std::size_t i = 0; i < state.controllers.size(); ++i) {
        const Measurements meas{sol.s_out[i].p, sol.s_out[i].q, v_bus};
        try {
            next.controllers.push_back(controller_step(state.controllers[i], meas, sc_.inverters[i].gains,
                                                       setpoints_[i], sc_.dt_s, sc_.filter_tau_s, sc_.mode, grid));
        } catch (const Error& e) {
            throw SimulationAbort("controller " + std::to_string(i + 1) + ": " + e.what() +
                                      " at t=" + std::to_string(state.t) + " s",
                                  state.t);
        }
    }
    return next;
}

SimState Simulator::step(const SimState& state) const { return advance(state, solve(state)); }

TimeSeries Simulator::run() const { return run(initial_state()); }

TimeSeries Simulator::run(SimState state) const {
    TimeSeries ts;
    ts.n_inverters = sc_.inverters.size();
    const std::int64_t n_steps = total_steps();
    ts.rows.reserve(static_cast<std::size_t>(n_steps / sc_.log_decimation + 1));

    for (std::int64_t n = state.step_index;; ++n) {
        const NetworkSolution sol = solve(state);
        check_finite(std::abs(sol.v_pcc), "bus voltage", 0, state.t);
        for (std::size_t i = 0; i < sol.s_out.size(); ++i) {
            check_finite(sol.s_out[i].p, "active power", i, state.t);
            check_finite(sol.s_out[i].q, "reactive power", i, state.t);
        }

        if (n % sc_.log_decimation == 0) {
            TimeSeriesRow row;
            row.t_s = state.t;
            row.inverters.reserve(state.controllers.size());
            for (std::size_t i = 0; i < state.controllers.size(); ++i) {
                const auto& c = state.controllers[i];
                row.inverters.push_back({sol.s_out[i].p, sol.s_out[i].q, c.e_ref, c.delta_ref, c.f_meas});
            }
            row.v_pcc_rms_ll_v = ln_to_ll(std::abs(sol.v_pcc));
            row.load_p_w = sol.s_load.p;
            row.load_q_var = sol.s_load.q;
            ts.rows.push_back(std::move(row));
        }
        if (n >= n_steps) break;
        state = advance(state, sol);
    }
    return ts;
}

double settling_time(std::span<const double> t, std::span<const double> values, double t_from, double t_to,
                     double target, double band) {
    const double half_width = band * std::abs(target);
    auto outside = [&](double v) { return std::abs(v - target) > half_width; };

    double last_exit = t_from;
    bool have_prev = false;
    double prev_t = 0.0, prev_v = 0.0;
    bool final_outside = false;
    for (std::size_t k = 0; k < t.size() && k < values.size(); ++k) {
        if (t[k] < t_from || t[k] >= t_to) continue;
        const bool out = outside(values[k]);
        if (have_prev && outside(prev_v) && !out) {
            // Interpolate the band-entry crossing between the two samples.
            const double edge = prev_v > target ? target + half_width : target - half_width;
            const double frac = (edge - prev_v) / (values[k] - prev_v);
            last_exit = prev_t + frac * (t[k] - prev_t);
        }
        final_outside = out;
        have_prev = true;
        prev_t = t[k];
        prev_v = values[k];
    }
    if (final_outside) return -1.0;
    return last_exit - t_from;
}

}  // namespace droopsim
