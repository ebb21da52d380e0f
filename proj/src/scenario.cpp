#include "droopsim/scenario.hpp"

#include <cmath>
#include <string>

#include "droopsim/errors.hpp"

namespace droopsim {

void validate(const Scenario& sc) {
    if (!(sc.v_nominal_ll_v > 0.0)) throw ConfigError("nominal voltage must be positive");
    if (!(sc.frequency_hz > 0.0)) throw ConfigError("system frequency must be positive");
    if (!(sc.dt_s > 0.0)) throw ConfigError("dt must be positive");
    if (!(sc.t_end_s >= 0.0)) throw ConfigError("t_end must be non-negative");
    if (!(sc.filter_tau_s > 0.0)) throw ConfigError("filter tau must be positive");
    if (!(sc.dt_s < sc.filter_tau_s)) {
        throw ConfigError("dt must be smaller than the filter time constant (explicit Euler stability guard)");
    }
    if (sc.log_decimation < 1) throw ConfigError("log_decimation must be >= 1");
    if (sc.mode == Mode::islanded && sc.inverters.empty()) {
        throw ConfigError("islanded operation needs at least one inverter");
    }
    if (sc.load_schedule.empty()) throw ConfigError("load schedule is empty");
    if (sc.load_schedule.front().t_start_s != 0.0) throw ConfigError("first load entry must start at t = 0");
    for (std::size_t i = 1; i < sc.load_schedule.size(); ++i) {
        if (!(sc.load_schedule[i].t_start_s > sc.load_schedule[i - 1].t_start_s)) {
            throw ConfigError("load schedule times must be strictly increasing");
        }
    }
    for (const auto& ev : sc.load_schedule) {
        if (!(ev.load.p_w >= 0.0)) throw InvalidParameter("load active power must be >= 0");
        load_admittance(ev.load);
    }
    if (std::abs(sc.grid.impedance.impedance()) == 0.0) throw InvalidParameter("grid impedance must be nonzero");
    for (std::size_t i = 0; i < sc.inverters.size(); ++i) {
        const auto& inv = sc.inverters[i];
        inv.line.validate();
        inv.gains.validate();
        if (!(inv.p_rated_w > 0.0) || !(inv.q_rated_var > 0.0)) {
            throw InvalidParameter("inverter " + std::to_string(i + 1) + ": ratings must be positive");
        }
        if (!sc.calibrate && (!inv.delta0_rad || !inv.e0_peak_v)) {
            throw ConfigError("inverter " + std::to_string(i + 1) +
                              ": delta0 and E0 are required when calibration is disabled");
        }
        if (inv.e0_peak_v && !(*inv.e0_peak_v > 0.0)) {
            throw InvalidParameter("inverter " + std::to_string(i + 1) + ": E0 must be positive");
        }
    }
}

const LoadModel& apply_events(std::span<const LoadEvent> schedule, double t) {
    if (schedule.empty()) throw InvalidParameter("load schedule is empty");
    if (t < schedule.front().t_start_s) throw InvalidParameter("time precedes the first load entry");
    const LoadEvent* active = &schedule.front();
    for (const auto& ev : schedule) {
        if (ev.t_start_s <= t) active = &ev;
        else break;
    }
    return active->load;
}

NetworkSolution solve_scenario_network(const Scenario& sc, std::span<const VoltageCommand> commands,
                                       const LoadModel& load, bool with_grid) {
    std::vector<Phasor> emfs;
    std::vector<LineModel> lines;
    emfs.reserve(commands.size() + 1);
    lines.reserve(commands.size() + 1);
    for (std::size_t i = 0; i < commands.size(); ++i) {
        emfs.push_back(emf_phasor(commands[i].e_peak_v, commands[i].delta_rad));
        lines.push_back(sc.inverters[i].line);
    }
    if (with_grid) {
        emfs.emplace_back(ll_to_ln(sc.v_nominal_ll_v), 0.0);
        lines.push_back(sc.grid.impedance);
    }
    return solve_star_network(emfs, lines, load_admittance(load));
}

Setpoints base_setpoints(const Scenario& sc, const InverterConfig& inv) {
    Setpoints sp;
    sp.f0_hz = sc.frequency_hz;
    sp.v0_ll_v = sc.v_nominal_ll_v;
    sp.p0_w = inv.p0_w;
    sp.q0_var = inv.q0_var;
    sp.delta0_rad = inv.delta0_rad.value_or(0.0);
    sp.e0_peak_v = inv.e0_peak_v.value_or(nominal_peak(sc.v_nominal_ll_v));
    return sp;
}

}  // namespace droopsim
