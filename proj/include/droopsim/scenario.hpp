#pragma once

#include <optional>
#include <span>
#include <vector>

#include "droopsim/droop_control.hpp"
#include "droopsim/powerflow.hpp"
#include "droopsim/waveform.hpp"

namespace droopsim {

struct InverterConfig {
    double p0_w = 0.0;
    double q0_var = 0.0;
    double p_rated_w = 0.0;
    double q_rated_var = 0.0;
    LineModel line;
    DroopGains gains;
    // Present only when calibration is disabled.
    std::optional<double> delta0_rad;
    std::optional<double> e0_peak_v;

    friend bool operator==(const InverterConfig&, const InverterConfig&) = default;
};

struct LoadEvent {
    double t_start_s = 0.0;
    LoadModel load;

    friend bool operator==(const LoadEvent&, const LoadEvent&) = default;
};

/// Stiff utility source behind a small impedance at the common bus.
struct GridSource {
    LineModel impedance{0.0, 0.01};

    friend bool operator==(const GridSource&, const GridSource&) = default;
};

struct Scenario {
    double v_nominal_ll_v = 400.0;
    double frequency_hz = 60.0;
    PhaseOrder phase_order = PhaseOrder::acb;

    std::vector<InverterConfig> inverters;
    std::vector<LoadEvent> load_schedule;
    GridSource grid;

    Mode mode = Mode::islanded;
    double dt_s = 1e-3;
    double t_end_s = 3.0;
    double filter_tau_s = 0.1;
    int log_decimation = 1;
    // true: (delta0, E0) calibrated against the grid at the first load, filters
    // start warm at (P0, Q0). false: explicit (delta0, E0), filters start at zero.
    bool calibrate = true;

    friend bool operator==(const Scenario&, const Scenario&) = default;
};

/// Throws ConfigError (or InvalidParameter for component values) when a
/// structural invariant is violated.
void validate(const Scenario& sc);

/// Load with the largest t_start <= t (closed-left intervals).
/// Throws InvalidParameter for an empty schedule or t before the first entry.
const LoadModel& apply_events(std::span<const LoadEvent> schedule, double t);

/// Per-phase peak amplitude of a line-to-line RMS voltage.
inline double nominal_peak(double v_ll) { return rms_to_peak(ll_to_ln(v_ll)); }

/// EMF phasor of an inverter commanding (e_ref peak, delta_ref).
inline Phasor emf_phasor(double e_ref_peak, double delta_ref_rad) {
    return phasor_from_polar(peak_to_rms(e_ref_peak), delta_ref_rad);
}

struct VoltageCommand {
    double delta_rad = 0.0;
    double e_peak_v = 0.0;
};

/// Star network with one source per inverter, plus the grid source (last) in
/// grid-connected mode or when `with_grid` is set.
NetworkSolution solve_scenario_network(const Scenario& sc, std::span<const VoltageCommand> commands,
                                       const LoadModel& load, bool with_grid);

inline bool has_grid(const Scenario& sc) { return sc.mode == Mode::grid_connected; }

/// Setpoints with (delta0, E0) left for the caller to fill.
Setpoints base_setpoints(const Scenario& sc, const InverterConfig& inv);

}  // namespace droopsim
