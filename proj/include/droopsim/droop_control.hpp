#pragma once

// Per-inverter two-layer droop controller.
//
// Restoration layer: measured (f, V) -> modified power references (p_ref, q_ref).
// Droop layer:       power errors     -> voltage references (delta_ref, e_ref).
//
// e_ref / E0 are per-phase peak amplitudes, the quantity that multiplies the
// sinusoids of the three-phase reference. V0 and the measured voltage are
// line-to-line RMS.

namespace droopsim {

struct DroopGains {
    double k_pf = 0.0;      // Hz/W    frequency characteristic slope
    double k_qv = 0.0;      // V/var   voltage characteristic slope
    double k_fp = 0.0;      // W/Hz    frequency restoration gain
    double k_vq = 0.0;      // var/V   voltage restoration gain
    double k_pdelta = 0.0;  // rad/W   angle droop gain
    double k_qe = 0.0;      // V/var   magnitude droop gain (peak volts)

    /// Throws InvalidParameter unless every gain is positive and finite.
    void validate() const;

    friend bool operator==(const DroopGains&, const DroopGains&) = default;
};

struct Setpoints {
    double f0_hz = 0.0;
    double v0_ll_v = 0.0;
    double p0_w = 0.0;
    double q0_var = 0.0;
    double delta0_rad = 0.0;
    double e0_peak_v = 0.0;

    /// Throws InvalidParameter unless f0, V0 and E0 are positive.
    void validate() const;

    friend bool operator==(const Setpoints&, const Setpoints&) = default;
};

/// Target loop gain used when deriving the default angle and magnitude droop gains.
inline constexpr double kDefaultLoopGain = 0.3;

/// Conventional gains: 0.5 Hz and 5 % voltage deviation at rated power; angle and
/// magnitude droop sized for a loop gain of kDefaultLoopGain against a stiff bus
/// behind a reactance of `line_x_ohm`.
DroopGains default_gains(double p_rated_w, double q_rated_var, double v0_ll_v, double line_x_ohm);

/// First-order low-pass filter, forward-Euler discretised.
struct MeasurementFilter {
    double tau_s = 0.1;
    double state = 0.0;
};

struct ControllerState {
    double p_filt = 0.0;          // W
    double q_filt = 0.0;          // var
    double v_filt = 0.0;          // V line-to-line RMS
    double delta_ref = 0.0;       // rad
    double e_ref = 0.0;           // V peak per phase
    double f_meas = 0.0;          // Hz, filtered
    double prev_delta_ref = 0.0;  // rad, delta_ref of the previous step

    friend bool operator==(const ControllerState&, const ControllerState&) = default;
};

/// Raw local measurements handed to a controller every step.
struct Measurements {
    double p_out = 0.0;   // W
    double q_out = 0.0;   // var
    double v_meas = 0.0;  // V line-to-line RMS
};

enum class Mode { islanded, grid_connected };

/// f = f0 - k_pf (p - P0)
double freq_droop_char(double p, const DroopGains& gains, const Setpoints& sp);
/// V = V0 - k_qv (q - Q0)
double volt_droop_char(double q, const DroopGains& gains, const Setpoints& sp);

struct PowerRefs {
    double p_ref = 0.0;
    double q_ref = 0.0;
};

/// p_ref = P0 - k_fp (f0 - f),  q_ref = Q0 - k_vq (V0 - V)
PowerRefs restoration_refs(double f_meas, double v_meas, const DroopGains& gains, const Setpoints& sp);

struct VoltageRefs {
    double delta_ref = 0.0;
    double e_ref = 0.0;
};

/// delta_ref = delta0 - k_pdelta (p_ref - p_filt),  e_ref = E0 - k_qE (q_ref - q_filt)
VoltageRefs droop_refs(const PowerRefs& refs, double p_filt, double q_filt, const DroopGains& gains,
                       const Setpoints& sp);

/// state' = state + (dt / tau) (input - state). Throws ConfigError unless 0 < dt < tau.
MeasurementFilter lowpass_update(MeasurementFilter filter, double input, double dt);

/// Filtered local frequency: f0 + d(delta_ref)/dt / 2pi, passed through the
/// measurement filter. Uses the angle increment of the last completed step.
double measured_frequency(const ControllerState& state, double dt, double f0, double tau);

/// Frequency and voltage the controller sees in grid-connected mode.
struct GridReference {
    double f_hz = 0.0;
    double v_ll_v = 0.0;
};

/// One controller update. Order: measurement filters, frequency, restoration, droop.
/// In grid-connected mode the frequency and voltage measurements are pinned to `grid`.
ControllerState controller_step(const ControllerState& state, const Measurements& meas, const DroopGains& gains,
                                 const Setpoints& sp, double dt, double tau, Mode mode,
                                 const GridReference& grid);

/// Controller resting at its setpoints: filters at (P0, Q0, V0), refs at (delta0, E0), f = f0.
ControllerState equilibrium_state(const Setpoints& sp);

}  // namespace droopsim
