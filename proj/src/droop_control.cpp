#include "droopsim/droop_control.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "droopsim/errors.hpp"
#include "droopsim/powerflow.hpp"

namespace droopsim {

namespace {

bool positive_finite(double x) { return std::isfinite(x) && x > 0.0; }

}  // namespace

void DroopGains::validate() const {
    const struct {
        const char* name;
        double value;
    } all[] = {{"k_pf", k_pf}, {"k_qv", k_qv}, {"k_fp", k_fp}, {"k_vq", k_vq}, {"k_pdelta", k_pdelta}, {"k_qe", k_qe}};
    for (const auto& g : all) {
        if (!positive_finite(g.value)) {
            throw InvalidParameter(std::string("droop gain ") + g.name + " must be positive");
        }
    }
}

void Setpoints::validate() const {
    if (!positive_finite(f0_hz)) throw InvalidParameter("f0 must be positive");
    if (!positive_finite(v0_ll_v)) throw InvalidParameter("V0 must be positive");
    if (!positive_finite(e0_peak_v)) throw InvalidParameter("E0 must be positive");
    if (!std::isfinite(p0_w) || !std::isfinite(q0_var) || !std::isfinite(delta0_rad)) {
        throw InvalidParameter("setpoints must be finite");
    }
}

DroopGains default_gains(double p_rated_w, double q_rated_var, double v0_ll_v, double line_x_ohm) {
    if (!positive_finite(p_rated_w) || !positive_finite(q_rated_var) || !positive_finite(v0_ll_v) ||
        !positive_finite(line_x_ohm)) {
        throw InvalidParameter("default gains need positive ratings, voltage and reactance");
    }
    constexpr double kFreqDev = 0.5;   // Hz at rated P
    constexpr double kVoltDev = 0.05;  // fraction of V0 at rated Q
    const double v_ln = ll_to_ln(v0_ll_v);

    DroopGains g;
    g.k_pf = kFreqDev / p_rated_w;
    g.k_qv = kVoltDev * v0_ll_v / q_rated_var;
    g.k_fp = p_rated_w / kFreqDev;
    g.k_vq = q_rated_var / (kVoltDev * v0_ll_v);
    // dP/d(delta) ~ 3 V^2 / X and dQ/d(E_peak) ~ 3 V / (sqrt2 X) against a stiff bus.
    g.k_pdelta = kDefaultLoopGain * line_x_ohm / (3.0 * v_ln * v_ln);
    g.k_qe = kDefaultLoopGain * kSqrt2 * line_x_ohm / (3.0 * v_ln);
    return g;
}

double freq_droop_char(double p, const DroopGains& gains, const Setpoints& sp) {
    return sp.f0_hz - gains.k_pf * (p - sp.p0_w);
}

double volt_droop_char(double q, const DroopGains& gains, const Setpoints& sp) {
    return sp.v0_ll_v - gains.k_qv * (q - sp.q0_var);
}

PowerRefs restoration_refs(double f_meas, double v_meas, const DroopGains& gains, const Setpoints& sp) {
    return {sp.p0_w - gains.k_fp * (sp.f0_hz - f_meas), sp.q0_var - gains.k_vq * (sp.v0_ll_v - v_meas)};
}

VoltageRefs droop_refs(const PowerRefs& refs, double p_filt, double q_filt, const DroopGains& gains,
                       const Setpoints& sp) {
    return {sp.delta0_rad - gains.k_pdelta * (refs.p_ref - p_filt),
            sp.e0_peak_v - gains.k_qe * (refs.q_ref - q_filt)};
}

MeasurementFilter lowpass_update(MeasurementFilter filter, double input, double dt) {
    if (!(dt > 0.0)) {
        throw ConfigError("filter step dt must be positive");
    }
    if (!(dt < filter.tau_s)) {
        throw ConfigError("explicit Euler filter requires dt < tau (dt=" + std::to_string(dt) +
                          ", tau=" + std::to_string(filter.tau_s) + ")");
    }
    filter.state += (dt / filter.tau_s) * (input - filter.state);
    return filter;
}

double measured_frequency(const ControllerState& state, double dt, double f0, double tau) {
    if (!(dt > 0.0)) {
        throw ConfigError("frequency measurement needs dt > 0");
    }
    const double raw = f0 + (state.delta_ref - state.prev_delta_ref) / (2.0 * std::numbers::pi * dt);
    return lowpass_update({tau, state.f_meas}, raw, dt).state;
}

ControllerState controller_step(const ControllerState& state, const Measurements& meas, const DroopGains& gains,
                                 const Setpoints& sp, double dt, double tau, Mode mode,
                                 const GridReference& grid) {
    ControllerState next = state;
    next.p_filt = lowpass_update({tau, state.p_filt}, meas.p_out, dt).state;
    next.q_filt = lowpass_update({tau, state.q_filt}, meas.q_out, dt).state;
    next.v_filt = lowpass_update({tau, state.v_filt}, meas.v_meas, dt).state;

    double v_for_restoration = next.v_filt;
    if (mode == Mode::grid_connected) {
        next.f_meas = grid.f_hz;
        v_for_restoration = grid.v_ll_v;
    } else {
        next.f_meas = measured_frequency(state, dt, sp.f0_hz, tau);
    }

    const PowerRefs refs = restoration_refs(next.f_meas, v_for_restoration, gains, sp);
    const VoltageRefs v = droop_refs(refs, next.p_filt, next.q_filt, gains, sp);
    next.prev_delta_ref = state.delta_ref;
    next.delta_ref = v.delta_ref;
    next.e_ref = v.e_ref;

    if (!std::isfinite(next.delta_ref) || !std::isfinite(next.e_ref)) {
        throw InvalidParameter("controller produced a non-finite voltage reference");
    }
    if (!(next.e_ref > 0.0)) {
        throw InvalidParameter("controller magnitude reference collapsed to " + std::to_string(next.e_ref) + " V");
    }
    return next;
}

ControllerState equilibrium_state(const Setpoints& sp) {
    ControllerState s;
    s.p_filt = sp.p0_w;
    s.q_filt = sp.q0_var;
    s.v_filt = sp.v0_ll_v;
    s.delta_ref = sp.delta0_rad;
    s.prev_delta_ref = sp.delta0_rad;
    s.e_ref = sp.e0_peak_v;
    s.f_meas = sp.f0_hz;
    return s;
}

}  // namespace droopsim
