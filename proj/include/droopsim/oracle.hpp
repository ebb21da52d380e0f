#pragma once

// Steady-state analysis of the coupled droop + network algebraic system.
//
// At equilibrium the reference angles are constant, so every controller
// measures f = f0 and the frequency restoration term vanishes (p_ref = P0).
// The remaining fixed point is
//
//   delta_i = delta0_i - k_pdelta_i (P0_i - P_i(delta, E))
//   E_i     = E0_i     - k_qE_i     (q_ref_i - Q_i(delta, E))
//   q_ref_i = Q0_i - k_vq_i (V0 - V_bus)      (q_ref_i = Q0_i in grid-connected mode)
//
// which steady_state_solve finds by damped fixed-point iteration, i.e. by
// repeating the controller's own algebraic update. None of this touches the
// time-stepping code.

#include <span>
#include <vector>

#include "droopsim/errors.hpp"
#include "droopsim/scenario.hpp"

namespace droopsim {

struct InverterOperatingPoint {
    double delta_rad = 0.0;
    double e_peak_v = 0.0;
    double p_w = 0.0;
    double q_var = 0.0;
};

struct SteadyState {
    std::vector<InverterOperatingPoint> inverters;
    NetworkSolution network;  // includes the grid source (last) in grid-connected mode
    double residual = 0.0;    // max |x - F(x)| over all delta (rad) and E (V) components
    int iterations = 0;

    Phasor v_pcc() const { return network.v_pcc; }
    double v_pcc_ll_rms() const { return ln_to_ll(std::abs(network.v_pcc)); }
};

struct StabilityReport {
    /// k_pdelta_i * dP_i/d(delta_i) with every other source held fixed.
    std::vector<double> loop_gain;
    /// Largest real part among the eigenvalues of the full (delta, E) fixed-point
    /// Jacobian. Differs from the per-inverter gains when sources interact
    /// through a soft bus (islanded operation).
    double coupled_gain = 0.0;
    bool stable = true;

    double max_loop_gain() const;
};

class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, StabilityReport report, int iterations)
        : Error(what), report_(std::move(report)), iterations_(iterations) {}
    const StabilityReport& report() const noexcept { return report_; }
    int iterations() const noexcept { return iterations_; }

private:
    StabilityReport report_;
    int iterations_;
};

struct FixedPointOptions {
    double damping = 0.5;  // 1.0 = plain fixed-point iteration
    int max_iterations = 10000;
    double tolerance = 1e-10;
};

/// Setpoints for every inverter: calibrated when sc.calibrate, explicit otherwise.
std::vector<Setpoints> resolve_setpoints(const Scenario& sc);

SteadyState steady_state_solve(const Scenario& sc, std::span<const Setpoints> setpoints, const LoadModel& load,
                               const FixedPointOptions& opts = {});
/// Convenience overload resolving the setpoints first.
SteadyState steady_state_solve(const Scenario& sc, const LoadModel& load, const FixedPointOptions& opts = {});

/// Newton solve for per-inverter (delta0, E0) such that, with the grid source
/// and the scenario's first load connected, inverter i delivers targets[i].
/// Throws InfeasibleTarget on a singular Jacobian, non-convergence, or an angle
/// beyond the transfer limit.
std::vector<VoltageCommand> calibrate_setpoints(const Scenario& sc, std::span<const PQ> targets,
                                                const GridSource& grid);

/// Loop gains around an operating point, by central differences with step h.
StabilityReport stability_margin(const Scenario& sc, std::span<const Setpoints> setpoints, const LoadModel& load,
                                 const SteadyState& at, double h = 1e-6);

/// Root of x = F(x) by Newton's method; finds unstable equilibria as well.
/// Throws DivergenceError (with an empty report) if Newton fails.
SteadyState locate_equilibrium(const Scenario& sc, std::span<const Setpoints> setpoints, const LoadModel& load);

/// Network solution for explicit (delta, E) commands under the scenario's mode.
SteadyState evaluate_operating_point(const Scenario& sc, std::span<const VoltageCommand> commands,
                                     const LoadModel& load);

}  // namespace droopsim
