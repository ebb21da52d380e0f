#pragma once

// Phasor-domain network model.
//
// Conventions: the network is the single-phase positive-sequence equivalent of
// a balanced three-phase system. Configured voltages (LoadModel::v_ref_ll_v and
// the scenario's nominal voltage) are line-to-line RMS; every Phasor is a
// line-to-neutral RMS quantity; every power is a three-phase total.

#include <complex>
#include <numbers>
#include <span>
#include <vector>

namespace droopsim {

/// Complex RMS line-to-neutral quantity (volts or amps).
using Phasor = std::complex<double>;
/// Per-phase complex admittance in siemens.
using Admittance = std::complex<double>;

inline constexpr double kSqrt3 = std::numbers::sqrt3;
inline constexpr double kSqrt2 = std::numbers::sqrt2;

inline Phasor phasor_from_polar(double magnitude, double angle_rad) {
    return std::polar(magnitude, angle_rad);
}

/// Line-to-line RMS -> line-to-neutral RMS.
inline constexpr double ll_to_ln(double v_ll) { return v_ll / kSqrt3; }
inline constexpr double ln_to_ll(double v_ln) { return v_ln * kSqrt3; }
/// Per-phase peak amplitude <-> per-phase RMS.
inline constexpr double peak_to_rms(double v_peak) { return v_peak / kSqrt2; }
inline constexpr double rms_to_peak(double v_rms) { return v_rms * kSqrt2; }

/// Active/reactive power pair. Units depend on context (three-phase unless noted).
struct PQ {
    double p = 0.0;  // W
    double q = 0.0;  // var

    friend bool operator==(const PQ&, const PQ&) = default;
};

/// Series R + jX line between an inverter and the common bus.
struct LineModel {
    double r_ohm = 0.0;
    double x_ohm = 0.0;

    std::complex<double> impedance() const { return {r_ohm, x_ohm}; }
    /// Throws InvalidParameter unless X > 0 and R >= 0.
    void validate() const;

    friend bool operator==(const LineModel&, const LineModel&) = default;
};

/// Constant-impedance load defined by its rating at a reference voltage.
struct LoadModel {
    double p_w = 0.0;         // three-phase rated active power
    double q_var = 0.0;       // three-phase rated reactive power
    double v_ref_ll_v = 0.0;  // line-to-line RMS voltage at which the rating applies

    friend bool operator==(const LoadModel&, const LoadModel&) = default;
};

struct NetworkSolution {
    Phasor v_pcc;
    std::vector<Phasor> currents;  // source -> bus
    std::vector<PQ> s_out;         // at each source terminal
    std::vector<PQ> line_losses;   // series losses of each line
    PQ s_load;
};

/// Y = (P - jQ) / (3 * V_ln_ref^2).
Admittance load_admittance(const LoadModel& load);

/// Three-phase complex power drawn by admittance `y` at line-to-neutral voltage `v`.
PQ admittance_power(Admittance y, Phasor v);

/// Closed-form nodal solve of N sources feeding one bus through their lines.
/// Throws InvalidParameter on size mismatch or zero impedance and
/// DegenerateNetwork when the bus self-admittance vanishes.
NetworkSolution solve_star_network(std::span<const Phasor> emfs, std::span<const LineModel> lines,
                                   Admittance load_y);

/// Exact three-phase sending-end power S = 3 V_send conj((V_send - V_recv) / Z).
PQ complex_line_flow(Phasor v_send, Phasor v_recv, const LineModel& line);

/// Per-phase flow over a lossless reactance:
///   P = V1 V2 sin(delta) / X,   Q = V1^2 / X - V1 V2 cos(delta) / X.
PQ lossless_line_flow(double v1, double v2, double delta_rad, double x_ohm);

struct SmallAngleFlow {
    double delta_rad = 0.0;
    double dv = 0.0;  // v1 - v2, volts
};

/// Small-angle inversion of the lossless flow: delta = X P / (V1 V2), V1 - V2 = X Q / V1.
SmallAngleFlow small_angle_flow(double p, double q, double v1, double v2, double x_ohm);

}  // namespace droopsim
