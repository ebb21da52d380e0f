#include "droopsim/powerflow.hpp"

#include <cmath>
#include <string>

#include "droopsim/errors.hpp"

namespace droopsim {

void LineModel::validate() const {
    if (!(x_ohm > 0.0) || !(r_ohm >= 0.0)) {
        throw InvalidParameter("line impedance requires X > 0 and R >= 0 (got R=" + std::to_string(r_ohm) +
                               ", X=" + std::to_string(x_ohm) + ")");
    }
}

Admittance load_admittance(const LoadModel& load) {
    if (!(load.v_ref_ll_v > 0.0)) {
        throw InvalidParameter("load reference voltage must be positive");
    }
    const double v_ln = ll_to_ln(load.v_ref_ll_v);
    return Admittance{load.p_w, -load.q_var} / (3.0 * v_ln * v_ln);
}

PQ admittance_power(Admittance y, Phasor v) {
    const std::complex<double> s = 3.0 * std::norm(v) * std::conj(y);
    return {s.real(), s.imag()};
}

NetworkSolution solve_star_network(std::span<const Phasor> emfs, std::span<const LineModel> lines,
                                   Admittance load_y) {
    if (emfs.empty()) {
        throw InvalidParameter("star network needs at least one source");
    }
    if (emfs.size() != lines.size()) {
        throw InvalidParameter("one line per source required");
    }

    std::vector<Admittance> line_y(lines.size());
    Admittance self_y = load_y;
    Phasor injected{};
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto z = lines[i].impedance();
        if (std::abs(z) == 0.0) {
            throw InvalidParameter("line " + std::to_string(i) + " has zero impedance");
        }
        line_y[i] = 1.0 / z;
        self_y += line_y[i];
        injected += emfs[i] * line_y[i];
    }
    if (std::abs(self_y) == 0.0 || !std::isfinite(std::abs(self_y))) {
        throw DegenerateNetwork("bus self-admittance is singular");
    }

    NetworkSolution sol;
    sol.v_pcc = injected / self_y;
    sol.currents.reserve(emfs.size());
    sol.s_out.reserve(emfs.size());
    sol.line_losses.reserve(emfs.size());
    for (std::size_t i = 0; i < emfs.size(); ++i) {
        const Phasor current = (emfs[i] - sol.v_pcc) * line_y[i];
        const std::complex<double> s = 3.0 * emfs[i] * std::conj(current);
        const std::complex<double> loss = 3.0 * std::norm(current) * lines[i].impedance();
        sol.currents.push_back(current);
        sol.s_out.push_back({s.real(), s.imag()});
        sol.line_losses.push_back({loss.real(), loss.imag()});
    }
    sol.s_load = admittance_power(load_y, sol.v_pcc);
    return sol;
}

PQ complex_line_flow(Phasor v_send, Phasor v_recv, const LineModel& line) {
    const auto z = line.impedance();
    if (std::abs(z) == 0.0) {
        throw InvalidParameter("line flow over zero impedance");
    }
    const std::complex<double> s = 3.0 * v_send * std::conj((v_send - v_recv) / z);
    return {s.real(), s.imag()};
}

PQ lossless_line_flow(double v1, double v2, double delta_rad, double x_ohm) {
    if (!(x_ohm > 0.0)) {
        throw InvalidParameter("lossless line flow requires X > 0");
    }
    return {v1 * v2 * std::sin(delta_rad) / x_ohm, v1 * v1 / x_ohm - v1 * v2 * std::cos(delta_rad) / x_ohm};
}

SmallAngleFlow small_angle_flow(double p, double q, double v1, double v2, double x_ohm) {
    if (!(x_ohm > 0.0)) {
        throw InvalidParameter("small-angle flow requires X > 0");
    }
    if (!(v1 > 0.0) || !(v2 > 0.0)) {
        throw InvalidParameter("small-angle flow requires positive voltages");
    }
    return {x_ohm * p / (v1 * v2), x_ohm * q / v1};
}

}  // namespace droopsim
