#include "droopsim/waveform.hpp"

#include <cmath>
#include <numbers>

#include "droopsim/errors.hpp"

namespace droopsim {

ThreePhaseSample synth_three_phase(double e_ref_peak, double delta_ref_rad, double f_hz, double t,
                                   PhaseOrder order) {
    if (!(e_ref_peak > 0.0) || !(f_hz > 0.0)) {
        throw InvalidParameter("waveform synthesis needs positive amplitude and frequency");
    }
    constexpr double kShift = 2.0 * std::numbers::pi / 3.0;
    // Reduce wt modulo one cycle so t and t + 1/f give the same phase argument.
    const double cycles = f_hz * t;
    const double theta = 2.0 * std::numbers::pi * (cycles - std::floor(cycles)) + delta_ref_rad;
    const double b_shift = order == PhaseOrder::acb ? kShift : -kShift;
    return {t, e_ref_peak * std::sin(theta), e_ref_peak * std::sin(theta + b_shift),
            e_ref_peak * std::sin(theta - b_shift)};
}

double rms_periodic(std::span<const double> samples) {
    if (samples.empty()) {
        throw InvalidParameter("RMS of an empty record");
    }
    double acc = 0.0;
    for (double x : samples) acc += x * x;
    return std::sqrt(acc / static_cast<double>(samples.size()));
}

}  // namespace droopsim
