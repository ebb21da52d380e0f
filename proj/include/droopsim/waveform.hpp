#pragma once

#include <span>

namespace droopsim {

/// Phase placement of the three-phase reference.
///   acb: b = +120 deg, c = -120 deg (a-c-b rotation, the default)
///   abc: b = -120 deg, c = +120 deg (a-b-c rotation)
enum class PhaseOrder { acb, abc };

struct ThreePhaseSample {
    double t = 0.0;
    double va = 0.0;
    double vb = 0.0;
    double vc = 0.0;
};

/// va = E sin(wt + delta), vb = E sin(wt + delta + 120deg), vc = E sin(wt + delta - 120deg)
/// for PhaseOrder::acb; b and c offsets swap for PhaseOrder::abc.
/// Throws InvalidParameter unless e_ref > 0 and f > 0.
ThreePhaseSample synth_three_phase(double e_ref_peak, double delta_ref_rad, double f_hz, double t,
                                   PhaseOrder order = PhaseOrder::acb);

/// sqrt(mean(x^2)) over samples spanning one period.
double rms_periodic(std::span<const double> samples);

}  // namespace droopsim
