#pragma once

// Scenario text format: INI-style sections with `key = value` lines and `#`
// comments. Every physical key carries its unit as a suffix.
//
//   [system]       v_nominal_ll_v, frequency_hz, phase_order (acb | abc)
//   [grid]         r_ohm, x_ohm                                  (optional section)
//   [inverter.N]   p0_w, q0_var, p_rated_w, q_rated_var, line_r_ohm, line_x_ohm,
//                  k_pf_hz_per_w, k_qv_v_per_var, k_fp_w_per_hz, k_vq_var_per_v,
//                  k_pdelta_rad_per_w, k_qe_v_per_var, delta0_rad, e0_peak_v
//   [load.N]       t_start_s, p_w, q_var, v_ref_ll_v
//   [sim]          dt_s, t_end_s, tau_s, mode (islanded | grid_connected),
//                  log_decimation, calibrate (true | false)
//
// Unknown sections and keys are rejected. Omitted gains take the defaults of
// default_gains(); line_x_ohm defaults to 2.5.

#include <filesystem>
#include <string>
#include <string_view>

#include "droopsim/scenario.hpp"

namespace droopsim {

inline constexpr double kDefaultLineX = 2.5;

/// Throws ParseError ("file:line: message") or ConfigError for runtime guards.
Scenario parse_scenario(const std::filesystem::path& path);
Scenario parse_scenario_text(std::string_view text, const std::string& source_name = "<text>");

/// Canonical text form with every gain explicit; parses back to an equal Scenario.
std::string format_scenario(const Scenario& sc);

}  // namespace droopsim
