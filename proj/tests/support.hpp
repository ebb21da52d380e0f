#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "droopsim/droop_control.hpp"
#include "droopsim/scenario.hpp"

namespace droopsim::testing {

inline double rel_err(double a, double b) {
    const double scale = std::max(std::abs(a), std::abs(b));
    return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

inline InverterConfig two_dg_inverter(double x_ohm = 2.5) {
    InverterConfig inv;
    inv.p0_w = 5000;
    inv.q0_var = 2500;
    inv.p_rated_w = 10000;
    inv.q_rated_var = 5000;
    inv.line = {0.5, x_ohm};
    inv.gains = default_gains(inv.p_rated_w, inv.q_rated_var, 400.0, x_ohm);
    return inv;
}

/// Two DGs, 400 V / 60 Hz, 10 -> 20 -> 10 kW load stepping at 1 s and 2 s.
inline Scenario two_dg() {
    Scenario sc;
    sc.inverters = {two_dg_inverter(), two_dg_inverter()};
    sc.load_schedule = {{0.0, {10e3, 5e3, 400}}, {1.0, {20e3, 10e3, 400}}, {2.0, {10e3, 5e3, 400}}};
    return sc;
}

inline std::string source_path(const std::string& rel) { return std::string(DROOPSIM_SOURCE_DIR) + "/" + rel; }

/// Fresh per-test scratch directory.
inline std::filesystem::path scratch_dir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    auto dir = std::filesystem::temp_directory_path() / "droopsim_tests" /
               (std::string(info->test_suite_name()) + "." + info->name());
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream(p, std::ios::binary) << text;
}

}  // namespace droopsim::testing
