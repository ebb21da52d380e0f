#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace droopsim::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kSimulationFailed = 2,
    kIoError = 3,
    kBadInput = 4,
};

struct RunOptions {
    std::string scenario;
    std::string out_csv = "out.csv";
    std::optional<int> waveform_inverter;  // 1-based
    bool steady_only = false;
};

struct SweepOptions {
    std::string scenario;
    std::string param;
    double from = 0.0;
    double to = 0.0;
    int steps = 1;
    std::string out_csv;  // empty: write to `out`
    unsigned threads = 0;  // 0: hardware concurrency
};

int cmd_run(const RunOptions& opt, std::ostream& out, std::ostream& err);
int cmd_steady(const std::string& scenario, std::ostream& out, std::ostream& err);
int cmd_calibrate(const std::string& scenario, std::ostream& out, std::ostream& err);
int cmd_sweep(const SweepOptions& opt, std::ostream& out, std::ostream& err);
int cmd_plot(const std::string& csv, const std::string& out_dir, std::ostream& out, std::ostream& err);

/// Names accepted by `sweep --param`.
const std::vector<std::string>& sweep_parameters();

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace droopsim::cli
