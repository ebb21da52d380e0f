#include "droopsim/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "droopsim/errors.hpp"
#include "droopsim/log.hpp"
#include "droopsim/oracle.hpp"
#include "droopsim/plot.hpp"
#include "droopsim/scenario_file.hpp"
#include "droopsim/simulator.hpp"
#include "droopsim/text.hpp"
#include "droopsim/timeseries_csv.hpp"

namespace droopsim::cli {

namespace {

struct IoFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

int guarded(std::ostream& err, const std::function<int()>& body) {
    try {
        return body();
    } catch (const IoFailure& e) {
        err << "error: " << e.what() << '\n';
        return kIoError;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kIoError;
    } catch (const ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kBadInput;
    } catch (const ConfigError& e) {
        err << "configuration error: " << e.what() << '\n';
        return kBadInput;
    } catch (const SimulationAbort& e) {
        err << "simulation aborted at t=" << format_double(e.time()) << " s: " << e.what() << '\n';
        return kSimulationFailed;
    } catch (const DivergenceError& e) {
        err << "steady state diverged: " << e.what() << '\n';
        return kSimulationFailed;
    } catch (const InfeasibleTarget& e) {
        err << "infeasible: " << e.what() << '\n';
        return kSimulationFailed;
    } catch (const DegenerateNetwork& e) {
        err << "degenerate network: " << e.what() << '\n';
        return kSimulationFailed;
    } catch (const InvalidParameter& e) {
        err << "invalid parameter: " << e.what() << '\n';
        return kBadInput;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kSimulationFailed;
    }
}

Scenario load_scenario(const std::string& path) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec)) throw IoFailure("cannot read scenario file '" + path + "'");
    log::debug("parsing " + path);
    return parse_scenario(path);
}

void print_stability(std::ostream& out, const StabilityReport& rep) {
    out << "  loop gain:";
    for (double g : rep.loop_gain) out << ' ' << fmt("%.4f", g);
    out << "  coupled: " << fmt("%.4f", rep.coupled_gain) << "  -> " << (rep.stable ? "stable" : "UNSTABLE") << '\n';
}

void print_steady_state(std::ostream& out, const SteadyState& ss) {
    for (std::size_t i = 0; i < ss.inverters.size(); ++i) {
        const auto& op = ss.inverters[i];
        out << "  DG" << i + 1 << ": delta " << fmt("%+.6f", op.delta_rad) << " rad  E " << fmt("%.4f", op.e_peak_v)
            << " V  P " << fmt("%.2f", op.p_w) << " W  Q " << fmt("%.2f", op.q_var) << " var\n";
    }
    out << "  load: P " << fmt("%.2f", ss.network.s_load.p) << " W  Q " << fmt("%.2f", ss.network.s_load.q)
        << " var  V_pcc " << fmt("%.4f", ss.v_pcc_ll_rms()) << " V (ll rms)  [" << ss.iterations
        << " iterations]\n";
}

/// Oracle result per load event; empty optional when the iteration diverged.
std::vector<std::optional<SteadyState>> report_events(std::ostream& out, const Scenario& sc,
                                                      const std::vector<Setpoints>& sps) {
    std::vector<std::optional<SteadyState>> result;
    for (std::size_t k = 0; k < sc.load_schedule.size(); ++k) {
        const auto& ev = sc.load_schedule[k];
        out << "steady state, load " << k + 1 << " (t >= " << format_double(ev.t_start_s) << " s, "
            << format_double(ev.load.p_w) << " W / " << format_double(ev.load.q_var) << " var):\n";
        try {
            SteadyState ss = steady_state_solve(sc, sps, ev.load);
            print_steady_state(out, ss);
            print_stability(out, stability_margin(sc, sps, ev.load, ss));
            result.emplace_back(std::move(ss));
        } catch (const DivergenceError& e) {
            out << "  diverged after " << e.iterations() << " iterations: " << e.what() << '\n';
            print_stability(out, e.report());
            result.emplace_back();
        }
    }
    return result;
}

void apply_sweep(Scenario& sc, const std::string& param, double v) {
    if (param == "tau_s") {
        sc.filter_tau_s = v;
        return;
    }
    for (auto& inv : sc.inverters) {
        if (param == "k_pdelta") inv.gains.k_pdelta = v;
        else if (param == "k_qE" || param == "k_qe") inv.gains.k_qe = v;
        else if (param == "line_x_ohm") inv.line.x_ohm = v;
    }
}

struct SweepRow {
    double value = 0.0;
    bool converged = false;
    double loop_gain = std::numeric_limits<double>::quiet_NaN();
    double coupled_gain = std::numeric_limits<double>::quiet_NaN();
    std::vector<PQ> pq;
    double v_pcc = std::numeric_limits<double>::quiet_NaN();
};

bool same_point(const SteadyState& a, const SteadyState& b) {
    if (a.inverters.size() != b.inverters.size()) return false;
    for (std::size_t i = 0; i < a.inverters.size(); ++i) {
        if (std::abs(a.inverters[i].delta_rad - b.inverters[i].delta_rad) > 1e-6) return false;
        if (std::abs(a.inverters[i].e_peak_v / b.inverters[i].e_peak_v - 1.0) > 1e-6) return false;
    }
    return true;
}

SweepRow sweep_point(Scenario sc, const std::string& param, double value) {
    SweepRow row;
    row.value = value;
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    row.pq.assign(sc.inverters.size(), PQ{nan, nan});
    try {
        apply_sweep(sc, param, value);
        validate(sc);
        const auto sps = resolve_setpoints(sc);
        const auto& load = sc.load_schedule.front().load;
        // Gains are reported at the designed operating equilibrium. The damped
        // iteration can settle on a distant second root once that point is
        // unstable; that counts as losing the operating point.
        std::optional<SteadyState> target;
        try {
            target = locate_equilibrium(sc, sps, load);
            const StabilityReport rep = stability_margin(sc, sps, load, *target);
            row.loop_gain = rep.max_loop_gain();
            row.coupled_gain = rep.coupled_gain;
        } catch (const DivergenceError&) {
        }
        try {
            const SteadyState ss = steady_state_solve(sc, sps, load);
            if (target && !same_point(ss, *target)) {
                log::warn("sweep point " + format_double(value) + ": settled on a different equilibrium");
            } else {
                if (!target) {
                    const StabilityReport rep = stability_margin(sc, sps, load, ss);
                    row.loop_gain = rep.max_loop_gain();
                    row.coupled_gain = rep.coupled_gain;
                }
                row.converged = true;
                for (std::size_t i = 0; i < ss.inverters.size(); ++i) {
                    row.pq[i] = {ss.inverters[i].p_w, ss.inverters[i].q_var};
                }
                row.v_pcc = ss.v_pcc_ll_rms();
            }
        } catch (const DivergenceError& e) {
            if (!target && !e.report().loop_gain.empty()) {
                row.loop_gain = e.report().max_loop_gain();
                row.coupled_gain = e.report().coupled_gain;
            }
        }
    } catch (const std::exception& e) {
        log::warn("sweep point " + format_double(value) + ": " + e.what());
    }
    return row;
}

}  // namespace

const std::vector<std::string>& sweep_parameters() {
    static const std::vector<std::string> names{"k_pdelta", "k_qE", "k_qe", "tau_s", "line_x_ohm"};
    return names;
}

int cmd_run(const RunOptions& opt, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const Scenario sc = load_scenario(opt.scenario);
        if (opt.waveform_inverter &&
            (*opt.waveform_inverter < 1 || static_cast<std::size_t>(*opt.waveform_inverter) > sc.inverters.size())) {
            throw InvalidParameter("--waveform: no inverter " + std::to_string(*opt.waveform_inverter));
        }
        const Simulator sim(sc);
        const auto& sps = sim.setpoints();
        for (std::size_t i = 0; i < sps.size(); ++i) {
            out << "DG" << i + 1 << " setpoints: delta0 " << fmt("%+.6f", sps[i].delta0_rad) << " rad  E0 "
                << fmt("%.4f", sps[i].e0_peak_v) << " V peak\n";
        }
        const auto steady = report_events(out, sc, sps);
        if (opt.steady_only) return kOk;

        log::info("running " + std::to_string(sim.total_steps()) + " steps");
        const TimeSeries ts = sim.run();

        std::optional<WaveformColumns> wave;
        if (opt.waveform_inverter) {
            wave = WaveformColumns{static_cast<std::size_t>(*opt.waveform_inverter - 1), sc.frequency_hz,
                                   sc.phase_order, sc.dt_s * sc.log_decimation, 64};
        }
        {
            std::ofstream csv(opt.out_csv, std::ios::binary);
            if (!csv) throw IoFailure("cannot open '" + opt.out_csv + "' for writing");
            write_csv(csv, ts, wave);
            csv.flush();
            if (!csv) throw IoFailure("write to '" + opt.out_csv + "' failed");
        }
        out << "wrote " << ts.rows.size() << " rows to " << opt.out_csv << '\n';

        const auto min_row = std::min_element(ts.rows.begin(), ts.rows.end(), [](const auto& a, const auto& b) {
            return a.v_pcc_rms_ll_v < b.v_pcc_rms_ll_v;
        });
        out << "min PCC voltage: " << fmt("%.4f", min_row->v_pcc_rms_ll_v) << " V at t = " << format_double(min_row->t_s)
            << " s\n";

        std::vector<double> t;
        for (const auto& r : ts.rows) t.push_back(r.t_s);
        for (std::size_t k = 0; k < sc.load_schedule.size(); ++k) {
            const double t_from = sc.load_schedule[k].t_start_s;
            if (t_from >= sc.t_end_s) break;
            const double t_to = k + 1 < sc.load_schedule.size() ? sc.load_schedule[k + 1].t_start_s
                                                                 : sc.t_end_s + sc.dt_s;
            out << "settling into 2% band after load " << k + 1 << ':';
            for (std::size_t i = 0; i < sc.inverters.size(); ++i) {
                out << "  DG" << i + 1 << ' ';
                if (!steady[k]) {
                    out << "n/a";
                    continue;
                }
                std::vector<double> p;
                for (const auto& r : ts.rows) p.push_back(r.inverters[i].p_out_w);
                const double ts_i = settling_time(t, p, t_from, t_to, steady[k]->inverters[i].p_w, 0.02);
                out << (ts_i < 0 ? std::string("not settled") : fmt("%.4f", ts_i) + " s");
            }
            out << '\n';
        }
        return kOk;
    });
}

int cmd_steady(const std::string& scenario, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const Scenario sc = load_scenario(scenario);
        const auto sps = resolve_setpoints(sc);
        const auto steady = report_events(out, sc, sps);
        const bool all = std::all_of(steady.begin(), steady.end(), [](const auto& s) { return s.has_value(); });
        return all ? kOk : kSimulationFailed;
    });
}

int cmd_calibrate(const std::string& scenario, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const Scenario sc = load_scenario(scenario);
        std::vector<PQ> targets;
        for (const auto& inv : sc.inverters) targets.push_back({inv.p0_w, inv.q0_var});
        const auto cmds = calibrate_setpoints(sc, targets, sc.grid);
        out << "# calibrated against the grid source at the first load\n";
        for (std::size_t i = 0; i < cmds.size(); ++i) {
            out << "[inverter." << i + 1 << "]\n"
                << "delta0_rad = " << format_double(cmds[i].delta_rad) << '\n'
                << "e0_peak_v = " << format_double(cmds[i].e_peak_v) << '\n';
        }
        return kOk;
    });
}

int cmd_sweep(const SweepOptions& opt, std::ostream& out, std::ostream& err) {
    const auto& names = sweep_parameters();
    if (std::find(names.begin(), names.end(), opt.param) == names.end()) {
        err << "error: unknown sweep parameter '" << opt.param << "' (k_pdelta, k_qE, tau_s, line_x_ohm)\n";
        return kBadInput;
    }
    if (opt.steps < 1) {
        err << "error: --steps must be >= 1\n";
        return kUsage;
    }
    return guarded(err, [&] {
        const Scenario sc = load_scenario(opt.scenario);
        const auto n = static_cast<std::size_t>(opt.steps);
        std::vector<SweepRow> rows(n);
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (std::size_t k = next++; k < n; k = next++) {
                const double v =
                    n == 1 ? opt.from
                           : std::lerp(opt.from, opt.to, static_cast<double>(k) / static_cast<double>(n - 1));
                rows[k] = sweep_point(sc, opt.param, v);
            }
        };
        const unsigned hw = opt.threads ? opt.threads : std::max(1u, std::thread::hardware_concurrency());
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < std::min<std::size_t>(hw, n); ++w) pool.emplace_back(worker);
        pool.clear();

        std::ostringstream csv;
        csv << "value,converged,loop_gain,coupled_gain";
        for (std::size_t i = 1; i <= sc.inverters.size(); ++i) csv << ",p_w_" << i << ",q_var_" << i;
        csv << ",v_pcc_rms_ll_v\n";
        for (const auto& r : rows) {
            csv << format_double(r.value) << ',' << (r.converged ? 1 : 0) << ',' << format_double(r.loop_gain) << ','
                << format_double(r.coupled_gain);
            for (const auto& pq : r.pq) csv << ',' << format_double(pq.p) << ',' << format_double(pq.q);
            csv << ',' << format_double(r.v_pcc) << '\n';
        }
        if (opt.out_csv.empty()) {
            out << csv.str();
        } else {
            std::ofstream f(opt.out_csv, std::ios::binary);
            f << csv.str();
            if (!f) throw IoFailure("cannot write '" + opt.out_csv + "'");
        }
        return kOk;
    });
}

int cmd_plot(const std::string& csv, const std::string& out_dir, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        std::error_code ec;
        if (!std::filesystem::is_regular_file(csv, ec)) throw IoFailure("cannot read CSV file '" + csv + "'");
        for (const auto& p : emit_plots(csv, out_dir)) out << "wrote " << p.string() << '\n';
        return kOk;
    });
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    log::init();
    CLI::App app{"Droop-controlled microgrid phasor simulator", "droopsim"};
    app.require_subcommand(1);

    RunOptions run_opt;
    int waveform = 0;
    auto* run = app.add_subcommand("run", "Simulate a scenario and write the time series as CSV");
    run->add_option("scenario", run_opt.scenario, "Scenario file")->required();
    run->add_option("-o,--output", run_opt.out_csv, "Output CSV path")->capture_default_str();
    auto* wave_opt = run->add_option("--waveform", waveform, "Add va/vb/vc columns for inverter INV (1-based)");
    run->add_flag("--steady-only", run_opt.steady_only, "Print oracle steady states only");

    std::string steady_path;
    auto* steady = app.add_subcommand("steady", "Oracle steady state and loop gains for every load");
    steady->add_option("scenario", steady_path, "Scenario file")->required();

    std::string calib_path;
    auto* calib = app.add_subcommand("calibrate", "Setpoint angles and magnitudes for grid-connected targets");
    calib->add_option("scenario", calib_path, "Scenario file")->required();

    SweepOptions sweep_opt;
    auto* sweep = app.add_subcommand("sweep", "Oracle evaluation over a parameter range");
    sweep->add_option("scenario", sweep_opt.scenario, "Scenario file")->required();
    sweep->add_option("--param", sweep_opt.param, "k_pdelta | k_qE | tau_s | line_x_ohm")->required();
    sweep->add_option("--from", sweep_opt.from, "First value")->required();
    sweep->add_option("--to", sweep_opt.to, "Last value")->required();
    sweep->add_option("--steps", sweep_opt.steps, "Number of grid points")->required();
    sweep->add_option("-o,--output", sweep_opt.out_csv, "Output CSV (default stdout)");
    sweep->add_option("-j,--threads", sweep_opt.threads, "Worker threads (0 = all cores)");

    std::string plot_csv, plot_dir = ".";
    auto* plot = app.add_subcommand("plot", "Render SVG charts from a run CSV");
    plot->add_option("csv", plot_csv, "CSV written by `run`")->required();
    plot->add_option("-d,--dir", plot_dir, "Output directory")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n" << app.help();
        return kUsage;
    }

    if (*run) {
        if (*wave_opt) run_opt.waveform_inverter = waveform;
        return cmd_run(run_opt, out, err);
    }
    if (*steady) return cmd_steady(steady_path, out, err);
    if (*calib) return cmd_calibrate(calib_path, out, err);
    if (*sweep) return cmd_sweep(sweep_opt, out, err);
    return cmd_plot(plot_csv, plot_dir, out, err);
}

}  // namespace droopsim::cli
