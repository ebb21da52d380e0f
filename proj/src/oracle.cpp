#include "droopsim/oracle.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace droopsim {

namespace {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

constexpr double kTransferLimit = std::numbers::pi / 2.0;

std::vector<VoltageCommand> to_commands(const Vec& x) {
    const auto n = static_cast<std::size_t>(x.size() / 2);
    std::vector<VoltageCommand> cmds(n);
    for (std::size_t i = 0; i < n; ++i) {
        cmds[i] = {x[static_cast<Eigen::Index>(i)], x[static_cast<Eigen::Index>(n + i)]};
    }
    return cmds;
}

Vec from_commands(std::span<const VoltageCommand> cmds) {
    const auto n = static_cast<Eigen::Index>(cmds.size());
    Vec x(2 * n);
    for (Eigen::Index i = 0; i < n; ++i) {
        x[i] = cmds[static_cast<std::size_t>(i)].delta_rad;
        x[n + i] = cmds[static_cast<std::size_t>(i)].e_peak_v;
    }
    return x;
}

Vec flat_start(const Scenario& sc) {
    const auto n = static_cast<Eigen::Index>(sc.inverters.size());
    Vec x(2 * n);
    x.head(n).setZero();
    x.tail(n).setConstant(nominal_peak(sc.v_nominal_ll_v));
    return x;
}

/// Angle of each source EMF relative to the bus voltage stays inside +-pi/2.
bool within_transfer_limit(const NetworkSolution& sol, std::span<const VoltageCommand> cmds) {
    if (std::abs(sol.v_pcc) == 0.0) return true;
    const double bus_angle = std::arg(sol.v_pcc);
    for (const auto& c : cmds) {
        double d = std::remainder(c.delta_rad - bus_angle, 2.0 * std::numbers::pi);
        if (std::abs(d) > kTransferLimit || !(c.e_peak_v > 0.0)) return false;
    }
    return true;
}

/// Flat start with a tiny per-source stagger. Identical sources started from an
/// exactly symmetric point never excite their differential modes, so an unstable
/// equilibrium would be reported as converged.
Vec staggered_start(const Scenario& sc) {
    Vec x = flat_start(sc);
    const Eigen::Index n = x.size() / 2;
    for (Eigen::Index i = 0; i < n; ++i) {
        x[i] += 1e-6 * static_cast<double>(i);
        x[n + i] *= 1.0 + 1e-6 * static_cast<double>(i);
    }
    return x;
}

bool finite(const Vec& x) { return x.allFinite(); }

/// One application of the controller's steady algebraic update F(x).
Vec fixed_point_map(const Scenario& sc, std::span<const Setpoints> sp, const SteadyState& point) {
    const auto n = static_cast<Eigen::Index>(sp.size());
    Vec fx(2 * n);
    const double v_meas = has_grid(sc) ? sc.v_nominal_ll_v : point.v_pcc_ll_rms();
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        const auto& g = sc.inverters[idx].gains;
        const PowerRefs refs = restoration_refs(sp[idx].f0_hz, v_meas, g, sp[idx]);
        const VoltageRefs v = droop_refs(refs, point.inverters[idx].p_w, point.inverters[idx].q_var, g, sp[idx]);
        fx[i] = v.delta_ref;
        fx[n + i] = v.e_ref;
    }
    return fx;
}

struct NewtonResult {
    Vec x;
    double residual = 0.0;
    int iterations = 0;
    bool converged = false;
    std::string failure;
};

/// Newton's method with a central-difference Jacobian. `step` holds the
/// difference step per unknown; the first half of the unknowns are angles and
/// their updates are clipped to `max_angle_step`.
template <class Residual>
NewtonResult newton_solve(Residual&& residual, Vec x, const Vec& step, double accept_tol, int max_iter = 50,
                          double max_angle_step = 0.25) {
    NewtonResult out;
    const Eigen::Index n = x.size();
    for (int it = 0; it <= max_iter; ++it) {
        Vec r = residual(x);
        out.residual = r.size() ? r.cwiseAbs().maxCoeff() : 0.0;
        out.iterations = it;
        if (!r.allFinite()) {
            out.failure = "non-finite residual";
            break;
        }
        if (out.residual < 1e-14 || it == max_iter) break;

        Mat jac(r.size(), n);
        for (Eigen::Index j = 0; j < n; ++j) {
            Vec xp = x, xm = x;
            xp[j] += step[j];
            xm[j] -= step[j];
            jac.col(j) = (residual(xp) - residual(xm)) / (2.0 * step[j]);
        }
        Eigen::FullPivLU<Mat> lu(jac);
        if (!lu.isInvertible()) {
            out.failure = "singular Jacobian";
            break;
        }
        Vec dx = lu.solve(-r);
        const double worst_angle = dx.head(n / 2).size() ? dx.head(n / 2).cwiseAbs().maxCoeff() : 0.0;
        if (worst_angle > max_angle_step) dx *= max_angle_step / worst_angle;
        x += dx;
        if (dx.cwiseAbs().maxCoeff() < 1e-15 * (1.0 + x.cwiseAbs().maxCoeff())) {
            out.residual = residual(x).cwiseAbs().maxCoeff();
            break;
        }
    }
    out.x = std::move(x);
    out.converged = out.failure.empty() && out.residual <= accept_tol;
    if (!out.converged && out.failure.empty()) out.failure = "no convergence";
    return out;
}

Vec difference_steps(const Scenario& sc, Eigen::Index n, double h) {
    Vec step(2 * n);
    step.head(n).setConstant(h);
    step.tail(n).setConstant(h * nominal_peak(sc.v_nominal_ll_v));
    return step;
}

}  // namespace

double StabilityReport::max_loop_gain() const {
    return loop_gain.empty() ? 0.0 : *std::max_element(loop_gain.begin(), loop_gain.end());
}

SteadyState evaluate_operating_point(const Scenario& sc, std::span<const VoltageCommand> commands,
                                     const LoadModel& load) {
    SteadyState st;
    st.network = solve_scenario_network(sc, commands, load, has_grid(sc));
    st.inverters.reserve(commands.size());
    for (std::size_t i = 0; i < commands.size(); ++i) {
        st.inverters.push_back(
            {commands[i].delta_rad, commands[i].e_peak_v, st.network.s_out[i].p, st.network.s_out[i].q});
    }
    return st;
}

std::vector<VoltageCommand> calibrate_setpoints(const Scenario& sc, std::span<const PQ> targets,
                                                const GridSource& grid) {
    if (targets.size() != sc.inverters.size()) {
        throw InvalidParameter("one calibration target per inverter required");
    }
    if (sc.load_schedule.empty()) throw InvalidParameter("calibration needs a load schedule");
    const auto n = static_cast<Eigen::Index>(targets.size());
    if (n == 0) return {};

    Scenario grid_sc = sc;
    grid_sc.grid = grid;
    const LoadModel& load = sc.load_schedule.front().load;

    Vec scale(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& t = targets[static_cast<std::size_t>(i)];
        scale[i] = std::max(std::hypot(t.p, t.q), 1.0);
    }
    auto residual = [&](const Vec& x) {
        const auto cmds = to_commands(x);
        const NetworkSolution sol = solve_scenario_network(grid_sc, cmds, load, true);
        Vec r(2 * n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto idx = static_cast<std::size_t>(i);
            r[i] = (sol.s_out[idx].p - targets[idx].p) / scale[i];
            r[n + i] = (sol.s_out[idx].q - targets[idx].q) / scale[i];
        }
        return r;
    };

    NewtonResult res;
    try {
        res = newton_solve(residual, flat_start(grid_sc), difference_steps(grid_sc, n, 1e-6), 1e-9);
    } catch (const DegenerateNetwork& e) {
        throw InfeasibleTarget(std::string("calibration network degenerate: ") + e.what());
    }
    if (!res.converged) {
        throw InfeasibleTarget("calibration failed (" + res.failure + ", residual " + std::to_string(res.residual) +
                               ")");
    }
    auto cmds = to_commands(res.x);
    const NetworkSolution sol = solve_scenario_network(grid_sc, cmds, load, true);
    if (!within_transfer_limit(sol, cmds)) {
        throw InfeasibleTarget("calibrated angle exceeds the transfer limit");
    }
    return cmds;
}

std::vector<Setpoints> resolve_setpoints(const Scenario& sc) {
    std::vector<Setpoints> sp;
    sp.reserve(sc.inverters.size());
    for (const auto& inv : sc.inverters) sp.push_back(base_setpoints(sc, inv));
    if (sc.calibrate) {
        std::vector<PQ> targets;
        for (const auto& inv : sc.inverters) targets.push_back({inv.p0_w, inv.q0_var});
        const auto cmds = calibrate_setpoints(sc, targets, sc.grid);
        for (std::size_t i = 0; i < sp.size(); ++i) {
            sp[i].delta0_rad = cmds[i].delta_rad;
            sp[i].e0_peak_v = cmds[i].e_peak_v;
        }
    }
    return sp;
}

StabilityReport stability_margin(const Scenario& sc, std::span<const Setpoints> setpoints, const LoadModel& load,
                                 const SteadyState& at, double h) {
    StabilityReport rep;
    const auto n = static_cast<Eigen::Index>(at.inverters.size());
    if (n == 0) return rep;

    std::vector<VoltageCommand> base(at.inverters.size());
    for (std::size_t i = 0; i < base.size(); ++i) base[i] = {at.inverters[i].delta_rad, at.inverters[i].e_peak_v};

    rep.loop_gain.resize(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
        auto plus = base, minus = base;
        plus[i].delta_rad += h;
        minus[i].delta_rad -= h;
        const double pp = solve_scenario_network(sc, plus, load, has_grid(sc)).s_out[i].p;
        const double pm = solve_scenario_network(sc, minus, load, has_grid(sc)).s_out[i].p;
        rep.loop_gain[i] = sc.inverters[i].gains.k_pdelta * (pp - pm) / (2.0 * h);
    }

    const Vec x0 = from_commands(base);
    const Vec step = difference_steps(sc, n, h);
    Mat jac(2 * n, 2 * n);
    for (Eigen::Index j = 0; j < 2 * n; ++j) {
        Vec xp = x0, xm = x0;
        xp[j] += step[j];
        xm[j] -= step[j];
        const Vec fp = fixed_point_map(sc, setpoints, evaluate_operating_point(sc, to_commands(xp), load));
        const Vec fm = fixed_point_map(sc, setpoints, evaluate_operating_point(sc, to_commands(xm), load));
        jac.col(j) = (fp - fm) / (2.0 * step[j]);
    }
    const Eigen::EigenSolver<Mat> eig(jac, false);
    rep.coupled_gain = eig.eigenvalues().real().maxCoeff();

    rep.stable = rep.coupled_gain < 1.0 && rep.max_loop_gain() < 1.0;
    for (double g : rep.loop_gain) {
        if (!std::isfinite(g)) rep.stable = false;
    }
    return rep;
}

SteadyState locate_equilibrium(const Scenario& sc, std::span<const Setpoints> setpoints, const LoadModel& load) {
    const auto n = static_cast<Eigen::Index>(setpoints.size());
    if (n == 0) return evaluate_operating_point(sc, {}, load);
    const double e_scale = nominal_peak(sc.v_nominal_ll_v);
    auto residual = [&](const Vec& x) {
        Vec r = x - fixed_point_map(sc, setpoints, evaluate_operating_point(sc, to_commands(x), load));
        r.tail(n) /= e_scale;
        return r;
    };
    // Seeded at the designed operating point so that, when several roots exist,
    // the one reported is the one the setpoints were chosen for.
    Vec seed(2 * n);
    for (Eigen::Index i = 0; i < n; ++i) {
        seed[i] = setpoints[static_cast<std::size_t>(i)].delta0_rad;
        seed[n + i] = setpoints[static_cast<std::size_t>(i)].e0_peak_v;
    }
    NewtonResult res;
    for (const Vec& start : {seed, flat_start(sc)}) {
        try {
            res = newton_solve(residual, start, difference_steps(sc, n, 1e-6), 1e-10);
        } catch (const DegenerateNetwork& e) {
            res = {};
            res.failure = std::string("degenerate network: ") + e.what();
        }
        if (res.converged) break;
    }
    if (!res.converged) throw DivergenceError("equilibrium search failed: " + res.failure, {}, res.iterations);
    SteadyState st = evaluate_operating_point(sc, to_commands(res.x), load);
    st.residual = res.residual;
    st.iterations = res.iterations;
    return st;
}

SteadyState steady_state_solve(const Scenario& sc, std::span<const Setpoints> setpoints, const LoadModel& load,
                               const FixedPointOptions& opts) {
    if (setpoints.size() != sc.inverters.size()) {
        throw InvalidParameter("one setpoint block per inverter required");
    }
    const auto n = static_cast<Eigen::Index>(setpoints.size());

    auto diverged = [&](const std::string& why, int iterations) -> DivergenceError {
        StabilityReport rep;
        try {
            rep = stability_margin(sc, setpoints, load, locate_equilibrium(sc, setpoints, load));
        } catch (const Error&) {
            try {
                rep = stability_margin(sc, setpoints, load,
                                       evaluate_operating_point(sc, to_commands(flat_start(sc)), load));
            } catch (const Error&) {
                rep.stable = false;
            }
        }
        return DivergenceError("steady-state iteration diverged: " + why, std::move(rep), iterations);
    };

    Vec x = staggered_start(sc);
    for (int it = 0; it <= opts.max_iterations; ++it) {
        SteadyState point;
        try {
            point = evaluate_operating_point(sc, to_commands(x), load);
        } catch (const DegenerateNetwork&) {
            throw diverged("degenerate network", it);
        }
        if (!within_transfer_limit(point.network, to_commands(x))) {
            throw diverged("operating point beyond the transfer limit", it);
        }
        const Vec fx = fixed_point_map(sc, setpoints, point);
        if (!finite(fx)) throw diverged("non-finite update", it);
        const double residual = n ? (fx - x).cwiseAbs().maxCoeff() : 0.0;
        if (residual < opts.tolerance) {
            point.residual = residual;
            point.iterations = it;
            return point;
        }
        if (it == opts.max_iterations) break;
        x += opts.damping * (fx - x);
    }
    throw diverged("no convergence after " + std::to_string(opts.max_iterations) + " iterations",
                   opts.max_iterations);
}

SteadyState steady_state_solve(const Scenario& sc, const LoadModel& load, const FixedPointOptions& opts) {
    const auto sp = resolve_setpoints(sc);
    return steady_state_solve(sc, sp, load, opts);
}

}  // namespace droopsim
