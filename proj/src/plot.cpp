#include "droopsim/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "droopsim/errors.hpp"
#include "droopsim/timeseries_csv.hpp"

namespace droopsim {

namespace {

constexpr double kWidth = 800, kHeight = 450;
constexpr double kLeft = 80, kRight = 170, kTop = 40, kBottom = 60;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string num(double v, int decimals = 2) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

double nice_step(double span, int target_ticks) {
    const double raw = span / target_ticks;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double r = raw / mag;
    const double m = r < 1.5 ? 1 : r < 3 ? 2 : r < 7 ? 5 : 10;
    return m * mag;
}

struct Range {
    double lo, hi;
};

Range padded(double lo, double hi) {
    if (!(hi > lo)) {
        const double pad = std::max(std::abs(lo) * 0.01, 1e-9);
        return {lo - pad, hi + pad};
    }
    const double pad = 0.05 * (hi - lo);
    return {lo - pad, hi + pad};
}

std::string tick_label(double v, double step) {
    const int decimals = std::clamp(static_cast<int>(-std::floor(std::log10(step))), 0, 9);
    if (std::abs(v) < step * 1e-9) v = 0.0;
    return num(v, decimals);
}

std::vector<double> column(const TimeSeries& ts, auto get) {
    std::vector<double> out;
    out.reserve(ts.rows.size());
    for (const auto& r : ts.rows) out.push_back(get(r));
    return out;
}

std::vector<double> times(const TimeSeries& ts) {
    return column(ts, [](const TimeSeriesRow& r) { return r.t_s; });
}

}  // namespace

std::string render_svg(const Chart& chart) {
    double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
    double y_lo = x_lo, y_hi = -x_lo;
    for (const auto& s : chart.series) {
        for (double v : s.x) x_lo = std::min(x_lo, v), x_hi = std::max(x_hi, v);
        for (double v : s.y) {
            if (std::isfinite(v)) y_lo = std::min(y_lo, v), y_hi = std::max(y_hi, v);
        }
    }
    if (!std::isfinite(x_lo) || !std::isfinite(y_lo)) throw InvalidParameter("chart has no finite data");
    const Range xr = x_hi > x_lo ? Range{x_lo, x_hi} : padded(x_lo, x_hi);
    const Range yr = padded(y_lo, y_hi);

    const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
    auto sx = [&](double x) { return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
    auto sy = [&](double y) { return kTop + (yr.hi - y) / (yr.hi - yr.lo) * ph; };

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
      << escape(chart.title) << "</text>\n";

    const double xs = nice_step(xr.hi - xr.lo, 8), ys = nice_step(yr.hi - yr.lo, 6);
    for (double v = std::ceil(xr.lo / xs) * xs; v <= xr.hi + xs * 1e-9; v += xs) {
        o << "<line x1=\"" << num(sx(v)) << "\" y1=\"" << num(kTop) << "\" x2=\"" << num(sx(v)) << "\" y2=\""
          << num(kTop + ph) << "\" stroke=\"#e0e0e0\"/>\n";
        o << "<text x=\"" << num(sx(v)) << "\" y=\"" << num(kTop + ph + 18) << "\" text-anchor=\"middle\">"
          << tick_label(v, xs) << "</text>\n";
    }
    for (double v = std::ceil(yr.lo / ys) * ys; v <= yr.hi + ys * 1e-9; v += ys) {
        o << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(sy(v)) << "\" x2=\"" << num(kLeft + pw) << "\" y2=\""
          << num(sy(v)) << "\" stroke=\"#e0e0e0\"/>\n";
        o << "<text x=\"" << num(kLeft - 6) << "\" y=\"" << num(sy(v) + 4) << "\" text-anchor=\"end\">"
          << tick_label(v, ys) << "</text>\n";
    }
    o << "<rect x=\"" << num(kLeft) << "\" y=\"" << num(kTop) << "\" width=\"" << num(pw) << "\" height=\""
      << num(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";
    o << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"" << num(kHeight - 16) << "\" text-anchor=\"middle\">"
      << escape(chart.x_label) << "</text>\n";
    o << "<text transform=\"translate(18 " << num(kTop + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
      << escape(chart.y_label) << "</text>\n";

    for (std::size_t k = 0; k < chart.series.size(); ++k) {
        const auto& s = chart.series[k];
        const char* color = kPalette[k % std::size(kPalette)];
        o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        bool first = true;
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.y[i])) continue;
            o << (first ? "" : " ") << num(sx(s.x[i])) << ',' << num(sy(s.y[i]));
            first = false;
        }
        o << "\"/>\n";
        const double ly = kTop + 10 + 18.0 * static_cast<double>(k);
        o << "<line x1=\"" << num(kLeft + pw + 10) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(kLeft + pw + 30)
          << "\" y2=\"" << num(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        o << "<text x=\"" << num(kLeft + pw + 35) << "\" y=\"" << num(ly + 4) << "\">" << escape(s.label)
          << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

Chart power_chart(const TimeSeries& ts) {
    Chart c{"Inverter output power", "t (s)", "P (W), Q (var)", {}};
    const auto t = times(ts);
    for (std::size_t i = 0; i < ts.n_inverters; ++i) {
        const std::string n = std::to_string(i + 1);
        c.series.push_back({"P DG" + n, t, column(ts, [i](const TimeSeriesRow& r) { return r.inverters[i].p_out_w; })});
        c.series.push_back(
            {"Q DG" + n, t, column(ts, [i](const TimeSeriesRow& r) { return r.inverters[i].q_out_var; })});
    }
    c.series.push_back({"P load", t, column(ts, [](const TimeSeriesRow& r) { return r.load_p_w; })});
    c.series.push_back({"Q load", t, column(ts, [](const TimeSeriesRow& r) { return r.load_q_var; })});
    return c;
}

Chart voltage_chart(const TimeSeries& ts) {
    return {"PCC voltage",
            "t (s)",
            "V line-to-line RMS (V)",
            {{"V pcc", times(ts), column(ts, [](const TimeSeriesRow& r) { return r.v_pcc_rms_ll_v; })}}};
}

Chart frequency_chart(const TimeSeries& ts) {
    Chart c{"Measured frequency", "t (s)", "f (Hz)", {}};
    const auto t = times(ts);
    for (std::size_t i = 0; i < ts.n_inverters; ++i) {
        c.series.push_back({"f DG" + std::to_string(i + 1), t,
                            column(ts, [i](const TimeSeriesRow& r) { return r.inverters[i].f_meas_hz; })});
    }
    return c;
}

std::vector<std::filesystem::path> emit_plots(const std::filesystem::path& csv_path,
                                              const std::filesystem::path& out_dir) {
    std::ifstream in(csv_path, std::ios::binary);
    if (!in) throw ParseError(csv_path.string() + ":0: cannot open CSV file");
    const TimeSeries ts = table_to_timeseries(read_csv(in, csv_path.string()));

    // Render everything before touching the output directory.
    const std::vector<std::pair<std::string, std::string>> files = {
        {"power.svg", render_svg(power_chart(ts))},
        {"voltage.svg", render_svg(voltage_chart(ts))},
        {"frequency.svg", render_svg(frequency_chart(ts))},
    };
    std::filesystem::create_directories(out_dir);
    std::vector<std::filesystem::path> written;
    for (const auto& [name, content] : files) {
        const auto path = out_dir / name;
        std::ofstream out(path, std::ios::binary);
        out << content;
        if (!out) throw std::filesystem::filesystem_error("cannot write plot", path, std::make_error_code(std::errc::io_error));
        written.push_back(path);
    }
    return written;
}

}  // namespace droopsim
