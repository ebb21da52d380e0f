#include "droopsim/timeseries_csv.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "droopsim/errors.hpp"
#include "droopsim/text.hpp"

namespace droopsim {

namespace {

constexpr const char* kInverterFields[] = {"p_out_w", "q_out_var", "e_ref_v", "delta_ref_rad", "f_meas_hz"};
constexpr const char* kTailFields[] = {"v_pcc_rms_ll_v", "load_p_w", "load_q_var"};
constexpr std::size_t kFieldsPerInverter = std::size(kInverterFields);

void write_fields(std::ostream& out, const TimeSeriesRow& row, double t) {
    out << format_double(t);
    for (const auto& s : row.inverters) {
        out << ',' << format_double(s.p_out_w) << ',' << format_double(s.q_out_var) << ','
            << format_double(s.e_ref_v) << ',' << format_double(s.delta_ref_rad) << ','
            << format_double(s.f_meas_hz);
    }
    out << ',' << format_double(row.v_pcc_rms_ll_v) << ',' << format_double(row.load_p_w) << ','
        << format_double(row.load_q_var);
}

}  // namespace

std::vector<std::string> csv_header(std::size_t n_inverters, const std::optional<WaveformColumns>& wave) {
    std::vector<std::string> cols{"t_s"};
    for (std::size_t i = 1; i <= n_inverters; ++i) {
        for (const char* f : kInverterFields) cols.push_back(std::string(f) + "_" + std::to_string(i));
    }
    for (const char* f : kTailFields) cols.emplace_back(f);
    if (wave) {
        const std::string inv = std::to_string(wave->inverter + 1);
        for (const char* ph : {"va_v_", "vb_v_", "vc_v_"}) cols.push_back(ph + inv);
    }
    return cols;
}

void write_csv(std::ostream& out, const TimeSeries& ts, const std::optional<WaveformColumns>& wave) {
    const auto header = csv_header(ts.n_inverters, wave);
    for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
    out << '\n';

    int sub_rows = 1;
    if (wave) {
        if (wave->inverter >= ts.n_inverters) throw InvalidParameter("waveform inverter index out of range");
        const double per_cycle = 1.0 / (wave->f_hz * wave->row_interval_s);
        sub_rows = std::max(1, static_cast<int>(std::ceil(wave->min_samples_per_cycle / per_cycle - 1e-9)));
    }

    for (std::size_t r = 0; r < ts.rows.size(); ++r) {
        const auto& row = ts.rows[r];
        // The final row closes the horizon; it is not extended past t_end.
        const int n_sub = (r + 1 == ts.rows.size()) ? 1 : sub_rows;
        for (int k = 0; k < n_sub; ++k) {
            const double t = wave ? row.t_s + wave->row_interval_s * k / sub_rows : row.t_s;
            write_fields(out, row, t);
            if (wave) {
                const auto& s = row.inverters[wave->inverter];
                const auto v = synth_three_phase(s.e_ref_v, s.delta_ref_rad, wave->f_hz, t, wave->order);
                out << ',' << format_double(v.va) << ',' << format_double(v.vb) << ',' << format_double(v.vc);
            }
            out << '\n';
        }
    }
}

std::string to_csv(const TimeSeries& ts, const std::optional<WaveformColumns>& wave) {
    std::ostringstream out;
    write_csv(out, ts, wave);
    return out.str();
}

std::size_t CsvTable::column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ParseError("missing CSV column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
}

CsvTable read_csv(std::istream& in, const std::string& source_name) {
    auto fail = [&](int line, const std::string& msg) {
        throw ParseError(source_name + ":" + std::to_string(line) + ": " + msg);
    };
    auto split = [](const std::string& line) {
        std::vector<std::string> fields;
        std::string field;
        std::istringstream ss(line);
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (!line.empty() && line.back() == ',') fields.emplace_back();
        return fields;
    };

    CsvTable table;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) {
            if (table.header.empty()) fail(line_no, "empty header line");
            continue;
        }
        auto fields = split(line);
        if (table.header.empty()) {
            for (auto& f : fields) f = std::string(trim(f));
            table.header = std::move(fields);
            continue;
        }
        if (fields.size() != table.header.size()) {
            fail(line_no, "expected " + std::to_string(table.header.size()) + " fields, got " +
                              std::to_string(fields.size()));
        }
        std::vector<double> row;
        row.reserve(fields.size());
        for (std::size_t c = 0; c < fields.size(); ++c) {
            const auto v = parse_double(fields[c]);
            if (!v) fail(line_no, "column '" + table.header[c] + "': not a number: '" + fields[c] + "'");
            row.push_back(*v);
        }
        table.rows.push_back(std::move(row));
    }
    if (table.header.empty()) fail(0, "empty file");
    if (table.rows.empty()) fail(line_no, "no data rows");
    return table;
}

TimeSeries table_to_timeseries(const CsvTable& table) {
    std::size_t n_cols = table.header.size();
    if (n_cols >= 3 && table.header[n_cols - 3].rfind("va_v_", 0) == 0) n_cols -= 3;
    if (n_cols < 4 || (n_cols - 4) % kFieldsPerInverter != 0) {
        throw ParseError("CSV header has " + std::to_string(table.header.size()) + " columns, not a time series");
    }
    const std::size_t n = (n_cols - 4) / kFieldsPerInverter;
    const auto expected = csv_header(n);
    for (std::size_t c = 0; c < expected.size(); ++c) {
        if (table.header[c] != expected[c]) {
            throw ParseError("CSV column " + std::to_string(c + 1) + ": expected '" + expected[c] + "', got '" +
                             table.header[c] + "'");
        }
    }

    TimeSeries ts;
    ts.n_inverters = n;
    ts.rows.reserve(table.rows.size());
    for (const auto& r : table.rows) {
        TimeSeriesRow row;
        row.t_s = r[0];
        for (std::size_t i = 0; i < n; ++i) {
            const double* f = &r[1 + i * kFieldsPerInverter];
            row.inverters.push_back({f[0], f[1], f[2], f[3], f[4]});
        }
        const double* tail = &r[1 + n * kFieldsPerInverter];
        row.v_pcc_rms_ll_v = tail[0];
        row.load_p_w = tail[1];
        row.load_q_var = tail[2];
        ts.rows.push_back(std::move(row));
    }
    return ts;
}

}  // namespace droopsim
