#pragma once

// CSV form of a TimeSeries: `t_s`, five columns per inverter (suffix _i, from
// 1), then v_pcc_rms_ll_v, load_p_w, load_q_var. Comma separated, LF line
// endings, numbers in shortest round-trip form.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "droopsim/simulator.hpp"
#include "droopsim/waveform.hpp"

namespace droopsim {

/// Instantaneous va/vb/vc columns for one inverter. Rows are repeated
/// (zero-order hold on every logged quantity) until there are at least
/// `min_samples_per_cycle` points per cycle of `f_hz`.
struct WaveformColumns {
    std::size_t inverter = 0;  // 0-based
    double f_hz = 60.0;
    PhaseOrder order = PhaseOrder::acb;
    double row_interval_s = 1e-3;  // dt * log_decimation
    int min_samples_per_cycle = 64;
};

std::vector<std::string> csv_header(std::size_t n_inverters, const std::optional<WaveformColumns>& wave = {});

void write_csv(std::ostream& out, const TimeSeries& ts, const std::optional<WaveformColumns>& wave = {});
std::string to_csv(const TimeSeries& ts, const std::optional<WaveformColumns>& wave = {});

/// Numeric table with its header. Throws ParseError ("source:line: ...") on
/// ragged rows, non-numeric fields or an empty data section.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    /// Index of `name` in the header; throws ParseError if absent.
    std::size_t column(const std::string& name) const;
};

CsvTable read_csv(std::istream& in, const std::string& source_name = "<csv>");

/// Rebuilds the logged series. The inverter count comes from the header;
/// waveform columns, if present, are ignored.
TimeSeries table_to_timeseries(const CsvTable& table);

}  // namespace droopsim
