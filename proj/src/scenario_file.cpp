#include "droopsim/scenario_file.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <vector>

#include "droopsim/errors.hpp"
#include "droopsim/text.hpp"

namespace droopsim {

namespace {

struct Entry {
    std::string value;
    int line = 0;
};

struct Section {
    std::string name;
    int line = 0;
    std::map<std::string, Entry> keys;
};

const std::vector<std::string> kSystemKeys = {"v_nominal_ll_v", "frequency_hz", "phase_order"};
const std::vector<std::string> kGridKeys = {"r_ohm", "x_ohm"};
const std::vector<std::string> kInverterKeys = {
    "p0_w",          "q0_var",         "p_rated_w",     "q_rated_var",    "line_r_ohm",
    "line_x_ohm",    "k_pf_hz_per_w",  "k_qv_v_per_var", "k_fp_w_per_hz", "k_vq_var_per_v",
    "k_pdelta_rad_per_w", "k_qe_v_per_var", "delta0_rad", "e0_peak_v"};
const std::vector<std::string> kLoadKeys = {"t_start_s", "p_w", "q_var", "v_ref_ll_v"};
const std::vector<std::string> kSimKeys = {"dt_s", "t_end_s", "tau_s", "mode", "log_decimation", "calibrate"};

class Parser {
public:
    explicit Parser(std::string source) : source_(std::move(source)) {}

    [[noreturn]] void fail(int line, const std::string& msg) const {
        throw ParseError(source_ + ":" + std::to_string(line) + ": " + msg);
    }

    std::vector<Section> tokenize(std::string_view text) {
        std::vector<Section> sections;
        std::istringstream in{std::string(text)};
        std::string raw;
        int line_no = 0;
        while (std::getline(in, raw)) {
            ++line_no;
            std::string_view line = raw;
            if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
            line = trim(line);
            if (line.empty()) continue;

            if (line.front() == '[') {
                if (line.back() != ']') fail(line_no, "malformed section header");
                const std::string name{trim(line.substr(1, line.size() - 2))};
                allowed_keys(name, line_no);
                for (const auto& s : sections) {
                    if (s.name == name) fail(line_no, "duplicate section [" + name + "]");
                }
                sections.push_back({name, line_no, {}});
                continue;
            }

            const auto eq = line.find('=');
            if (eq == std::string_view::npos) fail(line_no, "expected 'key = value'");
            if (sections.empty()) fail(line_no, "key outside of any section");
            const std::string key{trim(line.substr(0, eq))};
            const std::string value{trim(line.substr(eq + 1))};
            Section& sec = sections.back();
            const auto& allowed = allowed_keys(sec.name, sec.line);
            if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
                for (const auto& k : allowed) {
                    if (k.rfind(key + "_", 0) == 0) {
                        fail(line_no, "key '" + key + "' in [" + sec.name + "] lacks its unit suffix (expected '" + k +
                                          "')");
                    }
                }
                fail(line_no, "unknown key '" + key + "' in [" + sec.name + "]");
            }
            if (value.empty()) fail(line_no, "key '" + key + "' has no value");
            if (!sec.keys.emplace(key, Entry{value, line_no}).second) {
                fail(line_no, "duplicate key '" + key + "' in [" + sec.name + "]");
            }
        }
        return sections;
    }

    const std::vector<std::string>& allowed_keys(const std::string& name, int line) const {
        if (name == "system") return kSystemKeys;
        if (name == "grid") return kGridKeys;
        if (name == "sim") return kSimKeys;
        if (index_of(name, "inverter.")) return kInverterKeys;
        if (index_of(name, "load.")) return kLoadKeys;
        fail(line, "unknown section [" + name + "]");
    }

    static std::optional<long long> index_of(const std::string& name, std::string_view prefix) {
        if (name.rfind(prefix, 0) != 0) return std::nullopt;
        const auto idx = parse_integer(std::string_view(name).substr(prefix.size()));
        if (!idx || *idx < 1) return std::nullopt;
        return idx;
    }

    double number(const Section& sec, const std::string& key) const {
        const auto it = sec.keys.find(key);
        if (it == sec.keys.end()) fail(sec.line, "missing required key '" + key + "' in [" + sec.name + "]");
        return to_number(sec, it->first, it->second);
    }

    std::optional<double> opt_number(const Section& sec, const std::string& key) const {
        const auto it = sec.keys.find(key);
        if (it == sec.keys.end()) return std::nullopt;
        return to_number(sec, it->first, it->second);
    }

    double to_number(const Section& sec, const std::string& key, const Entry& e) const {
        const auto v = parse_double(e.value);
        if (!v || !std::isfinite(*v)) {
            fail(e.line, "key '" + key + "' in [" + sec.name + "]: expected a finite number, got '" + e.value + "'");
        }
        return *v;
    }

    const Entry* find(const Section& sec, const std::string& key) const {
        const auto it = sec.keys.find(key);
        return it == sec.keys.end() ? nullptr : &it->second;
    }

    const std::string& source() const { return source_; }

private:
    std::string source_;
};

/// Indexed sections (inverter.N / load.N) sorted by N; N must run 1..count.
std::vector<const Section*> indexed(const Parser& p, const std::vector<Section>& all, std::string_view prefix) {
    std::vector<std::pair<long long, const Section*>> found;
    for (const auto& s : all) {
        if (auto idx = Parser::index_of(s.name, prefix)) found.emplace_back(*idx, &s);
    }
    std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<const Section*> out;
    for (std::size_t i = 0; i < found.size(); ++i) {
        if (found[i].first != static_cast<long long>(i + 1)) {
            p.fail(found[i].second->line, "section [" + found[i].second->name + "] breaks the 1..N numbering of [" +
                                              std::string(prefix) + "N]");
        }
        out.push_back(found[i].second);
    }
    return out;
}

}  // namespace

Scenario parse_scenario_text(std::string_view text, const std::string& source_name) {
    Parser p(source_name);
    const auto sections = p.tokenize(text);
    auto section = [&](const std::string& name) -> const Section* {
        for (const auto& s : sections) {
            if (s.name == name) return &s;
        }
        return nullptr;
    };

    const Section* system = section("system");
    const Section* sim = section("sim");
    const auto inverters = indexed(p, sections, "inverter.");
    const auto loads = indexed(p, sections, "load.");

    bool grid_mode = false;
    if (sim) {
        if (const Entry* m = p.find(*sim, "mode")) grid_mode = m->value == "grid_connected";
    }
    std::vector<std::string> missing;
    if (!system) missing.emplace_back("[system]");
    if (!sim) missing.emplace_back("[sim]");
    if (inverters.empty() && !grid_mode) missing.emplace_back("[inverter.N]");
    if (loads.empty()) missing.emplace_back("[load.N]");
    if (!missing.empty()) {
        std::string list;
        for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
        throw ParseError(source_name + ":1: missing required section(s): " + list);
    }

    Scenario sc;
    sc.v_nominal_ll_v = p.number(*system, "v_nominal_ll_v");
    sc.frequency_hz = p.number(*system, "frequency_hz");
    if (const Entry* e = p.find(*system, "phase_order")) {
        if (e->value == "acb") sc.phase_order = PhaseOrder::acb;
        else if (e->value == "abc") sc.phase_order = PhaseOrder::abc;
        else p.fail(e->line, "phase_order must be 'acb' or 'abc'");
    }

    if (const Section* grid = section("grid")) {
        sc.grid.impedance.r_ohm = p.opt_number(*grid, "r_ohm").value_or(sc.grid.impedance.r_ohm);
        sc.grid.impedance.x_ohm = p.opt_number(*grid, "x_ohm").value_or(sc.grid.impedance.x_ohm);
    }

    sc.dt_s = p.number(*sim, "dt_s");
    sc.t_end_s = p.number(*sim, "t_end_s");
    sc.filter_tau_s = p.number(*sim, "tau_s");
    {
        const Entry* m = p.find(*sim, "mode");
        if (!m) p.fail(sim->line, "missing required key 'mode' in [sim]");
        if (m->value == "islanded") sc.mode = Mode::islanded;
        else if (m->value == "grid_connected") sc.mode = Mode::grid_connected;
        else p.fail(m->line, "mode must be 'islanded' or 'grid_connected'");
    }
    if (const Entry* e = p.find(*sim, "log_decimation")) {
        const auto v = parse_integer(e->value);
        if (!v || *v < 1 || *v > 1'000'000'000) p.fail(e->line, "log_decimation must be an integer >= 1");
        sc.log_decimation = static_cast<int>(*v);
    }
    if (const Entry* e = p.find(*sim, "calibrate")) {
        if (e->value == "true") sc.calibrate = true;
        else if (e->value == "false") sc.calibrate = false;
        else p.fail(e->line, "calibrate must be 'true' or 'false'");
    }

    for (const Section* s : inverters) {
        InverterConfig inv;
        inv.p0_w = p.number(*s, "p0_w");
        inv.q0_var = p.number(*s, "q0_var");
        inv.p_rated_w = p.number(*s, "p_rated_w");
        inv.q_rated_var = p.number(*s, "q_rated_var");
        inv.line.r_ohm = p.number(*s, "line_r_ohm");
        inv.line.x_ohm = p.opt_number(*s, "line_x_ohm").value_or(kDefaultLineX);
        if (!(inv.line.x_ohm > 0.0)) p.fail(s->keys.at("line_x_ohm").line, "line_x_ohm must be positive");
        if (!(inv.p_rated_w > 0.0) || !(inv.q_rated_var > 0.0)) {
            p.fail(s->line, "ratings in [" + s->name + "] must be positive");
        }
        const DroopGains d = default_gains(inv.p_rated_w, inv.q_rated_var, sc.v_nominal_ll_v > 0 ? sc.v_nominal_ll_v : 1.0,
                                           inv.line.x_ohm);
        inv.gains.k_pf = p.opt_number(*s, "k_pf_hz_per_w").value_or(d.k_pf);
        inv.gains.k_qv = p.opt_number(*s, "k_qv_v_per_var").value_or(d.k_qv);
        inv.gains.k_fp = p.opt_number(*s, "k_fp_w_per_hz").value_or(d.k_fp);
        inv.gains.k_vq = p.opt_number(*s, "k_vq_var_per_v").value_or(d.k_vq);
        inv.gains.k_pdelta = p.opt_number(*s, "k_pdelta_rad_per_w").value_or(d.k_pdelta);
        inv.gains.k_qe = p.opt_number(*s, "k_qe_v_per_var").value_or(d.k_qe);
        inv.delta0_rad = p.opt_number(*s, "delta0_rad");
        inv.e0_peak_v = p.opt_number(*s, "e0_peak_v");
        if (sc.calibrate && (inv.delta0_rad || inv.e0_peak_v)) {
            p.fail(s->line, "[" + s->name + "] sets delta0_rad/e0_peak_v but [sim] calibrate = true");
        }
        sc.inverters.push_back(inv);
    }

    for (const Section* s : loads) {
        LoadEvent ev;
        ev.t_start_s = p.number(*s, "t_start_s");
        ev.load.p_w = p.number(*s, "p_w");
        ev.load.q_var = p.number(*s, "q_var");
        ev.load.v_ref_ll_v = p.number(*s, "v_ref_ll_v");
        const int t_line = s->keys.at("t_start_s").line;
        if (sc.load_schedule.empty() && ev.t_start_s != 0.0) {
            p.fail(t_line, "t_start_s of the first load entry must be 0");
        }
        if (!sc.load_schedule.empty() && !(ev.t_start_s > sc.load_schedule.back().t_start_s)) {
            p.fail(t_line, "t_start_s in [" + s->name + "] must be strictly increasing");
        }
        sc.load_schedule.push_back(ev);
    }

    try {
        validate(sc);
    } catch (const ConfigError& e) {
        throw ConfigError(source_name + ": " + e.what());
    } catch (const InvalidParameter& e) {
        throw ParseError(source_name + ": " + e.what());
    }
    return sc;
}

Scenario parse_scenario(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path.string() + ":0: cannot open scenario file");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario_text(buf.str(), path.string());
}

std::string format_scenario(const Scenario& sc) {
    std::ostringstream out;
    auto kv = [&](const char* key, double v) { out << key << " = " << format_double(v) << '\n'; };

    out << "[system]\n";
    kv("v_nominal_ll_v", sc.v_nominal_ll_v);
    kv("frequency_hz", sc.frequency_hz);
    out << "phase_order = " << (sc.phase_order == PhaseOrder::acb ? "acb" : "abc") << "\n\n";

    out << "[grid]\n";
    kv("r_ohm", sc.grid.impedance.r_ohm);
    kv("x_ohm", sc.grid.impedance.x_ohm);
    out << '\n';

    for (std::size_t i = 0; i < sc.inverters.size(); ++i) {
        const auto& inv = sc.inverters[i];
        out << "[inverter." << i + 1 << "]\n";
        kv("p0_w", inv.p0_w);
        kv("q0_var", inv.q0_var);
        kv("p_rated_w", inv.p_rated_w);
        kv("q_rated_var", inv.q_rated_var);
        kv("line_r_ohm", inv.line.r_ohm);
        kv("line_x_ohm", inv.line.x_ohm);
        kv("k_pf_hz_per_w", inv.gains.k_pf);
        kv("k_qv_v_per_var", inv.gains.k_qv);
        kv("k_fp_w_per_hz", inv.gains.k_fp);
        kv("k_vq_var_per_v", inv.gains.k_vq);
        kv("k_pdelta_rad_per_w", inv.gains.k_pdelta);
        kv("k_qe_v_per_var", inv.gains.k_qe);
        if (inv.delta0_rad) kv("delta0_rad", *inv.delta0_rad);
        if (inv.e0_peak_v) kv("e0_peak_v", *inv.e0_peak_v);
        out << '\n';
    }

    for (std::size_t i = 0; i < sc.load_schedule.size(); ++i) {
        const auto& ev = sc.load_schedule[i];
        out << "[load." << i + 1 << "]\n";
        kv("t_start_s", ev.t_start_s);
        kv("p_w", ev.load.p_w);
        kv("q_var", ev.load.q_var);
        kv("v_ref_ll_v", ev.load.v_ref_ll_v);
        out << '\n';
    }

    out << "[sim]\n";
    kv("dt_s", sc.dt_s);
    kv("t_end_s", sc.t_end_s);
    kv("tau_s", sc.filter_tau_s);
    out << "mode = " << (sc.mode == Mode::islanded ? "islanded" : "grid_connected") << '\n';
    out << "log_decimation = " << sc.log_decimation << '\n';
    out << "calibrate = " << (sc.calibrate ? "true" : "false") << '\n';
    return out.str();
}

}  // namespace droopsim
