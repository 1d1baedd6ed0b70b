#include "phaselab/config.hpp"

#include "phaselab/errors.hpp"
#include "phaselab/io.hpp"

#include <fmt/format.h>

#include <cmath>
#include <set>

namespace phaselab::config {

using nlohmann::json;

namespace {

// Walks one JSON object, remembering which keys were consumed.
class Section {
public:
    Section(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
        if (!obj_.is_object()) throw ConfigError(fmt::format("'{}' must be an object", label()));
    }

    const json& raw(std::string_view key) {
        const std::string k(key);
        if (!obj_.contains(k)) throw ConfigError(fmt::format("missing key '{}'", full(key)));
        used_.insert(k);
        return obj_.at(k);
    }

    double number(std::string_view key) {
        const json& v = raw(key);
        if (!v.is_number()) throw ConfigError(fmt::format("'{}' must be a number", full(key)));
        const double d = v.get<double>();
        if (!std::isfinite(d)) throw ConfigError(fmt::format("'{}' must be finite", full(key)));
        return d;
    }

    std::optional<double> optional_number(std::string_view key) {
        if (raw(key).is_null()) return std::nullopt;
        return number(key);
    }

    int integer(std::string_view key) {
        const json& v = raw(key);
        if (!v.is_number_integer()) throw ConfigError(fmt::format("'{}' must be an integer", full(key)));
        return v.get<int>();
    }

    std::uint64_t unsigned64(std::string_view key) {
        const json& v = raw(key);
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
            throw ConfigError(fmt::format("'{}' must be a non-negative integer", full(key)));
        }
        return v.get<std::uint64_t>();
    }

    bool boolean(std::string_view key) {
        const json& v = raw(key);
        if (!v.is_boolean()) throw ConfigError(fmt::format("'{}' must be true or false", full(key)));
        return v.get<bool>();
    }

    std::string string(std::string_view key) {
        const json& v = raw(key);
        if (!v.is_string()) throw ConfigError(fmt::format("'{}' must be a string", full(key)));
        return v.get<std::string>();
    }

    Section child(std::string_view key) { return Section(raw(key), full(key)); }

    std::string full(std::string_view key) const { return path_.empty() ? std::string(key) : path_ + "." + std::string(key); }

    void finish() const {
        for (const auto& [k, v] : obj_.items()) {
            if (!used_.contains(k)) throw ConfigError(fmt::format("unknown key '{}'", full(k)));
        }
    }

private:
    std::string label() const { return path_.empty() ? "config" : path_; }

    const json& obj_;
    std::string path_;
    std::set<std::string> used_;
};

modesolver::LateralModel lateral_from(const std::string& s, const std::string& key) {
    if (s == "polarized") return modesolver::LateralModel::Polarized;
    if (s == "scalar") return modesolver::LateralModel::Scalar;
    throw ConfigError(fmt::format("'{}' must be \"polarized\" or \"scalar\"", key));
}

synthlab::PhaseCalibration calibration_from(Section s) {
    const std::string model = s.string("model");
    synthlab::PhaseCalibration cal;
    if (model == "quadratic") {
        cal.model = synthlab::PhaseCalibration::Model::Quadratic;
        cal.quad_coeff = s.number("quad_coeff");
        cal.phi0 = s.number("phi0");
        cal.v_min = s.number("v_min");
        cal.v_max = s.number("v_max");
        if (!s.raw("table").is_null()) throw ConfigError(fmt::format("'{}' must be null for a quadratic model", s.full("table")));
    } else if (model == "table") {
        const json& t = s.raw("table");
        if (!t.is_array()) throw ConfigError(fmt::format("'{}' must be an array of [volts, rad] pairs", s.full("table")));
        std::vector<std::pair<double, double>> entries;
        for (const auto& e : t) {
            if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number()) {
                throw ConfigError(fmt::format("'{}' entries must be [volts, rad]", s.full("table")));
            }
            entries.emplace_back(e[0].get<double>(), e[1].get<double>());
        }
        for (const char* k : {"quad_coeff", "phi0", "v_min", "v_max"}) {
            if (!s.raw(k).is_null()) throw ConfigError(fmt::format("'{}' must be null for a table model", s.full(k)));
        }
        cal.model = synthlab::PhaseCalibration::Model::Table;
        cal.table = std::move(entries);
        if (!cal.table.empty()) {
            cal.v_min = cal.table.front().first;
            cal.v_max = cal.table.back().first;
        }
    } else {
        throw ConfigError(fmt::format("'{}' must be \"quadratic\" or \"table\"", s.full("model")));
    }
    s.finish();
    return cal;
}

template <class F>
void as_config_error(F&& f) {
    try {
        f();
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
}

}  // namespace

std::vector<double> SweepConfig::voltages() const {
    std::vector<double> v(static_cast<std::size_t>(n_points));
    for (int i = 0; i < n_points; ++i) {
        v[static_cast<std::size_t>(i)] = n_points == 1 ? v_start : v_start + (v_stop - v_start) * i / (n_points - 1.0);
    }
    return v;
}

void RunConfig::validate() const {
    as_config_error([&] {
        waveguide.validate();
        mirror.crystal.validate();
        calibration.validate();
    });
    if (solver.n_points < 8) throw ConfigError("waveguide.n_points must be at least 8");
    if (!(solver.min_confinement >= 0.0 && solver.min_confinement < 1.0)) {
        throw ConfigError("waveguide.min_confinement must lie in [0, 1)");
    }
    if (!(mirror.lambda_max_nm > mirror.lambda_min_nm) || mirror.lambda_min_nm <= 0.0 || mirror.n_points < 2) {
        throw ConfigError("mirror sweep needs 0 < lambda_min_nm < lambda_max_nm and n_points >= 2");
    }
    if (!(mirror.t_phi_sq >= 0.0 && mirror.t_phi_sq <= 1.0) || !(mirror.loss_db_per_mm >= 0.0)) {
        throw ConfigError("mirror.t_phi_sq must lie in [0, 1] and loss_db_per_mm must be non-negative");
    }
    const auto& e = emitter;
    if (e.gamma_x0 < 0.0 || e.gamma_y0 < 0.0 || e.gamma_b < 0.0 || e.gamma_nrad < 0.0) {
        throw ConfigError("emitter rates must be non-negative");
    }
    if (!(e.gamma_x0 + e.gamma_y0 + e.gamma_b > 0.0)) throw ConfigError("emitter needs a positive total rate");
    if (!(e.r_T >= 0.0 && e.r_T <= 1.0)) throw ConfigError("emitter.r_T must lie in [0, 1]");
    if (!(e.L_nm >= 0.0)) throw ConfigError("emitter.L_nm must be non-negative");
    if (!(std::abs(e.y0_nm) <= 0.5 * waveguide.width_nm)) throw ConfigError("emitter.y0_nm must lie inside the core");
    if (!(figure.r_T >= 0.0 && figure.r_T <= 1.0)) throw ConfigError("figure.r_T must lie in [0, 1]");
    if (figure.n_offsets < 2 || figure.n_phase < 2) throw ConfigError("figure grids need at least two points");
    if (sweep.n_points < 1 || !(sweep.counts_scale > 0.0)) {
        throw ConfigError("sweep needs n_points >= 1 and a positive counts_scale");
    }
    for (double v : sweep.voltages()) {
        if (v < calibration.v_min || v > calibration.v_max) {
            throw ConfigError(fmt::format("sweep voltage {} V is outside the calibration range", v));
        }
    }
    const auto& h = histogram;
    if (!(h.total_counts > 0.0) || !(h.bin_ns > 0.0) || !(h.t_max_ns > h.bin_ns)) {
        throw ConfigError("histogram needs total_counts > 0 and 0 < bin_ns < t_max_ns");
    }
    if (h.irf_sigma_ns && !(*h.irf_sigma_ns >= 0.0)) throw ConfigError("histogram.irf_sigma_ns must be non-negative");
    if (!(h.amp_ratio >= 0.0) || !(h.background >= 0.0)) {
        throw ConfigError("histogram amp_ratio and background must be non-negative");
    }
    if (analysis.n_y0 < 2 || analysis.n_r < 2 || analysis.n_beta < 2 || !(analysis.n_sigma > 0.0) ||
        analysis.bootstrap < 0) {
        throw ConfigError("analysis grids need two points each, n_sigma > 0 and bootstrap >= 0");
    }
    if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
}

RunConfig parse_config(const json& doc) {
    RunConfig cfg;
    Section root(doc, "");

    {
        Section s = root.child("waveguide");
        auto& g = cfg.waveguide;
        g.width_nm = s.number("width_nm");
        g.thickness_nm = s.number("thickness_nm");
        g.core_index = s.number("core_index");
        g.clad_index = s.number("clad_index");
        g.wavelength_nm = s.number("wavelength_nm");
        g.lateral = lateral_from(s.string("lateral_model"), s.full("lateral_model"));
        cfg.solver.n_points = s.integer("n_points");
        cfg.solver.min_confinement = s.number("min_confinement");
        s.finish();
    }
    {
        Section s = root.child("mirror");
        Section pc = s.child("photonic_crystal");
        auto& c = cfg.mirror.crystal;
        c.n_holes = pc.integer("n_holes");
        c.pitch_nm = pc.number("pitch_nm");
        c.hole_radius_nm = pc.number("hole_radius_nm");
        c.n_unetched = pc.number("n_unetched");
        c.n_hole = pc.number("n_hole");
        c.termination_index = pc.number("termination_index");
        pc.finish();
        cfg.mirror.lambda_min_nm = s.number("lambda_min_nm");
        cfg.mirror.lambda_max_nm = s.number("lambda_max_nm");
        cfg.mirror.n_points = s.integer("n_points");
        cfg.mirror.t_phi_sq = s.number("t_phi_sq");
        cfg.mirror.loss_db_per_mm = s.number("loss_db_per_mm");
        s.finish();
    }
    {
        Section s = root.child("emitter");
        auto& e = cfg.emitter;
        e.y0_nm = s.number("y0_nm");
        e.L_nm = s.number("L_nm");
        e.gamma_x0 = s.number("gamma_x0");
        e.gamma_y0 = s.number("gamma_y0");
        e.gamma_b = s.number("gamma_b");
        e.gamma_nrad = s.number("gamma_nrad");
        e.r_T = s.number("r_T");
        s.finish();
    }
    cfg.calibration = calibration_from(root.child("calibration"));
    {
        Section s = root.child("sweep");
        cfg.sweep.v_start = s.number("v_start");
        cfg.sweep.v_stop = s.number("v_stop");
        cfg.sweep.n_points = s.integer("n_points");
        cfg.sweep.counts_scale = s.number("counts_scale");
        cfg.sweep.noiseless = s.boolean("noiseless");
        s.finish();
    }
    {
        Section s = root.child("histogram");
        auto& h = cfg.histogram;
        h.total_counts = s.number("total_counts");
        h.t_max_ns = s.number("t_max_ns");
        h.bin_ns = s.number("bin_ns");
        h.irf_sigma_ns = s.optional_number("irf_sigma_ns");
        h.amp_ratio = s.number("amp_ratio");
        h.background = s.number("background");
        s.finish();
    }
    {
        Section s = root.child("figure");
        cfg.figure.r_T = s.number("r_T");
        cfg.figure.n_offsets = s.integer("n_offsets");
        cfg.figure.n_phase = s.integer("n_phase");
        s.finish();
    }
    {
        Section s = root.child("analysis");
        cfg.analysis.n_y0 = s.integer("n_y0");
        cfg.analysis.n_r = s.integer("n_r");
        cfg.analysis.n_beta = s.integer("n_beta");
        cfg.analysis.n_sigma = s.number("n_sigma");
        cfg.analysis.bootstrap = s.integer("bootstrap");
        s.finish();
    }
    cfg.seed = root.unsigned64("seed");
    cfg.output_dir = root.string("output_dir");
    root.finish();
    cfg.validate();
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::string text;
    try {
        text = io::read_file(path);
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
    }
    return parse_config(doc);
}

json to_json(const RunConfig& cfg) {
    const auto& g = cfg.waveguide;
    const auto& c = cfg.mirror.crystal;
    const auto& e = cfg.emitter;
    const auto& h = cfg.histogram;
    const auto& cal = cfg.calibration;

    json calib;
    if (cal.model == synthlab::PhaseCalibration::Model::Quadratic) {
        calib = {{"model", "quadratic"}, {"quad_coeff", cal.quad_coeff}, {"phi0", cal.phi0},
                 {"v_min", cal.v_min},   {"v_max", cal.v_max},           {"table", nullptr}};
    } else {
        json table = json::array();
        for (const auto& [v, p] : cal.table) table.push_back({v, p});
        calib = {{"model", "table"}, {"quad_coeff", nullptr}, {"phi0", nullptr},
                 {"v_min", nullptr}, {"v_max", nullptr},      {"table", table}};
    }

    return {
        {"waveguide",
         {{"width_nm", g.width_nm},
          {"thickness_nm", g.thickness_nm},
          {"core_index", g.core_index},
          {"clad_index", g.clad_index},
          {"wavelength_nm", g.wavelength_nm},
          {"lateral_model", g.lateral == modesolver::LateralModel::Polarized ? "polarized" : "scalar"},
          {"n_points", cfg.solver.n_points},
          {"min_confinement", cfg.solver.min_confinement}}},
        {"mirror",
         {{"photonic_crystal",
           {{"n_holes", c.n_holes},
            {"pitch_nm", c.pitch_nm},
            {"hole_radius_nm", c.hole_radius_nm},
            {"n_unetched", c.n_unetched},
            {"n_hole", c.n_hole},
            {"termination_index", c.termination_index}}},
          {"lambda_min_nm", cfg.mirror.lambda_min_nm},
          {"lambda_max_nm", cfg.mirror.lambda_max_nm},
          {"n_points", cfg.mirror.n_points},
          {"t_phi_sq", cfg.mirror.t_phi_sq},
          {"loss_db_per_mm", cfg.mirror.loss_db_per_mm}}},
        {"emitter",
         {{"y0_nm", e.y0_nm},
          {"L_nm", e.L_nm},
          {"gamma_x0", e.gamma_x0},
          {"gamma_y0", e.gamma_y0},
          {"gamma_b", e.gamma_b},
          {"gamma_nrad", e.gamma_nrad},
          {"r_T", e.r_T}}},
        {"calibration", calib},
        {"sweep",
         {{"v_start", cfg.sweep.v_start},
          {"v_stop", cfg.sweep.v_stop},
          {"n_points", cfg.sweep.n_points},
          {"counts_scale", cfg.sweep.counts_scale},
          {"noiseless", cfg.sweep.noiseless}}},
        {"histogram",
         {{"total_counts", h.total_counts},
          {"t_max_ns", h.t_max_ns},
          {"bin_ns", h.bin_ns},
          {"irf_sigma_ns", h.irf_sigma_ns ? json(*h.irf_sigma_ns) : json(nullptr)},
          {"amp_ratio", h.amp_ratio},
          {"background", h.background}}},
        {"figure", {{"r_T", cfg.figure.r_T}, {"n_offsets", cfg.figure.n_offsets}, {"n_phase", cfg.figure.n_phase}}},
        {"analysis",
         {{"n_y0", cfg.analysis.n_y0},
          {"n_r", cfg.analysis.n_r},
          {"n_beta", cfg.analysis.n_beta},
          {"n_sigma", cfg.analysis.n_sigma},
          {"bootstrap", cfg.analysis.bootstrap}}},
        {"seed", cfg.seed},
        {"output_dir", cfg.output_dir},
    };
}

RunConfig preset(std::string_view name) {
    RunConfig cfg;
    cfg.calibration = synthlab::PhaseCalibration::quadratic(0.0245, 0.0, 0.0, 12.0);
    if (name == "default") return cfg;
    if (name == "qd1") {
        // Above-band sweep of the 923 nm line: off-centre emitter, |r_T| ~ 0.6,
        // radiative rate toggling between about 1.0 and 0.6 per ns.
        cfg.emitter.y0_nm = 75.0;
        cfg.emitter.r_T = 0.6;
        cfg.emitter.gamma_y0 = 0.946;
        cfg.emitter.gamma_x0 = 0.279;
        cfg.emitter.gamma_b = 0.187;
        cfg.emitter.gamma_nrad = 0.1;
        cfg.figure.r_T = 0.6;
        cfg.output_dir = "out_qd1";
        return cfg;
    }
    throw ConfigError(fmt::format("unknown preset '{}' (expected default or qd1)", name));
}

std::string config_hash(const RunConfig& cfg) { return io::sha256_hex(to_json(cfg).dump()); }

}  // namespace phaselab::config
