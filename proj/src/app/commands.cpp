#include "phaselab/app.hpp"

#include "phaselab/emission.hpp"
#include "phaselab/errors.hpp"
#include "phaselab/inference.hpp"
#include "phaselab/io.hpp"
#include "phaselab/modesolver.hpp"
#include "phaselab/opticalstack.hpp"
#include "phaselab/pipeline.hpp"
#include "phaselab/synthlab.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace phaselab::app {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class OutputSet {
public:
    OutputSet(fs::path dir, std::string command) : dir_(std::move(dir)), command_(std::move(command)) {
        fs::create_directories(dir_);
    }

    void add(const std::string& name, const std::string& content) {
        io::write_file(dir_ / name, content);
        files_.push_back({{"path", name}, {"sha256", io::sha256_hex(content)}, {"bytes", content.size()}});
    }

    json finish(const config::RunConfig& cfg, json extra = json::object()) {
        json m = {{"tool", "phaselab"},
                  {"command", command_},
                  {"config_hash", config::config_hash(cfg)},
                  {"seed", cfg.seed},
                  {"config", config::to_json(cfg)},
                  {"files", files_}};
        for (auto& [k, v] : extra.items()) m[k] = v;
        io::write_file(dir_ / (command_ + "_manifest.json"), m.dump(2) + "\n");
        return m;
    }

private:
    fs::path dir_;
    std::string command_;
    json files_ = json::array();
};

std::string num(double v) { return fmt::format("{:.12g}", v); }

std::string svg(const std::string& title, const std::string& xl, const std::string& yl,
                const std::vector<io::Series>& series) {
    return io::svg_line_plot({title, xl, yl}, series);
}

json profile_summary(const modesolver::ModeProfile& p) {
    return {{"n_eff", p.n_eff},
            {"group_index", p.group_index},
            {"slab_index", p.slab_index},
            {"k_per_nm", p.k_per_nm},
            {"half_width_nm", p.half_width_nm},
            {"norm_N", p.norm_N},
            {"confinement", p.confinement},
            {"eigen_residual", p.eigen_residual},
            {"grid_points", p.grid_nm.size()}};
}

}  // namespace

json command_mode(const Context& ctx) {
    const auto& cfg = ctx.cfg;
    const auto profile = modesolver::solve_te0(cfg.waveguide, cfg.solver);
    const auto scene = pipeline::make_scene(cfg.emitter, profile);
    OutputSet out(ctx.out_dir, "mode");

    std::ostringstream prof;
    modesolver::write_profile_csv(prof, profile);
    out.add("mode_profile.csv", prof.str());

    const auto curves = emission::figure1d_curves(profile, scene, cfg.figure.r_T, cfg.figure.n_offsets);
    std::ostringstream fig1d;
    emission::write_offset_csv(fig1d, curves);
    out.add("fig1d.csv", fig1d.str());
    io::Series s_i{"nu_I", {}, {}}, s_g{"nu_gamma", {}, {}};
    for (const auto& c : curves) {
        s_i.x.push_back(c.y0_nm);
        s_i.y.push_back(c.nu_I);
        s_g.x.push_back(c.y0_nm);
        s_g.y.push_back(c.nu_gamma);
    }
    out.add("fig1d.svg", svg(fmt::format("Visibilities across the waveguide, |r_T| = {}", cfg.figure.r_T),
                             "offset y0 (nm)", "visibility", {s_i, s_g}));

    const auto w = modesolver::mode_weights(profile, scene.y0_nm);
    std::vector<io::Series> rate_series;
    for (auto [dip, tag] : {std::pair{emission::Dipole::X, "x"}, std::pair{emission::Dipole::Y, "y"}}) {
        const auto curve = emission::phase_curve(scene, w, cfg.figure.r_T, dip, cfg.figure.n_phase);
        std::ostringstream os;
        emission::write_phase_csv(os, curve);
        out.add(fmt::format("fig1c_{}.csv", tag), os.str());
        io::Series s{fmt::format("{} dipole", tag), {}, {}};
        for (const auto& p : curve) {
            s.x.push_back(p.phi);
            s.y.push_back(p.gamma_total);
        }
        rate_series.push_back(std::move(s));
    }
    out.add("fig1c.svg", svg("Decay rate versus mirror phase", "phi (rad)", "Gamma (1/ns)", rate_series));

    json summary = profile_summary(profile);
    summary["emitter"] = {{"y0_nm", scene.y0_nm},
                          {"wx", w.wx},
                          {"wy", w.wy},
                          {"mode_factor", (w.wy - w.wx) / (w.wy + w.wx)},
                          {"theta_rad", emission::mirror_phase(0.0, scene.theta())}};
    summary["nu_I_centre"] = emission::visibility_intensity(cfg.figure.r_T);
    out.add("mode.json", summary.dump(2) + "\n");
    return out.finish(cfg);
}

json command_mirror(const Context& ctx) {
    const auto& cfg = ctx.cfg;
    const auto& m = cfg.mirror;
    const auto sweep = opticalstack::tmm_sweep(m.crystal, m.lambda_min_nm, m.lambda_max_nm, m.n_points);
    OutputSet out(ctx.out_dir, "mirror");

    std::ostringstream csv;
    opticalstack::write_sweep_csv(csv, sweep);
    out.add("mirror_sweep.csv", csv.str());
    io::Series s{"|r_M|^2", {}, {}};
    double band_min = 1.0;
    bool band_seen = false;
    double flux_err = 0.0;
    for (const auto& p : sweep) {
        s.x.push_back(p.lambda_nm);
        s.y.push_back(p.power);
        if (p.lambda_nm >= 900.0 && p.lambda_nm <= 1000.0) {
            band_min = std::min(band_min, p.power);
            band_seen = true;
        }
        const auto resp = opticalstack::tmm_response(m.crystal, p.lambda_nm);
        flux_err = std::max(flux_err, std::abs(resp.reflectance + resp.transmittance - 1.0));
    }
    out.add("mirror.svg", svg(fmt::format("Hole-array mirror, {} periods", m.crystal.n_holes), "wavelength (nm)",
                              "reflectance", {s}));

    const double lambda = cfg.waveguide.wavelength_nm;
    const double r_m = std::abs(opticalstack::tmm_reflectivity(m.crystal, lambda));
    const double one_way = opticalstack::waveguide_transmission(m.loss_db_per_mm, cfg.emitter.L_nm);
    opticalstack::MirrorChain chain{m.t_phi_sq, one_way * one_way, r_m, 0.0};
    json summary = {{"bragg_wavelength_nm", m.crystal.bragg_wavelength_nm()},
                    {"mean_index", m.crystal.mean_index()},
                    {"max_flux_error", flux_err},
                    {"wavelength_nm", lambda},
                    {"r_M_mag", r_m},
                    {"t_wg_sq_round_trip", chain.t_wg_sq},
                    {"t_phi_sq", chain.t_phi_sq},
                    {"r_T_mag", chain.magnitude()}};
    summary["min_reflectance_900_1000nm"] = band_seen ? json(band_min) : json(nullptr);
    out.add("mirror.json", summary.dump(2) + "\n");
    return out.finish(cfg);
}

json command_simulate(const Context& ctx) {
    const auto& cfg = ctx.cfg;
    const auto profile = modesolver::solve_te0(cfg.waveguide, cfg.solver);
    const auto scene = pipeline::make_scene(cfg.emitter, profile);
    const auto w = modesolver::mode_weights(profile, scene.y0_nm);

    synthlab::SweepSettings settings;
    settings.counts_scale = cfg.sweep.counts_scale;
    settings.histogram_counts = cfg.histogram.total_counts;
    settings.binning = {cfg.histogram.t_max_ns, cfg.histogram.bin_ns};
    settings.irf_sigma_ns = cfg.histogram.irf_sigma_ns;
    settings.amp_ratio = cfg.histogram.amp_ratio;
    settings.background = cfg.histogram.background;
    settings.noiseless = cfg.sweep.noiseless;
    settings.threads = ctx.threads;
    const auto voltages = cfg.sweep.voltages();
    const auto records =
        synthlab::generate_sweep(scene, w, cfg.emitter.r_T, cfg.calibration, voltages, settings, cfg.seed);

    OutputSet out(ctx.out_dir, "simulate");
    std::ostringstream sweep;
    synthlab::write_sweep_csv(sweep, records);
    out.add("sweep.csv", sweep.str());

    json hist_names = json::array();
    for (std::size_t i = 0; i < records.size(); ++i) {
        std::ostringstream h;
        synthlab::write_histogram_csv(h, records[i].histogram);
        const std::string name = fmt::format("hist_{:03d}.csv", i);
        out.add(name, h.str());
        hist_names.push_back(name);
    }

    std::string truth = "voltage,phi_rad,intensity_expected,gamma_rad,gamma_nrad\n";
    io::Series s{"intensity counts", {}, {}};
    for (const auto& r : records) {
        truth += fmt::format("{},{},{},{},{}\n", num(r.voltage), num(r.phi), num(r.intensity_expected), num(r.gamma_rad),
                             num(scene.gamma_nrad));
        s.x.push_back(r.phi);
        s.y.push_back(r.intensity_counts);
    }
    out.add("truth.csv", truth);
    out.add("sweep.svg", svg("Simulated intensity sweep", "phi (rad)", "counts", {s}));

    const double nu_gamma_true = [&] {
        double hi = -1e300, lo = 1e300;
        for (int i = 0; i < 720; ++i) {
            const double phi = std::numbers::pi * i / 720.0;
            const double g = emission::decay_rate(scene, cfg.emitter.r_T, phi, emission::Dipole::AveragedBoth);
            hi = std::max(hi, g);
            lo = std::min(lo, g);
        }
        return (hi - lo) / (hi + lo);
    }();
    json truth_summary = {{"nu_I", emission::visibility_intensity_mixed(cfg.emitter.r_T, w)},
                          {"nu_gamma", nu_gamma_true},
                          {"wx", w.wx},
                          {"wy", w.wy}};
    return out.finish(cfg, {{"sweep", "sweep.csv"}, {"histograms", hist_names}, {"truth", truth_summary}});
}

json command_analyze(const Context& ctx, const AnalyzeInputs& in) {
    const auto& cfg = ctx.cfg;
    const int sources = (in.manifest ? 1 : 0) + (in.sweep ? 1 : 0) + (in.table1 ? 1 : 0);
    if (sources != 1) throw InvalidArgument("analyze needs exactly one of --manifest, --sweep or --table1");
    const inference::EstimateOptions eo{cfg.analysis.n_y0, cfg.analysis.n_r, cfg.analysis.n_beta, cfg.analysis.n_sigma};

    if (in.table1) {
        std::ifstream is(*in.table1, std::ios::binary);
        if (!is) throw InvalidArgument(fmt::format("cannot open {}", in.table1->string()));
        const auto rows = inference::read_table1(is);
        const auto profile = modesolver::solve_te0(cfg.waveguide, cfg.solver);
        const auto report = inference::table1_report(rows, profile, eo);
        OutputSet out(ctx.out_dir, "analyze");
        out.add("table1_report.json", json({{"rows", pipeline::table1_json(report)}}).dump(2) + "\n");
        std::string csv =
            "qd,lambda_nm,rate_contrast,rate_contrast_sigma,nu_gamma,nu_gamma_sigma,within_1sigma,nu_I,r_T_bound,"
            "feasible_points,beta_min,beta_max\n";
        for (const auto& r : report) {
            const bool est = r.estimate.has_value();
            csv += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{}\n", r.row.qd, num(r.row.lambda_nm),
                               num(r.contrast.value), num(r.contrast.sigma), num(r.row.nu_gamma.value),
                               num(r.row.nu_gamma.sigma), r.within_1sigma ? "yes" : "no", num(r.row.nu_I.value),
                               num(r.r_T_bound), est ? r.estimate->feasible_set.size() : 0,
                               est ? num(r.estimate->beta_min) : "", est ? num(r.estimate->beta_max) : "");
        }
        out.add("table1_report.csv", csv);
        return out.finish(cfg, {{"input", in.table1->filename().string()}});
    }

    fs::path sweep_path;
    std::vector<fs::path> hist_paths;
    if (in.manifest) {
        json m;
        try {
            m = json::parse(io::read_file(*in.manifest));
        } catch (const json::exception& e) {
            throw InvalidArgument(fmt::format("{}: {}", in.manifest->string(), e.what()));
        }
        if (!m.is_object() || m.value("command", "") != "simulate" || !m.contains("sweep") || !m.contains("files")) {
            throw InvalidArgument(fmt::format("{} is not a simulate manifest", in.manifest->string()));
        }
        const fs::path base = in.manifest->parent_path();
        for (const auto& f : m.at("files")) {
            const fs::path p = base / f.at("path").get<std::string>();
            if (io::sha256_file(p) != f.at("sha256").get<std::string>()) {
                throw InvalidArgument(fmt::format("{} does not match its manifest hash", p.string()));
            }
        }
        sweep_path = base / m.at("sweep").get<std::string>();
        for (const auto& h : m.at("histograms")) hist_paths.push_back(base / h.get<std::string>());
    } else {
        sweep_path = *in.sweep;
        if (in.hist_dir) {
            for (const auto& e : fs::directory_iterator(*in.hist_dir)) {
                const auto name = e.path().filename().string();
                if (name.rfind("hist_", 0) == 0 && e.path().extension() == ".csv") hist_paths.push_back(e.path());
            }
            std::sort(hist_paths.begin(), hist_paths.end());
        }
    }

    const auto data = pipeline::read_sweep(sweep_path, hist_paths);
    const auto profile = modesolver::solve_te0(cfg.waveguide, cfg.solver);
    const auto analysis = pipeline::analyze_sweep(data, profile, cfg.analysis, ctx.threads, cfg.seed);

    OutputSet out(ctx.out_dir, "analyze");
    out.add("report.json", pipeline::report_json(analysis, data).dump(2) + "\n");

    std::string fits = "voltage,phi_rad,intensity_counts,intensity_fit,gamma_rad,gamma_rad_sigma,gamma_nrad,gamma_nrad_sigma\n";
    for (std::size_t i = 0; i < data.phi.size(); ++i) {
        const bool has = !analysis.fits.empty();
        fits += fmt::format("{},{},{},{},{},{},{},{}\n", num(data.voltage[i]), num(data.phi[i]), num(data.counts[i]),
                            num(analysis.intensity.at(data.phi[i])), has ? num(analysis.fits[i].gamma_rad) : "",
                            has ? num(analysis.fits[i].gamma_rad_sigma) : "", has ? num(analysis.fits[i].gamma_nrad) : "",
                            has ? num(analysis.fits[i].gamma_nrad_sigma) : "");
    }
    out.add("fits.csv", fits);

    io::Series meas{"measured", data.phi, data.counts};
    io::Series model{"fit", {}, {}};
    for (int i = 0; i <= 180; ++i) {
        const double phi = std::numbers::pi * i / 180.0;
        model.x.push_back(phi);
        model.y.push_back(analysis.intensity.at(phi));
    }
    out.add("intensity_fit.svg", svg("Intensity versus phase", "phi (rad)", "counts", {meas, model}));
    if (analysis.rate) {
        io::Series g{"gamma_rad", data.phi, {}};
        for (const auto& f : analysis.fits) g.y.push_back(f.gamma_rad);
        io::Series gm{"fit", {}, {}};
        for (int i = 0; i <= 180; ++i) {
            const double phi = std::numbers::pi * i / 180.0;
            gm.x.push_back(phi);
            gm.y.push_back(analysis.rate->at(phi));
        }
        out.add("rate_fit.svg", svg("Radiative rate versus phase", "phi (rad)", "gamma_rad (1/ns)", {g, gm}));
    }
    return out.finish(cfg, {{"input", in.manifest ? in.manifest->filename().string() : sweep_path.filename().string()}});
}

}  // namespace phaselab::app
