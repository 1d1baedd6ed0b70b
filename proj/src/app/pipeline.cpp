#include "phaselab/pipeline.hpp"

#include "phaselab/errors.hpp"
#include "phaselab/io.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace phaselab::pipeline {

using nlohmann::json;

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body) {
    const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::size_t first_index = n;
    std::mutex m;
    {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) {
                    try {
                        body(i);
                    } catch (...) {
                        // Keep the error of the lowest index so failures do not
                        // depend on scheduling.
                        std::lock_guard lock(m);
                        if (i < first_index) {
                            first_index = i;
                            first_error = std::current_exception();
                        }
                    }
                }
            });
        }
    }
    if (first_error) std::rethrow_exception(first_error);
}

emission::EmitterScene make_scene(const config::EmitterConfig& e, const modesolver::ModeProfile& profile) {
    emission::EmitterScene s;
    s.y0_nm = e.y0_nm;
    s.L_nm = e.L_nm;
    s.k_per_nm = profile.k_per_nm;
    s.gamma_x0 = e.gamma_x0;
    s.gamma_y0 = e.gamma_y0;
    s.gamma_b = e.gamma_b;
    s.gamma_nrad = e.gamma_nrad;
    s.validate();
    return s;
}

SweepData from_records(const std::vector<synthlab::SweepRecord>& records) {
    SweepData d;
    for (const auto& r : records) {
        d.voltage.push_back(r.voltage);
        d.phi.push_back(r.phi);
        d.counts.push_back(r.intensity_counts);
        d.histograms.push_back(r.histogram);
    }
    return d;
}

synthlab::DecayHistogram read_histogram_csv(const std::filesystem::path& path) {
    static constexpr std::string_view header[] = {"t_ns", "counts"};
    const auto t = io::read_csv_file(path, header);
    if (t.rows.size() < 2) throw MalformedRow(fmt::format("{}: a histogram needs at least two bins", path.string()));
    synthlab::DecayHistogram h;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const double time = t.number(r, 0);
        const double c = t.number(r, 1);
        if (c < 0.0) throw MalformedRow(fmt::format("{}:{}: negative count", t.source, t.line_numbers[r]));
        if (!h.bin_edges_ns.empty() && !(time > h.bin_edges_ns.back())) {
            throw MalformedRow(fmt::format("{}:{}: times must increase", t.source, t.line_numbers[r]));
        }
        h.bin_edges_ns.push_back(time);
        h.counts.push_back(c);
        h.total_counts += c;
    }
    const std::size_t n = h.bin_edges_ns.size();
    h.bin_edges_ns.push_back(h.bin_edges_ns[n - 1] + (h.bin_edges_ns[n - 1] - h.bin_edges_ns[n - 2]));
    return h;
}

SweepData read_sweep(const std::filesystem::path& sweep_csv, const std::vector<std::filesystem::path>& histograms) {
    static constexpr std::string_view header[] = {"voltage", "phi_rad", "intensity_counts"};
    const auto t = io::read_csv_file(sweep_csv, header);
    SweepData d;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        d.voltage.push_back(t.number(r, 0));
        d.phi.push_back(t.number(r, 1));
        const double c = t.number(r, 2);
        if (c < 0.0) throw MalformedRow(fmt::format("{}:{}: negative count", t.source, t.line_numbers[r]));
        d.counts.push_back(c);
    }
    if (!histograms.empty() && histograms.size() != d.voltage.size()) {
        throw InvalidArgument(fmt::format("{} histograms for {} sweep points", histograms.size(), d.voltage.size()));
    }
    for (const auto& p : histograms) d.histograms.push_back(read_histogram_csv(p));
    return d;
}

namespace {

// Extremum m +- |(a, b)| of a fitted sinusoid with delta-method uncertainty.
Extremum sinusoid_extremum(const inference::SinusoidFit& f, double sign) {
    const double a = f.fit.params[1], b = f.fit.params[2];
    const double amp = std::hypot(a, b);
    Eigen::Vector3d d(1.0, 0.0, 0.0);
    if (amp > 0.0) {
        d(1) = sign * a / amp;
        d(2) = sign * b / amp;
    }
    return {f.fit.params[0] + sign * amp, std::sqrt(std::max(d.dot(f.fit.covariance * d), 0.0))};
}

}  // namespace

SweepAnalysis analyze_sweep(const SweepData& data, const modesolver::ModeProfile& profile,
                            const config::AnalysisConfig& opts, unsigned threads, std::uint64_t seed) {
    const std::size_t n = data.phi.size();
    if (n == 0) throw InvalidArgument("sweep has no points");
    SweepAnalysis out;

    std::vector<double> sig(n);
    for (std::size_t i = 0; i < n; ++i) sig[i] = std::sqrt(std::max(data.counts[i], 1.0));
    out.intensity = inference::fit_sinusoid(data.phi, data.counts, sig);
    if (opts.bootstrap > 0) {
        out.intensity_nu_bootstrap_sigma = inference::bootstrap_nu_sigma(data.phi, data.counts, sig, opts.bootstrap, seed);
    }

    double nu_gamma = 0.0, nu_gamma_sigma = 0.0;
    if (!data.histograms.empty()) {
        out.fits.resize(n);
        parallel_for(n, threads, [&](std::size_t i) { out.fits[i] = inference::fit_biexponential(data.histograms[i]); });
        std::vector<double> g(n), gs(n);
        double wsum = 0.0, wmean = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            g[i] = out.fits[i].gamma_rad;
            gs[i] = out.fits[i].gamma_rad_sigma;
            const double w = 1.0 / (out.fits[i].gamma_nrad_sigma * out.fits[i].gamma_nrad_sigma);
            wsum += w;
            wmean += w * out.fits[i].gamma_nrad;
        }
        out.gamma_nrad_mean = wmean / wsum;
        out.gamma_nrad_sigma = std::sqrt(1.0 / wsum);
        out.rate = inference::fit_sinusoid(data.phi, g, gs);
        out.gamma_max = sinusoid_extremum(*out.rate, 1.0);
        out.gamma_min = sinusoid_extremum(*out.rate, -1.0);
        nu_gamma = out.rate->nu;
        nu_gamma_sigma = out.rate->nu_sigma;

        try {
            inference::EstimateOptions eo{opts.n_y0, opts.n_r, opts.n_beta, opts.n_sigma};
            out.estimate = inference::estimate_parameters({std::min(out.intensity.nu, 1.0), out.intensity.nu_sigma},
                                                          {std::min(nu_gamma, 1.0), nu_gamma_sigma}, profile, eo);
            out.estimate->theta_offset = out.intensity.theta;
        } catch (const EmptyFeasibleSet& e) {
            out.estimate_note = e.what();
        }
    }
    return out;
}

json feasible_json(const inference::VisibilityEstimate& est, std::size_t max_points) {
    json pts = json::array();
    const auto& fs = est.feasible_set;
    const std::size_t stride = std::max<std::size_t>(1, (fs.size() + max_points - 1) / max_points);
    for (std::size_t i = 0; i < fs.size(); i += stride) {
        const auto& p = fs[i];
        pts.push_back({{"y0_nm", p.y0_nm},
                       {"r_T", p.r_T},
                       {"beta_y0", p.beta_y0},
                       {"beta_y0_min", p.beta_y0_min},
                       {"beta_y0_max", p.beta_y0_max}});
    }
    return {{"count", fs.size()},
            {"r_T_range", {est.r_T_min, est.r_T_max}},
            {"y0_nm_range", {est.y0_min_nm, est.y0_max_nm}},
            {"beta_y0_range", {est.beta_min, est.beta_max}},
            {"points", pts}};
}

json report_json(const SweepAnalysis& a, const SweepData& data) {
    json rep;
    rep["points"] = data.phi.size();
    rep["nu_I"] = {{"value", a.intensity.nu}, {"sigma", a.intensity.nu_sigma}};
    if (a.intensity_nu_bootstrap_sigma > 0.0) rep["nu_I"]["bootstrap_sigma"] = a.intensity_nu_bootstrap_sigma;
    rep["intensity_fit"] = {{"mean", a.intensity.mean},
                            {"mean_sigma", a.intensity.mean_sigma},
                            {"theta_rad", a.intensity.theta_defined ? json(a.intensity.theta) : json(nullptr)},
                            {"chi2_dof", a.intensity.chi2_dof}};
    if (a.rate) {
        rep["nu_gamma"] = {{"value", a.rate->nu}, {"sigma", a.rate->nu_sigma}};
        rep["gamma_rad_max"] = {{"value", a.gamma_max.value}, {"sigma", a.gamma_max.sigma}};
        rep["gamma_rad_min"] = {{"value", a.gamma_min.value}, {"sigma", a.gamma_min.sigma}};
        const auto c = inference::contrast(a.gamma_max.value, a.gamma_max.sigma, a.gamma_min.value, a.gamma_min.sigma);
        rep["rate_contrast"] = {{"value", c.value}, {"sigma", c.sigma}};
        rep["gamma_nrad"] = {{"value", a.gamma_nrad_mean}, {"sigma", a.gamma_nrad_sigma}};
        rep["rate_fit"] = {{"theta_rad", a.rate->theta_defined ? json(a.rate->theta) : json(nullptr)},
                           {"chi2_dof", a.rate->chi2_dof}};
        json fits = json::array();
        for (std::size_t i = 0; i < a.fits.size(); ++i) {
            const auto& f = a.fits[i];
            fits.push_back({{"voltage", data.voltage[i]},
                            {"gamma_f", f.gamma_f},
                            {"gamma_f_sigma", f.gamma_f_sigma},
                            {"gamma_s", f.gamma_s},
                            {"gamma_s_sigma", f.gamma_s_sigma},
                            {"gamma_rad", f.gamma_rad},
                            {"gamma_rad_sigma", f.gamma_rad_sigma},
                            {"reduced_deviance", f.fit.goodness},
                            {"iterations", f.fit.n_iter},
                            {"flags", f.fit.flags}});
        }
        rep["decay_fits"] = fits;
    }
    if (a.estimate) {
        rep["r_T_lower_bound"] = a.estimate->r_T_lower_bound;
        rep["feasible_set"] = feasible_json(*a.estimate);
    } else if (!a.estimate_note.empty()) {
        rep["r_T_lower_bound"] = inference::r_T_lower_bound(std::min(a.intensity.nu, 1.0));
        rep["feasible_set"] = {{"count", 0}, {"note", a.estimate_note}};
    }
    return rep;
}

json table1_json(const std::vector<inference::TableReportRow>& rows) {
    json out = json::array();
    for (const auto& r : rows) {
        json row = {{"qd", r.row.qd},
                    {"lambda_nm", r.row.lambda_nm},
                    {"gamma_max", {r.row.gamma_max.value, r.row.gamma_max.sigma}},
                    {"gamma_min", {r.row.gamma_min.value, r.row.gamma_min.sigma}},
                    {"nu_gamma_tabulated", {r.row.nu_gamma.value, r.row.nu_gamma.sigma}},
                    {"nu_I", r.row.nu_I.value},
                    {"nu_I_sigma", r.row.nu_I.sigma},
                    {"nu_I_sigma_assumed", !r.row.nu_I_sigma_given},
                    {"rate_contrast", {r.contrast.value, r.contrast.sigma}},
                    {"contrast_minus_tabulated", r.contrast_minus_tabulated},
                    {"within_1sigma", r.within_1sigma},
                    {"r_T_lower_bound", r.r_T_bound}};
        if (r.estimate) {
            row["feasible_set"] = feasible_json(*r.estimate, 50);
        } else {
            row["feasible_set"] = {{"count", 0}, {"note", r.note}};
        }
        out.push_back(std::move(row));
    }
    return out;
}

}  // namespace phaselab::pipeline
