#pragma once

#include "phaselab/emission.hpp"
#include "phaselab/modesolver.hpp"
#include "phaselab/opticalstack.hpp"
#include "phaselab/synthlab.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace phaselab::config {

struct MirrorConfig {
    opticalstack::PhotonicCrystalSpec crystal;
    double lambda_min_nm = 850.0;
    double lambda_max_nm = 1050.0;
    int n_points = 401;
    double t_phi_sq = 0.55;
    double loss_db_per_mm = 7.5;
};

struct EmitterConfig {
    double y0_nm = 0.0;
    double L_nm = 30000.0;
    double gamma_x0 = 0.0;
    double gamma_y0 = 1.0;
    double gamma_b = 0.1;
    double gamma_nrad = 0.1;
    double r_T = 0.5;
};

struct SweepConfig {
    double v_start = 0.0;
    double v_stop = 11.0;
    int n_points = 12;
    double counts_scale = 2.0e4;
    bool noiseless = false;

    std::vector<double> voltages() const;
};

struct HistogramConfig {
    double total_counts = 1.0e5;
    double t_max_ns = 25.0;
    double bin_ns = 0.05;
    std::optional<double> irf_sigma_ns;
    double amp_ratio = 0.05;
    double background = 0.0;
};

struct FigureConfig {
    double r_T = 0.5;
    int n_offsets = 201;
    int n_phase = 181;
};

struct AnalysisConfig {
    int n_y0 = 201;
    int n_r = 101;
    int n_beta = 201;
    double n_sigma = 2.0;
    int bootstrap = 0;  // resamples; 0 disables
};

struct RunConfig {
    modesolver::WaveguideGeometry waveguide;
    modesolver::SolverOptions solver;
    MirrorConfig mirror;
    EmitterConfig emitter;
    synthlab::PhaseCalibration calibration;
    SweepConfig sweep;
    HistogramConfig histogram;
    FigureConfig figure;
    AnalysisConfig analysis;
    std::uint64_t seed = 1;
    std::string output_dir = "out";

    /// Range and consistency checks across sections; throws ConfigError.
    void validate() const;
};

/// Every key is required and unknown keys are rejected. Throws ConfigError
/// naming the offending key path.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& cfg);

/// "default" or "qd1".
RunConfig preset(std::string_view name);

/// SHA-256 of the canonical JSON form.
std::string config_hash(const RunConfig& cfg);

}  // namespace phaselab::config
