#pragma once

#include "phaselab/config.hpp"
#include "phaselab/inference.hpp"
#include "phaselab/synthlab.hpp"

#include <json.hpp>

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace phaselab::pipeline {

/// Runs body(i) for i in [0, n) on up to `threads` workers. Each index is
/// handled exactly once; callers write results into slot i.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body);

emission::EmitterScene make_scene(const config::EmitterConfig& e, const modesolver::ModeProfile& profile);

struct SweepData {
    std::vector<double> voltage;
    std::vector<double> phi;
    std::vector<double> counts;
    std::vector<synthlab::DecayHistogram> histograms;  // empty or one per point
};

SweepData from_records(const std::vector<synthlab::SweepRecord>& records);
SweepData read_sweep(const std::filesystem::path& sweep_csv, const std::vector<std::filesystem::path>& histograms);
synthlab::DecayHistogram read_histogram_csv(const std::filesystem::path& path);

struct Extremum {
    double value = 0.0;
    double sigma = 0.0;
};

struct SweepAnalysis {
    inference::SinusoidFit intensity;
    double intensity_nu_bootstrap_sigma = 0.0;  // 0 unless requested
    std::vector<inference::BiexpFit> fits;
    std::optional<inference::SinusoidFit> rate;
    Extremum gamma_max, gamma_min;
    double gamma_nrad_mean = 0.0, gamma_nrad_sigma = 0.0;
    std::optional<inference::VisibilityEstimate> estimate;
    std::string estimate_note;
};

SweepAnalysis analyze_sweep(const SweepData& data, const modesolver::ModeProfile& profile,
                            const config::AnalysisConfig& opts, unsigned threads, std::uint64_t seed);

nlohmann::json report_json(const SweepAnalysis& a, const SweepData& data);
nlohmann::json table1_json(const std::vector<inference::TableReportRow>& rows);

/// Summary of a feasible set, plus an evenly thinned sample of its members.
nlohmann::json feasible_json(const inference::VisibilityEstimate& est, std::size_t max_points = 200);

}  // namespace phaselab::pipeline
