#pragma once

#include "phaselab/modesolver.hpp"
#include "phaselab/synthlab.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace phaselab::inference {

struct FitResult {
    std::vector<std::string> names;
    std::vector<double> params;
    std::vector<double> uncertainties;
    Eigen::MatrixXd covariance;
    double goodness = 0.0;  // reduced deviance (Poisson) or reduced chi^2
    double gradient_norm = 0.0;
    bool converged = false;
    int n_iter = 0;
    std::vector<std::string> flags;

    double value(std::string_view name) const;
    double sigma(std::string_view name) const;
    bool has_flag(std::string_view flag) const;
};

// ---- bi-exponential decay fits ------------------------------------------

/// Bins used by the decay fit, times measured from the start of the window.
struct DecayWindow {
    std::vector<double> t0;
    std::vector<double> t1;
    std::vector<double> counts;
    double offset_ns = 0.0;  // absolute time of the window start
};

/// Bins from the histogram peak to the end.
DecayWindow fit_window(const synthlab::DecayHistogram& hist);

// Parameter order: A_f, gamma_f, A_s, gamma_s, bg. Amplitudes are counts per
// ns at the window start, bg is counts per bin.
using BiexpParams = std::array<double, 5>;

std::vector<double> biexp_expected(const DecayWindow& w, const BiexpParams& p);
double biexp_loglikelihood(const DecayWindow& w, const BiexpParams& p);
Eigen::VectorXd biexp_gradient(const DecayWindow& w, const BiexpParams& p);
Eigen::MatrixXd biexp_hessian(const DecayWindow& w, const BiexpParams& p);

struct BiexpOptions {
    int max_iter = 200;
    double low_stat_counts = 1000.0;
    double min_rate_ratio = 1.5;
};

struct BiexpFit {
    FitResult fit;
    double gamma_f = 0.0, gamma_f_sigma = 0.0;
    double gamma_s = 0.0, gamma_s_sigma = 0.0;
    double gamma_rad = 0.0, gamma_rad_sigma = 0.0;
    double gamma_nrad = 0.0, gamma_nrad_sigma = 0.0;
    bool low_statistics = false;
};

/// Poisson maximum-likelihood fit of A_f e^{-gamma_f t} + A_s e^{-gamma_s t} + bg
/// integrated over each bin.
BiexpFit fit_biexponential(const synthlab::DecayHistogram& hist,
                           const std::optional<synthlab::ExcitonModel>& init = {},
                           const BiexpOptions& opts = {});

// ---- sinusoid fits -------------------------------------------------------

struct SinusoidFit {
    FitResult fit;  // linear parameters m, a, b of m + a cos 2phi + b sin 2phi
    double mean = 0.0, mean_sigma = 0.0;
    double nu = 0.0, nu_sigma = 0.0;
    double theta = 0.0, theta_sigma = 0.0;  // v = m (1 + nu cos(2 phi + theta))
    bool theta_defined = true;
    double chi2_dof = 0.0;

    double max() const { return mean * (1.0 + nu); }
    double min() const { return mean * (1.0 - nu); }
    double at(double phi) const;
};

/// Weighted least squares. Needs six points covering half the 2 phi circle.
SinusoidFit fit_sinusoid(std::span<const double> phases, std::span<const double> values,
                         std::span<const double> sigmas);

/// Visibility (max - min) / (max + min) of one sample set, with first-order
/// error propagation.
struct Contrast {
    double value = 0.0;
    double sigma = 0.0;
};
Contrast contrast(double max, double max_sigma, double min, double min_sigma);

// ---- phase map reconstruction --------------------------------------------

struct PhaseMap {
    synthlab::PhaseCalibration calibration;  // Table form
    double fringes = 0.0;                    // covered phase / pi
    double i_max = 0.0, i_min = 0.0;         // normalisation used for the arccos
    std::vector<std::size_t> turning_points;
    bool reflection_ambiguous = true;        // global sign and offset are never fixed
    std::vector<std::string> flags;
};

/// phi(V) from the intensity fringe of a reference line. The result is defined
/// up to phi -> +-phi + c.
PhaseMap reconstruct_phase_map(std::span<const double> voltages, std::span<const double> intensities);

// ---- visibility inversion ------------------------------------------------

/// Lower bound on |r_T| from nu_I for a centred emitter.
double r_T_lower_bound(double nu_I);

struct Measured {
    double value = 0.0;
    double sigma = 0.0;
};

struct FeasiblePoint {
    double y0_nm = 0.0;
    double r_T = 0.0;
    double beta_y0 = 0.0;      // member closest to the measured nu_gamma
    double beta_y0_min = 0.0;  // consistent beta range at this (y0, r_T)
    double beta_y0_max = 0.0;
    double nu_I = 0.0;
    double nu_gamma = 0.0;
};

struct VisibilityEstimate {
    Measured nu_I;
    Measured nu_gamma;
    std::optional<double> theta_offset;
    double r_T_lower_bound = 0.0;
    std::vector<FeasiblePoint> feasible_set;
    double r_T_min = 0.0, r_T_max = 0.0;
    double y0_min_nm = 0.0, y0_max_nm = 0.0;
    double beta_min = 0.0, beta_max = 0.0;
};

struct EstimateOptions {
    int n_y0 = 201;
    int n_r = 101;
    int n_beta = 201;
    double n_sigma = 2.0;
};

/// Centred bound plus a (y0, r_T) grid scan. Throws EmptyFeasibleSet when no
/// triple reproduces both visibilities.
VisibilityEstimate estimate_parameters(Measured nu_I, Measured nu_gamma, const modesolver::ModeProfile& profile,
                                       const EstimateOptions& opts = {});

/// Forward visibilities of one (y0, r_T, beta_y0) triple, as used by the scan.
std::array<double, 2> forward_visibilities(const modesolver::ModeProfile& profile, double y0_nm, double r_T,
                                           double beta_y0);

// ---- Lifetime table ------------------------------------------------------

struct TableRow {
    std::string qd;
    double lambda_nm = 0.0;
    Measured gamma_max;
    Measured gamma_min;
    Measured nu_gamma;
    Measured nu_I;
    bool nu_I_sigma_given = false;
};

/// Reads `qd,lambda_nm,gamma_max,gamma_min,nu_gamma,nu_I`; values may carry
/// an uncertainty as `v+-e` or `v±e`.
std::vector<TableRow> read_table1(std::istream& is, double default_nu_I_sigma = 0.05);

struct TableReportRow {
    TableRow row;
    Contrast contrast;
    double contrast_minus_tabulated = 0.0;
    bool within_1sigma = false;
    double r_T_bound = 0.0;
    std::optional<VisibilityEstimate> estimate;
    std::string note;
};

std::vector<TableReportRow> table1_report(const std::vector<TableRow>& rows,
                                          const modesolver::ModeProfile& profile,
                                          const EstimateOptions& opts = {});

// ---- bootstrap -----------------------------------------------------------

/// Parametric bootstrap of a sinusoid fit: resamples each value from a normal
/// law with its sigma and returns the spread of nu.
double bootstrap_nu_sigma(std::span<const double> phases, std::span<const double> values,
                          std::span<const double> sigmas, int n_resamples, std::uint64_t seed);

}  // namespace phaselab::inference
