#pragma once

#include "phaselab/modesolver.hpp"

#include <complex>
#include <iosfwd>
#include <vector>

namespace phaselab::emission {

using cplx = std::complex<double>;

// X dipoles take the + sign in every interference term, Y dipoles the - sign.
// AveragedBoth is the equal-population average produced by above-band pumping.
enum class Dipole { X, Y, AveragedBoth };

enum class NonRadiative { Exclude, Include };

// Units: rates in 1/ns, lengths in nm, phases in rad.
struct EmitterScene {
    double y0_nm = 0.0;
    double L_nm = 30000.0;
    double k_per_nm = 0.0;
    double gamma_x0 = 0.0;
    double gamma_y0 = 1.0;
    double gamma_b = 0.1;
    double gamma_nrad = 0.1;
    double dipole_moment = 1.0;

    /// Round-trip propagation phase 2kL.
    double theta() const { return 2.0 * k_per_nm * L_nm; }
    double beta_x0() const;
    double beta_y0() const;
    void validate() const;
};

/// (2 phi + theta) wrapped to [0, 2 pi).
double mirror_phase(double phi, double theta);

/// 1D scalar Green's function (i / 2k) exp(ik |x - x_src|).
cplx scalar_green(double x_nm, double x_src_nm, double k_per_nm);

/// gamma_phi / gamma_0 from the image-dipole Green's function:
/// 1 +- r Im{exp(2i phi) G0(0, 2L)} / Im G0(0, 0). Single dipoles only.
double ldos_ratio(double r_T_mag, double phi, double k_per_nm, double L_nm, Dipole dip);

/// Same quantity from the closed form 1 +- r cos(2 phi + theta).
double rate_modulation(double r_T_mag, double phi, double theta, Dipole dip);

/// Total decay rate Gamma(phi). Single dipoles: gamma_d0 * ldos_ratio + gamma_b.
/// AveragedBoth: mean of the X and Y rates.
double decay_rate(const EmitterScene& scene, double r_T_mag, double phi, Dipole dip,
                  NonRadiative nrad = NonRadiative::Exclude);

/// Collected intensity relative to the mirrorless emission I0. For
/// AveragedBoth the X and Y fringes are weighted by |e_x|^2 and |e_y|^2.
double intensity(const EmitterScene& scene, const modesolver::ModeWeights& weights, double r_T_mag,
                 double phi, Dipole dip);

double visibility_intensity(double r_T_mag);
double visibility_intensity_mixed(double r_T_mag, const modesolver::ModeWeights& weights);

/// Decay-rate visibility. X / Y: beta_d0 * r. AveragedBoth: rate-weighted
/// difference of the two betas times r.
double visibility_rate(double beta_x0, double beta_y0, double Gamma_x0, double Gamma_y0,
                       double r_T_mag, Dipole dip);

/// 0.5 * beta_y0 * r, valid for a centred emitter with Gamma_x0 ~ Gamma_y0.
double visibility_rate_centered(double beta_y0, double r_T_mag);

/// Averaged-dipole rate visibility at a lateral offset. Guided rates scale
/// with the mode weights, both dipoles share one total rate, so
/// beta_x0 = beta_y0 * wx / wy.
double visibility_rate_offset(double beta_y0, const modesolver::ModeWeights& weights, double r_T_mag);

struct PhysicalConstants {
    double hbar = 1.054571817e-34;    // J s
    double eps0 = 8.8541878128e-12;   // F/m
    double c = 299792458.0;           // m/s
};

/// gamma_0 = pi omega |d|^2 rho / (3 hbar eps0), SI units in and out.
double ldos_to_rate(double ldos, double dipole_moment, double omega,
                    const PhysicalConstants& pc = {});

/// Waveguide LDOS rho_0 = 6 omega / (pi c^2) * p.Im G(r0, r0).p for one
/// dipole orientation, with G built from the guided mode:
/// c^2 / (omega v_g N) * E E^dagger * k * G0. Lengths in nm inside the mode
/// profile; the result carries the units of 1/(nm^2 s) per unit thickness and
/// only matters through ratios.
double waveguide_ldos(const modesolver::ModeProfile& profile, double y0_nm, Dipole dip, double omega,
                      const PhysicalConstants& pc = {});

struct OffsetVisibility {
    double y0_nm = 0.0;
    double nu_I = 0.0;
    double nu_gamma = 0.0;
};

/// Visibility pair across the waveguide width. gamma_y0 in the scene is the
/// centre value; guided rates scale with the local mode weights.
std::vector<OffsetVisibility> figure1d_curves(const modesolver::ModeProfile& profile,
                                              const EmitterScene& scene, double r_T_mag,
                                              int n_points = 201);

struct PhaseSample {
    double phi = 0.0;
    double gamma_total = 0.0;
    double intensity_rel = 0.0;
};

/// Rate and intensity over phi in [0, pi).
std::vector<PhaseSample> phase_curve(const EmitterScene& scene, const modesolver::ModeWeights& weights,
                                     double r_T_mag, Dipole dip, int n_points = 181);

void write_phase_csv(std::ostream& os, const std::vector<PhaseSample>& curve);
void write_offset_csv(std::ostream& os, const std::vector<OffsetVisibility>& curve);

}  // namespace phaselab::emission
