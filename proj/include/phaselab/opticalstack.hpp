#pragma once

#include <Eigen/Core>

#include <complex>
#include <iosfwd>
#include <vector>

namespace phaselab::opticalstack {

using cplx = std::complex<double>;
using Matrix2c = Eigen::Matrix2cd;

// Phase shifter, waveguide and photonic-crystal mirror lumped into one
// reflection coefficient seen from the emitter. The two transmittivities are
// power quantities that already include the double pass.
struct MirrorChain {
    double t_phi_sq = 0.55;
    double t_wg_sq = 0.9;
    double r_M_mag = 1.0;
    double phi = 0.0;  // rad

    void validate() const;
    double magnitude() const { return t_phi_sq * t_wg_sq * r_M_mag; }
};

/// |r_T| exp(2i phi) with |r_T| = t_phi_sq * t_wg_sq * r_M_mag.
cplx lumped_reflectivity(const MirrorChain& chain);

// 1D stand-in for the hole array: each period is a symmetric cell
// (half unetched, hole, half unetched), embedded in termination_index.
struct PhotonicCrystalSpec {
    int n_holes = 12;
    double pitch_nm = 265.0;
    double hole_radius_nm = 70.0;
    double n_unetched = 2.1;
    double n_hole = 1.518;
    double termination_index = 2.1;

    void validate() const;
    double mean_index() const;
    double bragg_wavelength_nm() const { return 2.0 * mean_index() * pitch_nm; }
};

enum class Incidence { FromLeft, FromRight };

struct StackResponse {
    cplx r;
    cplx t;
    double reflectance = 0.0;    // |r|^2
    double transmittance = 0.0;  // |t|^2 n_out / n_in
};

/// Characteristic matrix of a homogeneous layer; unit determinant.
Matrix2c layer_matrix(double index, double thickness_nm, double wavelength_nm);
Matrix2c period_matrix(const PhotonicCrystalSpec& spec, double wavelength_nm);
Matrix2c stack_matrix(const PhotonicCrystalSpec& spec, double wavelength_nm);

StackResponse tmm_response(const PhotonicCrystalSpec& spec, double wavelength_nm,
                           Incidence incidence = Incidence::FromLeft);
cplx tmm_reflectivity(const PhotonicCrystalSpec& spec, double wavelength_nm);

struct SweepPoint {
    double lambda_nm = 0.0;
    cplx r;
    double power = 0.0;
};

std::vector<SweepPoint> tmm_sweep(const PhotonicCrystalSpec& spec, double lambda_min_nm,
                                  double lambda_max_nm, int n_points);

void write_sweep_csv(std::ostream& os, const std::vector<SweepPoint>& sweep);

/// One-way power transmittivity 10^(-loss*length/10); length in nm.
double waveguide_transmission(double loss_db_per_mm, double length_nm);

}  // namespace phaselab::opticalstack
