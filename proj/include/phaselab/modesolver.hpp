#pragma once

#include <cstddef>
#include <iosfwd>
#include <vector>

namespace phaselab::modesolver {

// How the lateral (width) problem treats the dominant field component.
//   Scalar    - e_y and de_y/dy continuous at the side walls.
//   Polarized - e_y is normal to the side walls, so eps*e_y and e_x are
//               continuous (the TM step of the effective-index method).
enum class LateralModel { Scalar, Polarized };

enum class SlabPolarization { TE, TM };

struct WaveguideGeometry {
    double width_nm = 300.0;
    double thickness_nm = 160.0;
    double core_index = 3.48;
    double clad_index = 1.0;
    double wavelength_nm = 930.0;
    LateralModel lateral = LateralModel::Polarized;

    void validate() const;
};

// Fundamental even mode of a symmetric three-layer slab, from the
// transcendental dispersion relation u*tan(u) = q*w.
struct SlabMode {
    double n_eff = 0.0;
    double kappa_per_nm = 0.0;  // transverse wavenumber in the core
    double gamma_per_nm = 0.0;  // evanescent decay constant in the cladding
};

SlabMode symmetric_slab_even_mode(double n_core, double n_clad, double thickness_nm,
                                  double wavelength_nm, SlabPolarization pol);

/// Effective index of the membrane (thickness direction, TE polarization).
double membrane_index(const WaveguideGeometry& geom);

/// Quasi-TE0 profile across the waveguide width.
///
/// The grid spans the core and an evanescent window on each side. It is
/// non-decreasing and exactly mirror-symmetric about y = 0. The side-wall
/// positions appear twice: once with the core-side field, once with the
/// cladding-side field. Indices [core_begin, core_end) address the core nodes.
/// Normalized so that e_y(0) = 1, which is the maximum of e_y over the core.
struct ModeProfile {
    std::vector<double> grid_nm;
    std::vector<double> e_x;
    std::vector<double> e_y;
    std::vector<double> eps_r;
    std::size_t core_begin = 0;
    std::size_t core_end = 0;

    double half_width_nm = 0.0;
    double n_eff = 0.0;
    double k_per_nm = 0.0;
    double group_index = 0.0;
    double norm_N = 0.0;       // integral of eps_r |E|^2 dy (per unit thickness)
    double slab_index = 0.0;   // membrane effective index used as the core index
    double confinement = 0.0;  // fraction of norm_N inside the core
    double eigen_residual = 0.0;
};

struct SolverOptions {
    std::size_t n_points = 256;
    // Modes with less of their energy in the core than this are not treated
    // as guided.
    double min_confinement = 0.25;
    // Cladding window, in evanescent decay lengths.
    double window_decay_lengths = 25.0;
};

ModeProfile solve_te0(const WaveguideGeometry& geom, const SolverOptions& opts = {});

struct ModeWeights {
    double wx = 0.0;
    double wy = 0.0;
};

/// |e_x(y0)|^2 and |e_y(y0)|^2, linearly interpolated. Positions inside the
/// core (|y0| <= half width) use the core-side field.
ModeWeights mode_weights(const ModeProfile& profile, double y0_nm);

/// Copy of the profile with both field components multiplied by `factor`.
ModeProfile rescaled(const ModeProfile& profile, double factor);

void write_profile_csv(std::ostream& os, const ModeProfile& profile);

}  // namespace phaselab::modesolver
