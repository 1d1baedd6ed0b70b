#include "phaselab/opticalstack.hpp"

#include "phaselab/errors.hpp"

#include <fmt/format.h>

#include <cmath>
#include <numbers>
#include <ostream>

namespace phaselab::opticalstack {

using std::numbers::pi;

void MirrorChain::validate() const {
    auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!unit(t_phi_sq) || !unit(t_wg_sq) || !unit(r_M_mag)) {
        throw InvalidArgument(fmt::format(
            "mirror chain magnitudes must lie in [0, 1] (t_phi_sq={}, t_wg_sq={}, r_M={})", t_phi_sq,
            t_wg_sq, r_M_mag));
    }
    if (!std::isfinite(phi)) throw InvalidArgument("mirror phase must be finite");
}

cplx lumped_reflectivity(const MirrorChain& chain) {
    chain.validate();
    return std::polar(chain.magnitude(), 2.0 * chain.phi);
}

void PhotonicCrystalSpec::validate() const {
    if (n_holes < 0) throw InvalidArgument("n_holes must be non-negative");
    if (!(hole_radius_nm > 0.0) || !(2.0 * hole_radius_nm < pitch_nm)) {
        throw InvalidArgument(fmt::format("need 0 < 2*hole_radius < pitch (radius {}, pitch {})",
                                          hole_radius_nm, pitch_nm));
    }
    if (!(n_hole > 0.0) || !(n_hole < n_unetched) || !(termination_index > 0.0)) {
        throw InvalidArgument("need 0 < n_hole < n_unetched and a positive termination index");
    }
}

double PhotonicCrystalSpec::mean_index() const {
    const double hole = 2.0 * hole_radius_nm;
    return (hole * n_hole + (pitch_nm - hole) * n_unetched) / pitch_nm;
}

Matrix2c layer_matrix(double index, double thickness_nm, double wavelength_nm) {
    if (!(thickness_nm > 0.0) || !(index > 0.0) || !(wavelength_nm > 0.0)) {
        throw SingularMatrix(fmt::format("degenerate layer (n={}, d={} nm)", index, thickness_nm));
    }
    const double delta = 2.0 * pi * index * thickness_nm / wavelength_nm;
    const cplx i{0.0, 1.0};
    Matrix2c m;
    m << std::cos(delta), i * std::sin(delta) / index, i * index * std::sin(delta), std::cos(delta);
    return m;
}

Matrix2c period_matrix(const PhotonicCrystalSpec& spec, double wavelength_nm) {
    const double hole = 2.0 * spec.hole_radius_nm;
    const double half_bar = 0.5 * (spec.pitch_nm - hole);
    const Matrix2c bar = layer_matrix(spec.n_unetched, half_bar, wavelength_nm);
    return bar * layer_matrix(spec.n_hole, hole, wavelength_nm) * bar;
}

Matrix2c stack_matrix(const PhotonicCrystalSpec& spec, double wavelength_nm) {
    spec.validate();
    const Matrix2c cell = period_matrix(spec, wavelength_nm);
    Matrix2c m = Matrix2c::Identity();
    for (int p = 0; p < spec.n_holes; ++p) m = m * cell;
    return m;
}

StackResponse tmm_response(const PhotonicCrystalSpec& spec, double wavelength_nm, Incidence incidence) {
    if (!(wavelength_nm > 0.0)) throw InvalidArgument("wavelength must be positive");
    Matrix2c m = stack_matrix(spec, wavelength_nm);
    if (incidence == Incidence::FromRight) {
        // Reversed layer order: swap the diagonal of the characteristic matrix.
        std::swap(m(0, 0), m(1, 1));
    }
    const double n_in = spec.termination_index;
    const double n_out = spec.termination_index;
    const cplx b = m(0, 0) + m(0, 1) * n_out;
    const cplx c = m(1, 0) + m(1, 1) * n_out;
    const cplx den = n_in * b + c;
    if (std::abs(den) == 0.0) throw SingularMatrix("transfer matrix has no finite response");

    StackResponse out;
    out.r = (n_in * b - c) / den;
    out.t = 2.0 * n_in / den;
    out.reflectance = std::norm(out.r);
    out.transmittance = std::norm(out.t) * n_out / n_in;
    return out;
}

cplx tmm_reflectivity(const PhotonicCrystalSpec& spec, double wavelength_nm) {
    return tmm_response(spec, wavelength_nm).r;
}

std::vector<SweepPoint> tmm_sweep(const PhotonicCrystalSpec& spec, double lambda_min_nm,
                                  double lambda_max_nm, int n_points) {
    if (n_points < 2 || !(lambda_max_nm > lambda_min_nm) || !(lambda_min_nm > 0.0)) {
        throw InvalidArgument("sweep needs 0 < lambda_min < lambda_max and at least two points");
    }
    std::vector<SweepPoint> out;
    out.reserve(static_cast<std::size_t>(n_points));
    for (int i = 0; i < n_points; ++i) {
        const double lambda = lambda_min_nm + (lambda_max_nm - lambda_min_nm) * i / (n_points - 1);
        const cplx r = tmm_reflectivity(spec, lambda);
        out.push_back({lambda, r, std::norm(r)});
    }
    return out;
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepPoint>& sweep) {
    os << "lambda_nm,r_re,r_im,R_power\n";
    for (const auto& p : sweep) {
        os << fmt::format("{:.10g},{:.12g},{:.12g},{:.12g}\n", p.lambda_nm, p.r.real(), p.r.imag(), p.power);
    }
}

double waveguide_transmission(double loss_db_per_mm, double length_nm) {
    if (!(loss_db_per_mm >= 0.0) || !(length_nm >= 0.0)) {
        throw InvalidArgument("loss and length must be non-negative");
    }
    return std::pow(10.0, -loss_db_per_mm * (length_nm * 1e-6) / 10.0);
}

}  // namespace phaselab::opticalstack
