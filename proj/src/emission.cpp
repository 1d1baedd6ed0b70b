#include "phaselab/emission.hpp"

#include "phaselab/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

namespace phaselab::emission {

using std::numbers::pi;

namespace {

void check_reflectivity(double r) {
    if (!(r >= 0.0 && r <= 1.0)) {
        throw ReflectivityOutOfRange(fmt::format("|r_T| = {} is outside [0, 1]", r));
    }
}

double sign_of(Dipole dip) { return dip == Dipole::X ? 1.0 : -1.0; }

double single_intensity(double r, double phase, Dipole dip) {
    return 0.5 * (1.0 + r * r + sign_of(dip) * 2.0 * r * std::cos(phase));
}

}  // namespace

double EmitterScene::beta_x0() const { return gamma_x0 / (gamma_x0 + gamma_b); }
double EmitterScene::beta_y0() const { return gamma_y0 / (gamma_y0 + gamma_b); }

void EmitterScene::validate() const {
    if (gamma_x0 < 0.0 || gamma_y0 < 0.0 || gamma_b < 0.0 || gamma_nrad < 0.0) {
        throw InvalidArgument("emitter rates must be non-negative");
    }
    if (!(k_per_nm > 0.0)) throw InvalidArgument("emitter scene needs a positive propagation constant");
    if (!(L_nm >= 0.0)) throw InvalidArgument("mirror distance must be non-negative");
}

double mirror_phase(double phi, double theta) {
    double p = std::fmod(2.0 * phi + theta, 2.0 * pi);
    if (p < 0.0) p += 2.0 * pi;
    return p;
}

cplx scalar_green(double x_nm, double x_src_nm, double k_per_nm) {
    if (!(k_per_nm > 0.0)) throw InvalidArgument("Green's function needs k > 0");
    const cplx i{0.0, 1.0};
    return i / (2.0 * k_per_nm) * std::exp(i * k_per_nm * std::abs(x_nm - x_src_nm));
}

double ldos_ratio(double r_T_mag, double phi, double k_per_nm, double L_nm, Dipole dip) {
    check_reflectivity(r_T_mag);
    if (dip == Dipole::AveragedBoth) throw InvalidArgument("LDOS ratio is defined per dipole orientation");
    const cplx mirror = std::polar(1.0, 2.0 * phi);
    const double image = (mirror * scalar_green(0.0, 2.0 * L_nm, k_per_nm)).imag();
    const double direct = scalar_green(0.0, 0.0, k_per_nm).imag();
    return 1.0 + sign_of(dip) * r_T_mag * image / direct;
}

double rate_modulation(double r_T_mag, double phi, double theta, Dipole dip) {
    check_reflectivity(r_T_mag);
    if (dip == Dipole::AveragedBoth) throw InvalidArgument("rate modulation is defined per dipole orientation");
    return 1.0 + sign_of(dip) * r_T_mag * std::cos(mirror_phase(phi, theta));
}

double decay_rate(const EmitterScene& scene, double r_T_mag, double phi, Dipole dip, NonRadiative nrad) {
    check_reflectivity(r_T_mag);
    const double extra = nrad == NonRadiative::Include ? scene.gamma_nrad : 0.0;
    auto single = [&](Dipole d) {
        const double g0 = d == Dipole::X ? scene.gamma_x0 : scene.gamma_y0;
        return g0 * ldos_ratio(r_T_mag, phi, scene.k_per_nm, scene.L_nm, d) + scene.gamma_b;
    };
    if (dip == Dipole::AveragedBoth) return 0.5 * (single(Dipole::X) + single(Dipole::Y)) + extra;
    return single(dip) + extra;
}

double intensity(const EmitterScene& scene, const modesolver::ModeWeights& weights, double r_T_mag,
                 double phi, Dipole dip) {
    check_reflectivity(r_T_mag);
    const double phase = mirror_phase(phi, scene.theta());
    if (dip != Dipole::AveragedBoth) return single_intensity(r_T_mag, phase, dip);
    const double total = weights.wx + weights.wy;
    if (!(total > 0.0)) throw ZeroField("both mode weights vanish at the emitter position");
    return (weights.wx * single_intensity(r_T_mag, phase, Dipole::X) +
            weights.wy * single_intensity(r_T_mag, phase, Dipole::Y)) /
           total;
}

double visibility_intensity(double r_T_mag) {
    check_reflectivity(r_T_mag);
    return 2.0 * r_T_mag / (1.0 + r_T_mag * r_T_mag);
}

double visibility_intensity_mixed(double r_T_mag, const modesolver::ModeWeights& weights) {
    if (weights.wx < 0.0 || weights.wy < 0.0) throw InvalidArgument("mode weights must be non-negative");
    const double total = weights.wx + weights.wy;
    if (!(total > 0.0)) throw ZeroField("both mode weights vanish at the emitter position");
    return visibility_intensity(r_T_mag) * std::abs(weights.wy - weights.wx) / total;
}

double visibility_rate(double beta_x0, double beta_y0, double Gamma_x0, double Gamma_y0, double r_T_mag,
                       Dipole dip) {
    check_reflectivity(r_T_mag);
    auto unit = [](double b) { return b >= 0.0 && b <= 1.0; };
    if (!unit(beta_x0) || !unit(beta_y0)) throw InvalidArgument("beta factors must lie in [0, 1]");
    switch (dip) {
        case Dipole::X: return beta_x0 * r_T_mag;
        case Dipole::Y: return beta_y0 * r_T_mag;
        case Dipole::AveragedBoth: break;
    }
    const double sum = Gamma_x0 + Gamma_y0;
    if (Gamma_x0 < 0.0 || Gamma_y0 < 0.0) throw InvalidArgument("total rates must be non-negative");
    if (!(sum > 0.0)) throw DegenerateRates("Gamma_x0 + Gamma_y0 must be positive");
    return std::abs(beta_x0 * Gamma_x0 / sum - beta_y0 * Gamma_y0 / sum) * r_T_mag;
}

double visibility_rate_centered(double beta_y0, double r_T_mag) {
    check_reflectivity(r_T_mag);
    return 0.5 * beta_y0 * r_T_mag;
}

double visibility_rate_offset(double beta_y0, const modesolver::ModeWeights& weights, double r_T_mag) {
    if (!(weights.wy > 0.0)) throw ZeroField("e_y vanishes at the emitter position");
    // Far past the wx = wy crossing the shared-rate picture would push beta_x0
    // above one; it saturates there.
    const double beta_x0 = std::min(1.0, beta_y0 * weights.wx / weights.wy);
    return visibility_rate(beta_x0, beta_y0, 1.0, 1.0, r_T_mag, Dipole::AveragedBoth);
}

double ldos_to_rate(double ldos, double dipole_moment, double omega, const PhysicalConstants& pc) {
    return pi * omega * dipole_moment * dipole_moment * ldos / (3.0 * pc.hbar * pc.eps0);
}

double waveguide_ldos(const modesolver::ModeProfile& profile, double y0_nm, Dipole dip, double omega,
                      const PhysicalConstants& pc) {
    if (dip == Dipole::AveragedBoth) throw InvalidArgument("LDOS is defined per dipole orientation");
    if (!(omega > 0.0)) throw InvalidArgument("omega must be positive");
    const auto w = modesolver::mode_weights(profile, y0_nm);
    const double e_sq = dip == Dipole::X ? w.wx : w.wy;
    const double v_g = pc.c / profile.group_index;
    const double k = profile.k_per_nm;
    // p.E E^dagger.p = |e_d|^2 and k * Im G0(0, 0) = 1/2.
    const double im_g = pc.c * pc.c / (omega * v_g * profile.norm_N) * e_sq * k * scalar_green(0, 0, k).imag();
    return 6.0 * omega / (pi * pc.c * pc.c) * im_g;
}

std::vector<OffsetVisibility> figure1d_curves(const modesolver::ModeProfile& profile,
                                              const EmitterScene& scene, double r_T_mag, int n_points) {
    check_reflectivity(r_T_mag);
    if (n_points < 2) throw InvalidArgument("figure1d_curves needs at least two offsets");
    const double a = profile.half_width_nm;
    const double centre_wy = modesolver::mode_weights(profile, 0.0).wy;
    std::vector<OffsetVisibility> out(static_cast<std::size_t>(n_points));
    for (int i = 0; i < n_points; ++i) {
        // Mirror the positive half so the sweep is exactly symmetric.
        const int j = std::min(i, n_points - 1 - i);
        const double mag = a * (1.0 - 2.0 * j / (n_points - 1.0));
        const double y0 = (i <= (n_points - 1) / 2 ? -mag : mag) + 0.0;
        const auto w = modesolver::mode_weights(profile, y0);
        const double gamma_y = scene.gamma_y0 * w.wy / centre_wy;
        const double beta_y = gamma_y / (gamma_y + scene.gamma_b);
        out[static_cast<std::size_t>(i)] = {y0, visibility_intensity_mixed(r_T_mag, w),
                                            visibility_rate_offset(beta_y, w, r_T_mag)};
    }
    return out;
}

std::vector<PhaseSample> phase_curve(const EmitterScene& scene, const modesolver::ModeWeights& weights,
                                     double r_T_mag, Dipole dip, int n_points) {
    if (n_points < 2) throw InvalidArgument("phase_curve needs at least two points");
    std::vector<PhaseSample> out;
    out.reserve(static_cast<std::size_t>(n_points));
    for (int i = 0; i < n_points; ++i) {
        const double phi = pi * i / n_points;
        out.push_back({phi, decay_rate(scene, r_T_mag, phi, dip), intensity(scene, weights, r_T_mag, phi, dip)});
    }
    return out;
}

void write_phase_csv(std::ostream& os, const std::vector<PhaseSample>& curve) {
    os << "phi_rad,gamma_total,intensity_rel\n";
    for (const auto& s : curve) os << fmt::format("{:.10g},{:.12g},{:.12g}\n", s.phi, s.gamma_total, s.intensity_rel);
}

void write_offset_csv(std::ostream& os, const std::vector<OffsetVisibility>& curve) {
    os << "y0_nm,nu_I,nu_gamma\n";
    for (const auto& s : curve) os << fmt::format("{:.10g},{:.12g},{:.12g}\n", s.y0_nm, s.nu_I, s.nu_gamma);
}

}  // namespace phaselab::emission
