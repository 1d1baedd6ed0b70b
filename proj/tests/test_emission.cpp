#include "phaselab/emission.hpp"
#include "phaselab/errors.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <sstream>

using namespace phaselab;
using namespace phaselab::emission;

namespace {

constexpr double pi = std::numbers::pi;

EmitterScene scene_930() {
    EmitterScene s;
    s.k_per_nm = 2.0 * pi * 2.5633 / 930.0;
    s.gamma_x0 = 0.3;
    s.gamma_y0 = 1.0;
    s.gamma_b = 0.1;
    return s;
}

// phi that puts the combined phase 2 phi + theta at `target`.
double phi_for(double target, double theta) { return 0.5 * (target - theta); }

}  // namespace

TEST_CASE("scalar Green's function") {
    const double k = 2.0 * pi / 930.0;
    const cplx g0 = scalar_green(0.0, 0.0, k);
    CHECK(g0.real() == 0.0);
    CHECK(g0.imag() == 1.0 / (2.0 * k));
    const cplx g1 = scalar_green(930.0, 0.0, k);
    CHECK(std::abs(g1 - g0) < 1e-12 * std::abs(g0));
    for (double x : {-500.0, 1.0, 77.7, 30000.0}) {
        CHECK(std::abs(scalar_green(x, 12.0, k)) == doctest::Approx(1.0 / (2.0 * k)).epsilon(1e-14));
        CHECK(std::abs(scalar_green(x, 12.0, k) - scalar_green(12.0, x, k)) < 1e-15);
    }
    CHECK_THROWS_AS(scalar_green(0, 0, 0.0), InvalidArgument);
}

TEST_CASE("image-dipole ratio reduces to the closed form") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> ur(0.0, 1.0), uphi(-pi, pi), uk(0.005, 0.03), uL(1e3, 5e4);
    for (int i = 0; i < 20; ++i) {
        const double r = ur(rng), phi = uphi(rng), k = uk(rng), L = uL(rng);
        for (Dipole d : {Dipole::X, Dipole::Y}) {
            CHECK(ldos_ratio(r, phi, k, L, d) == doctest::Approx(rate_modulation(r, phi, 2.0 * k * L, d)).epsilon(1e-12));
        }
    }
    CHECK(ldos_ratio(1.0, 0.0, 0.01, 0.0, Dipole::X) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("ratio depends on frequency only through theta") {
    // Holding 2kL fixed while k changes leaves the modulation unchanged.
    const double theta = 1.234;
    for (double k : {0.01, 0.017, 0.025}) {
        const double L = theta / (2.0 * k);
        CHECK(ldos_ratio(0.6, 0.4, k, L, Dipole::Y) == doctest::Approx(rate_modulation(0.6, 0.4, theta, Dipole::Y)).epsilon(1e-12));
    }
}

TEST_CASE("decay rate examples") {
    auto s = scene_930();
    for (double phi : {0.0, 0.5, 2.0}) {
        CHECK(decay_rate(s, 0.0, phi, Dipole::Y) == doctest::Approx(1.1).epsilon(1e-14));
        CHECK(decay_rate(s, 0.0, phi, Dipole::X) == doctest::Approx(0.4).epsilon(1e-14));
    }
    const double phi_pi = phi_for(pi, s.theta());
    CHECK(decay_rate(s, 0.5, phi_pi, Dipole::Y) == doctest::Approx(1.6).epsilon(1e-10));
    CHECK(decay_rate(s, 0.5, phi_pi, Dipole::Y, NonRadiative::Include) == doctest::Approx(1.7).epsilon(1e-10));
    CHECK(decay_rate(s, 0.5, phi_pi, Dipole::AveragedBoth) ==
          doctest::Approx(0.5 * (decay_rate(s, 0.5, phi_pi, Dipole::X) + 1.6)).epsilon(1e-12));
    CHECK_THROWS_AS(decay_rate(s, 1.01, 0.0, Dipole::Y), ReflectivityOutOfRange);
    CHECK_THROWS_AS(decay_rate(s, -0.1, 0.0, Dipole::Y), ReflectivityOutOfRange);
}

TEST_CASE("QD-1 rates toggle between the tabulated extremes") {
    EmitterScene s = scene_930();
    s.gamma_x0 = 0.279;
    s.gamma_y0 = 0.946;
    s.gamma_b = 0.187;
    double gmax = 0.0, gmin = 1e9;
    for (int i = 0; i < 2048; ++i) {
        const double g = decay_rate(s, 0.6, pi * i / 2048.0, Dipole::AveragedBoth);
        gmax = std::max(gmax, g);
        gmin = std::min(gmin, g);
    }
    CHECK(gmax == doctest::Approx(1.00).epsilon(0.08));
    CHECK(std::abs(gmin - 0.63) < 0.08);
}

TEST_CASE("extremal rates and phase-average conservation") {
    auto s = scene_930();
    for (double r : {0.2, 0.5, 0.9}) {
        for (Dipole d : {Dipole::X, Dipole::Y}) {
            const double g0 = d == Dipole::X ? s.gamma_x0 : s.gamma_y0;
            double gmax = -1.0, gmin = 1e9, sum = 0.0;
            const int n = 1024;
            for (int i = 0; i < n; ++i) {
                const double g = decay_rate(s, r, pi * i / n, d);
                sum += g;
                gmax = std::max(gmax, g);
                gmin = std::min(gmin, g);
            }
            CHECK(sum / n == doctest::Approx(g0 + s.gamma_b).epsilon(1e-10));
            CHECK(gmax <= g0 * (1.0 + r) + s.gamma_b + 1e-12);
            CHECK(gmin >= g0 * (1.0 - r) + s.gamma_b - 1e-12);
            CHECK(decay_rate(s, r, phi_for(0.0, s.theta()), d) ==
                  doctest::Approx(g0 * (1.0 + (d == Dipole::X ? r : -r)) + s.gamma_b).epsilon(1e-10));
            CHECK(decay_rate(s, r, phi_for(pi, s.theta()), d) ==
                  doctest::Approx(g0 * (1.0 - (d == Dipole::X ? r : -r)) + s.gamma_b).epsilon(1e-10));
        }
    }
}

TEST_CASE("x and y rate changes are opposite and scale with the intrinsic rates") {
    auto s = scene_930();
    for (double phi : {0.1, 0.9, 2.3}) {
        const double dx = decay_rate(s, 0.7, phi, Dipole::X) - (s.gamma_x0 + s.gamma_b);
        const double dy = decay_rate(s, 0.7, phi, Dipole::Y) - (s.gamma_y0 + s.gamma_b);
        CHECK(dx == doctest::Approx(-dy * s.gamma_x0 / s.gamma_y0).epsilon(1e-10).scale(1e-12));
    }
}

TEST_CASE("intensity against the interference expansion") {
    auto s = scene_930();
    const modesolver::ModeWeights w{0.2, 0.7};
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> ur(0.0, 1.0), uphi(0.0, 2.0 * pi);
    for (int i = 0; i < 200; ++i) {
        const double r = ur(rng), phi = uphi(rng);
        const cplx e = std::polar(r, 2.0 * phi + s.theta());
        const double ix = 0.5 * std::norm(1.0 + e);
        const double iy = 0.5 * std::norm(1.0 - e);
        CHECK(intensity(s, w, r, phi, Dipole::X) == doctest::Approx(ix).epsilon(1e-12).scale(1e-12));
        CHECK(intensity(s, w, r, phi, Dipole::Y) == doctest::Approx(iy).epsilon(1e-12).scale(1e-12));
        CHECK(intensity(s, w, r, phi, Dipole::AveragedBoth) ==
              doctest::Approx((0.2 * ix + 0.7 * iy) / 0.9).epsilon(1e-12).scale(1e-12));
    }
    CHECK(intensity(s, w, 0.0, 1.3, Dipole::Y) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(intensity(s, w, 1.0, phi_for(0.0, s.theta()), Dipole::X) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK_THROWS_AS(intensity(s, {0.0, 0.0}, 0.5, 0.0, Dipole::AveragedBoth), ZeroField);
}

TEST_CASE("intensity sweep at r = 0.5 has visibility 0.8") {
    auto s = scene_930();
    double imax = 0.0, imin = 1e9;
    for (int i = 0; i < 4000; ++i) {
        const double v = intensity(s, {0.0, 1.0}, 0.5, pi * i / 4000.0, Dipole::Y);
        imax = std::max(imax, v);
        imin = std::min(imin, v);
    }
    CHECK((imax - imin) / (imax + imin) == doctest::Approx(0.8).epsilon(1e-6));
}

TEST_CASE("rate and intensity peak together for the y dipole") {
    auto s = scene_930();
    int arg_i = 0, arg_g = 0;
    double best_i = -1, best_g = -1;
    for (int i = 0; i < 3600; ++i) {
        const double phi = pi * i / 3600.0;
        const double v = intensity(s, {0.0, 1.0}, 0.6, phi, Dipole::Y);
        const double g = decay_rate(s, 0.6, phi, Dipole::Y);
        if (v > best_i) { best_i = v; arg_i = i; }
        if (g > best_g) { best_g = g; arg_g = i; }
    }
    CHECK(arg_i == arg_g);
}

TEST_CASE("intensity visibility") {
    CHECK(visibility_intensity(0.5) == 0.8);
    CHECK(visibility_intensity(0.0) == 0.0);
    CHECK(visibility_intensity(1.0) == 1.0);
    CHECK(visibility_intensity_mixed(0.5, {0.0, 0.4}) == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(visibility_intensity_mixed(0.7, {0.3, 0.3}) == 0.0);
    CHECK(visibility_intensity_mixed(0.5, {0.1, 0.3}) == doctest::Approx(0.4).epsilon(1e-14));
    CHECK_THROWS_AS(visibility_intensity_mixed(0.5, {0.0, 0.0}), ZeroField);
    CHECK_THROWS_AS(visibility_intensity(1.5), ReflectivityOutOfRange);
}

TEST_CASE("rate visibility") {
    CHECK(visibility_rate(0.0, 1.0, 1.0, 1.0, 1.0, Dipole::Y) == 1.0);
    CHECK(visibility_rate(0.0, 0.9, 1.0, 1.0, 0.6, Dipole::AveragedBoth) == doctest::Approx(0.27).epsilon(1e-14));
    CHECK(visibility_rate_centered(0.9, 0.6) == doctest::Approx(0.27).epsilon(1e-14));
    CHECK(visibility_rate(0.5, 0.5, 2.0, 2.0, 0.8, Dipole::AveragedBoth) == 0.0);
    for (double b : {0.2, 0.6, 0.95}) {
        for (double bx : {0.0, 0.1, 0.5}) {
            CHECK(visibility_rate(bx, b, 1.0, 1.0, 0.7, Dipole::AveragedBoth) <=
                  visibility_rate(bx, b, 1.0, 1.0, 0.7, Dipole::Y));
        }
    }
    CHECK_THROWS_AS(visibility_rate(0.1, 0.9, 0.0, 0.0, 0.5, Dipole::AveragedBoth), DegenerateRates);
    CHECK_THROWS_AS(visibility_rate(1.1, 0.9, 1.0, 1.0, 0.5, Dipole::X), InvalidArgument);
    // beta_x0 = 0.9 * 0.1 / 0.5 = 0.18
    CHECK(visibility_rate_offset(0.9, {0.1, 0.5}, 0.6) == doctest::Approx(0.5 * (0.9 - 0.18) * 0.6).epsilon(1e-14));
}

TEST_CASE("rate visibility matches a direct max/min of the averaged rate") {
    EmitterScene s = scene_930();
    s.gamma_x0 = 0.25;
    s.gamma_y0 = 0.9;
    s.gamma_b = 0.2;
    const double gx = 0.25, gy = 0.9, gb = 0.2;
    const double bx = gx / (gx + gb), by = gy / (gy + gb);
    const double Gx = gx + gb, Gy = gy + gb;
    double gmax = 0.0, gmin = 1e9;
    for (int i = 0; i < 4096; ++i) {
        const double g = decay_rate(s, 0.6, pi * i / 4096.0, Dipole::AveragedBoth);
        gmax = std::max(gmax, g);
        gmin = std::min(gmin, g);
    }
    // (Gmax - Gmin) / (Gmax + Gmin) with Gmax + Gmin = Gx + Gy.
    CHECK((gmax - gmin) / (gmax + gmin) ==
          doctest::Approx(visibility_rate(bx, by, Gx, Gy, 0.6, Dipole::AveragedBoth)).epsilon(1e-6));
}

TEST_CASE("LDOS to rate chain") {
    const double omega = 2.0e15;
    CHECK(ldos_to_rate(2.0, 1.0, omega) == doctest::Approx(2.0 * ldos_to_rate(1.0, 1.0, omega)).epsilon(1e-15));
    modesolver::ModeProfile p = modesolver::solve_te0({});
    const double rx = waveguide_ldos(p, 60.0, Dipole::X, omega);
    const double ry = waveguide_ldos(p, 60.0, Dipole::Y, omega);
    const auto w = modesolver::mode_weights(p, 60.0);
    CHECK(rx / ry == doctest::Approx(w.wx / w.wy).epsilon(1e-12));
    // Rescaling the eigenvector cancels through norm_N.
    const auto q = modesolver::rescaled(p, 7.3);
    CHECK(waveguide_ldos(q, 60.0, Dipole::Y, omega) == doctest::Approx(ry).epsilon(1e-10));
}

TEST_CASE("offset curves") {
    const auto p = modesolver::solve_te0({});
    auto s = scene_930();
    s.k_per_nm = p.k_per_nm;
    const auto curve = figure1d_curves(p, s, 0.5, 201);
    REQUIRE(curve.size() == 201);
    const auto& c = curve[100];
    CHECK(c.y0_nm == 0.0);
    CHECK(c.nu_I == doctest::Approx(0.8).epsilon(1e-12));
    const double beta = s.gamma_y0 / (s.gamma_y0 + s.gamma_b);
    CHECK(c.nu_gamma == doctest::Approx(0.5 * beta * 0.5).epsilon(1e-12));
    for (std::size_t i = 0; i < curve.size(); ++i) {
        const auto& a = curve[i];
        const auto& b = curve[curve.size() - 1 - i];
        CHECK(a.y0_nm == -b.y0_nm);
        CHECK(std::abs(a.nu_I - b.nu_I) < 1e-10);
        CHECK(std::abs(a.nu_gamma - b.nu_gamma) < 1e-10);
    }
    // nu_I falls from the centre out to the wx = wy crossing.
    for (std::size_t i = 101; i < curve.size(); ++i) {
        const auto w = modesolver::mode_weights(p, curve[i].y0_nm);
        if (w.wx >= w.wy) break;
        CHECK(curve[i].nu_I <= curve[i - 1].nu_I + 1e-12);
    }
}

TEST_CASE("phase curve CSV") {
    auto s = scene_930();
    std::ostringstream os;
    write_phase_csv(os, phase_curve(s, {0.0, 1.0}, 0.5, Dipole::Y, 8));
    CHECK(os.str().rfind("phi_rad,gamma_total,intensity_rel\n", 0) == 0);
    std::ostringstream os2;
    write_offset_csv(os2, {{0.0, 0.8, 0.2}});
    CHECK(os2.str().rfind("y0_nm,nu_I,nu_gamma\n", 0) == 0);
}
