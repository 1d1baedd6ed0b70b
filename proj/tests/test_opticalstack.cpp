#include "phaselab/errors.hpp"
#include "phaselab/opticalstack.hpp"

#include <Eigen/Dense>
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

using namespace phaselab;
using namespace phaselab::opticalstack;

namespace {

constexpr double pi = std::numbers::pi;

struct Layer {
    double n, d;
};

std::vector<Layer> layers_of(const PhotonicCrystalSpec& s) {
    const double hole = 2.0 * s.hole_radius_nm;
    const double half = 0.5 * (s.pitch_nm - hole);
    std::vector<Layer> out;
    for (int i = 0; i < s.n_holes; ++i) {
        out.push_back({s.n_unetched, half});
        out.push_back({s.n_hole, hole});
        out.push_back({s.n_unetched, half});
    }
    return out;
}

// Forward/backward amplitude transfer matrices, normal incidence,
// exp(i(kx - wt)) convention.
cplx oracle_r(const std::vector<Layer>& layers, double n_in, double n_out, double lambda) {
    using M = Eigen::Matrix2cd;
    auto D = [](double n) {
        M d;
        d << 1.0, 1.0, n, -n;
        return d;
    };
    M total = D(n_in).inverse();
    for (const auto& l : layers) {
        const double ph = 2.0 * pi * l.n * l.d / lambda;
        M P;
        P << std::exp(cplx(0, ph)), 0.0, 0.0, std::exp(cplx(0, -ph));
        total = total * D(l.n) * P * D(l.n).inverse();
    }
    total = total * D(n_out);
    return total(1, 0) / total(0, 0);
}

}  // namespace

TEST_CASE("lumped reflectivity examples") {
    MirrorChain c{0.55, 0.9, 1.0, 0.0};
    CHECK(std::abs(lumped_reflectivity(c)) == doctest::Approx(0.495).epsilon(1e-12));

    MirrorChain lossless{1.0, 1.0, 1.0, pi / 4.0};
    const cplx r = lumped_reflectivity(lossless);
    CHECK(r.real() == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
    CHECK(r.imag() == doctest::Approx(1.0).epsilon(1e-15));

    for (double phi : {0.0, 0.3, 1.7, 3.0}) {
        MirrorChain none{0.55, 0.9, 0.0, phi};
        CHECK(std::abs(lumped_reflectivity(none)) == 0.0);
        MirrorChain some{0.55, 0.9, 0.8, phi};
        CHECK(std::abs(lumped_reflectivity(some)) == doctest::Approx(0.55 * 0.9 * 0.8).epsilon(1e-14));
        CHECK(std::arg(lumped_reflectivity(some)) == doctest::Approx(std::remainder(2.0 * phi, 2.0 * pi)).epsilon(1e-12));
    }
    MirrorChain bad{1.2, 0.9, 1.0, 0.0};
    CHECK_THROWS_AS(lumped_reflectivity(bad), InvalidArgument);
}

TEST_CASE("waveguide transmission") {
    const double one_way = waveguide_transmission(7.5, 30000.0);
    CHECK(one_way == doctest::Approx(std::pow(10.0, -0.0225)).epsilon(1e-14));
    CHECK(one_way == doctest::Approx(0.95).epsilon(0.01));
    CHECK(one_way * one_way == doctest::Approx(0.9).epsilon(0.01));
    CHECK(waveguide_transmission(0.0, 30000.0) == 1.0);
    CHECK(waveguide_transmission(7.5, 0.0) == 1.0);
    CHECK_THROWS_AS(waveguide_transmission(-1.0, 1.0), InvalidArgument);
}

TEST_CASE("TMM agrees with an independent amplitude-matrix solve") {
    PhotonicCrystalSpec s;
    for (double lambda : {850.0, 900.0, 930.0, 950.0, 1000.0, 1050.0}) {
        const cplx r = tmm_reflectivity(s, lambda);
        const cplx o = oracle_r(layers_of(s), s.termination_index, s.termination_index, lambda);
        CHECK(std::abs(r - o) < 1e-10);
    }
    s.termination_index = 1.0;
    s.n_holes = 5;
    const cplx r = tmm_reflectivity(s, 930.0);
    const cplx o = oracle_r(layers_of(s), 1.0, 1.0, 930.0);
    CHECK(std::abs(r - o) < 1e-10);
}

TEST_CASE("empty stack reduces to the termination Fresnel coefficient") {
    PhotonicCrystalSpec s;
    s.n_holes = 0;
    CHECK(std::abs(tmm_reflectivity(s, 930.0)) < 1e-15);
}

TEST_CASE("flux conservation across the sweep") {
    PhotonicCrystalSpec s;
    for (const auto& p : tmm_sweep(s, 850.0, 1050.0, 201)) {
        const auto resp = tmm_response(s, p.lambda_nm);
        CHECK(std::abs(resp.reflectance + resp.transmittance - 1.0) < 1e-10);
        CHECK(p.power == doctest::Approx(resp.reflectance).epsilon(1e-14));
    }
}

TEST_CASE("stopband sits at the Bragg wavelength") {
    PhotonicCrystalSpec s;
    // (140 * 1.518 + 125 * 2.1) / 265
    CHECK(s.mean_index() == doctest::Approx(1.792528301886792).epsilon(1e-12));
    const double lb = s.bragg_wavelength_nm();
    CHECK(lb == doctest::Approx(950.0).epsilon(1e-3));

    // The stopband centre is where the period trace crosses -2 symmetrically;
    // locate the two band edges and check their midpoint.
    const auto sweep = tmm_sweep(s, 700.0, 1300.0, 6001);
    double lo = 0.0, hi = 0.0;
    bool inside = false;
    for (const auto& p : sweep) {
        const auto m = period_matrix(s, p.lambda_nm);
        const bool gap = std::abs((m(0, 0) + m(1, 1)).real()) > 2.0;
        if (gap && !inside && p.lambda_nm > 800.0 && lo == 0.0) lo = p.lambda_nm;
        if (!gap && inside && lo > 0.0 && hi == 0.0) hi = p.lambda_nm;
        inside = gap;
    }
    REQUIRE(lo > 0.0);
    REQUIRE(hi > lo);
    CHECK(0.5 * (lo + hi) == doctest::Approx(lb).epsilon(0.02));
    CHECK(std::norm(tmm_reflectivity(s, lb)) > std::norm(tmm_reflectivity(s, lo - 30.0)));
    CHECK(std::norm(tmm_reflectivity(s, lb)) > std::norm(tmm_reflectivity(s, hi + 30.0)));
}

TEST_CASE("band above 90 percent over 900-1000 nm") {
    PhotonicCrystalSpec s;
    for (const auto& p : tmm_sweep(s, 900.0, 1000.0, 201)) CHECK(p.power > 0.9);
}

TEST_CASE("reflectance at the stopband centre grows with the hole count") {
    PhotonicCrystalSpec s;
    double prev = 0.0;
    for (int n : {4, 8, 12}) {
        s.n_holes = n;
        const double R = std::norm(tmm_reflectivity(s, s.bragg_wavelength_nm()));
        CHECK(R >= prev);
        prev = R;
    }
}

TEST_CASE("transfer matrix properties") {
    PhotonicCrystalSpec s;
    const auto P = period_matrix(s, 930.0);
    CHECK(std::abs(P.determinant() - 1.0) < 1e-12);
    const auto S = stack_matrix(s, 930.0);
    Eigen::Matrix2cd prod = Eigen::Matrix2cd::Identity();
    for (int i = 0; i < s.n_holes; ++i) prod = prod * P;
    CHECK((prod - S).norm() < 1e-10 * S.norm());
    CHECK((S * S.inverse() - Eigen::Matrix2cd::Identity()).norm() < 1e-10);

    const auto L = layer_matrix(2.1, 100.0, 930.0);
    CHECK(std::abs(L.determinant() - 1.0) < 1e-14);
    CHECK_THROWS_AS(layer_matrix(2.1, 0.0, 930.0), SingularMatrix);
}

TEST_CASE("reciprocity of the symmetric stack") {
    PhotonicCrystalSpec s;
    for (double lambda : {880.0, 950.0, 1020.0}) {
        const auto a = tmm_response(s, lambda, Incidence::FromLeft);
        const auto b = tmm_response(s, lambda, Incidence::FromRight);
        CHECK(std::abs(a.r - b.r) < 1e-12);
        CHECK(std::abs(a.t - b.t) < 1e-12);
    }
}

TEST_CASE("mirror validation and sweep CSV") {
    PhotonicCrystalSpec s;
    s.hole_radius_nm = 140.0;
    CHECK_THROWS_AS(tmm_reflectivity(s, 930.0), InvalidArgument);
    s = {};
    s.n_hole = 2.5;
    CHECK_THROWS_AS(tmm_reflectivity(s, 930.0), InvalidArgument);
    s = {};
    CHECK_THROWS_AS(tmm_reflectivity(s, 0.0), InvalidArgument);

    std::ostringstream os;
    write_sweep_csv(os, tmm_sweep(s, 900.0, 1000.0, 3));
    CHECK(os.str().rfind("lambda_nm,r_re,r_im,R_power\n", 0) == 0);
}
