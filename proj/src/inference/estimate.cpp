#include "phaselab/inference.hpp"

#include "phaselab/emission.hpp"
#include "phaselab/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace phaselab::inference {

double r_T_lower_bound(double nu_I) {
    if (!(nu_I >= 0.0 && nu_I <= 1.0)) throw InvalidArgument(fmt::format("nu_I = {} is outside [0, 1]", nu_I));
    // Root of 2r / (1 + r^2) = nu_I on [0, 1], written without cancellation.
    return nu_I / (1.0 + std::sqrt(1.0 - nu_I * nu_I));
}

std::array<double, 2> forward_visibilities(const modesolver::ModeProfile& profile, double y0_nm, double r_T,
                                           double beta_y0) {
    const auto w = modesolver::mode_weights(profile, y0_nm);
    return {emission::visibility_intensity_mixed(r_T, w), emission::visibility_rate_offset(beta_y0, w, r_T)};
}

VisibilityEstimate estimate_parameters(Measured nu_I, Measured nu_gamma, const modesolver::ModeProfile& profile,
                                       const EstimateOptions& opts) {
    auto check = [](const Measured& m, const char* name) {
        if (!(m.value >= 0.0 && m.value <= 1.0)) throw InvalidArgument(fmt::format("{} is outside [0, 1]", name));
        if (!(m.sigma >= 0.0) || !std::isfinite(m.sigma)) {
            throw InvalidArgument(fmt::format("{} needs a finite non-negative uncertainty", name));
        }
    };
    check(nu_I, "nu_I");
    check(nu_gamma, "nu_gamma");
    if (opts.n_y0 < 2 || opts.n_r < 2 || opts.n_beta < 2) throw InvalidArgument("scan grids need two points each");

    VisibilityEstimate est;
    est.nu_I = nu_I;
    est.nu_gamma = nu_gamma;
    est.r_T_lower_bound = r_T_lower_bound(nu_I.value);

    const double a = profile.half_width_nm;
    const double tol_I = opts.n_sigma * nu_I.sigma + 1e-12;
    const double tol_g = opts.n_sigma * nu_gamma.sigma + 1e-12;

    for (int iy = 0; iy < opts.n_y0; ++iy) {
        const double y0 = a * iy / (opts.n_y0 - 1.0);
        const auto w = modesolver::mode_weights(profile, y0);
        if (!(w.wy > 0.0)) continue;
        for (int ir = 0; ir < opts.n_r; ++ir) {
            const double r = static_cast<double>(ir) / (opts.n_r - 1.0);
            if (r < est.r_T_lower_bound) continue;
            const double vi = emission::visibility_intensity_mixed(r, w);
            if (std::abs(vi - nu_I.value) > tol_I) continue;

            FeasiblePoint pt;
            bool any = false;
            double best = std::numeric_limits<double>::infinity();
            for (int ib = 0; ib < opts.n_beta; ++ib) {
                const double beta = static_cast<double>(ib) / (opts.n_beta - 1.0);
                const double vg = emission::visibility_rate_offset(beta, w, r);
                const double miss = std::abs(vg - nu_gamma.value);
                if (miss > tol_g) continue;
                if (!any) pt.beta_y0_min = beta;
                pt.beta_y0_max = beta;
                any = true;
                if (miss < best) {
                    best = miss;
                    pt.beta_y0 = beta;
                    pt.nu_gamma = vg;
                }
            }
            if (!any) continue;
            pt.y0_nm = y0;
            pt.r_T = r;
            pt.nu_I = vi;
            est.feasible_set.push_back(pt);
        }
    }
    if (est.feasible_set.empty()) {
        throw EmptyFeasibleSet(fmt::format("no (y0, r_T, beta_y0) reproduces nu_I = {} +- {} and nu_gamma = {} +- {}",
                                           nu_I.value, tol_I, nu_gamma.value, tol_g));
    }

    const auto& fs = est.feasible_set;
    est.r_T_min = est.r_T_max = fs.front().r_T;
    est.y0_min_nm = est.y0_max_nm = fs.front().y0_nm;
    est.beta_min = fs.front().beta_y0_min;
    est.beta_max = fs.front().beta_y0_max;
    for (const auto& p : fs) {
        est.r_T_min = std::min(est.r_T_min, p.r_T);
        est.r_T_max = std::max(est.r_T_max, p.r_T);
        est.y0_min_nm = std::min(est.y0_min_nm, p.y0_nm);
        est.y0_max_nm = std::max(est.y0_max_nm, p.y0_nm);
        est.beta_min = std::min(est.beta_min, p.beta_y0_min);
        est.beta_max = std::max(est.beta_max, p.beta_y0_max);
    }
    return est;
}

}  // namespace phaselab::inference
